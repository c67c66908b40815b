#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "survforest/censoring.hpp"
#include "survforest/splitting.hpp"
#include "survforest/step_function.hpp"

namespace survforest {

/// When a node may split. A node splits only with at least
/// 2 * min_node_samples samples, and each child must keep at least
/// min_node_samples samples and min_node_events observed events.
struct StopPolicy {
  std::size_t min_node_samples = 20;
  std::size_t min_node_events = 10;

  void validate() const;
  friend bool operator==(const StopPolicy&, const StopPolicy&) = default;
};

/// Size rule k = round(n^(d / (d + 2))) for the minimum node size, with half
/// of it as the minimum event count.
StopPolicy recommended_stop_policy(std::size_t n, std::size_t dim);

enum class TerminalEstimator { NelsonAalen, WeightedNelsonAalen };

/// Per-tree growing parameters (tau already resolved).
struct TreeConfig {
  SplitRule rule;
  std::size_t mtry = 1;
  AlphaConstraint alpha;
  StopPolicy stop;
  TerminalEstimator terminal = TerminalEstimator::NelsonAalen;
  double tau = std::numeric_limits<double>::infinity();

  /// Child floor combining the alpha constraint with the stop policy.
  ChildMinimum child_minimum(std::size_t node_size) const;
};

struct SplitNode {
  std::size_t variable;
  double cutpoint;
  std::uint32_t left;
  std::uint32_t right;
};

struct LeafNode {
  HazardCurve chf;
};

struct TreeNode {
  std::int64_t parent = -1;
  std::size_t sample_count = 0;
  std::size_t event_count = 0;
  std::variant<SplitNode, LeafNode> body;

  bool terminal() const { return std::holds_alternative<LeafNode>(body); }
  const SplitNode& split() const { return std::get<SplitNode>(body); }
  const LeafNode& leaf() const { return std::get<LeafNode>(body); }
};

/// Fitted binary survival tree; node 0 is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  /// Index of the terminal node that x falls into.
  std::size_t route(std::span<const double> x) const;
  const HazardCurve& chf(std::span<const double> x) const { return nodes[route(x)].leaf().chf; }
  std::size_t terminal_count() const;
  std::size_t depth() const;
};

/// Grows one tree on the given rows (bootstrap duplicates allowed). `weights`
/// is required when the rule or the terminal estimator is bias corrected.
Tree grow_tree(const NodeSamples& samples, const TreeConfig& config, const IpcwWeights* weights, Rng& rng);

/// Terminal CHF of x sampled on an ascending grid.
HazardCurve predict_tree_chf(const Tree& tree, std::span<const double> x, std::span<const double> grid);

struct AuditViolation {
  std::size_t node;
  std::string message;
};

/// Re-routes the training rows through the tree and checks every internal
/// split against the alpha constraint and the stop policy, and the stored
/// node counts against the recomputed ones.
std::vector<AuditViolation> audit_tree(const Tree& tree, const NodeSamples& samples, const TreeConfig& config);

/// Data-free audit using the counts stored in the nodes (used on load).
std::vector<AuditViolation> audit_tree(const Tree& tree, const TreeConfig& config, std::size_t dim);

}  // namespace survforest
