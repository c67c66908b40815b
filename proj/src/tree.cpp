#include "survforest/tree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "survforest/error.hpp"

namespace survforest {

void StopPolicy::validate() const {
  if (min_node_samples < 1 || min_node_events < 1) throw InvalidArgument("stop policy minima must be >= 1");
}

StopPolicy recommended_stop_policy(std::size_t n, std::size_t dim) {
  const double d = static_cast<double>(dim);
  const auto k = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(n), d / (d + 2.0))));
  return {std::max<std::size_t>(2, k), std::max<std::size_t>(1, k / 2)};
}

ChildMinimum TreeConfig::child_minimum(std::size_t node_size) const {
  return {std::max(alpha.min_child_samples(node_size), stop.min_node_samples),
          std::max(alpha.min_child_events, stop.min_node_events)};
}

std::size_t Tree::route(std::span<const double> x) const {
  std::size_t idx = 0;
  while (!nodes[idx].terminal()) {
    const auto& s = nodes[idx].split();
    if (s.variable >= x.size()) throw DimensionMismatch("covariate vector too short for this tree");
    idx = x[s.variable] < s.cutpoint ? s.left : s.right;
  }
  return idx;
}

std::size_t Tree::terminal_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.terminal(); }));
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    level[i] = level[static_cast<std::size_t>(nodes[i].parent)] + 1;
    deepest = std::max(deepest, level[i]);
  }
  return deepest;
}

namespace {

HazardCurve terminal_chf(const Dataset& data, const std::vector<std::size_t>& rows, TerminalEstimator estimator,
                         const IpcwWeights* weights) {
  std::vector<Observation> obs;
  obs.reserve(rows.size());
  for (std::size_t r : rows) obs.push_back(data.observation(r));
  if (estimator == TerminalEstimator::NelsonAalen) return nelson_aalen(obs);
  if (weights == nullptr) throw InvalidArgument("weighted terminal estimation needs IPCW weights");
  // A weight that depends on time only cancels from every increment.
  if (weights->covariate_free()) return nelson_aalen(obs);
  return weighted_nelson_aalen(
      obs, [&](std::size_t i, double s) { return weights->survival(rows[i], weights->time_index(s)); },
      weights->epsilon());
}

class Grower {
 public:
  Grower(const Dataset& data, const TreeConfig& config, const IpcwWeights* weights, Rng& rng)
      : data_(data), config_(config), weights_(weights), rng_(rng) {}

  std::uint32_t grow(std::vector<std::size_t> rows, std::int64_t parent, const std::vector<bool>& used) {
    const auto idx = static_cast<std::uint32_t>(tree_.nodes.size());
    TreeNode node;
    node.parent = parent;
    node.sample_count = rows.size();
    for (std::size_t r : rows) node.event_count += data_.event(r) ? 1 : 0;
    tree_.nodes.push_back(std::move(node));

    if (rows.size() >= 2 * config_.stop.min_node_samples) {
      const SplitSettings settings{config_.rule, config_.mtry, config_.child_minimum(rows.size()), config_.tau,
                                   weights_};
      const auto candidate = best_split(NodeSamples{data_, rows}, settings, rng_, used);
      if (candidate) {
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        left.reserve(candidate->left_count);
        right.reserve(candidate->right_count);
        for (std::size_t r : rows) (data_.x(r, candidate->variable) < candidate->cutpoint ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        std::vector<bool> child_used = used;
        if (child_used.size() < data_.dim()) child_used.resize(data_.dim(), false);
        child_used[candidate->variable] = true;
        const auto l = grow(std::move(left), idx, child_used);
        const auto r = grow(std::move(right), idx, child_used);
        tree_.nodes[idx].body = SplitNode{candidate->variable, candidate->cutpoint, l, r};
        return idx;
      }
    }
    tree_.nodes[idx].body = LeafNode{terminal_chf(data_, rows, config_.terminal, weights_)};
    return idx;
  }

  Tree take() { return std::move(tree_); }

 private:
  const Dataset& data_;
  const TreeConfig& config_;
  const IpcwWeights* weights_;
  Rng& rng_;
  Tree tree_;
};

}  // namespace

Tree grow_tree(const NodeSamples& samples, const TreeConfig& config, const IpcwWeights* weights, Rng& rng) {
  if (samples.rows.empty()) throw InvalidArgument("empty node");
  config.stop.validate();
  config.alpha.validate();
  config.rule.validate();
  Grower grower(samples.data, config, weights, rng);
  grower.grow(std::vector<std::size_t>(samples.rows.begin(), samples.rows.end()), -1, std::vector<bool>(samples.data.dim(), false));
  return grower.take();
}

HazardCurve predict_tree_chf(const Tree& tree, std::span<const double> x, std::span<const double> grid) {
  const auto& chf = tree.chf(x);
  return HazardCurve(std::vector<double>(grid.begin(), grid.end()), chf.sample(grid));
}

namespace {

void check_structure(const Tree& tree, std::vector<AuditViolation>& out, std::size_t dim) {
  if (tree.nodes.empty()) {
    out.push_back({0, "tree has no nodes"});
    return;
  }
  if (tree.nodes[0].parent != -1) out.push_back({0, "root has a parent"});
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.terminal()) continue;
    const auto& s = n.split();
    if (dim > 0 && s.variable >= dim) out.push_back({i, "split variable out of range"});
    for (std::uint32_t c : {s.left, s.right}) {
      if (c <= i || c >= tree.nodes.size() || tree.nodes[c].parent != static_cast<std::int64_t>(i)) {
        out.push_back({i, "child link " + std::to_string(c) + " inconsistent"});
      }
    }
  }
}

void check_counts(const Tree& tree, const TreeConfig& config, const std::vector<std::size_t>& samples,
                  const std::vector<std::size_t>& events, std::vector<AuditViolation>& out) {
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.terminal()) continue;
    const auto& s = n.split();
    if (s.left >= tree.nodes.size() || s.right >= tree.nodes.size()) continue;
    if (samples[i] < 2 * config.stop.min_node_samples) {
      out.push_back({i, "split node has " + std::to_string(samples[i]) + " samples, below 2k"});
    }
    const auto minimum = config.child_minimum(samples[i]);
    for (std::uint32_t c : {s.left, s.right}) {
      if (samples[c] < minimum.samples) {
        out.push_back({c, "child has " + std::to_string(samples[c]) + " samples, needs " + std::to_string(minimum.samples)});
      }
      if (events[c] < minimum.events) {
        out.push_back({c, "child has " + std::to_string(events[c]) + " events, needs " + std::to_string(minimum.events)});
      }
    }
  }
}

}  // namespace

std::vector<AuditViolation> audit_tree(const Tree& tree, const NodeSamples& samples, const TreeConfig& config) {
  std::vector<AuditViolation> out;
  check_structure(tree, out, samples.data.dim());
  if (!out.empty()) return out;
  std::vector<std::size_t> counts(tree.nodes.size(), 0);
  std::vector<std::size_t> events(tree.nodes.size(), 0);
  for (std::size_t r : samples.rows) {
    const auto x = samples.data.row(r);
    const bool e = samples.data.event(r);
    std::size_t idx = 0;
    for (;;) {
      ++counts[idx];
      events[idx] += e ? 1 : 0;
      if (tree.nodes[idx].terminal()) break;
      const auto& s = tree.nodes[idx].split();
      idx = x[s.variable] < s.cutpoint ? s.left : s.right;
    }
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (tree.nodes[i].sample_count != counts[i] || tree.nodes[i].event_count != events[i]) {
      out.push_back({i, "stored counts differ from re-routed training rows"});
    }
  }
  check_counts(tree, config, counts, events, out);
  return out;
}

std::vector<AuditViolation> audit_tree(const Tree& tree, const TreeConfig& config, std::size_t dim) {
  std::vector<AuditViolation> out;
  check_structure(tree, out, dim);
  if (!out.empty()) return out;
  std::vector<std::size_t> counts(tree.nodes.size());
  std::vector<std::size_t> events(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    counts[i] = tree.nodes[i].sample_count;
    events[i] = tree.nodes[i].event_count;
    if (!tree.nodes[i].terminal()) {
      const auto& s = tree.nodes[i].split();
      if (tree.nodes[s.left].sample_count + tree.nodes[s.right].sample_count != counts[i] ||
          tree.nodes[s.left].event_count + tree.nodes[s.right].event_count != events[i]) {
        out.push_back({i, "child counts do not add up to the parent"});
      }
    }
  }
  check_counts(tree, config, counts, events, out);
  return out;
}

}  // namespace survforest
