#include "survforest/names.hpp"

#include "survforest/error.hpp"

namespace survforest {

std::string to_string(SplitKind kind) {
  switch (kind) {
    case SplitKind::LogRank: return "logrank";
    case SplitKind::Random: return "random";
    case SplitKind::MarginalChf: return "delta1";
    case SplitKind::BiasCorrectedChf: return "delta2";
  }
  return "unknown";
}

SplitKind parse_split_kind(const std::string& name) {
  if (name == "logrank") return SplitKind::LogRank;
  if (name == "random") return SplitKind::Random;
  if (name == "delta1") return SplitKind::MarginalChf;
  if (name == "delta2") return SplitKind::BiasCorrectedChf;
  throw ConfigError("unknown split rule '" + name + "' (expected logrank, random, delta1 or delta2)");
}

std::string to_string(CensoringKind kind) {
  switch (kind) {
    case CensoringKind::None: return "none";
    case CensoringKind::GlobalKM: return "km";
    case CensoringKind::CensorForest: return "forest";
    case CensoringKind::Known: return "known";
  }
  return "unknown";
}

CensoringKind parse_censoring_kind(const std::string& name) {
  if (name == "none") return CensoringKind::None;
  if (name == "km") return CensoringKind::GlobalKM;
  if (name == "forest") return CensoringKind::CensorForest;
  if (name == "known") return CensoringKind::Known;
  throw ConfigError("unknown censoring model '" + name + "' (expected none, km or forest)");
}

std::string to_string(TerminalEstimator terminal) {
  return terminal == TerminalEstimator::NelsonAalen ? "na" : "ipcw";
}

TerminalEstimator parse_terminal(const std::string& name) {
  if (name == "na") return TerminalEstimator::NelsonAalen;
  if (name == "ipcw") return TerminalEstimator::WeightedNelsonAalen;
  throw ConfigError("unknown terminal estimator '" + name + "' (expected na or ipcw)");
}

std::string to_string(TauPolicy::Mode mode) {
  switch (mode) {
    case TauPolicy::Mode::Quantile: return "quantile";
    case TauPolicy::Mode::Fixed: return "fixed";
    case TauPolicy::Mode::MinAtRisk: return "min_at_risk";
  }
  return "unknown";
}

TauPolicy::Mode parse_tau_mode(const std::string& name) {
  if (name == "quantile") return TauPolicy::Mode::Quantile;
  if (name == "fixed") return TauPolicy::Mode::Fixed;
  if (name == "min_at_risk") return TauPolicy::Mode::MinAtRisk;
  throw ConfigError("unknown tau mode '" + name + "' (expected quantile, fixed or min_at_risk)");
}

}  // namespace survforest
