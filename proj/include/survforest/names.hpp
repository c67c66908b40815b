#pragma once

#include <string>

#include "survforest/censoring.hpp"
#include "survforest/splitting.hpp"
#include "survforest/tree.hpp"

namespace survforest {

/// Command-line and file-format names: logrank, random, delta1, delta2.
std::string to_string(SplitKind kind);
SplitKind parse_split_kind(const std::string& name);

/// none, km, forest, known.
std::string to_string(CensoringKind kind);
CensoringKind parse_censoring_kind(const std::string& name);

/// na, ipcw.
std::string to_string(TerminalEstimator terminal);
TerminalEstimator parse_terminal(const std::string& name);

/// quantile, fixed, min_at_risk.
std::string to_string(TauPolicy::Mode mode);
TauPolicy::Mode parse_tau_mode(const std::string& name);

}  // namespace survforest
