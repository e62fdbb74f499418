#pragma once

#include <string>

#include "veil/search.hpp"

namespace veil::cli {

/// Feasibility oracle that runs `<executable> <program.json> <witness.json>`
/// for each theta. The program is the exported document at that theta. The
/// executable writes {"status": "feasible", "x": [...]} (or "values") or
/// {"status": "infeasible"}. Returned witnesses are verified before use.
opt::FeasibilityOracle externalOracle(const std::string& executable, double feasTol);

}  // namespace veil::cli
