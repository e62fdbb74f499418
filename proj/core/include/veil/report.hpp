#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "veil/eval.hpp"
#include "veil/synthesis.hpp"

namespace veil {

/// Structured synthesis report. Wall-clock time is left out so identical
/// runs produce identical documents.
nlohmann::json synthesisReportJson(const SynthesisResult& result);

/// Human-readable summary: variable counts, time, satisfaction, entropy and
/// candidate-set size.
std::string synthesisSummary(const SynthesisResult& result);

struct TableRow {
  std::string name;
  double exactProb = 0.0;
  double empiricalProb = 0.0;
  double halfWidth = 0.0;
  bool candidate = false;
  double likelihood = 0.0;
};

/// Rows from an exact report and an optional Monte Carlo report.
std::vector<TableRow> tableRows(const std::vector<NamedSpec>& specs, const EntropyReport& exact,
                                const SimulationReport* simulated);

/// Tab-separated table with a header line.
std::string tableTsv(const std::vector<TableRow>& rows);

nlohmann::json entropyReportJson(const EntropyReport& report, const std::vector<NamedSpec>& specs);
nlohmann::json simulationReportJson(const SimulationReport& sim, const EntropyReport& exact,
                                    const std::vector<NamedSpec>& specs);

}  // namespace veil
