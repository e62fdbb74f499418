#include "veil/report.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace veil {

using nlohmann::json;

json synthesisReportJson(const SynthesisResult& r) {
  json doc;
  doc["format"] = "veil-report/1";
  doc["method"] = r.method;
  doc["status"] = synthesisStatusName(r.status);
  if (!r.message.empty()) doc["message"] = r.message;
  doc["gamma"] = r.instance.gamma;
  doc["beta"] = r.instance.beta;
  doc["epsilon"] = r.epsilon;
  doc["groundTruth"] = r.instance.specs.at(r.instance.groundTruth).name;
  if (r.status == SynthesisStatus::Ok) {
    doc["thetaStar"] = r.thetaStar;
    doc["entropyBits"] = r.entropyBits;
    doc["actualEntropyBits"] = r.actualEntropyBits;
    json specs = json::array();
    for (const auto& s : r.specs)
      specs.push_back({{"name", s.name},
                       {"formula", s.formula},
                       {"form", formName(s.form)},
                       {"computed", s.computed},
                       {"actual", s.actual},
                       {"nu", s.nu},
                       {"x", s.x},
                       {"likelihood", s.likelihood}});
    doc["specs"] = std::move(specs);
    json cand = json::array();
    for (auto i : r.candidateSet) cand.push_back(r.instance.specs[i].name);
    doc["candidateSet"] = std::move(cand);
  }
  const auto& st = r.stats;
  json trace = json::array();
  for (const auto& t : st.trace)
    trace.push_back({{"theta", t.theta}, {"feasible", t.feasible}, {"certified", t.certified}, {"gap", t.gap}});
  doc["diagnostics"] = {{"continuousVars", st.continuousVars},
                        {"binaryVars", st.binaryVars},
                        {"freeBinaries", st.freeBinaries},
                        {"constraints", st.constraints},
                        {"arenaStates", st.arenaStates},
                        {"bisectionIterations", st.bisectionIterations},
                        {"bisectionBound", st.bisectionBound},
                        {"conclusive", st.conclusive},
                        {"thetaRange", {st.thetaLo, st.thetaHi}},
                        {"trace", std::move(trace)},
                        {"engine",
                         {{"masterSolves", st.engine.masterSolves},
                          {"simplexIterations", st.engine.simplexIterations},
                          {"columns", st.engine.columns},
                          {"cuts", st.engine.cuts},
                          {"rebuilds", st.engine.rebuilds}}}};
  return doc;
}

std::string synthesisSummary(const SynthesisResult& r) {
  const auto& st = r.stats;
  std::string out = fmt::format("method            {}\nstatus            {}\n", r.method, synthesisStatusName(r.status));
  if (!r.message.empty()) out += fmt::format("message           {}\n", r.message);
  out += fmt::format("arena states      {}\ncontinuous vars   {}\nbinary vars       {} ({} free)\nconstraints       {}\n",
                     st.arenaStates, st.continuousVars, st.binaryVars, st.freeBinaries, st.constraints);
  out += fmt::format("time              {:.2f} s\nbisection         {} of at most {} steps{}\n", st.seconds,
                     st.bisectionIterations, st.bisectionBound, st.conclusive ? "" : " (some verdicts uncertified)");
  if (r.status != SynthesisStatus::Ok) return out;
  out += fmt::format("entropy           {:.3f} bits (theta* {:.5f}, chain {:.3f})\n", r.entropyBits, r.thetaStar,
                     r.actualEntropyBits);
  out += fmt::format("candidate set     {}\n", r.candidateSet.size());
  out += fmt::format("\n  {:<12} {:>9} {:>9} {:>9} {:>2} {:>10}\n", "spec", "computed", "actual", "nu", "x",
                     "likelihood");
  for (std::size_t i = 0; i < r.specs.size(); ++i) {
    const auto& s = r.specs[i];
    out += fmt::format("{} {:<12} {:>9.3f} {:>9.3f} {:>9.3f} {:>2} {:>10.3f}\n",
                       i == r.instance.groundTruth ? '*' : ' ', s.name, s.computed, s.actual, s.nu, s.x,
                       s.likelihood);
  }
  return out;
}

std::vector<TableRow> tableRows(const std::vector<NamedSpec>& specs, const EntropyReport& exact,
                                const SimulationReport* simulated) {
  std::vector<TableRow> rows;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    TableRow row;
    row.name = specs[i].name;
    row.exactProb = exact.satProbs.at(i);
    row.candidate = exact.candidate.at(i);
    row.likelihood = exact.likelihoods.at(i);
    if (simulated) {
      row.empiricalProb = simulated->report.satProbs.at(i);
      row.halfWidth = simulated->report.halfWidths.at(i);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string tableTsv(const std::vector<TableRow>& rows) {
  std::string out = "name\texactProb\tempiricalProb\thalfWidth\tcandidateFlag\tlikelihood\n";
  for (const auto& r : rows)
    out += fmt::format("{}\t{:.9f}\t{:.9f}\t{:.9f}\t{}\t{:.9f}\n", r.name, r.exactProb, r.empiricalProb, r.halfWidth,
                       r.candidate ? 1 : 0, r.likelihood);
  return out;
}

json entropyReportJson(const EntropyReport& rep, const std::vector<NamedSpec>& specs) {
  json doc;
  doc["source"] = rep.source;
  if (rep.trials) doc["trials"] = rep.trials;
  doc["entropyBits"] = rep.entropyBits;
  doc["emptyCandidateSet"] = rep.emptyCandidateSet;
  json arr = json::array();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    json s = {{"name", specs[i].name},
              {"satProb", rep.satProbs.at(i)},
              {"candidate", static_cast<bool>(rep.candidate.at(i))},
              {"likelihood", rep.likelihoods.at(i)}};
    if (!rep.halfWidths.empty()) s["halfWidth"] = rep.halfWidths.at(i);
    arr.push_back(std::move(s));
  }
  doc["specs"] = std::move(arr);
  return doc;
}

json simulationReportJson(const SimulationReport& sim, const EntropyReport& exact,
                          const std::vector<NamedSpec>& specs) {
  json doc;
  doc["format"] = "veil-simulation/1";
  doc["seed"] = sim.seed;
  doc["trials"] = sim.trials;
  doc["steps"] = sim.steps;
  doc["exact"] = entropyReportJson(exact, specs);
  doc["empirical"] = entropyReportJson(sim.report, specs);
  doc["successes"] = sim.successes;
  return doc;
}

}  // namespace veil
