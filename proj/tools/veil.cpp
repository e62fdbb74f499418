#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "backend.hpp"
#include "veil/automata.hpp"
#include "veil/eval.hpp"
#include "veil/model.hpp"
#include "veil/policy.hpp"
#include "veil/report.hpp"
#include "veil/speclang.hpp"
#include "veil/synth_approx.hpp"
#include "veil/synth_exact.hpp"

namespace {

using namespace veil;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitInconclusive = 4;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string modelPath, specsPath, policyPath;
  std::string method = "exact";
  double gamma = 0.95;
  double beta = 0.8;
  double epsilon = 1e-4;
  double theta = 0.0;
  std::uint64_t seed = 1;
  std::size_t trials = 0;
  unsigned threads = 0;
  std::string reportPath, policyOut, exportPath, tablePath;
  std::string backend = "builtin";
  bool verbose = false;
};

void writeText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path));
  out << text;
  if (!out) throw InputError(fmt::format("failed writing '{}'", path));
}

void writeJson(const std::string& path, const nlohmann::json& doc) { writeText(path, doc.dump(2) + "\n"); }

ProblemInstance loadInstance(const RunConfig& cfg) {
  auto file = loadSpecFile(cfg.specsPath);
  ProblemInstance inst;
  inst.specs = std::move(file.specs);
  inst.groundTruth = file.groundTruth;
  inst.gamma = cfg.gamma;
  inst.beta = cfg.beta;
  inst.validate();
  return inst;
}

void validateConfig(const RunConfig& cfg) {
  if (cfg.method != "exact" && cfg.method != "approx") throw InputError("method must be exact or approx");
  if (!(cfg.gamma >= cfg.beta)) throw InputError("gamma must be at least beta");
  if (!(cfg.epsilon > 0.0)) throw InputError("epsilon must be positive");
}

SynthesisOptions synthesisOptions(const RunConfig& cfg) {
  SynthesisOptions opts;
  opts.epsilon = cfg.epsilon;
  if (cfg.backend == "builtin") return opts;
  const std::string prefix = "external:";
  if (cfg.backend.rfind(prefix, 0) != 0 || cfg.backend.size() == prefix.size())
    throw InputError(fmt::format("unknown backend '{}'", cfg.backend));
  opts.search.oracle = cli::externalOracle(cfg.backend.substr(prefix.size()), opts.search.feasTol);
  return opts;
}

SimulationOptions simulationOptions(const RunConfig& cfg) {
  SimulationOptions s;
  s.trials = cfg.trials;
  s.seed = cfg.seed;
  s.threads = cfg.threads;
  s.beta = cfg.beta;
  return s;
}

void printTable(const std::vector<TableRow>& rows, bool empirical) {
  fmt::print("\n  {:<14} {:>9}", "spec", "exact");
  if (empirical) fmt::print(" {:>9} {:>8}", "empirical", "+/-");
  fmt::print(" {:>4} {:>10}\n", "cand", "likelihood");
  for (const auto& r : rows) {
    fmt::print("  {:<14} {:>9.4f}", r.name, r.exactProb);
    if (empirical) fmt::print(" {:>9.4f} {:>8.4f}", r.empiricalProb, r.halfWidth);
    fmt::print(" {:>4} {:>10.4f}\n", r.candidate ? "yes" : "no", r.likelihood);
  }
}

int runSynth(const RunConfig& cfg) {
  validateConfig(cfg);
  const Mdp mdp = loadModelFile(cfg.modelPath);
  const ProblemInstance inst = loadInstance(cfg);
  const auto opts = synthesisOptions(cfg);
  const auto res = cfg.method == "exact" ? synthesizeExact(mdp, inst, opts) : synthesizeApprox(mdp, inst, opts);
  if (cfg.verbose)
    for (const auto& t : res.stats.trace)
      fmt::print(stderr, "theta {:.6f}  {}{}\n", t.theta, t.feasible ? "feasible" : "infeasible",
                 t.certified ? "" : " (uncertified)");
  fmt::print("{}", synthesisSummary(res));
  auto report = synthesisReportJson(res);
  if (res.status == SynthesisStatus::Ok) {
    const auto exact = adversaryReport(exactSatisfaction(*res.policy, inst.specs), inst.beta);
    std::optional<SimulationReport> sim;
    if (cfg.trials > 0) {
      sim = simulate(*res.policy, inst.specs, simulationOptions(cfg));
      report["simulation"] = simulationReportJson(*sim, exact, inst.specs);
    }
    const auto rows = tableRows(inst.specs, exact, sim ? &*sim : nullptr);
    if (sim) printTable(rows, true);
    if (!cfg.tablePath.empty()) writeText(cfg.tablePath, tableTsv(rows));
    if (!cfg.policyOut.empty()) writeJson(cfg.policyOut, toJson(*res.policy));
  }
  if (!cfg.reportPath.empty()) writeJson(cfg.reportPath, report);
  if (!cfg.exportPath.empty()) writeJson(cfg.exportPath, opt::exportProgram(res.built->program, res.thetaStar));
  switch (res.status) {
    case SynthesisStatus::Ok: return kExitOk;
    case SynthesisStatus::SpecInfeasible: return kExitInfeasible;
    case SynthesisStatus::Inconclusive: return kExitInconclusive;
  }
  return kExitInconclusive;
}

int runEvaluate(const RunConfig& cfg, bool monteCarlo) {
  const Mdp mdp = loadModelFile(cfg.modelPath);
  const auto specs = loadSpecFile(cfg.specsPath).specs;
  const auto policy = loadPolicyFile(mdp, cfg.policyPath);
  const auto exact = adversaryReport(exactSatisfaction(policy, specs), cfg.beta);
  std::optional<SimulationReport> sim;
  nlohmann::json report;
  if (monteCarlo) {
    if (cfg.trials < 1) throw InputError("trials must be at least 1");
    sim = simulate(policy, specs, simulationOptions(cfg));
    report = simulationReportJson(*sim, exact, specs);
  } else {
    report = entropyReportJson(exact, specs);
    report["format"] = "veil-evaluation/1";
  }
  const auto rows = tableRows(specs, exact, sim ? &*sim : nullptr);
  printTable(rows, monteCarlo);
  const auto& rep = sim ? sim->report : exact;
  fmt::print("\nentropy {:.4f} bits over {} candidate(s){}\n", rep.entropyBits, rep.candidateCount(),
             rep.emptyCandidateSet ? " (warning: empty candidate set)" : "");
  if (!cfg.reportPath.empty()) writeJson(cfg.reportPath, report);
  if (!cfg.tablePath.empty()) writeText(cfg.tablePath, tableTsv(rows));
  return kExitOk;
}

int runCheck(const RunConfig& cfg) {
  const Mdp mdp = loadModelFile(cfg.modelPath);
  fmt::print("model       {} states, {} actions, {} propositions\n", mdp.numStates(), mdp.numActions(),
             mdp.numProps());
  if (cfg.specsPath.empty()) return kExitOk;
  RunConfig c = cfg;
  const auto inst = loadInstance(c);
  const int h = arenaHorizon(inst);
  fmt::print("specs       {} (ground truth '{}'), arena horizon {}\n", inst.size(), inst.specs[inst.groundTruth].name,
             h);
  const auto dfas = instanceAutomata(inst, h);
  for (std::size_t i = 0; i < inst.size(); ++i)
    fmt::print("  {}{:<14} {:<22} form {:<4} dfa {} states\n", i == inst.groundTruth ? '*' : ' ', inst.specs[i].name,
               inst.specs[i].formula.toString(), formName(inst.specs[i].formula.form()), dfas[i].numStates());
  const auto arena = product(expand(mdp, h), dfas);
  fmt::print("product     {} states\n", arena.numStates());
  if (!cfg.policyPath.empty()) {
    const auto policy = loadPolicyFile(mdp, cfg.policyPath);
    fmt::print("policy      {} memory nodes, horizon {}\n", policy.numNodes(), policy.horizon());
  }
  return kExitOk;
}

int runExport(const RunConfig& cfg) {
  validateConfig(cfg);
  const Mdp mdp = loadModelFile(cfg.modelPath);
  const auto inst = loadInstance(cfg);
  const int h = arenaHorizon(inst);
  const BuiltProgram built = cfg.method == "exact" ? assembleExactProgram(product(expand(mdp, h), instanceAutomata(inst, h)), inst)
                                                   : assembleApproxProgram(mdp, inst);
  writeJson(cfg.exportPath, opt::exportProgram(built.program, cfg.theta));
  fmt::print("wrote {} variables ({} binary), {} constraints to {}\n", built.program.variables().size(),
             built.program.numBinary(), built.program.constraints().size(), cfg.exportPath);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy synthesis that hides the true specification from an observer"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto addInputs = [&](CLI::App* sub, bool specsRequired) {
    sub->add_option("--model", cfg.modelPath, "Model file (JSON)")->required()->check(CLI::ExistingFile);
    auto* s = sub->add_option("--specs", cfg.specsPath, "Specification file")->check(CLI::ExistingFile);
    if (specsRequired) s->required();
  };
  auto addProblem = [&](CLI::App* sub) {
    sub->add_option("--method", cfg.method, "exact or approx")->check(CLI::IsMember({"exact", "approx"}));
    sub->add_option("--gamma", cfg.gamma, "Ground-truth satisfaction threshold");
    sub->add_option("--beta", cfg.beta, "Candidate threshold");
  };
  auto addSimulation = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "Root seed");
    sub->add_option("--threads", cfg.threads, "Worker threads (default VEIL_THREADS or all cores)");
  };

  auto* synth = app.add_subcommand("synth", "Synthesize a policy");
  addInputs(synth, true);
  addProblem(synth);
  addSimulation(synth);
  synth->add_option("--epsilon", cfg.epsilon, "Bisection tolerance");
  synth->add_option("--trials", cfg.trials, "Monte Carlo trials after synthesis (0 skips)");
  synth->add_option("--report", cfg.reportPath, "Report output (JSON)");
  synth->add_option("--policy", cfg.policyOut, "Policy output (JSON)");
  synth->add_option("--table", cfg.tablePath, "Per-spec table output (TSV)");
  synth->add_option("--export", cfg.exportPath, "Program export at theta* (JSON)");
  synth->add_option("--backend", cfg.backend, "builtin or external:<path>");
  synth->add_flag("-v,--verbose", cfg.verbose, "Print the bisection trace");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
  addInputs(sim, true);
  addSimulation(sim);
  cfg.trials = 100000;
  sim->add_option("--policy", cfg.policyPath, "Policy file")->required()->check(CLI::ExistingFile);
  sim->add_option("--trials", cfg.trials, "Number of trials");
  sim->add_option("--beta", cfg.beta, "Candidate threshold");
  sim->add_option("--report", cfg.reportPath, "Report output (JSON)");
  sim->add_option("--table", cfg.tablePath, "Per-spec table output (TSV)");

  auto* evalExact = app.add_subcommand("eval-exact", "Exact satisfaction probabilities of a policy");
  addInputs(evalExact, true);
  evalExact->add_option("--policy", cfg.policyPath, "Policy file")->required()->check(CLI::ExistingFile);
  evalExact->add_option("--beta", cfg.beta, "Candidate threshold");
  evalExact->add_option("--report", cfg.reportPath, "Report output (JSON)");
  evalExact->add_option("--table", cfg.tablePath, "Per-spec table output (TSV)");

  auto* check = app.add_subcommand("check", "Validate inputs and print arena sizes");
  addInputs(check, false);
  check->add_option("--policy", cfg.policyPath, "Policy file")->check(CLI::ExistingFile);

  auto* exportCmd = app.add_subcommand("export-program", "Write the synthesis program for an external solver");
  addInputs(exportCmd, true);
  addProblem(exportCmd);
  exportCmd->add_option("--theta", cfg.theta, "Objective level");
  exportCmd->add_option("--export", cfg.exportPath, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  if (app.got_subcommand(synth) && synth->count("--trials") == 0) cfg.trials = 0;

  try {
    if (app.got_subcommand(synth)) return runSynth(cfg);
    if (app.got_subcommand(sim)) return runEvaluate(cfg, true);
    if (app.got_subcommand(evalExact)) return runEvaluate(cfg, false);
    if (app.got_subcommand(check)) return runCheck(cfg);
    if (app.got_subcommand(exportCmd)) return runExport(cfg);
  } catch (const InputError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  } catch (const ModelError& e) {
    fmt::print(stderr, "model error: {}\n", e.what());
    return kExitInput;
  } catch (const SpecError& e) {
    fmt::print(stderr, "specification error: {}\n", e.what());
    return kExitInput;
  } catch (const AutomatonError& e) {
    fmt::print(stderr, "specification error: {}\n", e.what());
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    fmt::print(stderr, "malformed JSON: {}\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInconclusive;
  }
  return kExitInput;
}
