#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "veil/synthesis.hpp"

namespace veil {

using opt::RowKind;
using opt::VarKind;

namespace {

constexpr double kCandidacyMargin = 1e-5;

}  // namespace

const char* synthesisStatusName(SynthesisStatus status) {
  switch (status) {
    case SynthesisStatus::Ok: return "ok";
    case SynthesisStatus::SpecInfeasible: return "specification-infeasible";
    case SynthesisStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

double entropyCeiling(std::size_t numSpecs) { return numSpecs > 1 ? std::log2(static_cast<double>(numSpecs)) : 0.0; }

void addProductEnvelope(opt::SynthesisProgram& program, int w, int z, int v, double lo, double hi,
                        const std::string& name) {
  program.addConstraint({{w, 1.0}, {z, -lo}}, 0.0, opt::kInf, RowKind::Linking, name + ".lo");
  program.addConstraint({{w, 1.0}, {z, -hi}}, -opt::kInf, 0.0, RowKind::Linking, name + ".hi");
  program.addConstraint({{w, 1.0}, {v, -1.0}, {z, -hi}}, -hi, opt::kInf, RowKind::Linking, name + ".on");
  program.addConstraint({{w, 1.0}, {v, -1.0}, {z, -lo}}, -opt::kInf, -lo, RowKind::Linking, name + ".off");
}

void addCandidateRows(BuiltProgram& built, const ProblemInstance& instance, const std::vector<double>& muLower,
                      const std::vector<double>& muUpper) {
  auto& prog = built.program;
  auto& lay = built.layout;
  const std::size_t n = instance.size();
  const double beta = instance.beta;
  lay.x.clear();
  lay.nu.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const bool gt = i == instance.groundTruth;
    const int x = prog.addVariable(fmt::format("x[{}]", i), VarKind::Binary, gt ? 1.0 : 0.0, 1.0);
    const int nu = prog.addVariable(fmt::format("nu[{}]", i), VarKind::Continuous, std::min(muLower[i], 0.0),
                                    std::max(muUpper[i], 0.0));
    lay.x.push_back(x);
    lay.nu.push_back(nu);
    const int mu = lay.mu[i];
    if (gt) prog.addConstraint({{mu, 1.0}}, instance.gamma, opt::kInf, RowKind::Target, fmt::format("gamma[{}]", i));
    prog.addConstraint({{mu, 1.0}, {x, -beta}}, 0.0, opt::kInf, RowKind::Target, fmt::format("beta[{}]", i));
    if (!gt)
      prog.addConstraint({{mu, 1.0}, {x, -(1.0 - beta + kCandidacyMargin)}}, -opt::kInf, beta - kCandidacyMargin,
                         RowKind::Target, fmt::format("cand[{}]", i));
    addProductEnvelope(prog, nu, x, mu, std::min(muLower[i], 0.0), std::max(muUpper[i], 0.0),
                       fmt::format("nu[{}]", i));
    if (!gt) {
      opt::BinaryBlock b{opt::BlockKind::Candidate, fmt::format("x[{}]", i), {x}, {}, beta, -1};
      b.selectors.push_back({{{mu, 1.0}}, 0.0});
      prog.addBlock(std::move(b));
    }
  }
  prog.setEntropyTerms(lay.nu);
}

std::map<FiniteMemoryPolicy::Key, std::vector<double>> decisionsFromWitness(const BuiltProgram& built,
                                                                            const std::vector<double>& witness) {
  std::map<FiniteMemoryPolicy::Key, std::vector<double>> out;
  const auto& states = built.program.flow().states;
  for (std::size_t f = 0; f < states.size(); ++f) {
    const auto& acts = states[f].actions;
    std::vector<double> d(acts.size(), 0.0);
    double s = 0.0;
    for (std::size_t a = 0; a < acts.size(); ++a) {
      const double v = witness[acts[a].var];
      if (v < -1e-6) throw opt::ProgramError(fmt::format("occupancy {} is negative ({})", acts[a].var, v));
      d[a] = std::max(v, 0.0);
      s += d[a];
    }
    if (s > 1e-12)
      for (double& v : d) v /= s;
    else
      std::fill(d.begin(), d.end(), 1.0 / static_cast<double>(acts.size()));
    out.emplace(built.layout.flowKeys[f], std::move(d));
  }
  return out;
}

std::vector<double> stateOccupancy(const opt::SynthesisProgram& program, const std::vector<double>& witness) {
  const auto& states = program.flow().states;
  std::vector<double> occ(states.size(), 0.0);
  for (std::size_t f = 0; f < states.size(); ++f)
    for (const auto& a : states[f].actions) occ[f] += witness[a.var];
  return occ;
}

SynthesisResult solveProgram(std::string method, const Mdp& mdp, const ProblemInstance& instance,
                             std::shared_ptr<const BuiltProgram> built, const SynthesisOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  SynthesisResult res;
  res.method = std::move(method);
  res.instance = instance;
  res.epsilon = options.epsilon;
  res.built = built;
  const auto& prog = built->program;
  auto& st = res.stats;
  st.continuousVars = prog.numContinuous();
  st.binaryVars = prog.numBinary();
  st.freeBinaries = prog.numFreeBinary();
  st.constraints = prog.constraints().size();
  st.arenaStates = built->layout.arenaStates;
  st.thetaLo = 0.0;
  st.thetaHi = entropyCeiling(instance.size());
  st.bisectionBound =
      st.thetaHi > options.epsilon ? static_cast<int>(std::ceil(std::log2((st.thetaHi - st.thetaLo) / options.epsilon))) : 0;

  auto bis = opt::bisect(prog, st.thetaLo, st.thetaHi, options.epsilon, options.search);
  st.bisectionIterations = bis.iterations;
  st.conclusive = bis.conclusive;
  st.trace = bis.trace;
  st.engine = bis.engine;
  auto finish = [&] {
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
  };
  if (!bis.specFeasible) {
    res.status = bis.conclusive ? SynthesisStatus::SpecInfeasible : SynthesisStatus::Inconclusive;
    res.message = bis.conclusive ? "no policy meets the ground-truth threshold"
                                 : "no feasible policy was found, but infeasibility is not certified";
    return finish();
  }
  res.status = SynthesisStatus::Ok;
  res.thetaStar = bis.thetaStar;
  res.witness = bis.witness;
  const auto& lay = built->layout;
  const auto nu = opt::gather(res.witness, lay.nu);
  res.entropyBits = opt::entropyBits(nu);
  res.policy.emplace(mdp, lay.memory, lay.horizon, lay.dfas, decisionsFromWitness(*built, res.witness));
  const double nuSum = opt::entropyDenominator(nu);
  std::vector<double> actual;
  for (std::size_t i = 0; i < instance.size(); ++i) {
    SpecOutcome o;
    o.name = instance.specs[i].name;
    o.formula = instance.specs[i].formula.toString();
    o.form = instance.specs[i].formula.form();
    o.computed = res.witness[lay.mu[i]];
    o.nu = res.witness[lay.nu[i]];
    o.x = res.witness[lay.x[i]] >= 0.5 ? 1 : 0;
    o.actual = exactSatisfaction(*res.policy, instance.specs[i].formula);
    o.likelihood = nuSum > 0.0 ? std::max(o.nu, 0.0) / nuSum : 0.0;
    if (o.x) res.candidateSet.push_back(i);
    actual.push_back(o.actual);
    res.specs.push_back(std::move(o));
  }
  res.actualEntropyBits = adversaryReport(actual, instance.beta).entropyBits;
  return finish();
}

}  // namespace veil
