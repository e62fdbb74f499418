// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "support.hpp"
#include "veil/engine.hpp"
#include "veil/eval.hpp"
#include "veil/synth_approx.hpp"
#include "veil/synth_exact.hpp"

using namespace veil;

namespace {

struct Case {
  std::string name;
  Mdp mdp;
  ProblemInstance instance;
  SynthesisResult exact, approx;
};

Case load(const std::string& name, const std::string& model, const std::string& specs) {
  const auto sf = loadSpecFile(test::assetPath(specs));
  ProblemInstance inst;
  inst.specs = sf.specs;
  inst.groundTruth = sf.groundTruth;
  inst.gamma = 0.95;
  inst.beta = 0.8;
  Case c{name, loadModelFile(test::assetPath(model)), inst, {}, {}};
  SynthesisOptions o;
  o.epsilon = 1e-4;
  c.exact = synthesizeExact(c.mdp, inst, o);
  c.approx = synthesizeApprox(c.mdp, inst, o);
  return c;
}

struct Gate {
  int failures = 0;
  void report(int id, bool ok, const std::string& what, const std::string& detail) {
    std::printf("[%s] criterion %2d  %-44s %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

bool ok(const SynthesisResult& r) { return r.status == SynthesisStatus::Ok && r.policy.has_value(); }

double groundTruthActual(const SynthesisResult& r) { return r.specs.at(r.instance.groundTruth).actual; }

void exactInstance(Gate& g, int id, const Case& c, double entropy, std::size_t candidates, bool checkProb) {
  const auto& r = c.exact;
  bool pass = ok(r);
  std::string detail = fmt::format("status {}", synthesisStatusName(r.status));
  if (pass) {
    const double pr = groundTruthActual(r);
    pass = std::abs(r.entropyBits - entropy) <= 0.01 && r.candidateSet.size() == candidates &&
           (!checkProb || pr >= 0.95 - 1e-4);
    detail = fmt::format("entropy {:.4f} (want {:.3f}+-0.01)  |cand| {}  Pr(gt) {:.4f}  {:.2f} s", r.entropyBits, entropy,
                         r.candidateSet.size(), pr, r.stats.seconds);
  }
  g.report(id, pass, c.name + " exact", detail);
}

// Criterion 4 on one instance; reference actual values are compared informationally.
bool approxInstance(const Case& c, std::string& detail) {
  const auto& a = c.approx;
  if (!ok(a) || !ok(c.exact)) {
    detail += fmt::format(" {}: status {}", c.name, synthesisStatusName(a.status));
    return false;
  }
  const auto gt = c.instance.groundTruth;
  const double computed = a.specs[gt].computed;
  bool pass = computed >= 0.95 - 1e-4 && std::abs(a.entropyBits - c.exact.entropyBits) <= 0.02;
  for (const auto& s : a.specs) pass = pass && s.actual >= s.computed - 1e-6;
  detail += fmt::format(" {}: bound {:.4f} actual {:.4f} H {:.4f}/{:.4f};", c.name, computed, a.specs[gt].actual,
                        a.entropyBits, c.exact.entropyBits);
  return pass;
}

// Criterion 5: every parameterization up to horizon 12, every word.
void automataExhaustive(Gate& g) {
  const auto start = std::chrono::steady_clock::now();
  const int maxH = 12;
  const int len = maxH + 1;
  std::vector<std::vector<bool>> words(1u << len, std::vector<bool>(static_cast<std::size_t>(len)));
  for (unsigned w = 0; w < words.size(); ++w)
    for (int i = 0; i < len; ++i) words[w][static_cast<std::size_t>(i)] = (w >> i) & 1u;
  std::size_t formulas = 0, mismatches = 0;
  auto check = [&](const SpecFormula& f) {
    ++formulas;
    const Dfa d = addTerminal(buildDfa(f, f.horizon() + 1));
    for (const auto& w : words)
      if (d.accepts(w) != test::expandHolds(f, w, 0)) ++mismatches;
  };
  const Literal p{"p"};
  for (int a = 0; a <= maxH; ++a)
    for (int b = a; b <= maxH; ++b) {
      check(SpecFormula({{TemporalKind::Eventually, {a, b}}}, p));
      check(SpecFormula({{TemporalKind::Always, {a, b}}}, p));
      for (int c = 0; b + c <= maxH; ++c)
        for (int d = c; b + d <= maxH; ++d) {
          check(SpecFormula({{TemporalKind::Eventually, {a, b}}, {TemporalKind::Always, {c, d}}}, p));
          check(SpecFormula({{TemporalKind::Always, {a, b}}, {TemporalKind::Eventually, {c, d}}}, p));
        }
    }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  g.report(5, mismatches == 0 && secs < 60.0, "DFA acceptance vs semantics",
           fmt::format("{} formulas x {} words, {} mismatches, {:.1f} s", formulas, words.size(), mismatches, secs));
}

// Criterion 6: 200 random 3-state MDPs against trajectory enumeration.
void probabilityOracle(Gate& g) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Mdp m = test::randomMdp(rng, 3, 2, 2);
    const auto f = test::randomFormula(rng, 5, 2);
    const int H = f.horizon() + 1;
    const auto dec = test::randomStageDecisions(rng, m, H);
    const FiniteMemoryPolicy pol(m, FiniteMemoryPolicy::Memory::Stage, H, {}, dec);
    worst = std::max(worst, std::abs(exactSatisfaction(pol, f) - test::enumerateSatisfaction(m, dec, f)));
  }
  g.report(6, worst <= 1e-9, "exactSatisfaction vs enumeration", fmt::format("200 cases, max error {:.2e}", worst));
}

// Criterion 7 on one synthesized policy.
struct Consistency {
  std::size_t states = 0, outside = 0;
  double worstZ = 0.0, worstMu = 0.0;
  // Diagnostics: chain-propagated visits against the occupancy, and the
  // subset of states whose visit counts are well approximated as normal.
  double chainErr = 0.0;
  std::size_t populated = 0, populatedOutside = 0;
  double expectedOutside = 0.0;
};

Consistency occupancyConsistency(const SynthesisResult& r, bool checkMu) {
  Consistency c;
  const auto& prog = r.built->program;
  const auto& lay = r.built->layout;
  SimulationOptions o;
  o.trials = 100000;
  o.seed = 7;
  o.beta = r.instance.beta;
  const auto sim = simulate(*r.policy, r.instance.specs, o);
  const double n = static_cast<double>(o.trials);
  const auto occ = stateOccupancy(prog, r.witness);
  const auto chain = expectedVisits(*r.policy);
  for (std::size_t f = 0; f < occ.size(); ++f) {
    const auto node = r.policy->find(lay.flowKeys[f]);
    const double p = std::clamp(occ[f], 0.0, 1.0);
    const double emp = node ? static_cast<double>(sim.visits[*node]) / n : 0.0;
    const double se = std::sqrt(p * (1.0 - p) / n);
    ++c.states;
    const double diff = std::abs(emp - p);
    if (se > 0.0) c.worstZ = std::max(c.worstZ, diff / se);
    const bool outside = diff > 3.0 * se + 1e-9;
    if (outside) ++c.outside;
    if (se > 0.0) c.expectedOutside += 0.0027;
    if (n * p * (1.0 - p) >= 10.0) {
      ++c.populated;
      if (outside) ++c.populatedOutside;
    }
    c.chainErr = std::max(c.chainErr, std::abs((node ? chain[*node] : 0.0) - occ[f]));
  }
  if (checkMu)
    for (std::size_t i = 0; i < r.instance.size(); ++i)
      c.worstMu = std::max(c.worstMu, std::abs(r.specs[i].actual - r.witness[lay.mu[i]]));
  return c;
}

// Criterion 8 on one witness.
bool relaxationExact(const SynthesisResult& r, double& worstNu, double& worstBlock) {
  const auto& lay = r.built->layout;
  for (std::size_t i = 0; i < lay.mu.size(); ++i) {
    const double x = r.witness[lay.x[i]];
    const double xr = x >= 0.5 ? 1.0 : 0.0;
    worstNu = std::max(worstNu, std::abs(r.witness[lay.nu[i]] - r.witness[lay.mu[i]] * xr));
    worstNu = std::max(worstNu, std::abs(x - xr));
  }
  for (const auto& b : lay.blocks) {
    const auto c = checkFrechet(b, r.witness);
    worstBlock = std::max({worstBlock, c.maxMuDeviation, c.maxZetaDeviation});
  }
  return worstNu <= 1e-9 && worstBlock <= 1e-6;
}

// Criterion 9 on one result.
bool bisectionContract(const SynthesisResult& r, std::string& detail) {
  if (!ok(r)) return false;
  const auto& prog = r.built->program;
  const opt::SearchOptions so;
  const bool withinBound = r.stats.bisectionIterations <= r.stats.bisectionBound;
  const auto at = opt::checkWitness(prog, r.witness, r.thetaStar);
  const bool feasible = at.feasible(so.feasTol);
  const auto above = opt::checkFeasible(prog, r.thetaStar + 2 * r.epsilon, so);
  const bool infeasible = above.verdict == opt::Verdict::Infeasible && above.certified;
  detail += fmt::format(" {} {}/{} it, theta* {:.5f} {}, +2eps {};", r.method, r.stats.bisectionIterations,
                        r.stats.bisectionBound, r.thetaStar, feasible ? "feasible" : "INFEASIBLE",
                        infeasible ? "infeasible" : (above.verdict == opt::Verdict::Feasible ? "FEASIBLE" : "UNCERTIFIED"));
  return withinBound && feasible && infeasible;
}

// Criterion 10: convex combinations of witnesses sharing the binaries of r.
bool quasiconcavity(const SynthesisResult& r, std::mt19937_64& rng, std::string& detail) {
  if (!ok(r)) return false;
  const auto& prog = r.built->program;
  std::vector<std::pair<int, double>> fixed;
  for (std::size_t v = 0; v < prog.numVariables(); ++v)
    if (prog.variables()[v].kind == opt::VarKind::Binary) fixed.push_back({static_cast<int>(v), std::round(r.witness[v])});
  const auto fixedProg = opt::fixVariables(prog, fixed);
  if (!fixedProg) return false;
  opt::ConcaveMaximizer eng(*fixedProg);
  std::vector<std::vector<double>> pts{r.witness};
  for (double frac : {0.0, 0.25, 0.5, 0.75, 0.9, 1.0}) {
    for (double stop : {0.0, opt::kInf}) {
      auto res = eng.maximize(frac * r.thetaStar, stop);
      if (res.point.empty()) continue;
      for (auto [v, b] : fixed) res.point[static_cast<std::size_t>(v)] = b;
      pts.push_back(std::move(res.point));
    }
  }
  double theta = opt::kInf;
  std::vector<std::vector<double>> usable;
  for (auto& p : pts) {
    const auto c = opt::checkWitness(prog, p, 0.0);
    if (c.maxRowViolation > 1e-6 || c.maxFlowViolation > 1e-6 || c.maxBoundViolation > 1e-6) continue;
    theta = std::min(theta, c.f2 > 0 ? c.f1 / c.f2 : 0.0);
    usable.push_back(std::move(p));
  }
  if (usable.size() < 2) return false;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worstGap = opt::kInf, worstRow = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng() % std::min<std::size_t>(3, usable.size() - 1);
    std::vector<double> w(k);
    double s = 0.0;
    for (double& x : w) s += x = -std::log(1.0 - unit(rng));
    std::vector<double> comb(prog.numVariables(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& p = usable[rng() % usable.size()];
      for (std::size_t v = 0; v < comb.size(); ++v) comb[v] += w[j] / s * p[v];
    }
    const auto c = opt::checkWitness(prog, comb, theta);
    worstGap = std::min(worstGap, c.gap);
    worstRow = std::max({worstRow, c.maxRowViolation, c.maxFlowViolation, c.maxBoundViolation});
  }
  detail += fmt::format(" {}/{}: {} pts theta {:.3f} min gap {:.1e} rows {:.1e};", r.method,
                        r.instance.specs.size(), usable.size(), theta, worstGap, worstRow);
  return worstGap >= -1e-9 && worstRow <= 1e-6;
}

}  // namespace

int main() {
  Gate g;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Case> cases;
  cases.push_back(load("resupply-1", "grid6x6.json", "resupply1.spec"));
  cases.push_back(load("resupply-2", "grid6x6.json", "resupply2.spec"));
  cases.push_back(load("surveillance", "surveillance.json", "surveillance.spec"));

  exactInstance(g, 1, cases[0], 1.000, 2, true);
  exactInstance(g, 2, cases[1], 1.999, 4, true);
  exactInstance(g, 3, cases[2], 1.999, 4, false);

  {
    std::string detail;
    bool pass = true;
    for (const auto& c : cases) pass = approxInstance(c, detail) && pass;
    g.report(4, pass, "approximate method, three instances", detail);
    const double reference[] = {0.971, 0.971, 0.991};
    std::string info;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const double v = ok(cases[i].approx) ? groundTruthActual(cases[i].approx) : 0.0;
      info += fmt::format(" {} {:.3f} (reference {:.3f}, {});", cases[i].name, v, reference[i],
                          std::abs(v - reference[i]) <= 0.02 ? "within 0.02" : "differs");
    }
    std::printf("      info: approx actual Pr(gt):%s\n", info.c_str());
  }

  automataExhaustive(g);
  probabilityOracle(g);

  {
    bool pass = true;
    std::string detail, info;
    for (const auto& c : cases)
      for (const auto* r : {&c.exact, &c.approx}) {
        if (!ok(*r)) {
          pass = false;
          continue;
        }
        const auto k = occupancyConsistency(*r, r == &c.exact);
        pass = pass && k.outside == 0 && k.worstMu <= 1e-6;
        detail += fmt::format(" {}/{}: {} states {} out, max z {:.2f}, mu err {:.1e};", c.name, r->method, k.states,
                              k.outside, k.worstZ, k.worstMu);
        info += fmt::format(" {}/{}: chain visits err {:.1e}, {:.1f} exceedances expected by chance, {} of {} states with"
                            " n p (1-p) >= 10 outside;",
                            c.name, r->method, k.chainErr, k.expectedOutside, k.populatedOutside, k.populated);
      }
    g.report(7, pass, "occupancy and chain consistency", detail);
    std::printf("      info:%s\n", info.c_str());
  }

  {
    bool pass = true;
    double worstNu = 0.0, worstBlock = 0.0;
    for (const auto& c : cases)
      for (const auto* r : {&c.exact, &c.approx}) pass = ok(*r) && relaxationExact(*r, worstNu, worstBlock) && pass;
    g.report(8, pass, "McCormick and Frechet exactness",
             fmt::format("max |nu - mu x| {:.1e}, max block deviation {:.1e}", worstNu, worstBlock));
  }

  {
    bool pass = true;
    std::string detail;
    for (const auto& c : cases)
      for (const auto* r : {&c.exact, &c.approx}) pass = bisectionContract(*r, detail) && pass;
    g.report(9, pass, "bisection contract", detail);
  }

  {
    bool pass = true;
    std::string detail;
    std::mt19937_64 rng(10);
    for (const auto& c : cases)
      for (const auto* r : {&c.exact, &c.approx}) pass = quasiconcavity(*r, rng, detail) && pass;
    g.report(10, pass, "superlevel-set convexity", detail);
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of 10 criteria failed, %.1f s\n", g.failures, secs);
  return g.failures == 0 ? 0 : 1;
}
