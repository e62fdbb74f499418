#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"
#include "veil/eval.hpp"
#include "veil/synth_approx.hpp"
#include "veil/synth_exact.hpp"

using namespace veil;

namespace {

// Conjunction bound written as one minus the summed failure probabilities.
double conj(const std::vector<double>& p) {
  double fail = 0.0;
  for (double v : p) fail += 1.0 - v;
  return std::max(0.0, 1.0 - fail);
}

double disj(const std::vector<double>& p) { return p.empty() ? 0.0 : *std::max_element(p.begin(), p.end()); }

std::vector<double> slice(const std::vector<double>& eta, int from, int to) {
  return {eta.begin() + from, eta.begin() + to + 1};
}

double boundOracle(const SpecFormula& f, const std::vector<double>& eta) {
  const auto& ops = f.ops();
  switch (f.form()) {
    case Form::Atom: return eta[0];
    case Form::F: return disj(slice(eta, ops[0].window.lo, ops[0].window.hi));
    case Form::G: return conj(slice(eta, ops[0].window.lo, ops[0].window.hi));
    case Form::FG:
    case Form::GF: {
      std::vector<double> inner;
      for (int m = ops[0].window.lo; m <= ops[0].window.hi; ++m) {
        const auto w = slice(eta, m + ops[1].window.lo, m + ops[1].window.hi);
        inner.push_back(f.form() == Form::FG ? conj(w) : disj(w));
      }
      return f.form() == Form::FG ? disj(inner) : conj(inner);
    }
  }
  return 0.0;
}

Interval innerOf(const SpecFormula& f) { return f.ops().size() > 1 ? f.ops()[1].window : Interval{}; }
Interval outerOf(const SpecFormula& f) { return f.ops().empty() ? Interval{} : f.ops()[0].window; }

// Probability that the literal holds at word index k under stage decisions.
std::vector<double> literalMarginals(const Mdp& mdp, const std::map<FiniteMemoryPolicy::Key, std::vector<double>>& dec,
                                     const Literal& lit, int steps) {
  std::vector<double> dist(mdp.numStates(), 0.0), eta;
  dist[mdp.initial()] = 1.0;
  auto p = mdp.findProp(lit.prop);
  for (int k = 0; k <= steps; ++k) {
    double e = 0.0;
    for (StateId s = 0; s < mdp.numStates(); ++s)
      if ((p && mdp.hasLabel(s, *p)) != lit.negated) e += dist[s];
    eta.push_back(e);
    std::vector<double> next(mdp.numStates(), 0.0);
    for (StateId s = 0; s < mdp.numStates(); ++s)
      for (ActionId a = 0; a < mdp.numActions(); ++a)
        for (const auto& t : mdp.successors(s, a)) next[t.to] += dist[s] * dec.at({static_cast<int>(s), k + 1})[a] * t.prob;
    dist = next;
  }
  return eta;
}

ProblemInstance instanceOf(std::vector<SpecFormula> fs, double gamma, double beta) {
  ProblemInstance inst;
  for (std::size_t i = 0; i < fs.size(); ++i) inst.specs.push_back({"s" + std::to_string(i), fs[i]});
  inst.gamma = gamma;
  inst.beta = beta;
  return inst;
}

Mdp corridor() {
  // s0 -> s1 -> s2 -> s3 under "right", "stay" holds; a on s1, b on s2, c on s3.
  std::vector<std::vector<std::vector<Transition>>> tr(4, std::vector<std::vector<Transition>>(2));
  for (StateId s = 0; s < 4; ++s) {
    tr[s][0] = {{std::min<StateId>(s + 1, 3), 1.0}};
    tr[s][1] = {{s, 1.0}};
  }
  return Mdp({"s0", "s1", "s2", "s3"}, 0, {"right", "stay"}, {"a", "b", "c"}, tr, {{}, {0}, {1}, {2}});
}

void checkInvariants(const SynthesisResult& r, bool exact) {
  ASSERT_EQ(r.status, SynthesisStatus::Ok) << r.message;
  const auto& lay = r.built->layout;
  const auto& inst = r.instance;
  const double tol = 1e-6;
  EXPECT_TRUE(opt::checkWitness(r.built->program, r.witness, r.thetaStar).feasible(1e-5));
  EXPECT_GE(r.witness[lay.mu[inst.groundTruth]], inst.gamma - tol);
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const double mu = r.witness[lay.mu[i]], nu = r.witness[lay.nu[i]], x = r.witness[lay.x[i]];
    EXPECT_TRUE(x < 1e-9 || x > 1 - 1e-9);
    EXPECT_EQ(x > 0.5, mu >= inst.beta - tol) << i;
    EXPECT_NEAR(nu, mu * x, 1e-9);
    const double actual = exactSatisfaction(*r.policy, inst.specs[i].formula);
    EXPECT_NEAR(actual, r.specs[i].actual, 1e-12);
    if (exact)
      EXPECT_NEAR(actual, mu, tol);
    else
      EXPECT_LE(mu, actual + tol);
  }
  EXPECT_NEAR(r.entropyBits, opt::entropyBits(opt::gather(r.witness, lay.nu)), 1e-9);
  EXPECT_GE(r.entropyBits, r.thetaStar - 1e-6);
  for (const auto& b : lay.blocks) {
    const auto c = checkFrechet(b, r.witness);
    EXPECT_LE(c.maxMuDeviation, tol);
    EXPECT_LE(c.maxZetaDeviation, tol);
  }
  for (std::uint32_t n = 0; n < r.policy->numNodes(); ++n) {
    double s = 0.0;
    for (double v : r.policy->distribution(n)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

}  // namespace

TEST(Frechet, MatchesUnionIntersectionBounds) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto f = test::randomFormula(rng, 10, 1);
    std::vector<double> eta(static_cast<std::size_t>(f.horizon()) + 1);
    for (double& e : eta) e = rng() % 4 == 0 ? 1.0 : unit(rng);
    EXPECT_NEAR(frechetBound(f.form(), outerOf(f), innerOf(f), eta, 0), boundOracle(f, eta), 1e-12) << f.toString();
  }
}

TEST(Frechet, TrivialCases) {
  std::vector<double> ones(12, 1.0);
  for (const char* s : {"F[1,4] p", "G[2,6] p", "F[0,2] G[1,3] p", "G[1,3] F[2,4] p"}) {
    const auto f = parseSpec(s);
    EXPECT_DOUBLE_EQ(frechetBound(f.form(), outerOf(f), innerOf(f), ones, 0), 1.0);
  }
  std::vector<double> eta{0.1, 0.2, 0.7, 0.3};
  EXPECT_DOUBLE_EQ(frechetBound(Form::F, {2, 2}, {}, eta, 0), 0.7);
  EXPECT_DOUBLE_EQ(frechetBound(Form::G, {2, 2}, {}, eta, 0), 0.7);
}

TEST(FrechetProperty, SoundUnderRandomPolicies) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 300; ++trial) {
    const Mdp m = test::randomMdp(rng, 3, 2, 1);
    const auto f = test::randomFormula(rng, 5, 1);
    const auto dec = test::randomStageDecisions(rng, m, f.horizon() + 1);
    const auto eta = literalMarginals(m, dec, f.literal(), f.horizon());
    const double bound = frechetBound(f.form(), outerOf(f), innerOf(f), eta, 0);
    EXPECT_LE(bound, test::enumerateSatisfaction(m, dec, f) + 1e-12) << f.toString();
  }
}

TEST(Exact, CorridorTwoCandidates) {
  const Mdp m = corridor();
  auto inst = instanceOf({parseSpec("F[1,3] a"), parseSpec("F[2,3] b")}, 0.95, 0.8);
  const auto r = synthesizeExact(m, inst);
  checkInvariants(r, true);
  EXPECT_EQ(r.candidateSet.size(), 2u);
  EXPECT_NEAR(r.entropyBits, 1.0, 1e-3);
}

TEST(Exact, SingleSpecHasZeroEntropy) {
  const Mdp m = corridor();
  const auto r = synthesizeExact(m, instanceOf({parseSpec("F[1,3] a")}, 0.95, 0.8));
  checkInvariants(r, true);
  EXPECT_NEAR(r.thetaStar, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.entropyBits, 0.0);
}

TEST(Exact, ExclusiveSpecsLeaveOnlyGroundTruth) {
  const Mdp m = corridor();
  // Reaching c by index 3 forbids staying on a through index 3.
  const auto r = synthesizeExact(m, instanceOf({parseSpec("F[3,3] c"), parseSpec("G[1,3] a")}, 0.95, 0.8));
  checkInvariants(r, true);
  EXPECT_EQ(r.candidateSet, std::vector<std::size_t>{0});
  EXPECT_LE(r.thetaStar, 1e-4);
}

TEST(Exact, UnreachableGroundTruthIsInfeasible) {
  const Mdp m = corridor();
  const auto r = synthesizeExact(m, instanceOf({parseSpec("F[0,1] c"), parseSpec("F[1,2] a")}, 0.95, 0.8));
  EXPECT_EQ(r.status, SynthesisStatus::SpecInfeasible);
  const auto a = synthesizeApprox(m, instanceOf({parseSpec("F[0,1] c"), parseSpec("F[1,2] a")}, 0.95, 0.8));
  EXPECT_EQ(a.status, SynthesisStatus::SpecInfeasible);
}

TEST(Approx, CorridorMatchesExact) {
  const Mdp m = corridor();
  auto inst = instanceOf({parseSpec("F[1,3] a"), parseSpec("F[2,3] b"), parseSpec("G[1,1] a")}, 0.95, 0.8);
  const auto e = synthesizeExact(m, inst);
  const auto a = synthesizeApprox(m, inst);
  checkInvariants(e, true);
  checkInvariants(a, false);
  EXPECT_NEAR(a.entropyBits, e.entropyBits, 0.02);
}

TEST(Approx, StageOccupancySumsToOne) {
  const Mdp m = corridor();
  const auto a = synthesizeApprox(m, instanceOf({parseSpec("F[1,3] a"), parseSpec("G[2,3] b")}, 0.9, 0.5));
  ASSERT_EQ(a.status, SynthesisStatus::Ok);
  const auto occ = stateOccupancy(a.built->program, a.witness);
  std::map<int, double> perStage;
  for (std::size_t f = 0; f < occ.size(); ++f) perStage[a.built->layout.flowKeys[f][1]] += occ[f];
  ASSERT_FALSE(perStage.empty());
  for (const auto& [t, v] : perStage) EXPECT_NEAR(v, 1.0, 1e-6) << "stage " << t;
  EXPECT_EQ(perStage.size(), static_cast<std::size_t>(a.built->layout.horizon));
}

TEST(Approx, ContinuousCountIgnoresAutomataSize) {
  const Mdp m = corridor();
  const auto small = assembleApproxProgram(m, instanceOf({parseSpec("F[1,5] a"), parseSpec("F[5,5] b")}, 0.9, 0.5));
  const auto large = assembleApproxProgram(m, instanceOf({parseSpec("F[1,5] a"), parseSpec("G[1,5] b")}, 0.9, 0.5));
  std::size_t occSmall = 0, occLarge = 0;
  for (std::size_t v = 0; v < small.program.numVariables(); ++v) occSmall += small.program.isOccupancy(static_cast<int>(v));
  for (std::size_t v = 0; v < large.program.numVariables(); ++v) occLarge += large.program.isOccupancy(static_cast<int>(v));
  EXPECT_EQ(occSmall, occLarge);
}

TEST(SynthesisProperty, RandomInstances) {
  std::mt19937_64 rng(63);
  int solved = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const Mdp m = test::randomMdp(rng, 3, 2, 2);
    auto inst = instanceOf({test::randomFormula(rng, 4, 2), test::randomFormula(rng, 4, 2), test::randomFormula(rng, 4, 2)},
                           0.5, 0.3);
    const auto e = synthesizeExact(m, inst);
    const auto a = synthesizeApprox(m, inst);
    if (e.status == SynthesisStatus::SpecInfeasible) {
      EXPECT_NE(a.status, SynthesisStatus::Ok);
      continue;
    }
    checkInvariants(e, true);
    if (a.status == SynthesisStatus::Ok) checkInvariants(a, false);
    ++solved;
  }
  EXPECT_GT(solved, 5);
}
