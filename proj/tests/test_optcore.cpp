#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include <nlohmann/json.hpp>

#include "veil/engine.hpp"
#include "veil/occupancy.hpp"
#include "veil/program.hpp"
#include "veil/search.hpp"

using namespace veil::opt;

namespace {

// Acyclic flow over n states; state s moves to higher indices or terminates.
FlowStructure randomFlow(std::mt19937_64& rng, int n, int actions, int& nextVar) {
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  FlowStructure f;
  for (int s = 0; s < n; ++s) {
    FlowState st;
    st.alpha = s == 0 ? 1.0 : (rng() % 4 == 0 ? 0.5 : 0.0);
    for (int a = 0; a < actions; ++a) {
      FlowAction fa{nextVar++, {}};
      double left = 1.0;
      for (int t = s + 1; t < n; ++t)
        if (rng() % 2 == 0) {
          const double p = left * unit(rng) * 0.7;
          fa.succ.push_back({t, p});
          left -= p;
        }
      st.actions.push_back(fa);
    }
    f.states.push_back(st);
  }
  return f;
}

std::vector<double> propagate(const FlowStructure& f, const std::vector<int>& choice, int numVars) {
  std::vector<double> mass(f.states.size(), 0.0), occ(static_cast<std::size_t>(numVars), 0.0);
  for (std::size_t s = 0; s < f.states.size(); ++s) mass[s] += f.states[s].alpha;
  for (std::size_t s = 0; s < f.states.size(); ++s) {
    const auto& a = f.states[s].actions[static_cast<std::size_t>(choice[s])];
    occ[static_cast<std::size_t>(a.var)] = mass[s];
    for (auto [t, p] : a.succ) mass[static_cast<std::size_t>(t)] += mass[s] * p;
  }
  return occ;
}

// One flow state with k terminal actions; nu_i = lambda_i.
SynthesisProgram simplexProgram(int k, std::vector<int>* nu = nullptr) {
  SynthesisProgram p;
  FlowStructure f;
  FlowState st;
  st.alpha = 1.0;
  std::vector<int> lam;
  for (int i = 0; i < k; ++i) {
    lam.push_back(p.addVariable("lam" + std::to_string(i), VarKind::Continuous, 0.0, kInf));
    st.actions.push_back({lam.back(), {}});
  }
  f.states.push_back(st);
  p.setFlow(f);
  p.materializeFlowRows();
  std::vector<int> v;
  for (int i = 0; i < k; ++i) {
    v.push_back(p.addVariable("nu" + std::to_string(i), VarKind::Continuous, 0.0, 1.0));
    p.addConstraint({{v.back(), 1.0}, {lam[static_cast<std::size_t>(i)], -1.0}}, 0.0, 0.0, RowKind::Linking);
  }
  p.setEntropyTerms(v);
  if (nu) *nu = v;
  return p;
}

double h(std::initializer_list<double> p) {
  double s = 0.0;
  for (double v : p)
    if (v > 0) s -= v * std::log2(v);
  return s;
}

}  // namespace

TEST(FlowOracle, MatchesPolicyEnumeration) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> rew(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    int nv = 0;
    const int n = 2 + static_cast<int>(rng() % 4);
    const auto flow = randomFlow(rng, n, 2 + static_cast<int>(rng() % 2), nv);
    std::vector<double> reward(static_cast<std::size_t>(nv));
    for (double& r : reward) r = rew(rng);
    FlowOracle oracle(flow);
    const auto best = oracle.maximize(reward);

    double brute = -kInf;
    std::vector<int> choice(static_cast<std::size_t>(n), 0);
    std::function<void(int)> rec = [&](int s) {
      if (s == n) {
        const auto occ = propagate(flow, choice, nv);
        double v = 0.0;
        for (int i = 0; i < nv; ++i) v += reward[static_cast<std::size_t>(i)] * occ[static_cast<std::size_t>(i)];
        brute = std::max(brute, v);
        return;
      }
      for (std::size_t a = 0; a < flow.states[static_cast<std::size_t>(s)].actions.size(); ++a) {
        choice[static_cast<std::size_t>(s)] = static_cast<int>(a);
        rec(s + 1);
      }
    };
    rec(0);
    EXPECT_NEAR(best.value, brute, 1e-12);

    std::vector<int> chosen(best.choice.begin(), best.choice.end());
    for (int& c : chosen) c = std::max(c, 0);
    const auto occ = propagate(flow, chosen, nv);
    std::vector<double> fromOracle(static_cast<std::size_t>(nv), 0.0);
    for (const auto& e : oracle.occupancy(best.choice)) fromOracle[static_cast<std::size_t>(e.index)] = e.value;
    for (int i = 0; i < nv; ++i)
      if (occ[static_cast<std::size_t>(i)] > 0.0 || fromOracle[static_cast<std::size_t>(i)] > 0.0)
        EXPECT_NEAR(fromOracle[static_cast<std::size_t>(i)], occ[static_cast<std::size_t>(i)], 1e-12);
  }
}

TEST(Entropy, Functions) {
  EXPECT_DOUBLE_EQ(entropyBits({0.5, 0.5}), 1.0);
  EXPECT_DOUBLE_EQ(entropyBits({0.3, 0.0, 0.3}), 1.0);
  EXPECT_DOUBLE_EQ(entropyBits({0.0, 0.0}), 0.0);
  EXPECT_NEAR(entropyBits({0.9, 0.05, 0.05}), h({0.9, 0.05, 0.05}), 1e-12);
  const std::vector<double> nu{0.4, 0.2, 0.2};
  EXPECT_NEAR(entropyNumerator(nu), entropyBits(nu) * entropyDenominator(nu), 1e-12);
  EXPECT_DOUBLE_EQ(entropyDenominator(nu), 0.8);
  EXPECT_EQ(gather({1.0, 2.0, 3.0}, {2, 0}), (std::vector<double>{3.0, 1.0}));
}

TEST(Program, ValidationRejectsBadInput) {
  SynthesisProgram p;
  EXPECT_THROW(p.addVariable("b", VarKind::Binary, 0.0, 2.0), ProgramError);
  EXPECT_THROW(p.addVariable("x", VarKind::Continuous, 1.0, 0.0), ProgramError);
  const int x = p.addVariable("x", VarKind::Continuous, 0.0, 1.0);
  EXPECT_THROW(p.addConstraint({{x + 5, 1.0}}, 0.0, 1.0, RowKind::Linking), ProgramError);
  const int r = p.addConstraint({{x, 1.0}, {x, 2.0}}, 0.0, 1.0, RowKind::Linking);
  ASSERT_EQ(p.constraints()[static_cast<std::size_t>(r)].terms.size(), 1u);
  EXPECT_DOUBLE_EQ(p.constraints()[static_cast<std::size_t>(r)].terms[0].value, 3.0);
}

TEST(Program, CheckWitnessAndExportRoundTrip) {
  std::vector<int> nu;
  auto p = simplexProgram(3, &nu);
  std::vector<double> x(p.numVariables(), 0.0);
  for (int i = 0; i < 3; ++i) x[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(nu[static_cast<std::size_t>(i)])] = 1.0 / 3.0;
  const auto ok = checkWitness(p, x, 1.5);
  EXPECT_TRUE(ok.feasible(1e-9));
  EXPECT_NEAR(ok.f1, std::log2(3.0), 1e-12);
  EXPECT_FALSE(checkWitness(p, x, 1.6).feasible(1e-9));
  x[0] = 0.5;
  EXPECT_FALSE(checkWitness(p, x, 0.0).feasible(1e-6));

  const auto doc = exportProgram(p, 1.25);
  EXPECT_EQ(doc.at("variables").size(), p.numVariables());
  const auto back = importWitness(p, exportWitness(p, x));
  EXPECT_EQ(back, x);
  nlohmann::json named{{"values", {{"nu1", 0.25}}}};
  const auto partial = importWitness(p, named);
  EXPECT_DOUBLE_EQ(partial[static_cast<std::size_t>(nu[1])], 0.25);
}

TEST(Program, FixVariablesSubstitutes) {
  SynthesisProgram p;
  const int a = p.addVariable("a", VarKind::Continuous, 0.0, 1.0);
  const int z = p.addVariable("z", VarKind::Binary, 0.0, 1.0);
  const int w = p.addVariable("w", VarKind::Continuous, 0.0, 1.0);
  p.addConstraint({{w, 1.0}, {z, -1.0}}, -kInf, 0.0, RowKind::Linking, "w<=z");
  p.addConstraint({{w, 1.0}, {a, -1.0}}, -kInf, 0.0, RowKind::Linking, "w<=a");
  p.addConstraint({{a, 1.0}, {z, 1.0}}, 0.0, 1.5, RowKind::Target, "a+z");
  const auto off = fixVariables(p, {{z, 0.0}});
  ASSERT_TRUE(off);
  EXPECT_EQ(off->numVariables(), p.numVariables());
  EXPECT_DOUBLE_EQ(off->variables()[static_cast<std::size_t>(w)].ub, 0.0);
  const auto on = fixVariables(p, {{z, 1.0}});
  ASSERT_TRUE(on);
  bool capped = false;
  for (const auto& r : on->constraints())
    if (r.name == "a+z") capped = r.terms.size() == 1 && r.terms[0].index == a && std::abs(r.hi - 0.5) < 1e-12;
  EXPECT_TRUE(capped);
  SynthesisProgram q;
  const int b = q.addVariable("b", VarKind::Binary, 0.0, 1.0);
  q.addConstraint({{b, 1.0}}, 0.5, 1.0, RowKind::Linking);
  EXPECT_FALSE(fixVariables(q, {{b, 0.0}}));
}

TEST(Engine, MaximumEntropyOnSimplex) {
  auto p = simplexProgram(3);
  ConcaveMaximizer eng(p);
  const auto r = eng.maximize(0.0);
  ASSERT_EQ(r.status, EngineStatus::Converged);
  EXPECT_NEAR(r.lower, std::log2(3.0), 1e-5);
  EXPECT_LE(r.lower, r.upper + 1e-9);
  const auto at = eng.maximize(std::log2(3.0));
  EXPECT_NEAR(at.upper, 0.0, 1e-5);
}

TEST(Engine, TargetRowShapesOptimum) {
  std::vector<int> nu;
  auto p = simplexProgram(3, &nu);
  p.addConstraint({{nu[0], 1.0}}, 0.9, kInf, RowKind::Target, "nu0");
  const auto b = bisect(p, 0.0, std::log2(3.0), 1e-6);
  ASSERT_TRUE(b.specFeasible);
  EXPECT_NEAR(b.thetaStar, h({0.9, 0.05, 0.05}), 2e-6);
  EXPECT_TRUE(checkWitness(p, b.witness, b.thetaStar).feasible(1e-6));
}

TEST(Engine, InfeasibleProgramDetected) {
  std::vector<int> nu;
  auto p = simplexProgram(2, &nu);
  p.addConstraint({{nu[0], 1.0}, {nu[1], 1.0}}, 1.5, kInf, RowKind::Target);
  ConcaveMaximizer eng(p);
  EXPECT_EQ(eng.maximize(0.0).status, EngineStatus::Infeasible);
  const auto v = eng.minimizeViolation();
  EXPECT_NEAR(v.violation, 0.5, 1e-7);
  const auto b = bisect(p, 0.0, 1.0, 1e-4);
  EXPECT_FALSE(b.specFeasible);
  EXPECT_TRUE(b.conclusive);
}

TEST(Search, ThetaZeroIsFeasible) {
  auto p = simplexProgram(4);
  const auto r = checkFeasible(p, 0.0);
  EXPECT_EQ(r.verdict, Verdict::Feasible);
  EXPECT_TRUE(checkWitness(p, r.witness, 0.0).feasible(1e-6));
}

TEST(Bisection, ContractOnSimplex) {
  for (int k : {2, 3, 5}) {
    auto p = simplexProgram(k);
    const double eps = 1e-4, hi = std::log2(static_cast<double>(k)) + 0.5;
    const auto b = bisect(p, 0.0, hi, eps);
    ASSERT_TRUE(b.specFeasible);
    EXPECT_LE(b.iterations, static_cast<int>(std::ceil(std::log2(hi / eps))));
    EXPECT_NEAR(b.thetaStar, std::log2(static_cast<double>(k)), 2 * eps);
    EXPECT_TRUE(checkWitness(p, b.witness, b.thetaStar).feasible(1e-6));
    EXPECT_EQ(checkFeasible(p, b.thetaStar + 2 * eps).verdict, Verdict::Infeasible);
    // Verdicts are monotone along the run.
    for (const auto& s : b.trace)
      for (const auto& t : b.trace)
        if (s.feasible && !t.feasible) EXPECT_LT(s.theta, t.theta + 1e-6);
  }
}

TEST(Bisection, ExternalOracleIsUsed) {
  auto p = simplexProgram(2);
  int calls = 0;
  SearchOptions o;
  o.oracle = [&](const SynthesisProgram& prog, double theta) {
    ++calls;
    return checkFeasible(prog, theta);
  };
  const auto b = bisect(p, 0.0, 1.5, 1e-3, o);
  EXPECT_GT(calls, 0);
  EXPECT_NEAR(b.thetaStar, 1.0, 2e-3);
}

TEST(QuasiconcavityProperty, ConvexCombinationsStayFeasible) {
  std::vector<int> nu;
  auto p = simplexProgram(4, &nu);
  p.addConstraint({{nu[0], 1.0}, {nu[1], -1.0}}, 0.1, kInf, RowKind::Target);
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double theta = 1.2;
  std::vector<std::vector<double>> pts;
  while (pts.size() < 40) {
    std::vector<double> x(p.numVariables(), 0.0);
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += x[static_cast<std::size_t>(i)] = unit(rng);
    for (int i = 0; i < 4; ++i) x[static_cast<std::size_t>(nu[static_cast<std::size_t>(i)])] = x[static_cast<std::size_t>(i)] /= s;
    if (checkWitness(p, x, theta).feasible(0.0)) pts.push_back(x);
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& a = pts[rng() % pts.size()];
    const auto& b = pts[rng() % pts.size()];
    const double w = unit(rng);
    std::vector<double> c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = w * a[i] + (1 - w) * b[i];
    EXPECT_TRUE(checkWitness(p, c, theta).feasible(1e-9));
  }
}
