#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "veil/simplex.hpp"

using namespace veil::opt;

TEST(Simplex, SingleVariable) {
  LpModel m;
  m.addVar(0.0, kInf, 1.0);
  m.addRow({{0, 1.0}}, -kInf, 3.0);
  const auto r = solveLp(m);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, 3.0, 1e-12);
}

TEST(Simplex, UnitSimplex) {
  LpModel m;
  m.addVar(0.0, kInf, 1.0);
  m.addVar(0.0, kInf, 1.0);
  m.addRow({{0, 1.0}, {1, 1.0}}, 1.0, 1.0);
  const auto r = solveLp(m);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, 1.0, 1e-12);
}

TEST(Simplex, InfeasibleAndUnbounded) {
  LpModel inf;
  inf.addVar(0.0, 1.0, 1.0);
  inf.addRow({{0, 1.0}}, 2.0, kInf);
  EXPECT_EQ(solveLp(inf).status, LpStatus::Infeasible);
  LpModel unb;
  unb.addVar(0.0, kInf, 1.0);
  unb.addVar(0.0, kInf, 0.0);
  unb.addRow({{0, 1.0}, {1, -1.0}}, -kInf, 1.0);
  EXPECT_EQ(solveLp(unb).status, LpStatus::Unbounded);
}

TEST(Simplex, WarmStartAfterChanges) {
  SimplexSolver s;
  const int x = s.addColumn(0.0, 10.0, 1.0, {});
  const int y = s.addColumn(0.0, 10.0, 2.0, {});
  std::vector<SparseEntry> e{{x, 1.0}, {y, 1.0}};
  const int r = s.addRow(e, -kInf, 4.0);
  ASSERT_EQ(s.solve(), LpStatus::Optimal);
  EXPECT_NEAR(s.objective(), 8.0, 1e-9);
  s.setCost(x, 3.0);
  ASSERT_EQ(s.solve(), LpStatus::Optimal);
  EXPECT_NEAR(s.objective(), 12.0, 1e-9);
  s.setRowBounds(r, -kInf, 2.0);
  ASSERT_EQ(s.solve(), LpStatus::Optimal);
  EXPECT_NEAR(s.objective(), 6.0, 1e-9);
  s.setColumnBounds(x, 0.0, 1.0);
  ASSERT_EQ(s.solve(), LpStatus::Optimal);
  EXPECT_NEAR(s.objective(), 5.0, 1e-9);
  EXPECT_NEAR(s.rowDual(r), 2.0, 1e-9);
}

namespace {

// Best objective over the vertices of {lo <= A x <= hi, box} in two dimensions,
// or NaN when no vertex is feasible.
double vertexOracle(const LpModel& m) {
  struct Line {
    double a, b, c;
  };
  std::vector<Line> lines;
  for (int j = 0; j < 2; ++j)
    for (double v : {m.lb[j], m.ub[j]})
      if (std::isfinite(v)) lines.push_back({j == 0 ? 1.0 : 0.0, j == 1 ? 1.0 : 0.0, v});
  for (const auto& r : m.rows) {
    double a = 0.0, b = 0.0;
    for (const auto& e : r.entries) (e.index == 0 ? a : b) += e.value;
    for (double v : {r.lo, r.hi})
      if (std::isfinite(v)) lines.push_back({a, b, v});
  }
  double best = std::nan("");
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t k = i + 1; k < lines.size(); ++k) {
      const double det = lines[i].a * lines[k].b - lines[i].b * lines[k].a;
      if (std::abs(det) < 1e-12) continue;
      const double x = (lines[i].c * lines[k].b - lines[i].b * lines[k].c) / det;
      const double y = (lines[i].a * lines[k].c - lines[i].c * lines[k].a) / det;
      bool ok = x >= m.lb[0] - 1e-9 && x <= m.ub[0] + 1e-9 && y >= m.lb[1] - 1e-9 && y <= m.ub[1] + 1e-9;
      for (const auto& r : m.rows) {
        double act = 0.0;
        for (const auto& e : r.entries) act += e.value * (e.index == 0 ? x : y);
        ok = ok && act >= r.lo - 1e-9 && act <= r.hi + 1e-9;
      }
      if (!ok) continue;
      const double obj = m.obj[0] * x + m.obj[1] * y;
      if (std::isnan(best) || obj > best) best = obj;
    }
  return best;
}

}  // namespace

TEST(SimplexProperty, RandomBoxedLpsMatchVertexEnumeration) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> coef(-3.0, 3.0), bound(0.5, 5.0);
  int feasible = 0;
  for (int trial = 0; trial < 500; ++trial) {
    LpModel m;
    for (int j = 0; j < 2; ++j) m.addVar(-bound(rng), bound(rng), coef(rng));
    const int rows = 1 + static_cast<int>(rng() % 4);
    for (int r = 0; r < rows; ++r) {
      const double lo = coef(rng);
      m.addRow({{0, coef(rng)}, {1, coef(rng)}}, rng() % 3 == 0 ? -kInf : lo, lo + bound(rng));
    }
    const auto res = solveLp(m);
    const double oracle = vertexOracle(m);
    if (std::isnan(oracle)) {
      EXPECT_EQ(res.status, LpStatus::Infeasible) << trial;
    } else {
      ++feasible;
      ASSERT_EQ(res.status, LpStatus::Optimal) << trial;
      EXPECT_NEAR(res.objective, oracle, 1e-7) << trial;
    }
  }
  EXPECT_GT(feasible, 100);
}

TEST(SimplexProperty, DualsCertifyOptimality) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> coef(0.1, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    // max c'x, A x <= b, x >= 0 with positive data: bounded and feasible.
    LpModel m;
    const int n = 4, rows = 3;
    for (int j = 0; j < n; ++j) m.addVar(0.0, kInf, coef(rng));
    std::vector<double> b;
    for (int r = 0; r < rows; ++r) {
      std::vector<SparseEntry> e;
      for (int j = 0; j < n; ++j) e.push_back({j, coef(rng)});
      b.push_back(coef(rng) * 5.0);
      m.addRow(e, -kInf, b.back());
    }
    const auto res = solveLp(m);
    ASSERT_EQ(res.status, LpStatus::Optimal);
    double dualObj = 0.0;
    for (int r = 0; r < rows; ++r) {
      EXPECT_GE(res.rowDuals[r], -1e-9);
      dualObj += res.rowDuals[r] * b[r];
    }
    EXPECT_NEAR(dualObj, res.objective, 1e-7);
  }
}
