#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace veil::opt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct SparseEntry {
  int index;
  double value;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalFailure };
const char* statusName(LpStatus status);

/// Bounded-variable primal simplex on a dense tableau, maximizing c'x
/// subject to lo <= A x <= hi and lb <= x <= ub.
///
/// Each row r is stored as a_r x - s_r = 0 with a logical s_r carrying the
/// row bounds. Infeasible starts run a composite phase 1 that maximizes the
/// negative sum of bound violations. Columns, rows, bounds and costs may be
/// changed between solves; the last basis is kept as a warm start.
class SimplexSolver {
 public:
  struct Options {
    double primalTol = 1e-9;
    double dualTol = 1e-9;
    double pivotTol = 1e-9;
    long maxIterations = 2'000'000;
    int refactorEvery = 2000;
    int blandAfter = 50;
  };

  SimplexSolver() : SimplexSolver(Options{}) {}
  explicit SimplexSolver(Options options);

  int addColumn(double lb, double ub, double cost, std::span<const SparseEntry> entries);
  int addRow(std::span<const SparseEntry> entries, double lo, double hi);
  void setColumnBounds(int j, double lb, double ub);
  void setRowBounds(int r, double lo, double hi);
  void setCost(int j, double cost);

  LpStatus solve();

  int numColumns() const { return static_cast<int>(colVar_.size()); }
  int numRows() const { return static_cast<int>(rowVar_.size()); }
  double value(int j) const { return x_[colVar_[j]]; }
  double rowActivity(int r) const { return x_[rowVar_[r]]; }
  /// Row duals of the last solve. After an infeasible verdict these are the
  /// phase-1 multipliers, usable as a Farkas-type pricing vector.
  double rowDual(int r) const {
    const int v = rowVar_[r];
    if (status_[v] != Status::Basic) return d_[v];
    return dualsPhase1_ ? -phase1Cost_[v] : 0.0;
  }
  double reducedCost(int j) const { return d_[colVar_[j]]; }
  double objective() const;
  double primalInfeasibility() const;
  bool dualsFromPhase1() const { return dualsPhase1_; }
  bool isBasic(int j) const { return status_[colVar_[j]] == Status::Basic; }
  long iterations() const { return totalIterations_; }
  long refactorizations() const { return refactorCount_; }

 private:
  enum class Status : std::uint8_t { Basic, AtLower, AtUpper, Free };

  double& T(int r, int v) { return tab_[static_cast<std::size_t>(r) * cap_ + v]; }
  double T(int r, int v) const { return tab_[static_cast<std::size_t>(r) * cap_ + v]; }
  int addVariable(double lb, double ub, double cost);
  void ensureCapacity(int cols);
  void placeNonbasic(int v);
  void computeReducedCosts(const std::vector<double>& cost);
  void pivot(int row, int col);
  bool refactor();
  double residual() const;
  void recomputeBasicValues();

  Options opt_;
  int m_ = 0;
  int nv_ = 0;
  int cap_ = 0;
  std::vector<double> tab_;
  std::vector<double> lb_, ub_, cost_, x_, d_;
  std::vector<Status> status_;
  std::vector<int> head_;
  std::vector<int> colVar_, rowVar_;
  std::vector<bool> isLogical_;
  // Column-wise copy of [A, -I] for refactorization and residual checks.
  std::vector<std::vector<SparseEntry>> acol_;
  long totalIterations_ = 0;
  long refactorCount_ = 0;
  long pivotsSinceRefactor_ = 0;
  bool dualsPhase1_ = false;
  std::vector<double> phase1Cost_;
};

struct LpModel {
  std::vector<double> lb, ub, obj;
  struct Row {
    std::vector<SparseEntry> entries;
    double lo, hi;
  };
  std::vector<Row> rows;
  bool maximize = true;

  int addVar(double lower, double upper, double cost) {
    lb.push_back(lower);
    ub.push_back(upper);
    obj.push_back(cost);
    return static_cast<int>(lb.size()) - 1;
  }
  void addRow(std::vector<SparseEntry> entries, double lo, double hi) { rows.push_back({std::move(entries), lo, hi}); }
};

struct LpResult {
  LpStatus status = LpStatus::NumericalFailure;
  double objective = 0.0;
  std::vector<double> x;
  std::vector<double> rowDuals;
  long iterations = 0;
};

/// Cold-start solve of a standalone LP.
LpResult solveLp(const LpModel& model);

}  // namespace veil::opt
