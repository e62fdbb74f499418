#include "veil/simplex.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace veil::opt {

const char* statusName(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
    case LpStatus::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

SimplexSolver::SimplexSolver(Options options) : opt_(options) {}

void SimplexSolver::ensureCapacity(int cols) {
  if (cols <= cap_) return;
  int newCap = std::max({cols, 2 * cap_, 16});
  std::vector<double> t(static_cast<std::size_t>(m_) * newCap, 0.0);
  for (int r = 0; r < m_; ++r)
    std::copy_n(tab_.begin() + static_cast<std::size_t>(r) * cap_, nv_,
                t.begin() + static_cast<std::size_t>(r) * newCap);
  tab_.swap(t);
  cap_ = newCap;
}

int SimplexSolver::addVariable(double lb, double ub, double cost) {
  const int v = nv_;
  ensureCapacity(nv_ + 1);
  ++nv_;
  lb_.push_back(lb);
  ub_.push_back(ub);
  cost_.push_back(cost);
  x_.push_back(0.0);
  d_.push_back(0.0);
  status_.push_back(Status::AtLower);
  acol_.emplace_back();
  isLogical_.push_back(false);
  return v;
}

void SimplexSolver::placeNonbasic(int v) {
  const double lb = lb_[v], ub = ub_[v];
  if (std::isfinite(lb) && (status_[v] != Status::AtUpper || !std::isfinite(ub))) {
    status_[v] = Status::AtLower;
    x_[v] = lb;
  } else if (std::isfinite(ub)) {
    status_[v] = Status::AtUpper;
    x_[v] = ub;
  } else {
    status_[v] = Status::Free;
    x_[v] = 0.0;
  }
}

int SimplexSolver::addColumn(double lb, double ub, double cost, std::span<const SparseEntry> entries) {
  const int v = addVariable(lb, ub, cost);
  for (const auto& e : entries) {
    if (e.value == 0.0) continue;
    acol_[v].push_back(e);
    const int lv = rowVar_[e.index];
    for (int i = 0; i < m_; ++i) T(i, v) -= e.value * T(i, lv);
  }
  colVar_.push_back(v);
  status_[v] = Status::AtLower;
  placeNonbasic(v);
  if (x_[v] != 0.0)
    for (int i = 0; i < m_; ++i) x_[head_[i]] -= T(i, v) * x_[v];
  return static_cast<int>(colVar_.size()) - 1;
}

int SimplexSolver::addRow(std::span<const SparseEntry> entries, double lo, double hi) {
  const int r = m_;
  tab_.resize(static_cast<std::size_t>(m_ + 1) * std::max(cap_, 1), 0.0);
  ++m_;
  const int v = addVariable(lo, hi, 0.0);  // may grow cap_ and re-layout rows
  if (tab_.size() < static_cast<std::size_t>(m_) * cap_) tab_.resize(static_cast<std::size_t>(m_) * cap_, 0.0);
  std::fill_n(tab_.begin() + static_cast<std::size_t>(r) * cap_, cap_, 0.0);
  isLogical_[v] = true;
  acol_[v].push_back({r, -1.0});
  rowVar_.push_back(v);

  double act = 0.0;
  for (const auto& e : entries) {
    if (e.value == 0.0) continue;
    const int cv = colVar_[e.index];
    acol_[cv].push_back({r, e.value});
    T(r, cv) -= e.value;
    act += e.value * x_[cv];
  }
  T(r, v) = 1.0;
  for (int i = 0; i < r; ++i) {
    const double f = T(r, head_[i]);
    if (f == 0.0) continue;
    const double* src = &tab_[static_cast<std::size_t>(i) * cap_];
    double* dst = &tab_[static_cast<std::size_t>(r) * cap_];
    for (int j = 0; j < nv_; ++j) dst[j] -= f * src[j];
    T(r, head_[i]) = 0.0;
  }
  head_.push_back(v);
  status_[v] = Status::Basic;
  x_[v] = act;
  return r;
}

void SimplexSolver::setColumnBounds(int j, double lb, double ub) {
  const int v = colVar_[j];
  lb_[v] = lb;
  ub_[v] = ub;
  if (status_[v] == Status::Basic) return;
  const double old = x_[v];
  placeNonbasic(v);
  const double delta = x_[v] - old;
  if (delta != 0.0)
    for (int i = 0; i < m_; ++i) x_[head_[i]] -= T(i, v) * delta;
}

void SimplexSolver::setRowBounds(int r, double lo, double hi) {
  const int v = rowVar_[r];
  lb_[v] = lo;
  ub_[v] = hi;
  if (status_[v] == Status::Basic) return;
  const double old = x_[v];
  placeNonbasic(v);
  const double delta = x_[v] - old;
  if (delta != 0.0)
    for (int i = 0; i < m_; ++i) x_[head_[i]] -= T(i, v) * delta;
}

void SimplexSolver::setCost(int j, double cost) { cost_[colVar_[j]] = cost; }

double SimplexSolver::objective() const {
  double z = 0.0;
  for (int v = 0; v < nv_; ++v) z += cost_[v] * x_[v];
  return z;
}

double SimplexSolver::primalInfeasibility() const {
  double worst = 0.0;
  for (int v = 0; v < nv_; ++v) {
    worst = std::max(worst, lb_[v] - x_[v]);
    worst = std::max(worst, x_[v] - ub_[v]);
  }
  return worst;
}

void SimplexSolver::computeReducedCosts(const std::vector<double>& cost) {
  std::copy(cost.begin(), cost.begin() + nv_, d_.begin());
  for (int i = 0; i < m_; ++i) {
    const double cb = cost[head_[i]];
    if (cb == 0.0) continue;
    const double* row = &tab_[static_cast<std::size_t>(i) * cap_];
    for (int v = 0; v < nv_; ++v) d_[v] -= cb * row[v];
  }
  for (int i = 0; i < m_; ++i) d_[head_[i]] = 0.0;
}

void SimplexSolver::pivot(int p, int q) {
  double* rowp = &tab_[static_cast<std::size_t>(p) * cap_];
  const double inv = 1.0 / rowp[q];
  std::vector<int> nz;
  nz.reserve(64);
  for (int v = 0; v < nv_; ++v) {
    if (rowp[v] != 0.0) {
      rowp[v] *= inv;
      nz.push_back(v);
    }
  }
  rowp[q] = 1.0;
  for (int i = 0; i < m_; ++i) {
    if (i == p) continue;
    double* row = &tab_[static_cast<std::size_t>(i) * cap_];
    const double f = row[q];
    if (f == 0.0) continue;
    for (int v : nz) row[v] -= f * rowp[v];
    row[q] = 0.0;
  }
  const double f = d_[q];
  if (f != 0.0) {
    for (int v : nz) d_[v] -= f * rowp[v];
    d_[q] = 0.0;
  }
  head_[p] = q;
  status_[q] = Status::Basic;
  ++pivotsSinceRefactor_;
}

double SimplexSolver::residual() const {
  std::vector<double> res(m_, 0.0);
  double scale = 1.0;
  for (int v = 0; v < nv_; ++v) {
    if (x_[v] == 0.0) continue;
    scale = std::max(scale, std::abs(x_[v]));
    for (const auto& e : acol_[v]) res[e.index] += e.value * x_[v];
  }
  double worst = 0.0;
  for (double r : res) worst = std::max(worst, std::abs(r));
  return worst / scale;
}

void SimplexSolver::recomputeBasicValues() {
  for (int i = 0; i < m_; ++i) x_[head_[i]] = 0.0;
  for (int v = 0; v < nv_; ++v) {
    if (status_[v] == Status::Basic || x_[v] == 0.0) continue;
    for (int i = 0; i < m_; ++i) x_[head_[i]] -= T(i, v) * x_[v];
  }
}

bool SimplexSolver::refactor() {
  ++refactorCount_;
  pivotsSinceRefactor_ = 0;
  if (m_ == 0) return true;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
  for (int i = 0; i < m_; ++i)
    for (const auto& e : acol_[head_[i]]) B(e.index, i) = e.value;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  const auto& U = lu.matrixLU();
  double umax = 0.0, umin = kInf;
  for (int i = 0; i < m_; ++i) {
    umax = std::max(umax, std::abs(U(i, i)));
    umin = std::min(umin, std::abs(U(i, i)));
  }
  if (!(umin > 1e-13 * std::max(1.0, umax))) return false;
  const int block = 256;
  for (int c0 = 0; c0 < nv_; c0 += block) {
    const int nc = std::min(block, nv_ - c0);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m_, nc);
    for (int c = 0; c < nc; ++c)
      for (const auto& e : acol_[c0 + c]) A(e.index, c) = e.value;
    Eigen::MatrixXd X = lu.solve(A);
    for (int i = 0; i < m_; ++i)
      for (int c = 0; c < nc; ++c) {
        double val = X(i, c);
        T(i, c0 + c) = std::abs(val) < 1e-14 ? 0.0 : val;
      }
  }
  for (int i = 0; i < m_; ++i) {
    for (int k = 0; k < m_; ++k) T(k, head_[i]) = (k == i) ? 1.0 : 0.0;
  }
  recomputeBasicValues();
  return true;
}

LpStatus SimplexSolver::solve() {
  dualsPhase1_ = false;
  const double ptol = opt_.primalTol, dtol = opt_.dualTol;
  std::vector<double> pc(nv_, 0.0);
  int phase = 0;  // 0 = unknown
  long iter = 0;
  int degenerateRun = 0;
  int repairs = 0;

  for (;;) {
    if (iter >= opt_.maxIterations) return LpStatus::IterationLimit;
    if (pivotsSinceRefactor_ >= opt_.refactorEvery) {
      if (!refactor()) return LpStatus::NumericalFailure;
      phase = 0;
    }

    bool infeasible = false;
    std::fill(pc.begin(), pc.end(), 0.0);
    for (int i = 0; i < m_; ++i) {
      const int v = head_[i];
      if (x_[v] < lb_[v] - ptol) {
        pc[v] = 1.0;
        infeasible = true;
      } else if (x_[v] > ub_[v] + ptol) {
        pc[v] = -1.0;
        infeasible = true;
      }
    }
    if (infeasible) {
      computeReducedCosts(pc);
      phase = 1;
    } else if (phase != 2) {
      computeReducedCosts(cost_);
      phase = 2;
    }

    // Pricing.
    const bool bland = degenerateRun > opt_.blandAfter;
    int q = -1;
    double best = 0.0;
    int dir = 0;
    for (int v = 0; v < nv_; ++v) {
      const Status st = status_[v];
      if (st == Status::Basic || lb_[v] == ub_[v]) continue;
      const double dv = d_[v];
      int dv_dir = 0;
      if (dv > dtol && (st == Status::AtLower || st == Status::Free)) dv_dir = 1;
      else if (dv < -dtol && (st == Status::AtUpper || st == Status::Free)) dv_dir = -1;
      if (!dv_dir) continue;
      if (bland) {
        q = v;
        dir = dv_dir;
        break;
      }
      if (std::abs(dv) > best) {
        best = std::abs(dv);
        q = v;
        dir = dv_dir;
      }
    }

    if (q < 0) {
      if (residual() > 1e-7 && repairs < 3) {
        ++repairs;
        if (!refactor()) return LpStatus::NumericalFailure;
        phase = 0;
        continue;
      }
      if (phase == 1) {
        dualsPhase1_ = true;
        phase1Cost_ = pc;
        return LpStatus::Infeasible;
      }
      return LpStatus::Optimal;
    }

    // Ratio test (Harris two-pass, breakpoints at violated bounds in phase 1).
    auto target = [&](int i, double rate, double& bound) -> bool {
      const int v = head_[i];
      if (pc[v] > 0) {
        if (rate <= 0) return false;
        bound = lb_[v];
        return true;
      }
      if (pc[v] < 0) {
        if (rate >= 0) return false;
        bound = ub_[v];
        return true;
      }
      bound = rate > 0 ? ub_[v] : lb_[v];
      return std::isfinite(bound);
    };

    double thetaMax = kInf;
    for (int i = 0; i < m_; ++i) {
      const double a = T(i, q);
      if (std::abs(a) < opt_.pivotTol) continue;
      const double rate = -a * dir;
      double bound;
      if (!target(i, rate, bound)) continue;
      const double xv = x_[head_[i]];
      const double r = rate > 0 ? (bound + ptol - xv) / rate : (bound - ptol - xv) / rate;
      thetaMax = std::min(thetaMax, bland ? (bound - xv) / rate : r);
    }
    const double thetaFlip = (std::isfinite(lb_[q]) && std::isfinite(ub_[q])) ? ub_[q] - lb_[q] : kInf;

    if (!std::isfinite(thetaMax) && !std::isfinite(thetaFlip)) {
      if (phase == 2) return LpStatus::Unbounded;
      if (!refactor() || ++repairs > 3) return LpStatus::NumericalFailure;
      phase = 0;
      continue;
    }

    ++iter;
    ++totalIterations_;

    if (thetaFlip <= thetaMax) {
      const double step = thetaFlip * dir;
      x_[q] += step;
      status_[q] = dir > 0 ? Status::AtUpper : Status::AtLower;
      x_[q] = dir > 0 ? ub_[q] : lb_[q];
      for (int i = 0; i < m_; ++i) {
        const double a = T(i, q);
        if (a != 0.0) x_[head_[i]] -= a * step;
      }
      degenerateRun = 0;
      continue;
    }

    int p = -1;
    double pBound = 0.0, pRatio = 0.0, pMag = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double a = T(i, q);
      if (std::abs(a) < opt_.pivotTol) continue;
      const double rate = -a * dir;
      double bound;
      if (!target(i, rate, bound)) continue;
      const double ratio = (bound - x_[head_[i]]) / rate;
      if (ratio > thetaMax) continue;
      bool better;
      if (bland)
        better = p < 0 || ratio < pRatio - 1e-15 || (std::abs(ratio - pRatio) <= 1e-15 && head_[i] < head_[p]);
      else
        better = std::abs(a) > pMag;
      if (better) {
        p = i;
        pBound = bound;
        pRatio = ratio;
        pMag = std::abs(a);
      }
    }
    if (p < 0) {
      if (!refactor() || ++repairs > 3) return LpStatus::NumericalFailure;
      phase = 0;
      continue;
    }

    const double theta = std::max(0.0, pRatio);
    degenerateRun = theta <= 1e-12 ? degenerateRun + 1 : 0;
    const double step = theta * dir;
    if (step != 0.0) {
      for (int i = 0; i < m_; ++i) {
        const double a = T(i, q);
        if (a != 0.0) x_[head_[i]] -= a * step;
      }
    }
    x_[q] += step;
    const int leaving = head_[p];
    x_[leaving] = pBound;
    status_[leaving] = (pBound == lb_[leaving]) ? Status::AtLower : Status::AtUpper;
    pivot(p, q);
  }
}

LpResult solveLp(const LpModel& model) {
  SimplexSolver s;
  const double sign = model.maximize ? 1.0 : -1.0;
  for (const auto& row : model.rows) s.addRow({}, row.lo, row.hi);
  std::vector<std::vector<SparseEntry>> cols(model.lb.size());
  for (int r = 0; r < static_cast<int>(model.rows.size()); ++r)
    for (const auto& e : model.rows[r].entries) cols.at(e.index).push_back({r, e.value});
  for (std::size_t j = 0; j < model.lb.size(); ++j) s.addColumn(model.lb[j], model.ub[j], sign * model.obj[j], cols[j]);
  LpResult res;
  res.status = s.solve();
  res.iterations = s.iterations();
  res.x.resize(model.lb.size());
  for (std::size_t j = 0; j < model.lb.size(); ++j) res.x[j] = s.value(static_cast<int>(j));
  res.rowDuals.resize(model.rows.size());
  for (std::size_t r = 0; r < model.rows.size(); ++r) res.rowDuals[r] = sign * s.rowDual(static_cast<int>(r));
  res.objective = sign * s.objective();
  return res;
}

}  // namespace veil::opt
