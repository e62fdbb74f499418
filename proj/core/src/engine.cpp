#include "veil/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace veil::opt {

const char* engineStatusName(EngineStatus status) {
  switch (status) {
    case EngineStatus::Converged: return "converged";
    case EngineStatus::AboveTarget: return "above-target";
    case EngineStatus::BelowTarget: return "below-target";
    case EngineStatus::Infeasible: return "infeasible";
    case EngineStatus::IterationLimit: return "iteration-limit";
    case EngineStatus::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

namespace {

constexpr double kNuFloor = 1e-12;
constexpr double kImpliedTol = 1e-9;

}  // namespace

ConcaveMaximizer::ConcaveMaximizer(const SynthesisProgram& program, EngineOptions options)
    : prog_(&program), opt_(options), oracle_(program.flow()) {
  program.validate();
  const int n = static_cast<int>(program.numVariables());
  const auto& vars = program.variables();
  const auto& rows = program.constraints();

  std::vector<bool> frozen(n, false);
  for (int v : program.flow().frozenVars) frozen[v] = true;
  auto isLam = [&](int v) { return program.isOccupancy(v) && !frozen[v]; };

  derivedOf_.assign(n, -1);
  masterVar_.assign(n, -1);
  lamToDerived_.assign(n, {});

  auto identity = [&](int v) {
    if (derivedOf_[v] < 0) {
      derivedOf_[v] = static_cast<int>(defs_.size());
      defs_.push_back({v, 0.0, {{v, 1.0}}});
    }
    return derivedOf_[v];
  };

  // Eliminate continuous variables defined by an equality row over
  // occupancies and previously eliminated variables.
  std::vector<bool> consumed(rows.size(), false);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (consumed[r] || row.kind != RowKind::Linking || row.lo != row.hi || !std::isfinite(row.lo)) continue;
      int target = -1;
      double coef = 0.0;
      bool ok = true;
      for (const auto& t : row.terms) {
        if (frozen[t.index] || isLam(t.index) || derivedOf_[t.index] >= 0) continue;
        if (target >= 0 || vars[t.index].kind != VarKind::Continuous) {
          ok = false;
          break;
        }
        target = t.index;
        coef = t.value;
      }
      if (!ok || target < 0) continue;
      Def def{target, row.lo / coef, {}};
      std::vector<SparseEntry> lam;
      for (const auto& t : row.terms) {
        if (t.index == target || frozen[t.index]) continue;
        const double c = -t.value / coef;
        if (int d = derivedOf_[t.index]; d >= 0) {
          def.constant += c * defs_[d].constant;
          for (const auto& e : defs_[d].lam) lam.push_back({e.index, c * e.value});
        } else {
          lam.push_back({t.index, c});
        }
      }
      std::sort(lam.begin(), lam.end(), [](auto& a, auto& b) { return a.index < b.index; });
      for (const auto& e : lam) {
        if (!def.lam.empty() && def.lam.back().index == e.index)
          def.lam.back().value += e.value;
        else
          def.lam.push_back(e);
      }
      derivedOf_[target] = static_cast<int>(defs_.size());
      defs_.push_back(std::move(def));
      consumed[r] = true;
      changed = true;
    }
  }

  std::vector<bool> referenced(n, false);
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (!consumed[r] && rows[r].kind != RowKind::Flow)
      for (const auto& t : rows[r].terms) referenced[t.index] = true;
  for (int v : program.entropyTerms()) referenced[v] = true;
  for (const auto& b : program.blocks())
    for (int v : b.vars)
      if (vars[v].lb < vars[v].ub) referenced[v] = true;

  constant_.assign(n, 0.0);
  for (int v = 0; v < n; ++v)
    if (!frozen[v] && !isLam(v) && derivedOf_[v] < 0 && !referenced[v])
      constant_[v] = std::clamp(0.0, vars[v].lb, vars[v].ub);
  for (int v = 0; v < n; ++v)
    if (!frozen[v] && !isLam(v) && derivedOf_[v] < 0 && referenced[v]) {
      masterVar_[v] = static_cast<int>(masterProgVar_.size());
      masterProgVar_.push_back(v);
      mlb_.push_back(vars[v].lb);
      mub_.push_back(vars[v].ub);
    }

  auto addMasterRow = [&](const std::vector<SparseEntry>& terms, double lo, double hi, RowKind kind) {
    MasterRow mr{kind, {}, {}, lo, hi};
    for (const auto& t : terms) {
      if (frozen[t.index]) continue;
      if (masterVar_[t.index] >= 0)
        mr.aux.push_back({masterVar_[t.index], t.value});
      else
        mr.derived.push_back({isLam(t.index) ? identity(t.index) : derivedOf_[t.index], t.value});
    }
    rows_.push_back(std::move(mr));
  };
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (!consumed[r] && rows[r].kind != RowKind::Flow) addMasterRow(rows[r].terms, rows[r].lo, rows[r].hi, rows[r].kind);
  // Bounds of eliminated variables that the occupancy polytope does not imply.
  const std::size_t nDefs = defs_.size();
  for (std::size_t d = 0; d < nDefs; ++d) {
    const int v = defs_[d].var;
    if (isLam(v)) continue;
    double lo = vars[v].lb, hi = vars[v].ub;
    if (!std::isfinite(lo) && !std::isfinite(hi)) continue;
    // Drop the sides that every occupancy vertex already satisfies.
    std::vector<double> reward(n, 0.0);
    for (const auto& e : defs_[d].lam) reward[e.index] = e.value;
    if (std::isfinite(hi) && defs_[d].constant + oracle_.maximize(reward).value <= hi + kImpliedTol) hi = kInf;
    for (double& r : reward) r = -r;
    if (std::isfinite(lo) && defs_[d].constant - oracle_.maximize(reward).value >= lo - kImpliedTol) lo = -kInf;
    if (std::isfinite(lo) || std::isfinite(hi)) addMasterRow({{v, 1.0}}, lo, hi, RowKind::Linking);
  }

  const auto& ent = program.entropyTerms();
  entropyDerived_.assign(ent.size(), -1);
  entropyMaster_.assign(ent.size(), -1);
  for (std::size_t i = 0; i < ent.size(); ++i) {
    const int v = ent[i];
    if (frozen[v]) continue;
    if (masterVar_[v] >= 0)
      entropyMaster_[i] = masterVar_[v];
    else
      entropyDerived_[i] = isLam(v) ? identity(v) : derivedOf_[v];
  }
  derivedEntropy_.assign(defs_.size(), -1);
  for (std::size_t i = 0; i < ent.size(); ++i)
    if (entropyDerived_[i] >= 0) derivedEntropy_[entropyDerived_[i]] = static_cast<int>(i);

  derivedRows_.assign(defs_.size(), {});
  for (std::size_t k = 0; k < rows_.size(); ++k)
    for (const auto& e : rows_[k].derived) derivedRows_[e.index].push_back({static_cast<int>(k), e.value});
  for (std::size_t d = 0; d < defs_.size(); ++d) {
    if (derivedRows_[d].empty() && derivedEntropy_[d] < 0) continue;
    for (const auto& e : defs_[d].lam) lamToDerived_[e.index].push_back({static_cast<int>(d), e.value});
  }

  Cut initial;
  initial.grad.assign(ent.size(), std::log2(static_cast<double>(ent.size())));
  cuts_.push_back(std::move(initial));
  buildLp();
  auto seed = oracle_.maximize(std::vector<double>(n, 0.0));
  addColumnFromVertex(std::move(seed.choice), seed.occupancy);
}

ConcaveMaximizer::~ConcaveMaximizer() = default;

void ConcaveMaximizer::addVertices(const std::vector<std::vector<std::int8_t>>& choices) {
  for (const auto& c : choices) addColumnFromVertex(c, oracle_.occupancy(c));
}

std::vector<std::vector<std::int8_t>> ConcaveMaximizer::vertices() const {
  std::vector<std::vector<std::int8_t>> out;
  for (const auto& c : cols_) out.push_back(c.choice);
  return out;
}

bool ConcaveMaximizer::inMaster(int var) const { return masterVar_.at(var) >= 0; }

void ConcaveMaximizer::setBounds(int var, double lb, double ub) {
  const int m = masterVar_.at(var);
  if (m < 0) throw ProgramError(fmt::format("variable {} is eliminated and cannot be rebounded", var));
  mlb_[m] = lb;
  mub_[m] = ub;
  lp_->setColumnBounds(auxLp_[m], lb, ub);
}

void ConcaveMaximizer::restoreBounds(int var) {
  const auto& v = prog_->variables().at(var);
  setBounds(var, v.lb, v.ub);
}

void ConcaveMaximizer::setRegionActive(bool active) {
  regionActive_ = active;
  for (const auto& r : rows_)
    if (r.kind == RowKind::Region) lp_->setRowBounds(r.lp, active ? r.lo : -kInf, active ? r.hi : kInf);
}

void ConcaveMaximizer::buildLp() {
  lp_ = std::make_unique<SimplexSolver>();
  ++stats_.rebuilds;
  for (auto& r : rows_) {
    const bool off = r.kind == RowKind::Region && !regionActive_;
    r.lp = lp_->addRow({}, off ? -kInf : r.lo, off ? kInf : r.hi);
  }
  convLp_ = lp_->addRow({}, 1.0, 1.0);
  for (auto& c : cuts_) c.lp = lp_->addRow({}, -kInf, 0.0);

  std::vector<std::vector<SparseEntry>> auxEntries(masterProgVar_.size());
  for (const auto& r : rows_)
    for (const auto& e : r.aux) auxEntries[e.index].push_back({r.lp, e.value});
  for (std::size_t i = 0; i < entropyMaster_.size(); ++i)
    if (int m = entropyMaster_[i]; m >= 0)
      for (const auto& c : cuts_) auxEntries[m].push_back({c.lp, -c.grad[i]});
  auxLp_.resize(masterProgVar_.size());
  for (std::size_t m = 0; m < masterProgVar_.size(); ++m) auxLp_[m] = lp_->addColumn(mlb_[m], mub_[m], 0.0, auxEntries[m]);

  std::vector<SparseEntry> tauEntries;
  for (const auto& c : cuts_) tauEntries.push_back({c.lp, 1.0});
  tauLp_ = lp_->addColumn(-kInf, kInf, 0.0, tauEntries);

  for (auto& r : rows_) {
    if (r.kind != RowKind::Target) continue;
    const SparseEntry up{r.lp, 1.0}, down{r.lp, -1.0};
    r.slackLo = std::isfinite(r.lo) ? lp_->addColumn(0.0, 0.0, 0.0, std::span(&up, 1)) : -1;
    r.slackHi = std::isfinite(r.hi) ? lp_->addColumn(0.0, 0.0, 0.0, std::span(&down, 1)) : -1;
  }
  for (auto& c : cols_) pushColumn(c);
  costsDirty_ = true;
}

int ConcaveMaximizer::addColumnFromVertex(std::vector<std::int8_t> choice, const std::vector<SparseEntry>& occ) {
  Column col;
  col.choice = std::move(choice);
  std::vector<double> dacc(defs_.size(), 0.0);
  std::vector<int> touched;
  auto bump = [&](int d, double v) {
    if (dacc[d] == 0.0) touched.push_back(d);
    dacc[d] += v;
    if (dacc[d] == 0.0) dacc[d] = 1e-300;
  };
  for (const auto& o : occ)
    for (const auto& e : lamToDerived_[o.index]) bump(e.index, e.value * o.value);
  for (std::size_t d = 0; d < defs_.size(); ++d)
    if (defs_[d].constant != 0.0 && (!derivedRows_[d].empty() || derivedEntropy_[d] >= 0))
      bump(static_cast<int>(d), defs_[d].constant);
  std::sort(touched.begin(), touched.end());
  std::vector<double> pacc(rows_.size(), 0.0);
  for (int d : touched) {
    const double v = dacc[d];
    if (std::abs(v) < 1e-200) continue;
    col.dval.push_back({d, v});
    if (derivedEntropy_[d] >= 0) col.ent.push_back({derivedEntropy_[d], v});
    for (const auto& e : derivedRows_[d]) pacc[e.index] += e.value * v;
  }
  for (std::size_t k = 0; k < rows_.size(); ++k)
    if (pacc[k] != 0.0) col.proj.push_back({static_cast<int>(k), pacc[k]});
  cols_.push_back(std::move(col));
  pushColumn(cols_.back());
  ++stats_.columns;
  return static_cast<int>(cols_.size()) - 1;
}

void ConcaveMaximizer::pushColumn(Column& c) {
  std::vector<SparseEntry> entries;
  entries.reserve(c.proj.size() + cuts_.size() + 1);
  for (const auto& e : c.proj) entries.push_back({rows_[e.index].lp, e.value});
  entries.push_back({convLp_, 1.0});
  for (const auto& cut : cuts_) {
    double a = 0.0;
    for (const auto& e : c.ent) a -= cut.grad[e.index] * e.value;
    entries.push_back({cut.lp, a});
  }
  c.lp = lp_->addColumn(0.0, kInf, columnCost(c), entries);
}

void ConcaveMaximizer::addCut(const std::vector<double>& nu) {
  Cut cut;
  double s = 0.0;
  for (double v : nu) s += std::max(v, kNuFloor);
  cut.grad.resize(nu.size());
  for (std::size_t i = 0; i < nu.size(); ++i) cut.grad[i] = -std::log2(std::max(nu[i], kNuFloor) / s);
  cut.lastActive = iter_;
  cuts_.push_back(std::move(cut));
  pushCut(cuts_.back());
  ++stats_.cuts;
}

void ConcaveMaximizer::pushCut(Cut& cut) {
  std::vector<SparseEntry> entries;
  entries.push_back({tauLp_, 1.0});
  for (std::size_t i = 0; i < entropyMaster_.size(); ++i)
    if (int m = entropyMaster_[i]; m >= 0) entries.push_back({auxLp_[m], -cut.grad[i]});
  for (const auto& c : cols_) {
    double a = 0.0;
    for (const auto& e : c.ent) a -= cut.grad[e.index] * e.value;
    if (a != 0.0) entries.push_back({c.lp, a});
  }
  cut.lp = lp_->addRow(entries, -kInf, 0.0);
}

double ConcaveMaximizer::columnCost(const Column& c) const {
  if (mode_ != Mode::Entropy) return 0.0;
  double s = 0.0;
  for (const auto& e : c.ent) s += e.value;
  return -theta_ * s;
}

void ConcaveMaximizer::applyCosts() {
  const bool entropy = mode_ == Mode::Entropy;
  lp_->setCost(tauLp_, entropy ? 1.0 : 0.0);
  for (std::size_t m = 0; m < masterProgVar_.size(); ++m) lp_->setCost(auxLp_[m], 0.0);
  for (int m : entropyMaster_)
    if (m >= 0) lp_->setCost(auxLp_[m], entropy ? -theta_ : 0.0);
  for (const auto& c : cols_) lp_->setCost(c.lp, columnCost(c));
  for (const auto& r : rows_)
    for (int s : {r.slackLo, r.slackHi})
      if (s >= 0) {
        lp_->setCost(s, entropy ? 0.0 : -1.0);
        lp_->setColumnBounds(s, 0.0, entropy ? 0.0 : kInf);
      }
  costsDirty_ = false;
}

std::vector<double> ConcaveMaximizer::entropyValues(std::vector<double>* weights) const {
  std::vector<double> nu(entropyMaster_.size(), 0.0);
  for (std::size_t i = 0; i < nu.size(); ++i)
    if (entropyMaster_[i] >= 0) nu[i] = lp_->value(auxLp_[entropyMaster_[i]]);
  for (std::size_t j = 0; j < cols_.size(); ++j) {
    const double w = (*weights)[j];
    if (w <= 0.0) continue;
    for (const auto& e : cols_[j].ent) nu[e.index] += w * e.value;
  }
  for (double& v : nu) v = std::max(v, 0.0);
  return nu;
}

double ConcaveMaximizer::pricing(bool phase1, FlowOracle::Vertex* best) {
  std::vector<double> price(defs_.size(), 0.0);
  for (const auto& r : rows_) {
    const double pi = lp_->rowDual(r.lp);
    if (pi == 0.0) continue;
    for (const auto& e : r.derived) price[e.index] -= pi * e.value;
  }
  for (auto& cut : cuts_) {
    const double pi = lp_->rowDual(cut.lp);
    if (pi == 0.0) continue;
    cut.lastActive = iter_;
    for (std::size_t i = 0; i < entropyDerived_.size(); ++i)
      if (entropyDerived_[i] >= 0) price[entropyDerived_[i]] += pi * cut.grad[i];
  }
  if (!phase1 && mode_ == Mode::Entropy)
    for (int d : entropyDerived_)
      if (d >= 0) price[d] -= theta_;
  std::vector<double> reward(prog_->numVariables(), 0.0);
  double c0 = -lp_->rowDual(convLp_);
  for (std::size_t d = 0; d < defs_.size(); ++d) {
    if (price[d] == 0.0) continue;
    c0 += price[d] * defs_[d].constant;
    for (const auto& e : defs_[d].lam) reward[e.index] += price[d] * e.value;
  }
  *best = oracle_.maximize(reward);
  return best->value + c0;
}

std::vector<double> ConcaveMaximizer::reconstruct(const std::vector<double>& weights,
                                                  const std::vector<double>& aux) const {
  std::vector<double> x = constant_;
  for (std::size_t m = 0; m < masterProgVar_.size(); ++m) x[masterProgVar_[m]] = aux[m];
  double wsum = 0.0;
  for (std::size_t j = 0; j < cols_.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    wsum += weights[j];
    for (const auto& o : oracle_.occupancy(cols_[j].choice)) x[o.index] += weights[j] * o.value;
  }
  fillDerived(x, wsum);
  return x;
}

void ConcaveMaximizer::fillDerived(std::vector<double>& x, double weight) const {
  for (const auto& d : defs_) {
    if (d.lam.size() == 1 && d.lam[0].index == d.var && d.constant == 0.0) continue;
    double v = d.constant * weight;
    for (const auto& e : d.lam) v += e.value * x[e.index];
    x[d.var] = v;
  }
}

std::vector<double> ConcaveMaximizer::vertexPoint(const std::vector<std::int8_t>& choice) const {
  std::vector<double> x = constant_;
  for (std::size_t m = 0; m < masterProgVar_.size(); ++m) x[masterProgVar_[m]] = std::clamp(0.0, mlb_[m], mub_[m]);
  for (const auto& o : oracle_.occupancy(choice)) x[o.index] += o.value;
  fillDerived(x, 1.0);
  return x;
}

void ConcaveMaximizer::compact(const std::vector<double>& weights) {
  std::vector<std::size_t> order(cols_.size());
  std::iota(order.begin(), order.end(), 0);
  if (cols_.size() > opt_.columnLimit) {
    std::vector<bool> keep(cols_.size(), false);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return a > b; });
    std::size_t kept = 0;
    for (std::size_t j = 0; j < cols_.size(); ++j)
      if (weights[j] > 0.0 || lp_->isBasic(cols_[j].lp)) {
        keep[j] = true;
        ++kept;
      }
    for (std::size_t j : order) {
      if (kept >= opt_.columnLimit / 2) break;
      if (!keep[j]) {
        keep[j] = true;
        ++kept;
      }
    }
    std::vector<Column> next;
    for (std::size_t j = 0; j < cols_.size(); ++j)
      if (keep[j]) next.push_back(std::move(cols_[j]));
    cols_ = std::move(next);
  }
  if (cuts_.size() > opt_.cutLimit) {
    std::stable_sort(cuts_.begin() + 1, cuts_.end(), [](const Cut& a, const Cut& b) { return a.lastActive > b.lastActive; });
    cuts_.resize(opt_.cutLimit / 2);
  }
  buildLp();
  applyCosts();
}

ConcaveResult ConcaveMaximizer::run(Mode mode, double theta, double stopAbove, double stopBelow) {
  if (mode != mode_ || theta != theta_) {
    mode_ = mode;
    theta_ = theta;
    costsDirty_ = true;
  }
  if (costsDirty_) applyCosts();

  ConcaveResult res;
  double upper = kInf;
  double bestLower = -kInf;
  std::vector<double> bestPoint;
  bool retried = false;
  const bool entropy = mode == Mode::Entropy;

  auto finish = [&](EngineStatus status) {
    res.status = status;
    res.lower = bestLower;
    res.upper = upper;
    res.point = std::move(bestPoint);
    if (!entropy && std::isfinite(bestLower)) res.violation = -bestLower;
    return res;
  };

  for (int it = 0; it < opt_.maxIterations; ++it) {
    ++iter_;
    res.iterations = it + 1;
    const long before = lp_->iterations();
    const LpStatus st = lp_->solve();
    ++stats_.masterSolves;
    stats_.simplexIterations += lp_->iterations() - before;
    if (st == LpStatus::NumericalFailure || st == LpStatus::IterationLimit || st == LpStatus::Unbounded) {
      if (retried) return finish(EngineStatus::NumericalFailure);
      retried = true;
      buildLp();
      applyCosts();
      continue;
    }
    FlowOracle::Vertex vx;
    if (st == LpStatus::Infeasible) {
      const double rc = pricing(true, &vx);
      if (rc <= opt_.pricingTol) {
        res.violation = lp_->primalInfeasibility();
        auto out = finish(EngineStatus::Infeasible);
        out.violation = res.violation;
        return out;
      }
      addColumnFromVertex(std::move(vx.choice), vx.occupancy);
      continue;
    }

    std::vector<double> w(cols_.size());
    for (std::size_t j = 0; j < cols_.size(); ++j) w[j] = std::max(0.0, lp_->value(cols_[j].lp));
    const auto nu = entropyValues(&w);
    const double f1 = entropyNumerator(nu);
    const double f2 = entropyDenominator(nu);
    const double lpObj = lp_->objective();
    const double lower = entropy ? f1 - theta * f2 : lpObj;
    if (lower > bestLower) {
      bestLower = lower;
      std::vector<double> aux(masterProgVar_.size());
      for (std::size_t m = 0; m < aux.size(); ++m) aux[m] = lp_->value(auxLp_[m]);
      bestPoint = reconstruct(w, aux);
    }
    if (bestLower >= stopAbove) return finish(EngineStatus::AboveTarget);

    const double rc = pricing(false, &vx);
    upper = std::min(upper, lpObj + std::max(0.0, rc));
    if (upper < stopBelow) return finish(EngineStatus::BelowTarget);
    if (upper - bestLower <= opt_.convTol) return finish(EngineStatus::Converged);

    bool added = false;
    if (rc > opt_.pricingTol) {
      addColumnFromVertex(std::move(vx.choice), vx.occupancy);
      added = true;
    }
    if (entropy) {
      const double tau = lp_->value(tauLp_);
      if (tau - f1 > 1e-10 * std::max(1.0, std::abs(f1))) {
        addCut(nu);
        added = true;
      }
    }
    if (!added) {
      upper = std::min(upper, std::max(bestLower, lpObj));
      return finish(EngineStatus::Converged);
    }
    if (cols_.size() > opt_.columnLimit || cuts_.size() > opt_.cutLimit) {
      w.resize(cols_.size(), 0.0);
      compact(w);
    }
  }
  return finish(EngineStatus::IterationLimit);
}

ConcaveResult ConcaveMaximizer::maximize(double theta, double stopAbove, double stopBelow) {
  return run(Mode::Entropy, theta, stopAbove, stopBelow);
}

ConcaveResult ConcaveMaximizer::minimizeViolation() { return run(Mode::Elastic, theta_, kInf, -kInf); }

}  // namespace veil::opt
