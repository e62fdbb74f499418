#include "veil/search.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace veil::opt {

namespace {

constexpr double kIntTol = 1e-7;
constexpr double kTieTol = 1e-7;
constexpr std::size_t kPoolLimit = 4000;

bool isIntegral(double v) { return std::min(std::abs(v), std::abs(1.0 - v)) <= kIntTol; }

void accumulate(EngineStats& into, const EngineStats& s) {
  into.masterSolves += s.masterSolves;
  into.simplexIterations += s.simplexIterations;
  into.columns += s.columns;
  into.cuts += s.cuts;
  into.rebuilds += s.rebuilds;
}

}  // namespace

struct FeasibilitySearch::Fixed {
  SynthesisProgram program;
  std::unique_ptr<ConcaveMaximizer> engine;
};

FeasibilitySearch::FeasibilitySearch(const SynthesisProgram& program, SearchOptions options)
    : prog_(&program), opt_(options), engine_(program, options.engine), rng_(options.seed) {
  std::set<int> inCandidate;
  for (const auto& b : program.blocks())
    if (b.kind == BlockKind::Candidate) inCandidate.insert(b.vars.begin(), b.vars.end());
  const auto& vars = program.variables();
  for (int v = 0; v < static_cast<int>(vars.size()); ++v) {
    if (vars[v].kind != VarKind::Binary || vars[v].lb >= vars[v].ub) continue;
    binaries_.push_back(v);
    (inCandidate.count(v) ? candidates_ : selectors_).push_back(v);
  }
}

FeasibilitySearch::~FeasibilitySearch() = default;

EngineStats FeasibilitySearch::engineStats() const {
  EngineStats s = engine_.stats();
  accumulate(s, fixedStats_);
  return s;
}

void FeasibilitySearch::resetBinaries() {
  for (int v : binaries_) engine_.restoreBounds(v);
  engine_.setRegionActive(true);
}

void FeasibilitySearch::fix(const Assignment& a) {
  for (auto [v, val] : a) engine_.setBounds(v, val, val);
}

std::unique_ptr<FeasibilitySearch::Fixed> FeasibilitySearch::buildFixed(const Assignment& a) {
  auto presolved = fixVariables(*prog_, a);
  if (!presolved) return nullptr;
  auto f = std::make_unique<Fixed>();
  f->program = std::move(*presolved);
  f->engine = std::make_unique<ConcaveMaximizer>(f->program, opt_.engine);
  f->engine->addVertices(pool_);
  return f;
}

void FeasibilitySearch::retire(std::unique_ptr<Fixed> f) {
  if (!f) return;
  for (auto& c : f->engine->vertices())
    if (pool_.size() < kPoolLimit && poolIndex_.insert(c).second) pool_.push_back(std::move(c));
  accumulate(fixedStats_, f->engine->stats());
}

FeasibilitySearch::Attempt FeasibilitySearch::tryAssignment(const Assignment& a, double theta) {
  Attempt at;
  auto f = buildFixed(a);
  if (!f) {
    at.presolved = false;
    return at;
  }
  ++solves_;
  at.result = f->engine->maximize(theta, -opt_.feasTol, -opt_.feasTol);
  at.feasible = at.result.lower >= -opt_.feasTol && !at.result.point.empty();
  retire(std::move(f));
  return at;
}

FeasibilitySearch::Assignment FeasibilitySearch::fromPoint(const std::vector<double>& point) const {
  Assignment a;
  for (int v : binaries_) a.push_back({v, point[v] >= 0.5 ? 1.0 : 0.0});
  return a;
}

void FeasibilitySearch::completeOutputs(std::vector<double>& point) const {
  for (const auto& b : prog_->blocks()) {
    if (b.output < 0) continue;
    if (b.kind == BlockKind::OneHot) {
      double best = -kInf;
      for (const auto& s : b.selectors) best = std::max(best, s.eval(point));
      point[b.output] = best;
    } else if (b.kind == BlockKind::Threshold) {
      point[b.output] = std::max(0.0, b.selectors[0].eval(point) - b.threshold);
    }
  }
}

double FeasibilitySearch::targetViolation(const std::vector<double>& point) const {
  double v = 0.0;
  for (const auto& r : prog_->constraints()) {
    if (r.kind != RowKind::Target) continue;
    double a = 0.0;
    for (const auto& t : r.terms) a += t.value * point[t.index];
    v += std::max(0.0, r.lo - a) + std::max(0.0, a - r.hi);
  }
  return v;
}

FeasibilitySearch::Assignment FeasibilitySearch::select(const std::vector<double>& point, const Assignment* current,
                                                        bool includeCandidates, std::mt19937_64* rng) const {
  std::vector<double> cur(prog_->numVariables(), -1.0);
  if (current)
    for (auto [v, val] : *current) cur[v] = val;
  const auto& vars = prog_->variables();
  auto isFree = [&](int v) { return vars[v].lb < vars[v].ub; };
  // Selector identity: the variable of a single-term selector, so blocks
  // reading the same quantity can share a selection.
  auto keyOf = [](const LinearExpr& e, int fallback) {
    return e.terms.size() == 1 && e.constant == 0.0 && e.terms[0].value == 1.0 ? e.terms[0].index : -1 - fallback;
  };

  const auto& blocks = prog_->blocks();
  std::vector<int> pick(blocks.size(), -1);
  std::vector<std::vector<int>> ties(blocks.size());
  std::map<int, int> chosenKeys;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    if (b.kind != BlockKind::OneHot) continue;
    double best = -kInf;
    for (const auto& s : b.selectors) best = std::max(best, s.eval(point));
    for (std::size_t k = 0; k < b.vars.size(); ++k) {
      if (b.selectors[k].eval(point) < best - kTieTol) continue;
      ties[bi].push_back(static_cast<int>(k));
      if (!rng && cur[b.vars[k]] == 1.0) pick[bi] = static_cast<int>(k);
    }
    if (ties[bi].size() == 1) pick[bi] = ties[bi][0];
    if (pick[bi] >= 0) ++chosenKeys[keyOf(b.selectors[pick[bi]], static_cast<int>(bi * 4096 + pick[bi]))];
  }
  // Greedy cover of the remaining tie sets.
  for (;;) {
    std::map<int, std::vector<std::pair<std::size_t, int>>> cover;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      if (blocks[bi].kind != BlockKind::OneHot || pick[bi] >= 0) continue;
      for (int k : ties[bi]) cover[keyOf(blocks[bi].selectors[k], static_cast<int>(bi * 4096 + k))].push_back({bi, k});
    }
    if (cover.empty()) break;
    std::vector<int> bestKeys;
    std::pair<std::size_t, int> bestScore{0, -1};
    for (const auto& [key, members] : cover) {
      const auto score = std::make_pair(members.size(), chosenKeys.count(key) ? 1 : 0);
      if (score > bestScore) {
        bestScore = score;
        bestKeys.clear();
      }
      if (score == bestScore) bestKeys.push_back(key);
    }
    int key = bestKeys.front();
    if (rng) key = bestKeys[std::uniform_int_distribution<std::size_t>(0, bestKeys.size() - 1)(*rng)];
    for (auto [bi, k] : cover[key]) pick[bi] = k;
    ++chosenKeys[key];
  }

  Assignment out;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    if (b.kind == BlockKind::Candidate && !includeCandidates) continue;
    if (b.kind == BlockKind::OneHot) {
      for (std::size_t k = 0; k < b.vars.size(); ++k)
        if (isFree(b.vars[k])) out.push_back({b.vars[k], static_cast<int>(k) == pick[bi] ? 1.0 : 0.0});
      continue;
    }
    for (std::size_t k = 0; k < b.vars.size(); ++k) {
      if (!isFree(b.vars[k])) continue;
      const double s = b.selectors[k].eval(point) - b.threshold;
      double val = s >= 0.0 ? 1.0 : 0.0;
      if (std::abs(s) <= kTieTol && cur[b.vars[k]] >= 0.0) val = cur[b.vars[k]];
      out.push_back({b.vars[k], val});
    }
  }
  return out;
}

FeasibilityResult FeasibilitySearch::accept(const ConcaveResult& r) {
  FeasibilityResult out;
  out.verdict = Verdict::Feasible;
  out.witness = r.point;
  for (int v : binaries_) out.witness[v] = out.witness[v] >= 0.5 ? 1.0 : 0.0;
  out.gap = r.lower;
  hint_ = out.witness;
  return out;
}

std::optional<FeasibilityResult> FeasibilitySearch::branchAndBound(double theta, const std::vector<double>& rootPoint,
                                                                   bool* complete) {
  struct Node {
    Assignment fixed;
  };
  // Branch on candidate binaries before selector binaries, 1-branch first.
  std::vector<int> order = candidates_;
  order.insert(order.end(), selectors_.begin(), selectors_.end());
  std::vector<Node> stack;
  stack.push_back({});
  *complete = true;
  bool first = true;
  while (!stack.empty()) {
    if (nodes_ >= opt_.nodeBudget) {
      *complete = false;
      return std::nullopt;
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    ++nodes_;
    std::vector<double> point;
    if (first) {
      point = rootPoint;
      first = false;
    } else {
      resetBinaries();
      fix(node.fixed);
      ++solves_;
      auto r = engine_.maximize(theta, -opt_.feasTol, -opt_.feasTol);
      if (r.status == EngineStatus::Infeasible || r.status == EngineStatus::BelowTarget) continue;
      if (r.point.empty()) {
        *complete = false;
        continue;
      }
      if (r.status != EngineStatus::AboveTarget && r.status != EngineStatus::Converged) *complete = false;
      point = std::move(r.point);
      if (r.lower >= -opt_.feasTol &&
          std::all_of(binaries_.begin(), binaries_.end(), [&](int v) { return isIntegral(point[v]); }))
        return accept({EngineStatus::AboveTarget, r.lower, r.upper, point, 0.0, 0});
      if (r.lower < -opt_.feasTol && r.status == EngineStatus::Converged) continue;
    }
    // Rounding through the block rules.
    std::vector<double> fixedVal(prog_->numVariables(), -1.0);
    for (auto [v, val] : node.fixed) fixedVal[v] = val;
    if (node.fixed.size() < binaries_.size()) {
      auto completed = point;
      completeOutputs(completed);
      auto rounded = select(completed, nullptr, true);
      for (auto& [v, val] : rounded)
        if (fixedVal[v] >= 0.0) val = fixedVal[v];
      if (auto at = tryAssignment(rounded, theta); at.feasible) return accept(at.result);
    }

    int branchVar = -1;
    for (int v : order)
      if (fixedVal[v] < 0.0 && !isIntegral(point[v])) {
        branchVar = v;
        break;
      }
    if (branchVar < 0)
      for (int v : order)
        if (fixedVal[v] < 0.0) {
          branchVar = v;
          break;
        }
    if (branchVar < 0) continue;
    Node zero = node, one = std::move(node);
    zero.fixed.push_back({branchVar, 0.0});
    one.fixed.push_back({branchVar, 1.0});
    stack.push_back(std::move(zero));
    stack.push_back(std::move(one));
  }
  return std::nullopt;
}

std::optional<FeasibilityResult> FeasibilitySearch::alternate(double theta, const std::vector<double>& rootPoint) {
  // Each candidate binary at zero removes one entropy term, so fewer than
  // 2^theta remaining terms cannot reach theta.
  const std::size_t k = candidates_.size();
  const std::size_t always = prog_->entropyTerms().size() - std::min(k, prog_->entropyTerms().size());
  auto reachable = [&](std::size_t ones) {
    return std::log2(static_cast<double>(std::max<std::size_t>(always + ones, 1))) >= theta - 1e-9;
  };
  std::vector<Assignment> xs;
  if (k <= opt_.candidateEnumerationLimit) {
    std::vector<unsigned> masks;
    for (unsigned m = 0; m < (1u << k); ++m)
      if (reachable(static_cast<std::size_t>(__builtin_popcount(m)))) masks.push_back(m);
    std::stable_sort(masks.begin(), masks.end(),
                     [](unsigned a, unsigned b) { return __builtin_popcount(a) > __builtin_popcount(b); });
    for (unsigned m : masks) {
      Assignment a;
      for (std::size_t i = 0; i < k; ++i) a.push_back({candidates_[i], (m >> i) & 1u ? 1.0 : 0.0});
      xs.push_back(std::move(a));
    }
  } else {
    Assignment ones, rounded;
    for (int v : candidates_) ones.push_back({v, 1.0});
    for (int v : candidates_) rounded.push_back({v, rootPoint[v] >= 0.5 ? 1.0 : 0.0});
    xs = {ones, rounded};
  }
  for (auto& c : engine_.vertices())
    if (pool_.size() < kPoolLimit && poolIndex_.insert(c).second) pool_.push_back(std::move(c));

  // Threshold binaries whose output a target row forces above zero.
  auto forcedOn = [&](const Assignment& x) {
    std::vector<double> val(prog_->numVariables(), kInf);
    for (auto [v, b] : x) val[v] = b;
    std::set<int> positive;
    for (const auto& r : prog_->constraints()) {
      if (r.kind != RowKind::Target || !std::isfinite(r.lo)) continue;
      double rest = 0.0;
      int free = -1, count = 0;
      for (const auto& t : r.terms) {
        const auto& var = prog_->variables()[t.index];
        const double fixedVal = std::isfinite(val[t.index]) ? val[t.index] : var.lb == var.ub ? var.lb : kInf;
        if (std::isfinite(fixedVal)) {
          rest += t.value * fixedVal;
        } else if (t.value > 0.0) {
          free = t.index;
          ++count;
        } else {
          count = 2;
        }
      }
      if (count == 1 && r.lo - rest > opt_.feasTol) positive.insert(free);
    }
    Assignment out;
    for (const auto& b : prog_->blocks())
      if (b.kind == BlockKind::Threshold && positive.count(b.output))
        for (int v : b.vars)
          if (prog_->variables()[v].lb < prog_->variables()[v].ub) out.push_back({v, 1.0});
    return out;
  };
  auto applyForced = [](Assignment& y, const Assignment& forced) {
    for (auto [v, b] : forced)
      for (auto& e : y)
        if (e.first == v) e.second = b;
  };

  // Stored policies whose own block values already meet the targets.
  std::set<Assignment> tried;
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    if (nodes_ >= opt_.nodeBudget) return std::nullopt;
    auto p = engine_.vertexPoint(pool_[i]);
    completeOutputs(p);
    auto a = select(p, nullptr, true);
    std::vector<double> fixedPoint = p;
    for (auto [v, b] : a) fixedPoint[v] = b;
    if (targetViolation(fixedPoint) > opt_.feasTol || !tried.insert(a).second) continue;
    std::size_t ones = 0;
    for (auto [v, b] : a)
      if (std::find(candidates_.begin(), candidates_.end(), v) != candidates_.end() && b > 0.5) ++ones;
    if (!reachable(ones)) continue;
    ++nodes_;
    if (auto at = tryAssignment(a, theta); at.feasible) return accept(at.result);
  }

  for (const auto& x : xs) {
    const Assignment forced = forcedOn(x);
    for (int start = 0; start < opt_.alternationStarts; ++start) {
      Assignment y;
      if (start == 0 && !hint_.empty()) {
        for (int v : selectors_) y.push_back({v, hint_[v] >= 0.5 ? 1.0 : 0.0});
      } else if (start == 0 || pool_.empty()) {
        auto p = rootPoint;
        completeOutputs(p);
        y = select(p, nullptr, false, start == 0 ? nullptr : &rng_);
      } else {
        auto p = engine_.vertexPoint(pool_[std::uniform_int_distribution<std::size_t>(0, pool_.size() - 1)(rng_)]);
        completeOutputs(p);
        y = select(p, nullptr, false, &rng_);
      }
      applyForced(y, forced);
      double bestViolation = kInf;
      int stall = 0;
      for (int round = 0; round < opt_.alternationRounds; ++round) {
        if (nodes_ >= opt_.nodeBudget) return std::nullopt;
        ++nodes_;
        Assignment all = x;
        all.insert(all.end(), y.begin(), y.end());
        auto f = buildFixed(all);
        if (!f) break;
        f->engine->setRegionActive(false);
        ++solves_;
        auto r = f->engine->maximize(theta, -opt_.feasTol, -kInf);
        std::vector<double> point;
        double violation = 0.0;
        if (r.lower >= -opt_.feasTol && !r.point.empty()) {
          point = std::move(r.point);
        } else {
          ++solves_;
          auto e = f->engine->minimizeViolation();
          if (e.point.empty()) {
            retire(std::move(f));
            break;
          }
          point = std::move(e.point);
          violation = e.violation;
        }
        retire(std::move(f));
        completeOutputs(point);
        Assignment next = select(point, &y, false);
        applyForced(next, forced);
        if (targetViolation(point) <= opt_.feasTol) {
          Assignment candidate = x;
          candidate.insert(candidate.end(), next.begin(), next.end());
          if (auto at = tryAssignment(candidate, theta); at.feasible) return accept(at.result);
        }
        if (violation < bestViolation - 1e-9) {
          bestViolation = violation;
          stall = 0;
        } else if (++stall >= 2) {
          break;
        }
        if (next == y) break;
        y = std::move(next);
      }
    }
  }
  return std::nullopt;
}

FeasibilityResult FeasibilitySearch::check(double theta) {
  nodes_ = 0;
  solves_ = 0;
  auto finish = [&](FeasibilityResult r) {
    r.nodes = nodes_;
    r.solves = solves_;
    resetBinaries();
    return r;
  };

  resetBinaries();
  ++solves_;
  auto root = engine_.maximize(theta, binaries_.empty() ? -opt_.feasTol : kInf, -opt_.feasTol);
  FeasibilityResult infeasible;
  infeasible.upper = root.upper;
  if (root.status == EngineStatus::Infeasible || root.status == EngineStatus::BelowTarget) return finish(infeasible);
  if (root.point.empty()) {
    infeasible.certified = false;
    return finish(infeasible);
  }
  if (root.lower >= -opt_.feasTol &&
      std::all_of(binaries_.begin(), binaries_.end(), [&](int v) { return isIntegral(root.point[v]); })) {
    auto out = accept(root);
    out.upper = root.upper;
    return finish(out);
  }
  if (binaries_.empty()) {
    infeasible.certified = root.status == EngineStatus::Converged;
    return finish(infeasible);
  }

  if (!hint_.empty())
    if (auto at = tryAssignment(fromPoint(hint_), theta); at.feasible) {
      auto out = accept(at.result);
      out.upper = root.upper;
      return finish(out);
    }

  if (binaries_.size() <= opt_.exhaustiveLimit) {
    bool complete = true;
    if (auto found = branchAndBound(theta, root.point, &complete)) {
      found->upper = root.upper;
      return finish(*found);
    }
    infeasible.certified = complete;
    return finish(infeasible);
  }
  if (auto found = alternate(theta, root.point)) {
    found->upper = root.upper;
    return finish(*found);
  }
  infeasible.certified = false;
  return finish(infeasible);
}

ConcaveResult FeasibilitySearch::polish(const std::vector<double>& witness, double theta) {
  auto f = buildFixed(fromPoint(witness));
  if (!f) return {};
  auto r = f->engine->maximize(theta);
  retire(std::move(f));
  return r;
}

FeasibilityResult checkFeasible(const SynthesisProgram& program, double theta, SearchOptions options) {
  FeasibilitySearch search(program, options);
  return search.check(theta);
}

BisectionResult bisect(const SynthesisProgram& program, double lo, double hi, double eps, SearchOptions options) {
  BisectionResult out;
  out.lo = lo;
  out.hi = hi;
  std::optional<FeasibilitySearch> search;
  if (!options.oracle) search.emplace(program, options);
  auto check = [&](double theta) { return search ? search->check(theta) : options.oracle(program, theta); };
  auto finish = [&] {
    if (search) out.engine = search->engineStats();
    return out;
  };
  auto base = check(lo);
  out.trace.push_back({lo, base.verdict == Verdict::Feasible, base.certified, base.gap});
  if (base.verdict != Verdict::Feasible) {
    out.specFeasible = false;
    out.conclusive = base.certified;
    return finish();
  }
  out.specFeasible = true;
  out.witness = base.witness;
  // A witness is feasible at its own objective value, which may exceed the
  // level it was found for.
  auto achieved = [&](const std::vector<double>& w) { return entropyBits(gather(w, program.entropyTerms())); };
  double l = lo, u = hi, certifiedHi = hi;
  l = std::max(l, std::min(hi, achieved(out.witness)));
  while (u - l > eps) {
    const double theta = 0.5 * (l + u);
    auto r = check(theta);
    ++out.iterations;
    const bool feasible = r.verdict == Verdict::Feasible;
    out.trace.push_back({theta, feasible, r.certified, r.gap});
    if (feasible) {
      l = std::max(theta, std::min(certifiedHi, achieved(r.witness)));
      out.witness = std::move(r.witness);
      if (l >= u) u = certifiedHi;
    } else {
      u = theta;
      if (r.certified) certifiedHi = std::min(certifiedHi, theta);
    }
  }
  if (u < certifiedHi) out.conclusive = false;
  out.thetaStar = l;
  if (!search) return finish();
  out.polished = search->polish(out.witness, l);
  if (!out.polished.point.empty() && out.polished.lower >= -options.feasTol) {
    auto p = out.polished.point;
    for (std::size_t v = 0; v < p.size(); ++v)
      if (program.variables()[v].kind == VarKind::Binary) p[v] = out.witness[v];
    out.witness = std::move(p);
  }
  return finish();
}

}  // namespace veil::opt
