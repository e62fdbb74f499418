#include "veil/automata.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

namespace veil {

Dfa::Dfa(Literal literal, int numStates, int initial) : literal_(std::move(literal)), initial_(initial) {
  for (int i = 0; i < numStates; ++i) addState();
  if (initial < 0 || initial >= numStates) throw AutomatonError("initial state out of range");
}

int Dfa::addState(std::string name) {
  const int id = static_cast<int>(edges_.size());
  edges_.emplace_back();
  accepting_.push_back(false);
  names_.push_back(name.empty() ? fmt::format("q{}", id) : std::move(name));
  return id;
}

void Dfa::addEdge(int from, Guard guard, int to) {
  if (from < 0 || from >= numStates() || to < 0 || to >= numStates())
    throw AutomatonError(fmt::format("edge {} -> {} references an unknown state", from, to));
  edges_[from].push_back({guard, to});
}

void Dfa::setAccepting(int q, bool accepting) { accepting_.at(q) = accepting; }

int Dfa::step(int q, bool literalHolds, int stage) const {
  for (const auto& e : edges_[q])
    if (e.guard.matches(literalHolds, stage)) return e.target;
  throw AutomatonError(fmt::format("state {} has no transition for ({}, stage {})", names_[q],
                                   literalHolds ? "true" : "false", stage));
}

bool Dfa::isSelfLoop(int q) const {
  return std::all_of(edges_[q].begin(), edges_[q].end(), [q](const DfaEdge& e) { return e.target == q; });
}

bool Dfa::accepts(const std::vector<bool>& literalTruth) const {
  int q = initial_;
  for (std::size_t k = 0; k < literalTruth.size(); ++k) {
    q = step(q, literalTruth[k], static_cast<int>(k) + 1);
    if (accepting_[q]) return true;
  }
  return false;
}

bool Dfa::accepts(const Word& word) const {
  std::vector<bool> truth(word.size());
  for (std::size_t k = 0; k < word.size(); ++k) truth[k] = word[k].count(literal_.prop) != literal_.negated;
  return accepts(truth);
}

void Dfa::validate() const {
  for (int q = 0; q < numStates(); ++q) {
    for (bool lit : {false, true}) {
      std::vector<std::pair<int, int>> ranges;
      for (const auto& e : edges_[q]) {
        if (e.guard.cond != LitCond::Any && (e.guard.cond == LitCond::True) != lit) continue;
        if (e.guard.stageLo > e.guard.stageHi) continue;
        ranges.emplace_back(e.guard.stageLo, e.guard.stageHi);
      }
      std::sort(ranges.begin(), ranges.end());
      long long next = 1;
      for (auto [lo, hi] : ranges) {
        if (lo != next)
          throw AutomatonError(fmt::format("state {}: guards for literal={} {} at stage {}", names_[q], lit,
                                           lo < next ? "overlap" : "leave a gap", std::min<long long>(lo, next)));
        next = static_cast<long long>(hi) + 1;
      }
      if (next != static_cast<long long>(kStageInf) + 1)
        throw AutomatonError(fmt::format("state {}: guards for literal={} do not cover all stages", names_[q], lit));
    }
  }
}

std::string guardString(const Guard& g, const Literal& lit) {
  std::string l = (lit.negated ? "!" : "") + lit.prop;
  std::string out;
  if (g.cond == LitCond::True) out = l;
  if (g.cond == LitCond::False) out = "!(" + l + ")";
  std::string hi = g.stageHi == kStageInf ? "inf" : std::to_string(g.stageHi);
  if (g.stageLo != 1 || g.stageHi != kStageInf) {
    if (!out.empty()) out += " & ";
    out += fmt::format("t in [{},{}]", g.stageLo, hi);
  }
  return out.empty() ? "1" : out;
}

void Dfa::dumpEdges(std::ostream& os) const {
  for (int q = 0; q < numStates(); ++q)
    for (const auto& e : edges_[q])
      os << names_[q] << '\t' << guardString(e.guard, literal_) << '\t' << names_[e.target] << '\n';
}

namespace {

/// Builds guards from a transition rule that is constant between the given
/// stage breakpoints, merging equal neighbours.
void emitEdges(Dfa& dfa, int q, std::vector<int> breaks, const std::function<int(bool, int)>& next) {
  breaks.push_back(1);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::erase_if(breaks, [](int b) { return b < 1; });
  struct Seg {
    int lo, hi, target;
  };
  std::vector<Seg> segs[2];
  for (int lit = 0; lit < 2; ++lit) {
    for (std::size_t i = 0; i < breaks.size(); ++i) {
      int lo = breaks[i];
      int hi = i + 1 < breaks.size() ? breaks[i + 1] - 1 : kStageInf;
      int target = next(lit == 1, lo);
      if (!segs[lit].empty() && segs[lit].back().target == target)
        segs[lit].back().hi = hi;
      else
        segs[lit].push_back({lo, hi, target});
    }
  }
  // Identical segment lists on both literal values collapse to unconditioned guards.
  auto same = [](const Seg& a, const Seg& b) { return a.lo == b.lo && a.hi == b.hi && a.target == b.target; };
  std::vector<Seg> common;
  for (const auto& s : segs[1])
    for (const auto& f : segs[0])
      if (same(s, f)) common.push_back(s);
  for (const auto& c : common) dfa.addEdge(q, {LitCond::Any, c.lo, c.hi}, c.target);
  for (int lit = 1; lit >= 0; --lit)
    for (const auto& s : segs[lit]) {
      bool isCommon = std::any_of(common.begin(), common.end(), [&](const Seg& c) { return same(c, s); });
      if (!isCommon) dfa.addEdge(q, {lit ? LitCond::True : LitCond::False, s.lo, s.hi}, s.target);
    }
}

void sinks(Dfa& dfa, int accept, int reject) {
  dfa.setAccepting(accept);
  dfa.setStateName(accept, "accept");
  dfa.setStateName(reject, "reject");
  dfa.addEdge(accept, {}, accept);
  dfa.addEdge(reject, {}, reject);
}

}  // namespace

Dfa buildDfa(const SpecFormula& formula, int horizon) {
  if (horizon < formula.horizon() + 1)
    throw AutomatonError(fmt::format("stage horizon {} cannot decide '{}' (needs {})", horizon,
                                     formula.toString(), formula.horizon() + 1));
  const auto& ops = formula.ops();
  // Stage of word index k is k + 1; the rules below are written in k.
  switch (formula.form()) {
    case Form::Atom:
    case Form::F:
    case Form::G: {
      const bool eventually = formula.form() != Form::G;
      const int a = ops.empty() ? 0 : ops[0].window.lo;
      const int b = ops.empty() ? 0 : ops[0].window.hi;
      Dfa dfa(formula.literal(), 3, 0);
      const int M = 0, A = 1, R = 2;
      dfa.setStateName(M, "monitor");
      emitEdges(dfa, M, {a + 1, b + 1, b + 2}, [&](bool lit, int t) {
        int k = t - 1;
        bool inWindow = k >= a && k <= b;
        if (eventually) {
          if (inWindow && lit) return A;
          return k >= b ? R : M;
        }
        if (inWindow && !lit) return R;
        return k >= b ? A : M;
      });
      sinks(dfa, A, R);
      return dfa;
    }
    case Form::FG:
    case Form::GF: {
      const bool fg = formula.form() == Form::FG;
      const int a = ops[0].window.lo, b = ops[0].window.hi;
      const int c = ops[1].window.lo, d = ops[1].window.hi;
      const int L = d - c + 1;
      // Counter states 0..L: the current p-streak (FG) or not-p gap (GF), capped at L.
      Dfa dfa(formula.literal(), L + 3, 0);
      const int A = L + 1, R = L + 2;
      for (int n = 0; n <= L; ++n) {
        dfa.setStateName(n, fmt::format("{}{}", fg ? "run" : "gap", n));
        emitEdges(dfa, n, {a + d + 1, b + d + 1, b + d + 2}, [&, n](bool lit, int t) {
          int k = t - 1;
          bool inRange = k >= a + d && k <= b + d;
          if (fg) {
            int n2 = lit ? std::min(n + 1, L) : 0;
            if (n2 == L && inRange) return A;
            return k >= b + d ? R : n2;
          }
          int n2 = lit ? 0 : std::min(n + 1, L);
          if (n2 == L && inRange) return R;
          return k >= b + d ? A : n2;
        });
      }
      sinks(dfa, A, R);
      return dfa;
    }
  }
  throw AutomatonError("unsupported formula form");
}

Dfa addTerminal(const Dfa& dfa) {
  Dfa m(dfa.literal(), dfa.numStates() + 1, dfa.initial());
  const int qt = dfa.numStates();
  for (int q = 0; q < dfa.numStates(); ++q) {
    m.setStateName(q, dfa.stateName(q));
    m.setAccepting(q, dfa.isAccepting(q));
    if (dfa.isAccepting(q)) {
      m.addEdge(q, {}, qt);
    } else {
      for (const auto& e : dfa.edges(q)) m.addEdge(q, e.guard, e.target);
    }
  }
  m.setStateName(qt, "terminal");
  m.addEdge(qt, {}, qt);
  m.markTerminal(qt);
  return m;
}

namespace {

struct VecHash {
  std::size_t operator()(const std::vector<int>& v) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int x : v) {
      h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

int maxDecisionStage(const Dfa& dfa) {
  int m = 1;
  for (int q = 0; q < dfa.numStates(); ++q)
    for (const auto& e : dfa.edges(q)) {
      if (e.guard.stageHi != kStageInf) m = std::max(m, e.guard.stageHi);
      if (e.guard.stageLo > 1) m = std::max(m, e.guard.stageLo - 1);
    }
  return m;
}

}  // namespace

int ProductMdp::component(std::uint32_t i, std::size_t k) const {
  if (k == 1) return static_cast<int>(base_[i]);
  if (k == 2) return stage_[i];
  if (k >= 3 && k - 3 < dfas_.size()) return dfaState(i, k - 3);
  throw AutomatonError(fmt::format("product component {} out of range", k));
}

std::vector<int> ProductMdp::advance(const std::vector<int>& q, StateId s, int t) const {
  std::vector<int> out(q.size());
  const auto& mdp = expanded_.base();
  for (std::size_t k = 0; k < q.size(); ++k) {
    bool holds = mdp.hasLabel(s, litProp_[k]) != litNeg_[k];
    out[k] = dfas_[k].step(q[k], holds, t);
  }
  return out;
}

std::optional<std::uint32_t> ProductMdp::find(StateId s, int t, const std::vector<int>& q) const {
  std::vector<int> key;
  key.reserve(2 + q.size());
  key.push_back(static_cast<int>(s));
  key.push_back(t);
  key.insert(key.end(), q.begin(), q.end());
  std::uint32_t lo = 0, hi = static_cast<std::uint32_t>(numStates_);
  const std::size_t n = dfas_.size();
  auto keyOf = [&](std::uint32_t i) {
    std::vector<int> k2{static_cast<int>(base_[i]), stage_[i]};
    k2.insert(k2.end(), q_.begin() + i * n, q_.begin() + (i + 1) * n);
    return k2;
  };
  while (lo < hi) {
    std::uint32_t mid = (lo + hi) / 2;
    if (keyOf(mid) < key)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < numStates_ && keyOf(lo) == key) return lo;
  return std::nullopt;
}

void ProductMdp::dumpEdges(std::ostream& os) const {
  const auto& mdp = expanded_.base();
  auto name = [&](std::uint32_t i) {
    std::string s = fmt::format("({},{}", mdp.stateName(base_[i]), stage_[i]);
    for (std::size_t k = 0; k < dfas_.size(); ++k) s += "," + dfas_[k].stateName(dfaState(i, k));
    return s + ")";
  };
  for (std::uint32_t i = 0; i < numStates_; ++i)
    for (ActionId a = 0; a < numActions(); ++a)
      for (auto e = edgesBegin(i, a); e != edgesEnd(i, a); ++e)
        os << name(i) << '\t' << mdp.actionName(a) << ':' << e->prob << '\t' << name(e->to) << '\n';
}

ProductMdp product(const ExpandedMdp& expanded, const std::vector<Dfa>& modifiedDfas) {
  ProductMdp pm(expanded, modifiedDfas);
  const auto& mdp = expanded.base();
  const int H = expanded.horizon();
  const std::size_t n = modifiedDfas.size();
  for (const auto& d : modifiedDfas) {
    auto p = mdp.findProp(d.literal().prop);
    if (!p)
      throw AutomatonError(fmt::format("alphabet mismatch: proposition '{}' is not used by the model", d.literal().prop));
    if (maxDecisionStage(d) > H)
      throw AutomatonError(fmt::format("alphabet mismatch: automaton over '{}' reads stage {} beyond horizon {}",
                                       d.literal().prop, maxDecisionStage(d), H));
    pm.litProp_.push_back(*p);
    pm.litNeg_.push_back(d.literal().negated);
  }

  // Discovery in BFS order; keys are (s, t, q_1..q_N).
  std::unordered_map<std::vector<int>, std::uint32_t, VecHash> index;
  std::vector<std::vector<int>> keys;
  std::deque<std::uint32_t> queue;
  auto intern = [&](std::vector<int> key) {
    auto [it, fresh] = index.emplace(key, static_cast<std::uint32_t>(keys.size()));
    if (fresh) {
      keys.push_back(std::move(key));
      queue.push_back(it->second);
    }
    return it->second;
  };

  std::vector<int> q0(n);
  for (std::size_t k = 0; k < n; ++k) q0[k] = modifiedDfas[k].initial();
  const StateId s0 = mdp.initial();
  {
    auto q = pm.advance(q0, s0, 1);
    std::vector<int> key{static_cast<int>(s0), 1};
    key.insert(key.end(), q.begin(), q.end());
    intern(std::move(key));
  }
  struct RawEdge {
    std::uint32_t from;
    ActionId a;
    std::uint32_t to;
    double p;
  };
  std::vector<RawEdge> raw;
  std::vector<int> q(n);
  while (!queue.empty()) {
    std::uint32_t cur = queue.front();
    queue.pop_front();
    const StateId s = static_cast<StateId>(keys[cur][0]);
    const int t = keys[cur][1];
    std::copy(keys[cur].begin() + 2, keys[cur].end(), q.begin());
    const int t2 = ExpandedMdp::nextStage(t, H);
    for (ActionId a = 0; a < mdp.numActions(); ++a)
      for (const auto& tr : mdp.successors(s, a)) {
        auto q2 = pm.advance(q, tr.to, t2);
        std::vector<int> key{static_cast<int>(tr.to), t2};
        key.insert(key.end(), q2.begin(), q2.end());
        std::uint32_t to = intern(std::move(key));
        raw.push_back({cur, a, to, tr.prob});
      }
  }

  // Lexicographic renumbering for stable indices.
  std::vector<std::uint32_t> order(keys.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return keys[x] < keys[y]; });
  std::vector<std::uint32_t> rank(keys.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  pm.numStates_ = keys.size();
  pm.base_.resize(keys.size());
  pm.stage_.resize(keys.size());
  pm.q_.resize(keys.size() * n);
  for (std::uint32_t r = 0; r < order.size(); ++r) {
    const auto& k = keys[order[r]];
    pm.base_[r] = static_cast<StateId>(k[0]);
    pm.stage_[r] = k[1];
    std::copy(k.begin() + 2, k.end(), pm.q_.begin() + r * n);
  }
  pm.initial_ = rank[0];

  const std::size_t A = mdp.numActions();
  pm.offsets_.assign(keys.size() * A + 1, 0);
  for (const auto& e : raw) ++pm.offsets_[rank[e.from] * A + e.a + 1];
  for (std::size_t i = 1; i < pm.offsets_.size(); ++i) pm.offsets_[i] += pm.offsets_[i - 1];
  pm.edges_.resize(raw.size());
  std::vector<std::size_t> fill(pm.offsets_.begin(), pm.offsets_.end() - 1);
  for (const auto& e : raw) pm.edges_[fill[rank[e.from] * A + e.a]++] = {rank[e.to], e.p};
  for (std::size_t r = 0; r + 1 < pm.offsets_.size(); ++r)
    std::sort(pm.edges_.begin() + pm.offsets_[r], pm.edges_.begin() + pm.offsets_[r + 1],
              [](auto& x, auto& y) { return x.to < y.to; });

  pm.absorbing_.assign(keys.size(), true);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& d = pm.dfas_[k];
    std::vector<bool> abs(d.numStates());
    for (int st = 0; st < d.numStates(); ++st) abs[st] = d.isSelfLoop(st) && !d.isAccepting(st);
    for (std::uint32_t i = 0; i < keys.size(); ++i)
      if (!abs[pm.dfaState(i, k)]) pm.absorbing_[i] = false;
  }
  return pm;
}

std::vector<std::uint32_t> absorbingSet(const ProductMdp& product) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < product.numStates(); ++i)
    if (product.inAbsorbing(i)) out.push_back(i);
  return out;
}

}  // namespace veil
