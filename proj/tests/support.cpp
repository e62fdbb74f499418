#include "support.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace veil::test {

std::string assetPath(const std::string& name) { return std::string(VEIL_ASSET_DIR) + "/" + name; }

namespace {

// Number of true positions in [from, to].
int countTrue(const std::vector<bool>& truth, int from, int to) {
  int n = 0;
  for (int j = from; j <= to; ++j) n += truth.at(static_cast<std::size_t>(j)) ? 1 : 0;
  return n;
}

std::vector<bool> negate(const std::vector<bool>& truth) {
  std::vector<bool> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) out[i] = !truth[i];
  return out;
}

bool eventuallyWindow(const std::vector<bool>& truth, int k, Interval w) {
  return countTrue(truth, k + w.lo, k + w.hi) > 0;
}

bool eventuallyAlways(const std::vector<bool>& truth, int k, Interval outer, Interval inner) {
  for (int i = k + outer.lo; i <= k + outer.hi; ++i)
    if (countTrue(truth, i + inner.lo, i + inner.hi) == inner.width() + 1) return true;
  return false;
}

}  // namespace

// G and GF are evaluated through their duals F and FG on the negated word.
bool expandHolds(const std::vector<TemporalOp>& ops, const std::vector<bool>& truth, int k, std::size_t depth) {
  const std::size_t n = ops.size() - depth;
  if (n == 0) return truth.at(static_cast<std::size_t>(k));
  const auto& op = ops[depth];
  if (n == 1) {
    if (op.kind == TemporalKind::Eventually) return eventuallyWindow(truth, k, op.window);
    return !eventuallyWindow(negate(truth), k, op.window);
  }
  const auto& in = ops[depth + 1];
  if (n == 2 && op.kind == TemporalKind::Eventually && in.kind == TemporalKind::Always)
    return eventuallyAlways(truth, k, op.window, in.window);
  if (n == 2 && op.kind == TemporalKind::Always && in.kind == TemporalKind::Eventually)
    return !eventuallyAlways(negate(truth), k, op.window, in.window);
  throw std::logic_error("oracle covers the fragment forms only");
}

bool expandHolds(const SpecFormula& formula, const std::vector<bool>& truth, int k) {
  return expandHolds(formula.ops(), truth, k, 0);
}

Mdp randomMdp(std::mt19937_64& rng, std::size_t nStates, std::size_t nActions, std::size_t nProps) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::string> states, actions, props;
  for (std::size_t s = 0; s < nStates; ++s) states.push_back("s" + std::to_string(s));
  for (std::size_t a = 0; a < nActions; ++a) actions.push_back("a" + std::to_string(a));
  for (std::size_t p = 0; p < nProps; ++p) props.push_back("p" + std::to_string(p));
  std::vector<std::vector<std::vector<Transition>>> tr(nStates, std::vector<std::vector<Transition>>(nActions));
  std::vector<std::vector<PropId>> labels(nStates);
  for (std::size_t s = 0; s < nStates; ++s) {
    for (std::size_t a = 0; a < nActions; ++a) {
      double sum = 0.0;
      for (std::size_t t = 0; t < nStates; ++t)
        if (coin(rng) || t == (s + a) % nStates) {
          const double w = unit(rng);
          tr[s][a].push_back({static_cast<StateId>(t), w});
          sum += w;
        }
      for (auto& e : tr[s][a]) e.prob /= sum;
    }
    for (std::size_t p = 0; p < nProps; ++p)
      if (coin(rng)) labels[s].push_back(static_cast<PropId>(p));
  }
  std::uniform_int_distribution<std::size_t> pick(0, nStates - 1);
  return Mdp(states, static_cast<StateId>(pick(rng)), actions, props, tr, labels);
}

SpecFormula randomFormula(std::mt19937_64& rng, int maxHorizon, std::size_t nProps) {
  std::uniform_int_distribution<int> formPick(0, 4);
  std::uniform_int_distribution<std::size_t> propPick(0, nProps - 1);
  std::bernoulli_distribution coin(0.5);
  auto window = [&](int budget) {
    std::uniform_int_distribution<int> lo(0, budget);
    const int a = lo(rng);
    std::uniform_int_distribution<int> hi(a, budget);
    return Interval{a, hi(rng)};
  };
  Literal lit{"p" + std::to_string(propPick(rng)), coin(rng)};
  std::vector<TemporalOp> ops;
  switch (formPick(rng)) {
    case 0: break;
    case 1: ops.push_back({TemporalKind::Eventually, window(maxHorizon)}); break;
    case 2: ops.push_back({TemporalKind::Always, window(maxHorizon)}); break;
    case 3:
    case 4: {
      std::uniform_int_distribution<int> split(0, maxHorizon);
      const int outerBudget = split(rng);
      const Interval outer = window(outerBudget);
      const Interval inner = window(maxHorizon - outer.hi);
      const bool fg = coin(rng);
      ops.push_back({fg ? TemporalKind::Eventually : TemporalKind::Always, outer});
      ops.push_back({fg ? TemporalKind::Always : TemporalKind::Eventually, inner});
      break;
    }
  }
  return SpecFormula(ops, lit);
}

std::map<FiniteMemoryPolicy::Key, std::vector<double>> randomStageDecisions(std::mt19937_64& rng, const Mdp& mdp,
                                                                           int horizon) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution deterministic(0.3);
  std::map<FiniteMemoryPolicy::Key, std::vector<double>> out;
  for (StateId s = 0; s < mdp.numStates(); ++s)
    for (int t = 1; t <= horizon; ++t) {
      std::vector<double> d(mdp.numActions());
      if (deterministic(rng)) {
        d[static_cast<std::size_t>(unit(rng) * static_cast<double>(d.size())) % d.size()] = 1.0;
      } else {
        double sum = 0.0;
        for (double& v : d) sum += v = unit(rng) + 1e-3;
        for (double& v : d) v /= sum;
      }
      out[{static_cast<int>(s), t}] = d;
    }
  return out;
}

namespace {

bool literalHolds(const Mdp& mdp, StateId s, const Literal& lit) {
  auto p = mdp.findProp(lit.prop);
  const bool has = p && mdp.hasLabel(s, *p);
  return has != lit.negated;
}

}  // namespace

double enumerateSatisfaction(const Mdp& mdp, const std::map<FiniteMemoryPolicy::Key, std::vector<double>>& decisions,
                             const SpecFormula& formula) {
  const int steps = formula.horizon();
  std::vector<bool> truth;
  std::function<double(StateId, int, double)> walk = [&](StateId s, int k, double prob) -> double {
    truth.push_back(literalHolds(mdp, s, formula.literal()));
    double total = 0.0;
    if (k == steps) {
      total = expandHolds(formula, truth, 0) ? prob : 0.0;
    } else {
      auto it = decisions.find({static_cast<int>(s), k + 1});
      for (ActionId a = 0; a < mdp.numActions(); ++a) {
        const double pa = it != decisions.end() ? it->second[a] : 1.0 / static_cast<double>(mdp.numActions());
        if (pa == 0.0) continue;
        for (const auto& tr : mdp.successors(s, a)) total += walk(tr.to, k + 1, prob * pa * tr.prob);
      }
    }
    truth.pop_back();
    return total;
  };
  return walk(mdp.initial(), 0, 1.0);
}

double enumerateSatisfaction(const FiniteMemoryPolicy& policy, const SpecFormula& formula) {
  const Mdp& mdp = policy.mdp();
  const int steps = formula.horizon();
  std::vector<bool> truth;
  std::function<double(const FiniteMemoryPolicy::Key&, int, double)> walk =
      [&](const FiniteMemoryPolicy::Key& key, int k, double prob) -> double {
    const StateId s = static_cast<StateId>(key[0]);
    truth.push_back(literalHolds(mdp, s, formula.literal()));
    double total = 0.0;
    if (k == steps) {
      total = expandHolds(formula, truth, 0) ? prob : 0.0;
    } else {
      const auto node = policy.find(key);
      for (ActionId a = 0; a < mdp.numActions(); ++a) {
        const double pa = node ? policy.distribution(*node)[a] : 1.0 / static_cast<double>(mdp.numActions());
        if (pa == 0.0) continue;
        for (const auto& tr : mdp.successors(s, a))
          total += walk(policy.successorKey(key, tr.to), k + 1, prob * pa * tr.prob);
      }
    }
    truth.pop_back();
    return total;
  };
  return walk(policy.initialKey(), 0, 1.0);
}

}  // namespace veil::test
