#include "veil/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <fmt/format.h>

namespace veil {

std::size_t EntropyReport::candidateCount() const {
  return static_cast<std::size_t>(std::count(candidate.begin(), candidate.end(), true));
}

EntropyReport adversaryReport(const std::vector<double>& satProbs, double beta) {
  EntropyReport r;
  r.satProbs = satProbs;
  r.candidate.resize(satProbs.size());
  r.likelihoods.assign(satProbs.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < satProbs.size(); ++i) {
    r.candidate[i] = satProbs[i] >= beta;
    if (r.candidate[i]) total += satProbs[i];
  }
  if (total <= 0.0) {
    r.emptyCandidateSet = true;
    return r;
  }
  for (std::size_t i = 0; i < satProbs.size(); ++i) {
    if (!r.candidate[i]) continue;
    const double l = satProbs[i] / total;
    r.likelihoods[i] = l;
    if (l > 0.0) r.entropyBits -= l * std::log2(l);
  }
  r.entropyBits = std::max(r.entropyBits, 0.0);
  return r;
}

namespace {

struct LiteralReader {
  PropId prop;
  bool negated;
  bool holds(const Mdp& mdp, StateId s) const { return mdp.hasLabel(s, prop) != negated; }
};

LiteralReader reader(const Mdp& mdp, const Literal& lit) {
  auto p = mdp.findProp(lit.prop);
  if (!p) throw ModelError(fmt::format("formula reads proposition '{}' unknown to the model", lit.prop));
  return {*p, lit.negated};
}

}  // namespace

double exactSatisfaction(const FiniteMemoryPolicy& policy, const SpecFormula& formula) {
  const Mdp& mdp = policy.mdp();
  const Dfa dfa = buildDfa(formula, formula.horizon() + 1);
  const LiteralReader lit = reader(mdp, formula.literal());
  const std::size_t nQ = static_cast<std::size_t>(dfa.numStates());
  const std::size_t nA = mdp.numActions();
  std::vector<double> mass(policy.numNodes() * nQ, 0.0), next(mass.size(), 0.0);
  double accepted = 0.0;

  const std::uint32_t n0 = policy.initialNode();
  const int q0 = dfa.step(dfa.initial(), lit.holds(mdp, policy.state(n0)), 1);
  if (dfa.isAccepting(q0))
    return 1.0;
  mass[n0 * nQ + q0] = 1.0;

  for (int k = 1; k <= formula.horizon(); ++k) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::uint32_t n = 0; n < policy.numNodes(); ++n)
      for (std::size_t q = 0; q < nQ; ++q) {
        const double m = mass[n * nQ + q];
        if (m == 0.0) continue;
        const auto& dist = policy.distribution(n);
        for (ActionId a = 0; a < nA; ++a) {
          if (dist[a] == 0.0) continue;
          for (auto e = policy.edgesBegin(n, a); e != policy.edgesEnd(n, a); ++e) {
            const int q2 = dfa.step(static_cast<int>(q), lit.holds(mdp, policy.state(e->to)), k + 1);
            const double w = m * dist[a] * e->prob;
            if (dfa.isAccepting(q2))
              accepted += w;
            else
              next[e->to * nQ + q2] += w;
          }
        }
      }
    std::swap(mass, next);
  }
  return std::min(accepted, 1.0);
}

std::vector<double> exactSatisfaction(const FiniteMemoryPolicy& policy, const std::vector<NamedSpec>& specs) {
  std::vector<double> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(exactSatisfaction(policy, s.formula));
  return out;
}

std::vector<double> expectedVisits(const FiniteMemoryPolicy& policy) {
  const std::size_t nA = policy.mdp().numActions();
  std::vector<double> visits(policy.numNodes(), 0.0), mass(policy.numNodes(), 0.0), next(policy.numNodes(), 0.0);
  mass[policy.initialNode()] = 1.0;
  for (int k = 0; k < policy.horizon(); ++k) {
    for (std::size_t n = 0; n < mass.size(); ++n) visits[n] += mass[n];
    if (k + 1 == policy.horizon()) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::uint32_t n = 0; n < mass.size(); ++n) {
      if (mass[n] == 0.0) continue;
      const auto& dist = policy.distribution(n);
      for (ActionId a = 0; a < nA; ++a) {
        if (dist[a] == 0.0) continue;
        for (auto e = policy.edgesBegin(n, a); e != policy.edgesEnd(n, a); ++e) next[e->to] += mass[n] * dist[a] * e->prob;
      }
    }
    std::swap(mass, next);
  }
  return visits;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t trialSeed(std::uint64_t root, std::uint64_t trial) { return splitmix64(root ^ splitmix64(trial)); }

unsigned defaultThreads() {
  if (const char* env = std::getenv("VEIL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Partial {
  std::vector<std::uint64_t> successes;
  std::vector<std::uint64_t> visits;
};

}  // namespace

SimulationReport simulate(const FiniteMemoryPolicy& policy, const std::vector<NamedSpec>& specs,
                          const SimulationOptions& options) {
  if (options.trials == 0) throw std::invalid_argument("simulate: trials must be at least 1");
  const Mdp& mdp = policy.mdp();
  const std::size_t nA = mdp.numActions();
  int maxH = 0;
  std::vector<LiteralReader> lits;
  for (const auto& s : specs) {
    maxH = std::max(maxH, s.formula.horizon());
    lits.push_back(reader(mdp, s.formula.literal()));
  }
  const std::size_t steps = static_cast<std::size_t>(std::max(policy.horizon(), maxH + 1));

  auto runRange = [&](std::size_t begin, std::size_t end, Partial& out) {
    out.successes.assign(specs.size(), 0);
    out.visits.assign(policy.numNodes(), 0);
    std::vector<std::vector<bool>> truth(specs.size(), std::vector<bool>(steps));
    for (std::size_t trial = begin; trial < end; ++trial) {
      std::mt19937_64 rng(trialSeed(options.seed, trial));
      std::uint32_t node = policy.initialNode();
      for (std::size_t k = 0; k < steps; ++k) {
        const StateId s = policy.state(node);
        for (std::size_t i = 0; i < specs.size(); ++i) truth[i][k] = lits[i].holds(mdp, s);
        if (static_cast<int>(k) < policy.horizon()) ++out.visits[node];
        if (k + 1 == steps) break;
        const auto& dist = policy.distribution(node);
        double u = uniform01(rng);
        ActionId a = 0;
        for (; a + 1 < nA; ++a) {
          if (u < dist[a]) break;
          u -= dist[a];
        }
        while (dist[a] == 0.0 && a > 0) --a;
        double v = uniform01(rng);
        const auto* e = policy.edgesBegin(node, a);
        const auto* last = policy.edgesEnd(node, a) - 1;
        for (; e != last; ++e) {
          if (v < e->prob) break;
          v -= e->prob;
        }
        node = e->to;
      }
      for (std::size_t i = 0; i < specs.size(); ++i)
        if (evaluateTruth(truth[i], specs[i].formula, 0)) ++out.successes[i];
    }
  };

  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(options.threads ? options.threads : defaultThreads(), options.trials));
  std::vector<Partial> parts(threads);
  const std::size_t chunk = (options.trials + threads - 1) / threads;
  if (threads == 1) {
    runRange(0, options.trials, parts[0]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t b = std::min(options.trials, w * chunk), e = std::min(options.trials, b + chunk);
      pool.emplace_back(runRange, b, e, std::ref(parts[w]));
    }
    for (auto& t : pool) t.join();
  }

  SimulationReport rep;
  rep.trials = options.trials;
  rep.seed = options.seed;
  rep.steps = steps;
  rep.successes.assign(specs.size(), 0);
  rep.visits.assign(policy.numNodes(), 0);
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < specs.size(); ++i) rep.successes[i] += p.successes[i];
    for (std::size_t n = 0; n < rep.visits.size(); ++n) rep.visits[n] += p.visits[n];
  }
  std::vector<double> rates;
  std::vector<double> half;
  const double n = static_cast<double>(options.trials);
  for (auto s : rep.successes) {
    const double p = static_cast<double>(s) / n;
    rates.push_back(p);
    half.push_back(1.96 * std::sqrt(p * (1.0 - p) / n));
  }
  rep.report = adversaryReport(rates, options.beta);
  rep.report.source = "monte-carlo";
  rep.report.trials = options.trials;
  rep.report.halfWidths = std::move(half);
  return rep;
}

}  // namespace veil
