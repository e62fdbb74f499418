#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "veil/policy.hpp"
#include "veil/speclang.hpp"

namespace veil {

struct EntropyReport {
  std::vector<double> satProbs;
  std::vector<bool> candidate;
  std::vector<double> likelihoods;
  double entropyBits = 0.0;
  /// Set when no specification reaches the threshold; entropy is then 0.
  bool emptyCandidateSet = false;
  std::string source = "exact-propagation";
  std::size_t trials = 0;
  std::vector<double> halfWidths;  // 95% normal half-widths, Monte Carlo only

  std::size_t candidateCount() const;
};

/// Candidate set by threshold, likelihoods normalized over the candidates
/// and their Shannon entropy in bits.
EntropyReport adversaryReport(const std::vector<double>& satProbs, double beta);

/// Probability that the policy-induced run satisfies the formula, by
/// propagating the joint (memory node, automaton state) distribution.
double exactSatisfaction(const FiniteMemoryPolicy& policy, const SpecFormula& formula);
std::vector<double> exactSatisfaction(const FiniteMemoryPolicy& policy, const std::vector<NamedSpec>& specs);

/// Expected visits to each memory node during the first `horizon` steps.
std::vector<double> expectedVisits(const FiniteMemoryPolicy& policy);

struct SimulationOptions {
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 selects defaultThreads()
  double beta = 0.8;
};

struct SimulationReport {
  EntropyReport report;
  std::vector<std::uint64_t> successes;
  /// Per memory node, number of trials that visited it during the first
  /// `horizon` steps. Each node is visited at most once per trial there.
  std::vector<std::uint64_t> visits;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
};

/// Monte Carlo replay. Trial k draws from its own generator seeded with
/// trialSeed(seed, k), so results do not depend on the thread count.
SimulationReport simulate(const FiniteMemoryPolicy& policy, const std::vector<NamedSpec>& specs,
                          const SimulationOptions& options);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t trialSeed(std::uint64_t root, std::uint64_t trial);
/// VEIL_THREADS if set, otherwise the hardware concurrency.
unsigned defaultThreads();

}  // namespace veil
