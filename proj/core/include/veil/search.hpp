#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "veil/engine.hpp"
#include "veil/program.hpp"

namespace veil::opt {

enum class Verdict { Feasible, Infeasible };

struct FeasibilityResult {
  Verdict verdict = Verdict::Infeasible;
  /// False when infeasibility was not proven, only not refuted.
  bool certified = true;
  std::vector<double> witness;
  double gap = -kInf;    // g at the witness
  double upper = kInf;   // relaxation bound at the root
  long nodes = 0;
  long solves = 0;
};

/// Replacement for the built-in feasibility search at a given theta.
using FeasibilityOracle = std::function<FeasibilityResult(const SynthesisProgram&, double)>;

struct SearchOptions {
  EngineOptions engine;
  double feasTol = 1e-6;
  /// Free binaries up to which the search branches exhaustively.
  std::size_t exhaustiveLimit = 20;
  long nodeBudget = 4000;
  int alternationRounds = 25;
  /// Starting selections tried per candidate assignment by the heuristic
  /// search; all but the first come from random stored policies.
  int alternationStarts = 8;
  /// Largest number of free candidate binaries whose assignments are
  /// enumerated by the heuristic search.
  std::size_t candidateEnumerationLimit = 10;
  std::uint64_t seed = 0x5eed;
  /// When set, bisection asks this oracle instead of the built-in search.
  FeasibilityOracle oracle;
};

/// Decides f1(nu) >= theta * f2(nu) for the mixed-binary synthesis program.
/// Keeps one master LP across calls and remembers the last feasible binary
/// assignment as a starting point. Fully fixed assignments are solved on a
/// presolved copy of the program.
class FeasibilitySearch {
 public:
  explicit FeasibilitySearch(const SynthesisProgram& program, SearchOptions options = {});
  ~FeasibilitySearch();

  FeasibilityResult check(double theta);
  /// Maximizes g at theta with the binaries of `witness` fixed.
  ConcaveResult polish(const std::vector<double>& witness, double theta);

  EngineStats engineStats() const;
  const SearchOptions& options() const { return opt_; }

  using Assignment = std::vector<std::pair<int, double>>;
  /// Binary assignment from the block rules at a point whose block outputs
  /// are complete. Ties keep `current` where given, otherwise tied
  /// selections are shared across blocks as much as possible.
  Assignment select(const std::vector<double>& point, const Assignment* current, bool includeCandidates,
                    std::mt19937_64* rng = nullptr) const;
  /// Recomputes block outputs from their selectors, in block order.
  void completeOutputs(std::vector<double>& point) const;

 private:
  struct Attempt {
    bool feasible = false;
    bool presolved = true;
    ConcaveResult result;
  };
  struct Fixed;

  void resetBinaries();
  void fix(const Assignment& a);
  std::unique_ptr<Fixed> buildFixed(const Assignment& a);
  void retire(std::unique_ptr<Fixed> f);
  Attempt tryAssignment(const Assignment& a, double theta);
  double targetViolation(const std::vector<double>& point) const;
  Assignment fromPoint(const std::vector<double>& point) const;
  std::optional<FeasibilityResult> branchAndBound(double theta, const std::vector<double>& rootPoint, bool* complete);
  std::optional<FeasibilityResult> alternate(double theta, const std::vector<double>& rootPoint);
  FeasibilityResult accept(const ConcaveResult& r);

  const SynthesisProgram* prog_;
  SearchOptions opt_;
  ConcaveMaximizer engine_;
  std::vector<int> binaries_;    // free binaries of the program
  std::vector<int> candidates_;  // free binaries in candidate blocks
  std::vector<int> selectors_;   // remaining free binaries
  std::vector<double> hint_;
  std::vector<std::vector<std::int8_t>> pool_;  // policies worth seeding fixed solves with
  std::set<std::vector<std::int8_t>> poolIndex_;
  EngineStats fixedStats_;
  std::mt19937_64 rng_;
  long nodes_ = 0;
  long solves_ = 0;
};

FeasibilityResult checkFeasible(const SynthesisProgram& program, double theta, SearchOptions options = {});

struct BisectionStep {
  double theta;
  bool feasible;
  bool certified;
  double gap;
};

struct BisectionResult {
  /// False if the specification itself admits no policy at theta = lo.
  bool specFeasible = false;
  double thetaStar = 0.0;
  double lo = 0.0, hi = 0.0;
  int iterations = 0;
  bool conclusive = true;
  std::vector<BisectionStep> trace;
  std::vector<double> witness;
  ConcaveResult polished;
  EngineStats engine;
};

/// Largest theta in [lo, hi] (to within eps) for which the program is
/// feasible, followed by a full maximization at that theta.
BisectionResult bisect(const SynthesisProgram& program, double lo, double hi, double eps, SearchOptions options = {});

}  // namespace veil::opt
