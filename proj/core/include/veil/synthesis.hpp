#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "veil/automata.hpp"
#include "veil/eval.hpp"
#include "veil/model.hpp"
#include "veil/policy.hpp"
#include "veil/program.hpp"
#include "veil/search.hpp"
#include "veil/speclang.hpp"

namespace veil {

struct SynthesisOptions {
  double epsilon = 1e-4;
  opt::SearchOptions search;
};

enum class SynthesisStatus { Ok, SpecInfeasible, Inconclusive };
const char* synthesisStatusName(SynthesisStatus status);

/// Layout of one Fréchet block: eta[k - etaFirst] is the probability
/// variable of the literal at word index k; zeta[m - outer.lo] exists for
/// nested forms.
struct FrechetLayout {
  std::size_t spec = 0;
  Form form = Form::Atom;
  Interval outer, inner;
  int etaFirst = 0;
  std::vector<int> eta;
  std::vector<int> zeta;
  int mu = -1;
};

struct ProgramLayout {
  std::vector<int> mu, nu, x;
  std::vector<FrechetLayout> blocks;
  FiniteMemoryPolicy::Memory memory = FiniteMemoryPolicy::Memory::Product;
  int horizon = 1;
  std::vector<Dfa> dfas;
  /// Memory key of each flow state, parallel to program.flow().states.
  std::vector<FiniteMemoryPolicy::Key> flowKeys;
  std::size_t arenaStates = 0;
};

struct BuiltProgram {
  opt::SynthesisProgram program;
  ProgramLayout layout;
};

/// Adds x, nu, the threshold rows, the McCormick rows for nu = mu * x and
/// the entropy terms. layout.mu must be filled; muLower/muUpper are the
/// bounds of each mu.
void addCandidateRows(BuiltProgram& built, const ProblemInstance& instance, const std::vector<double>& muLower,
                      const std::vector<double>& muUpper);

/// w = z * v for binary z and v in [lo, hi], as four linear rows.
void addProductEnvelope(opt::SynthesisProgram& program, int w, int z, int v, double lo, double hi,
                        const std::string& name);

/// Action distributions lambda(s, a) / sum_a lambda(s, a), uniform where the
/// outflow vanishes.
std::map<FiniteMemoryPolicy::Key, std::vector<double>> decisionsFromWitness(const BuiltProgram& built,
                                                                            const std::vector<double>& witness);

/// Expected visits of each flow state according to the witness.
std::vector<double> stateOccupancy(const opt::SynthesisProgram& program, const std::vector<double>& witness);

struct SpecOutcome {
  std::string name;
  std::string formula;
  Form form = Form::Atom;
  double computed = 0.0;  // mu(i) of the witness
  double nu = 0.0;
  int x = 0;
  double actual = 0.0;  // chain propagation under the extracted policy
  double likelihood = 0.0;
};

struct SynthesisStats {
  std::size_t continuousVars = 0;
  std::size_t binaryVars = 0;
  std::size_t freeBinaries = 0;
  std::size_t constraints = 0;
  std::size_t arenaStates = 0;
  int bisectionIterations = 0;
  int bisectionBound = 0;
  bool conclusive = true;
  double thetaLo = 0.0, thetaHi = 0.0;
  std::vector<opt::BisectionStep> trace;
  opt::EngineStats engine;
  double seconds = 0.0;
};

struct SynthesisResult {
  SynthesisStatus status = SynthesisStatus::Inconclusive;
  std::string method;
  std::string message;
  ProblemInstance instance;
  double epsilon = 0.0;
  double thetaStar = 0.0;
  /// Entropy f(nu) of the witness in bits.
  double entropyBits = 0.0;
  /// Entropy of the adversary report on the chain-propagated probabilities.
  double actualEntropyBits = 0.0;
  std::vector<SpecOutcome> specs;
  std::vector<std::size_t> candidateSet;
  std::optional<FiniteMemoryPolicy> policy;
  std::vector<double> witness;
  std::shared_ptr<const BuiltProgram> built;
  SynthesisStats stats;
};

/// Bisection on the assembled program, policy extraction and evaluation.
SynthesisResult solveProgram(std::string method, const Mdp& mdp, const ProblemInstance& instance,
                             std::shared_ptr<const BuiltProgram> built, const SynthesisOptions& options);

/// Upper end of the bisection range: log2 of the number of specifications.
double entropyCeiling(std::size_t numSpecs);

}  // namespace veil
