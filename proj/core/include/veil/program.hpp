#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "veil/simplex.hpp"

namespace veil::opt {

class ProgramError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VarKind { Continuous, Binary };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lb = 0.0;
  double ub = kInf;
};

/// Flow rows encode the occupancy polytope, linking rows tie occupancies to
/// auxiliary variables, region rows pin a max-selection to its argmax and
/// target rows carry the probability thresholds.
enum class RowKind { Flow, Linking, Region, Target };

struct Constraint {
  std::vector<SparseEntry> terms;
  double lo;
  double hi;
  RowKind kind = RowKind::Linking;
  std::string name;
};

struct LinearExpr {
  std::vector<SparseEntry> terms;
  double constant = 0.0;
  double eval(const std::vector<double>& x) const;
};

/// Candidate: x_k = [selector_k >= threshold]; x_k = 0 zeroes one entropy
/// term. OneHot: exactly one var is 1, the one with the largest selector.
/// Threshold: single var, 1 iff selector >= threshold.
enum class BlockKind { Candidate, OneHot, Threshold };

struct BinaryBlock {
  BlockKind kind;
  std::string name;
  std::vector<int> vars;
  std::vector<LinearExpr> selectors;
  double threshold = 0.0;
  /// Variable the block computes, if any: the largest selector (OneHot) or
  /// max(0, selector - threshold) (Threshold). Blocks are listed so that
  /// outputs only feed later blocks.
  int output = -1;
};

/// Occupancy polytope of an acyclic decision process, one entry per state
/// that carries a flow row. Successors refer to flow-state indices; a
/// successor outside the structure terminates the run.
struct FlowAction {
  int var;
  std::vector<std::pair<int, double>> succ;
};

struct FlowState {
  double alpha = 0.0;
  std::vector<FlowAction> actions;
  std::string name;
};

struct FlowStructure {
  std::vector<FlowState> states;
  std::vector<int> frozenVars;  // occupancy variables without a flow row, held at zero
};

class SynthesisProgram {
 public:
  int addVariable(std::string name, VarKind kind, double lb, double ub);
  int addConstraint(std::vector<SparseEntry> terms, double lo, double hi, RowKind kind, std::string name = {});
  void addBlock(BinaryBlock block) { blocks_.push_back(std::move(block)); }
  void setEntropyTerms(std::vector<int> vars) { entropy_ = std::move(vars); }
  void setFlow(FlowStructure flow) { flow_ = std::move(flow); }
  /// Emits one flow row per flow state from the stored structure.
  void materializeFlowRows();
  void setBounds(int var, double lb, double ub);

  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Constraint>& constraints() const { return rows_; }
  const std::vector<BinaryBlock>& blocks() const { return blocks_; }
  const std::vector<int>& entropyTerms() const { return entropy_; }
  const FlowStructure& flow() const { return flow_; }

  std::size_t numVariables() const { return vars_.size(); }
  std::size_t numContinuous() const;
  std::size_t numBinary() const;
  /// Binaries whose bounds leave both values open.
  std::size_t numFreeBinary() const;
  std::optional<int> findVariable(const std::string& name) const;
  bool isOccupancy(int var) const { return var < static_cast<int>(isOcc_.size()) && isOcc_[var]; }

  void validate() const;

 private:
  std::vector<Variable> vars_;
  std::vector<Constraint> rows_;
  std::vector<BinaryBlock> blocks_;
  std::vector<int> entropy_;
  FlowStructure flow_;
  std::vector<bool> isOcc_;
};

/// Copy of the program with the given variables fixed and substituted out of
/// every row. Single-variable linking rows become bounds and linking rows
/// over proportional terms are merged, so fixed selections collapse into
/// equalities. Variable indices are preserved. Empty when a row is violated.
std::optional<SynthesisProgram> fixVariables(const SynthesisProgram& program,
                                             const std::vector<std::pair<int, double>>& fixed);

/// f1 = -sum nu_i log2(nu_i / sum nu), f2 = sum nu, with 0 log 0 = 0.
double entropyNumerator(const std::vector<double>& nu);
double entropyDenominator(const std::vector<double>& nu);
/// f = f1 / f2 in bits; 0 when f2 = 0.
double entropyBits(const std::vector<double>& nu);
std::vector<double> gather(const std::vector<double>& x, const std::vector<int>& idx);

struct WitnessCheck {
  double maxRowViolation = 0.0;
  double maxFlowViolation = 0.0;
  double maxBoundViolation = 0.0;
  double maxIntegrality = 0.0;
  double f1 = 0.0, f2 = 0.0, gap = 0.0;
  std::string worstRow;
  bool feasible(double tol) const {
    return maxRowViolation <= tol && maxFlowViolation <= tol && maxBoundViolation <= tol && maxIntegrality <= tol &&
           gap >= -tol;
  }
};

WitnessCheck checkWitness(const SynthesisProgram& program, const std::vector<double>& x, double theta);

nlohmann::json exportProgram(const SynthesisProgram& program, double theta);
/// Reads {"values": {name: value}} or {"x": [..]} into a full variable vector.
std::vector<double> importWitness(const SynthesisProgram& program, const nlohmann::json& doc);
nlohmann::json exportWitness(const SynthesisProgram& program, const std::vector<double>& x);

}  // namespace veil::opt
