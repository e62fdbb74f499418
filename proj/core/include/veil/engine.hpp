#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "veil/occupancy.hpp"
#include "veil/program.hpp"
#include "veil/simplex.hpp"

namespace veil::opt {

struct EngineOptions {
  double feasTol = 1e-6;
  double convTol = 1e-6;
  int maxIterations = 5000;
  double pricingTol = 1e-9;
  std::size_t columnLimit = 2500;
  std::size_t cutLimit = 1500;
};

enum class EngineStatus { Converged, AboveTarget, BelowTarget, Infeasible, IterationLimit, NumericalFailure };
const char* engineStatusName(EngineStatus status);

struct ConcaveResult {
  EngineStatus status = EngineStatus::NumericalFailure;
  /// Objective at `point`, a feasible point of the current restriction.
  double lower = -kInf;
  /// Certified upper bound on the maximum over the current restriction.
  double upper = kInf;
  std::vector<double> point;
  /// Remaining phase-1 infeasibility, or summed target violation for
  /// elastic solves.
  double violation = 0.0;
  int iterations = 0;
};

struct EngineStats {
  long masterSolves = 0;
  long simplexIterations = 0;
  long columns = 0;
  long cuts = 0;
  long rebuilds = 0;
};

/// Maximizes g(nu) = f1(nu) - theta * f2(nu) over the continuous relaxation
/// of a synthesis program whose binaries are fixed or relaxed by bounds.
///
/// The occupancy polytope is handled by column generation over
/// deterministic policies priced with FlowOracle; f1 is approximated from
/// above by tangent cuts. Auxiliary variables that an equality row defines
/// in terms of occupancies are eliminated into the columns. The master LP
/// persists between calls, so bound changes and new theta values
/// warm-start.
class ConcaveMaximizer {
 public:
  ConcaveMaximizer(const SynthesisProgram& program, EngineOptions options = {});
  ~ConcaveMaximizer();
  ConcaveMaximizer(const ConcaveMaximizer&) = delete;
  ConcaveMaximizer& operator=(const ConcaveMaximizer&) = delete;

  /// Only variables kept in the master may be rebounded; binaries always are.
  void setBounds(int var, double lb, double ub);
  void restoreBounds(int var);
  bool inMaster(int var) const;
  void setRegionActive(bool active);
  bool regionActive() const { return regionActive_; }

  ConcaveResult maximize(double theta, double stopAbove = kInf, double stopBelow = -kInf);
  /// Minimizes the summed violation of target rows, all other rows hard.
  ConcaveResult minimizeViolation();

  /// Adds deterministic policies as columns.
  void addVertices(const std::vector<std::vector<std::int8_t>>& choices);
  /// Program point of a single deterministic policy; master variables sit at
  /// the bound closest to zero.
  std::vector<double> vertexPoint(const std::vector<std::int8_t>& choice) const;
  /// Deterministic policies currently held as columns.
  std::vector<std::vector<std::int8_t>> vertices() const;

  const EngineStats& stats() const { return stats_; }
  const EngineOptions& options() const { return opt_; }

 private:
  enum class Mode { Entropy, Elastic };
  struct Def {
    int var;
    double constant = 0.0;
    std::vector<SparseEntry> lam;
  };
  struct MasterRow {
    RowKind kind;
    std::vector<SparseEntry> aux;      // master variable index
    std::vector<SparseEntry> derived;  // derived index
    double lo, hi;
    int lp = -1;
    int slackLo = -1, slackHi = -1;
  };
  struct Column {
    std::vector<std::int8_t> choice;
    std::vector<SparseEntry> dval;  // derived index, value
    std::vector<SparseEntry> ent;   // entropy term index, value
    std::vector<SparseEntry> proj;  // master row index, coefficient
    int lp = -1;
  };
  struct Cut {
    std::vector<double> grad;  // per entropy term
    int lp = -1;
    long lastActive = 0;
  };

  ConcaveResult run(Mode mode, double theta, double stopAbove, double stopBelow);
  void buildLp();
  int addColumnFromVertex(std::vector<std::int8_t> choice, const std::vector<SparseEntry>& occ);
  void pushColumn(Column& c);
  void addCut(const std::vector<double>& nu);
  void pushCut(Cut& c);
  double columnCost(const Column& c) const;
  void applyCosts();
  void compact(const std::vector<double>& protectedWeights);
  std::vector<double> entropyValues(std::vector<double>* weights) const;
  double pricing(bool phase1, FlowOracle::Vertex* best);
  std::vector<double> reconstruct(const std::vector<double>& weights, const std::vector<double>& aux) const;
  void fillDerived(std::vector<double>& x, double weight) const;

  const SynthesisProgram* prog_;
  EngineOptions opt_;
  FlowOracle oracle_;

  std::vector<int> masterVar_;     // program var -> master variable, -1 if not in master
  std::vector<int> masterProgVar_; // master variable -> program var
  std::vector<double> mlb_, mub_;
  std::vector<int> derivedOf_;     // program var -> derived index, -1
  std::vector<double> constant_;   // values of variables outside the master
  std::vector<Def> defs_;
  std::vector<std::vector<SparseEntry>> lamToDerived_;  // program var -> (derived, coef)
  std::vector<std::vector<SparseEntry>> derivedRows_;   // derived -> (master row, coef)
  std::vector<int> entropyDerived_;  // entropy term -> derived index or -1
  std::vector<int> entropyMaster_;   // entropy term -> master variable or -1
  std::vector<int> derivedEntropy_;  // derived -> entropy term or -1
  std::vector<MasterRow> rows_;
  std::vector<Column> cols_;
  std::vector<Cut> cuts_;

  std::unique_ptr<SimplexSolver> lp_;
  std::vector<int> auxLp_;  // master variable -> lp column
  int tauLp_ = -1;
  int convLp_ = -1;
  Mode mode_ = Mode::Entropy;
  double theta_ = 0.0;
  bool regionActive_ = true;
  bool costsDirty_ = true;
  long iter_ = 0;
  EngineStats stats_;
};

}  // namespace veil::opt
