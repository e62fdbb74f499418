#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "veil/model.hpp"
#include "veil/speclang.hpp"

namespace veil {

class AutomatonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kStageInf = std::numeric_limits<int>::max();

/// Requirement a guard places on the automaton's literal.
enum class LitCond : std::uint8_t { Any, True, False };

/// Symbolic letter predicate: literal condition and a closed stage range.
struct Guard {
  LitCond cond = LitCond::Any;
  int stageLo = 1;
  int stageHi = kStageInf;

  bool matches(bool literalHolds, int stage) const {
    if (stage < stageLo || stage > stageHi) return false;
    return cond == LitCond::Any || (cond == LitCond::True) == literalHolds;
  }
};

struct DfaEdge {
  Guard guard;
  int target;
};

/// DFA over the stage-aware alphabet of one literal. Letters are
/// (label set, stage); only the literal's truth and the stage matter.
class Dfa {
 public:
  Dfa(Literal literal, int numStates, int initial);

  int addState(std::string name = {});
  void addEdge(int from, Guard guard, int to);
  void setAccepting(int q, bool accepting = true);

  const Literal& literal() const { return literal_; }
  int numStates() const { return static_cast<int>(edges_.size()); }
  int initial() const { return initial_; }
  bool isAccepting(int q) const { return accepting_[q]; }
  std::optional<int> terminal() const { return terminal_; }
  const std::vector<DfaEdge>& edges(int q) const { return edges_[q]; }
  const std::string& stateName(int q) const { return names_[q]; }
  void setStateName(int q, std::string name) { names_[q] = std::move(name); }

  int step(int q, bool literalHolds, int stage) const;
  /// True when q maps to itself on every letter.
  bool isSelfLoop(int q) const;

  /// Runs the word (stage of index k is k+1) and reports whether an
  /// accepting state was visited.
  bool accepts(const std::vector<bool>& literalTruth) const;
  bool accepts(const Word& word) const;

  /// Throws unless every state's guards partition {true,false} x [1, inf).
  void validate() const;

  /// One edge per line: `src<TAB>guard<TAB>dst`.
  void dumpEdges(std::ostream& os) const;

  void markTerminal(int q) { terminal_ = q; }

 private:
  Literal literal_;
  int initial_;
  std::vector<std::vector<DfaEdge>> edges_;
  std::vector<bool> accepting_;
  std::vector<std::string> names_;
  std::optional<int> terminal_;
};

std::string guardString(const Guard& g, const Literal& lit);

/// Direct construction for the four fragment forms and bare literals.
/// The horizon argument is the stage count of the arena (>= formula horizon + 1).
Dfa buildDfa(const SpecFormula& formula, int horizon);

/// Adds q^t; accepting states and q^t route to q^t on every letter.
Dfa addTerminal(const Dfa& dfa);

/// Product of an expanded MDP with modified DFAs. States are tuples
/// (s, t, q_1..q_N), reachable only, sorted lexicographically.
class ProductMdp {
 public:
  struct Edge {
    std::uint32_t to;
    double prob;
  };

  const ExpandedMdp& expanded() const { return expanded_; }
  std::size_t numStates() const { return numStates_; }
  std::size_t numActions() const { return expanded_.base().numActions(); }
  std::size_t numDfas() const { return dfas_.size(); }
  std::uint32_t initial() const { return initial_; }

  StateId baseState(std::uint32_t i) const { return base_[i]; }
  int stage(std::uint32_t i) const { return stage_[i]; }
  int dfaState(std::uint32_t i, std::size_t k) const { return q_[i * dfas_.size() + k]; }
  /// Component accessor with 1-based layout (s, t, q_1, ..., q_N).
  int component(std::uint32_t i, std::size_t k) const;

  /// Successors of (i, a) in CSR form, sorted by target index.
  const Edge* edgesBegin(std::uint32_t i, ActionId a) const { return &edges_[offsets_[i * numActions() + a]]; }
  const Edge* edgesEnd(std::uint32_t i, ActionId a) const { return &edges_[offsets_[i * numActions() + a + 1]]; }

  bool inAbsorbing(std::uint32_t i) const { return absorbing_[i]; }
  bool inAccepting(std::uint32_t i, std::size_t k) const { return dfas_[k].isAccepting(dfaState(i, k)); }
  const std::vector<Dfa>& dfas() const { return dfas_; }
  const std::vector<PropId>& literalProps() const { return litProp_; }
  std::optional<std::uint32_t> find(StateId s, int t, const std::vector<int>& q) const;

  /// Advances every DFA coordinate from q on the label of expanded state (s, t).
  std::vector<int> advance(const std::vector<int>& q, StateId s, int t) const;

  void dumpEdges(std::ostream& os) const;

 private:
  friend ProductMdp product(const ExpandedMdp&, const std::vector<Dfa>&);
  ProductMdp(ExpandedMdp expanded, std::vector<Dfa> dfas) : expanded_(std::move(expanded)), dfas_(std::move(dfas)) {}

  ExpandedMdp expanded_;
  std::vector<Dfa> dfas_;
  std::vector<PropId> litProp_;
  std::vector<bool> litNeg_;
  std::size_t numStates_ = 0;
  std::uint32_t initial_ = 0;
  std::vector<StateId> base_;
  std::vector<int> stage_;
  std::vector<int> q_;
  std::vector<std::size_t> offsets_;
  std::vector<Edge> edges_;
  std::vector<bool> absorbing_;
};

ProductMdp product(const ExpandedMdp& expanded, const std::vector<Dfa>& modifiedDfas);

/// Indices of states whose every automaton coordinate is absorbing and non-accepting.
std::vector<std::uint32_t> absorbingSet(const ProductMdp& product);

}  // namespace veil
