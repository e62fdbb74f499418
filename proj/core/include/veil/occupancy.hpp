#pragma once

#include <cstdint>
#include <vector>

#include "veil/program.hpp"

namespace veil::opt {

/// Linear maximization over the occupancy polytope of an acyclic flow
/// structure by backward induction; optimal vertices are deterministic
/// policies.
class FlowOracle {
 public:
  explicit FlowOracle(const FlowStructure& flow);

  struct Vertex {
    std::vector<std::int8_t> choice;  // chosen action per flow state, -1 if none
    std::vector<SparseEntry> occupancy;  // (variable, expected visits), reached states only
    double value = 0.0;
  };

  /// reward is indexed by program variable; entries for non-occupancy
  /// variables are ignored. Ties go to the lowest action index.
  Vertex maximize(const std::vector<double>& reward) const;

  /// Forward propagation of the initial distribution under per-state
  /// action choices.
  std::vector<SparseEntry> occupancy(const std::vector<std::int8_t>& choice) const;

  const std::vector<int>& topologicalOrder() const { return order_; }
  std::size_t numStates() const { return flow_->states.size(); }

 private:
  const FlowStructure* flow_;
  std::vector<int> order_;
};

}  // namespace veil::opt
