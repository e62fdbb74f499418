#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "veil/automata.hpp"
#include "veil/model.hpp"

namespace veil {

/// Policy on the base MDP whose memory is the stage counter and, for
/// product memory, the coordinates of the modified DFAs.
///
/// Nodes are the memory states reachable from the initial one under any
/// action; nodes without an explicit decision act uniformly.
class FiniteMemoryPolicy {
 public:
  enum class Memory { Product, Stage };
  /// (s, t, q_1, ..., q_N); stage memory uses (s, t).
  using Key = std::vector<int>;
  struct Edge {
    std::uint32_t to;
    double prob;
  };

  FiniteMemoryPolicy(Mdp mdp, Memory memory, int horizon, std::vector<Dfa> dfas,
                     const std::map<Key, std::vector<double>>& decisions);

  const Mdp& mdp() const { return mdp_; }
  Memory memory() const { return memory_; }
  int horizon() const { return horizon_; }
  const std::vector<Dfa>& dfas() const { return dfas_; }

  std::size_t numNodes() const { return keys_.size(); }
  std::uint32_t initialNode() const { return 0; }
  const Key& key(std::uint32_t node) const { return keys_[node]; }
  StateId state(std::uint32_t node) const { return static_cast<StateId>(keys_[node][0]); }
  int stage(std::uint32_t node) const { return keys_[node][1]; }
  const std::vector<double>& distribution(std::uint32_t node) const { return dist_[node]; }
  bool hasDecision(std::uint32_t node) const { return explicit_[node]; }
  std::optional<std::uint32_t> find(const Key& key) const;

  const Edge* edgesBegin(std::uint32_t node, ActionId a) const { return &edges_[offsets_[node * mdp_.numActions() + a]]; }
  const Edge* edgesEnd(std::uint32_t node, ActionId a) const {
    return &edges_[offsets_[node * mdp_.numActions() + a + 1]];
  }

  Key initialKey() const;
  Key successorKey(const Key& from, StateId next) const;

 private:
  Mdp mdp_;
  Memory memory_;
  int horizon_;
  std::vector<Dfa> dfas_;
  std::vector<int> litProp_;  // -1 when the proposition is absent from the model
  std::vector<Key> keys_;
  std::map<Key, std::uint32_t> index_;
  std::vector<std::vector<double>> dist_;
  std::vector<bool> explicit_;
  std::vector<std::size_t> offsets_;
  std::vector<Edge> edges_;
};

nlohmann::json dfaToJson(const Dfa& dfa);
Dfa dfaFromJson(const nlohmann::json& doc);

/// Memory descriptor, DFA tables and per-node action distributions.
nlohmann::json toJson(const FiniteMemoryPolicy& policy);
FiniteMemoryPolicy policyFromJson(const Mdp& mdp, const nlohmann::json& doc);
FiniteMemoryPolicy loadPolicyFile(const Mdp& mdp, const std::string& path);

}  // namespace veil
