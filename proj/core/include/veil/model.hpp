#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace veil {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using PropId = std::uint32_t;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Transition {
  StateId to;
  double prob;
};

/// Finite MDP with a total transition function and state labels.
///
/// Construction validates every invariant; rows are renormalized so that
/// each (state, action) distribution sums to exactly 1.
class Mdp {
 public:
  Mdp(std::vector<std::string> states, StateId initial,
      std::vector<std::string> actions, std::vector<std::string> props,
      std::vector<std::vector<std::vector<Transition>>> transitions,
      std::vector<std::vector<PropId>> labels);

  std::size_t numStates() const { return stateNames_.size(); }
  std::size_t numActions() const { return actionNames_.size(); }
  std::size_t numProps() const { return propNames_.size(); }
  StateId initial() const { return initial_; }

  const std::string& stateName(StateId s) const { return stateNames_.at(s); }
  const std::string& actionName(ActionId a) const { return actionNames_.at(a); }
  const std::string& propName(PropId p) const { return propNames_.at(p); }
  const std::vector<std::string>& stateNames() const { return stateNames_; }
  const std::vector<std::string>& actionNames() const { return actionNames_; }
  const std::vector<std::string>& propNames() const { return propNames_; }

  std::optional<StateId> findState(const std::string& name) const;
  std::optional<ActionId> findAction(const std::string& name) const;
  std::optional<PropId> findProp(const std::string& name) const;

  /// Successors of (s, a), sorted by target state, zero entries removed.
  const std::vector<Transition>& successors(StateId s, ActionId a) const {
    return transitions_[s][a];
  }
  double prob(StateId s, ActionId a, StateId to) const;

  /// Sorted proposition ids holding in s.
  const std::vector<PropId>& labels(StateId s) const { return labels_[s]; }
  bool hasLabel(StateId s, PropId p) const;

 private:
  std::vector<std::string> stateNames_;
  StateId initial_;
  std::vector<std::string> actionNames_;
  std::vector<std::string> propNames_;
  std::vector<std::vector<std::vector<Transition>>> transitions_;
  std::vector<std::vector<PropId>> labels_;
};

Mdp loadModel(const nlohmann::json& doc);
Mdp loadModel(std::istream& in);
Mdp loadModelFile(const std::string& path);
nlohmann::json toJson(const Mdp& mdp);

/// Time-expanded MDP M x [T]: states (s, t) with t in 1..T, the stage
/// advancing until T and then holding.
class ExpandedMdp {
 public:
  struct Successor {
    std::uint32_t to;
    double prob;
  };

  ExpandedMdp(Mdp base, int horizon);

  const Mdp& base() const { return base_; }
  int horizon() const { return horizon_; }
  std::size_t numStates() const { return base_.numStates() * static_cast<std::size_t>(horizon_); }
  std::uint32_t initial() const { return index(base_.initial(), 1); }

  std::uint32_t index(StateId s, int t) const {
    return static_cast<std::uint32_t>((t - 1) * base_.numStates() + s);
  }
  StateId baseState(std::uint32_t idx) const {
    return static_cast<StateId>(idx % base_.numStates());
  }
  int stage(std::uint32_t idx) const {
    return static_cast<int>(idx / base_.numStates()) + 1;
  }
  static int nextStage(int t, int horizon) { return t < horizon ? t + 1 : t; }

  std::vector<Successor> successors(std::uint32_t idx, ActionId a) const;
  /// Label of (s, t) restricted to base propositions; the stage is carried separately.
  const std::vector<PropId>& labels(std::uint32_t idx) const { return base_.labels(baseState(idx)); }

 private:
  Mdp base_;
  int horizon_;
};

ExpandedMdp expand(const Mdp& mdp, int horizon);

/// A finite run s0 .. sL together with its induced word.
struct Trajectory {
  std::vector<StateId> states;
  std::vector<ActionId> actions;  // actions[k] taken in states[k]; size L
  std::size_t length() const { return states.empty() ? 0 : states.size() - 1; }
  std::vector<std::vector<PropId>> word(const Mdp& mdp) const;
  /// Checks that each step has positive probability under the recorded action.
  bool consistentWith(const Mdp& mdp) const;
};

}  // namespace veil
