#include "veil/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace veil {

namespace {

constexpr double kRowSumTol = 1e-9;

template <typename Names>
std::optional<std::uint32_t> lookup(const Names& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::uint32_t>(it - names.begin());
}

void requireUnique(const std::vector<std::string>& names, const char* what) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw ModelError(fmt::format("{}: empty name", what));
    if (!seen.insert(n).second) throw ModelError(fmt::format("{}: duplicate name '{}'", what, n));
  }
}

}  // namespace

Mdp::Mdp(std::vector<std::string> states, StateId initial, std::vector<std::string> actions,
         std::vector<std::string> props,
         std::vector<std::vector<std::vector<Transition>>> transitions,
         std::vector<std::vector<PropId>> labels)
    : stateNames_(std::move(states)),
      initial_(initial),
      actionNames_(std::move(actions)),
      propNames_(std::move(props)),
      transitions_(std::move(transitions)),
      labels_(std::move(labels)) {
  if (stateNames_.empty()) throw ModelError("states: model has no states");
  if (actionNames_.empty()) throw ModelError("actions: model has no actions");
  requireUnique(stateNames_, "states");
  requireUnique(actionNames_, "actions");
  requireUnique(propNames_, "atomic propositions");
  if (initial_ >= stateNames_.size()) throw ModelError("initial: state index out of range");
  if (transitions_.size() != stateNames_.size())
    throw ModelError("transitions: table does not cover every state");
  if (labels_.size() != stateNames_.size()) labels_.resize(stateNames_.size());

  for (StateId s = 0; s < stateNames_.size(); ++s) {
    auto& perAction = transitions_[s];
    if (perAction.size() != actionNames_.size())
      throw ModelError(fmt::format("transitions: state '{}' does not list every action", stateNames_[s]));
    for (ActionId a = 0; a < actionNames_.size(); ++a) {
      auto& row = perAction[a];
      std::erase_if(row, [](const Transition& tr) { return tr.prob == 0.0; });
      if (row.empty())
        throw ModelError(fmt::format("transitions: action '{}' not enabled in state '{}'",
                                     actionNames_[a], stateNames_[s]));
      std::sort(row.begin(), row.end(), [](auto& x, auto& y) { return x.to < y.to; });
      double sum = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        const auto& tr = row[k];
        if (tr.to >= stateNames_.size())
          throw ModelError(fmt::format("transitions: ({}, {}) targets unknown state index {}",
                                       stateNames_[s], actionNames_[a], tr.to));
        if (!(tr.prob > 0.0) || tr.prob > 1.0 + kRowSumTol || !std::isfinite(tr.prob))
          throw ModelError(fmt::format("transitions: ({}, {}, {}) has invalid probability {}",
                                       stateNames_[s], actionNames_[a], stateNames_[tr.to], tr.prob));
        if (k > 0 && row[k - 1].to == tr.to)
          throw ModelError(fmt::format("transitions: duplicate entry ({}, {}, {})", stateNames_[s],
                                       actionNames_[a], stateNames_[tr.to]));
        sum += tr.prob;
      }
      if (std::abs(sum - 1.0) > kRowSumTol)
        throw ModelError(fmt::format("transitions: row ({}, {}) sums to {:.12g}, expected 1",
                                     stateNames_[s], actionNames_[a], sum));
      for (auto& tr : row) tr.prob /= sum;
    }
  }

  for (StateId s = 0; s < labels_.size(); ++s) {
    auto& l = labels_[s];
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
    for (PropId p : l)
      if (p >= propNames_.size())
        throw ModelError(fmt::format("labels: state '{}' carries unknown proposition index {}",
                                     stateNames_[s], p));
  }
}

std::optional<StateId> Mdp::findState(const std::string& name) const { return lookup(stateNames_, name); }
std::optional<ActionId> Mdp::findAction(const std::string& name) const { return lookup(actionNames_, name); }
std::optional<PropId> Mdp::findProp(const std::string& name) const { return lookup(propNames_, name); }

double Mdp::prob(StateId s, ActionId a, StateId to) const {
  for (const auto& tr : transitions_.at(s).at(a))
    if (tr.to == to) return tr.prob;
  return 0.0;
}

bool Mdp::hasLabel(StateId s, PropId p) const {
  const auto& l = labels_[s];
  return std::binary_search(l.begin(), l.end(), p);
}

Mdp loadModel(const nlohmann::json& doc) {
  using nlohmann::json;
  auto field = [&](const char* key, json::value_t type) -> const json& {
    if (!doc.is_object()) throw ModelError("model: document root must be an object");
    auto it = doc.find(key);
    if (it == doc.end()) throw ModelError(fmt::format("model: missing field '{}'", key));
    if (it->type() != type) throw ModelError(fmt::format("model: field '{}' has the wrong type", key));
    return *it;
  };
  auto stringArray = [](const json& arr, const char* where) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) throw ModelError(fmt::format("{}[{}]: expected a string", where, i));
      out.push_back(arr[i].get<std::string>());
    }
    return out;
  };

  auto states = stringArray(field("states", json::value_t::array), "states");
  auto actions = stringArray(field("actions", json::value_t::array), "actions");
  std::string initialName = field("initial", json::value_t::string).get<std::string>();
  const json& trs = field("transitions", json::value_t::array);
  const json& labs = field("labels", json::value_t::object);

  requireUnique(states, "states");
  requireUnique(actions, "actions");
  std::unordered_map<std::string, StateId> stateIdx;
  for (StateId i = 0; i < states.size(); ++i) stateIdx.emplace(states[i], i);
  std::unordered_map<std::string, ActionId> actionIdx;
  for (ActionId i = 0; i < actions.size(); ++i) actionIdx.emplace(actions[i], i);

  auto initial = stateIdx.find(initialName);
  if (initial == stateIdx.end())
    throw ModelError(fmt::format("initial: unknown state '{}'", initialName));

  std::vector<std::string> props;
  if (auto it = doc.find("atomicProps"); it != doc.end()) {
    if (!it->is_array()) throw ModelError("atomicProps: expected an array");
    props = stringArray(*it, "atomicProps");
  }
  std::map<std::string, PropId> propIdx;
  for (PropId i = 0; i < props.size(); ++i) propIdx.emplace(props[i], i);
  const bool declaredProps = doc.contains("atomicProps");

  std::vector<std::vector<PropId>> labels(states.size());
  for (auto it = labs.begin(); it != labs.end(); ++it) {
    auto s = stateIdx.find(it.key());
    if (s == stateIdx.end()) throw ModelError(fmt::format("labels: unknown state '{}'", it.key()));
    if (!it->is_array()) throw ModelError(fmt::format("labels.{}: expected an array", it.key()));
    for (const auto& p : *it) {
      if (!p.is_string()) throw ModelError(fmt::format("labels.{}: expected proposition names", it.key()));
      auto name = p.get<std::string>();
      auto pi = propIdx.find(name);
      if (pi == propIdx.end()) {
        if (declaredProps)
          throw ModelError(fmt::format("labels.{}: proposition '{}' is not declared", it.key(), name));
        pi = propIdx.emplace(name, static_cast<PropId>(props.size())).first;
        props.push_back(name);
      }
      labels[s->second].push_back(pi->second);
    }
  }

  std::vector<std::vector<std::vector<Transition>>> table(
      states.size(), std::vector<std::vector<Transition>>(actions.size()));
  std::set<std::tuple<StateId, ActionId, StateId>> seen;
  for (std::size_t i = 0; i < trs.size(); ++i) {
    const auto& e = trs[i];
    auto where = fmt::format("transitions[{}]", i);
    if (!e.is_object()) throw ModelError(where + ": expected an object");
    for (const char* k : {"from", "action", "to", "prob"})
      if (!e.contains(k)) throw ModelError(fmt::format("{}: missing field '{}'", where, k));
    if (!e["from"].is_string() || !e["action"].is_string() || !e["to"].is_string() || !e["prob"].is_number())
      throw ModelError(where + ": field has the wrong type");
    auto from = stateIdx.find(e["from"].get<std::string>());
    auto to = stateIdx.find(e["to"].get<std::string>());
    auto act = actionIdx.find(e["action"].get<std::string>());
    if (from == stateIdx.end()) throw ModelError(fmt::format("{}: unknown state '{}'", where, e["from"].get<std::string>()));
    if (to == stateIdx.end()) throw ModelError(fmt::format("{}: unknown state '{}'", where, e["to"].get<std::string>()));
    if (act == actionIdx.end()) throw ModelError(fmt::format("{}: unknown action '{}'", where, e["action"].get<std::string>()));
    if (!seen.emplace(from->second, act->second, to->second).second)
      throw ModelError(fmt::format("{}: duplicate entry ({}, {}, {})", where, from->first, act->first, to->first));
    double p = e["prob"].get<double>();
    if (!(p >= 0.0) || !std::isfinite(p)) throw ModelError(fmt::format("{}: invalid probability {}", where, p));
    table[from->second][act->second].push_back({to->second, p});
  }

  return Mdp(std::move(states), initial->second, std::move(actions), std::move(props),
             std::move(table), std::move(labels));
}

Mdp loadModel(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(fmt::format("model: parse error: {}", e.what()));
  }
  return loadModel(doc);
}

Mdp loadModelFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(fmt::format("{}: cannot open model file", path));
  try {
    return loadModel(in);
  } catch (const ModelError& e) {
    throw ModelError(fmt::format("{}: {}", path, e.what()));
  }
}

nlohmann::json toJson(const Mdp& mdp) {
  nlohmann::json doc;
  doc["states"] = mdp.stateNames();
  doc["initial"] = mdp.stateName(mdp.initial());
  doc["actions"] = mdp.actionNames();
  doc["atomicProps"] = mdp.propNames();
  auto trs = nlohmann::json::array();
  for (StateId s = 0; s < mdp.numStates(); ++s)
    for (ActionId a = 0; a < mdp.numActions(); ++a)
      for (const auto& tr : mdp.successors(s, a))
        trs.push_back({{"from", mdp.stateName(s)}, {"action", mdp.actionName(a)},
                       {"to", mdp.stateName(tr.to)}, {"prob", tr.prob}});
  doc["transitions"] = std::move(trs);
  auto labs = nlohmann::json::object();
  for (StateId s = 0; s < mdp.numStates(); ++s) {
    auto arr = nlohmann::json::array();
    for (PropId p : mdp.labels(s)) arr.push_back(mdp.propName(p));
    labs[mdp.stateName(s)] = std::move(arr);
  }
  doc["labels"] = std::move(labs);
  return doc;
}

ExpandedMdp::ExpandedMdp(Mdp base, int horizon) : base_(std::move(base)), horizon_(horizon) {
  if (horizon < 1) throw ModelError(fmt::format("expand: horizon must be at least 1 (got {})", horizon));
}

std::vector<ExpandedMdp::Successor> ExpandedMdp::successors(std::uint32_t idx, ActionId a) const {
  const int t2 = nextStage(stage(idx), horizon_);
  std::vector<Successor> out;
  for (const auto& tr : base_.successors(baseState(idx), a)) out.push_back({index(tr.to, t2), tr.prob});
  return out;
}

ExpandedMdp expand(const Mdp& mdp, int horizon) { return ExpandedMdp(mdp, horizon); }

std::vector<std::vector<PropId>> Trajectory::word(const Mdp& mdp) const {
  std::vector<std::vector<PropId>> w;
  w.reserve(states.size());
  for (StateId s : states) w.push_back(mdp.labels(s));
  return w;
}

bool Trajectory::consistentWith(const Mdp& mdp) const {
  if (states.empty()) return false;
  if (actions.size() + 1 != states.size()) return false;
  for (std::size_t k = 0; k + 1 < states.size(); ++k)
    if (mdp.prob(states[k], actions[k], states[k + 1]) <= 0.0) return false;
  return true;
}

}  // namespace veil
