#include "veil/policy.hpp"

#include <cmath>
#include <deque>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace veil {

FiniteMemoryPolicy::FiniteMemoryPolicy(Mdp mdp, Memory memory, int horizon, std::vector<Dfa> dfas,
                                       const std::map<Key, std::vector<double>>& decisions)
    : mdp_(std::move(mdp)), memory_(memory), horizon_(horizon), dfas_(std::move(dfas)) {
  if (horizon_ < 1) throw ModelError("policy horizon must be at least 1");
  if (memory_ == Memory::Stage) dfas_.clear();
  for (const auto& d : dfas_) {
    auto p = mdp_.findProp(d.literal().prop);
    if (!p) throw AutomatonError(fmt::format("policy automaton reads unknown proposition '{}'", d.literal().prop));
    litProp_.push_back(static_cast<int>(*p));
  }
  const std::size_t nA = mdp_.numActions();
  std::deque<std::uint32_t> queue;
  auto intern = [&](Key k) {
    auto [it, inserted] = index_.emplace(std::move(k), static_cast<std::uint32_t>(keys_.size()));
    if (inserted) {
      keys_.push_back(it->first);
      queue.push_back(it->second);
    }
    return it->second;
  };
  intern(initialKey());
  offsets_.push_back(0);
  while (!queue.empty()) {
    const std::uint32_t n = queue.front();
    queue.pop_front();
    const Key key = keys_[n];
    for (ActionId a = 0; a < nA; ++a) {
      for (const auto& tr : mdp_.successors(static_cast<StateId>(key[0]), a)) {
        const std::uint32_t to = intern(successorKey(key, tr.to));
        edges_.push_back({to, tr.prob});
      }
      offsets_.push_back(edges_.size());
    }
  }

  dist_.assign(keys_.size(), std::vector<double>(nA, 1.0 / static_cast<double>(nA)));
  explicit_.assign(keys_.size(), false);
  for (const auto& [key, d] : decisions) {
    auto it = index_.find(key);
    if (it == index_.end()) continue;
    if (d.size() != nA) throw ModelError("policy decision has the wrong number of actions");
    double s = 0.0;
    for (double v : d) {
      if (!(v >= -1e-9)) throw ModelError("policy decision has a negative probability");
      s += std::max(v, 0.0);
    }
    if (std::abs(s - 1.0) > 1e-6) throw ModelError(fmt::format("policy decision sums to {}", s));
    auto& out = dist_[it->second];
    for (std::size_t a = 0; a < nA; ++a) out[a] = std::max(d[a], 0.0) / s;
    explicit_[it->second] = true;
  }
}

std::optional<std::uint32_t> FiniteMemoryPolicy::find(const Key& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FiniteMemoryPolicy::Key FiniteMemoryPolicy::initialKey() const {
  const StateId s0 = mdp_.initial();
  Key k{static_cast<int>(s0), 1};
  for (std::size_t i = 0; i < dfas_.size(); ++i) {
    const bool holds = mdp_.hasLabel(s0, static_cast<PropId>(litProp_[i])) != dfas_[i].literal().negated;
    k.push_back(dfas_[i].step(dfas_[i].initial(), holds, 1));
  }
  return k;
}

FiniteMemoryPolicy::Key FiniteMemoryPolicy::successorKey(const Key& from, StateId next) const {
  const int t = ExpandedMdp::nextStage(from[1], horizon_);
  Key k{static_cast<int>(next), t};
  for (std::size_t i = 0; i < dfas_.size(); ++i) {
    const bool holds = mdp_.hasLabel(next, static_cast<PropId>(litProp_[i])) != dfas_[i].literal().negated;
    k.push_back(dfas_[i].step(from[2 + i], holds, t));
  }
  return k;
}

namespace {

const char* condName(LitCond c) {
  switch (c) {
    case LitCond::Any: return "any";
    case LitCond::True: return "true";
    case LitCond::False: return "false";
  }
  return "?";
}

LitCond condFromName(const std::string& s) {
  if (s == "any") return LitCond::Any;
  if (s == "true") return LitCond::True;
  if (s == "false") return LitCond::False;
  throw ModelError(fmt::format("automaton guard: unknown literal condition '{}'", s));
}

}  // namespace

nlohmann::json dfaToJson(const Dfa& dfa) {
  using nlohmann::json;
  json states = json::array();
  for (int q = 0; q < dfa.numStates(); ++q) {
    json edges = json::array();
    for (const auto& e : dfa.edges(q)) {
      json hi = e.guard.stageHi == kStageInf ? json("inf") : json(e.guard.stageHi);
      edges.push_back({{"cond", condName(e.guard.cond)}, {"stageLo", e.guard.stageLo}, {"stageHi", hi}, {"to", e.target}});
    }
    states.push_back({{"name", dfa.stateName(q)}, {"accepting", dfa.isAccepting(q)}, {"edges", std::move(edges)}});
  }
  json doc{{"literal", {{"prop", dfa.literal().prop}, {"negated", dfa.literal().negated}}},
           {"initial", dfa.initial()},
           {"states", std::move(states)}};
  doc["terminal"] = dfa.terminal() ? json(*dfa.terminal()) : json(nullptr);
  return doc;
}

Dfa dfaFromJson(const nlohmann::json& doc) {
  Literal lit{doc.at("literal").at("prop").get<std::string>(), doc.at("literal").at("negated").get<bool>()};
  const auto& states = doc.at("states");
  Dfa dfa(lit, static_cast<int>(states.size()), doc.at("initial").get<int>());
  for (int q = 0; q < static_cast<int>(states.size()); ++q) {
    const auto& st = states[q];
    dfa.setStateName(q, st.value("name", fmt::format("q{}", q)));
    dfa.setAccepting(q, st.value("accepting", false));
    for (const auto& e : st.at("edges")) {
      Guard g;
      g.cond = condFromName(e.at("cond").get<std::string>());
      g.stageLo = e.at("stageLo").get<int>();
      g.stageHi = e.at("stageHi").is_string() ? kStageInf : e.at("stageHi").get<int>();
      const int to = e.at("to").get<int>();
      if (to < 0 || to >= static_cast<int>(states.size())) throw ModelError("automaton edge target out of range");
      dfa.addEdge(q, g, to);
    }
  }
  if (doc.contains("terminal") && !doc.at("terminal").is_null()) dfa.markTerminal(doc.at("terminal").get<int>());
  dfa.validate();
  return dfa;
}

nlohmann::json toJson(const FiniteMemoryPolicy& policy) {
  using nlohmann::json;
  const Mdp& mdp = policy.mdp();
  json doc;
  doc["format"] = "veil-policy/1";
  doc["memory"] = policy.memory() == FiniteMemoryPolicy::Memory::Product ? "product" : "stage";
  doc["horizon"] = policy.horizon();
  doc["actions"] = mdp.actionNames();
  json automata = json::array();
  for (const auto& d : policy.dfas()) automata.push_back(dfaToJson(d));
  doc["automata"] = std::move(automata);
  json nodes = json::array();
  for (std::uint32_t n = 0; n < policy.numNodes(); ++n) {
    if (!policy.hasDecision(n)) continue;
    const auto& k = policy.key(n);
    json node{{"state", mdp.stateName(static_cast<StateId>(k[0]))}, {"stage", k[1]}};
    if (k.size() > 2) node["q"] = std::vector<int>(k.begin() + 2, k.end());
    node["dist"] = policy.distribution(n);
    nodes.push_back(std::move(node));
  }
  doc["nodes"] = std::move(nodes);
  doc["default"] = "uniform";
  return doc;
}

FiniteMemoryPolicy policyFromJson(const Mdp& mdp, const nlohmann::json& doc) {
  try {
    if (doc.value("format", "") != "veil-policy/1") throw ModelError("policy: expected format 'veil-policy/1'");
    const std::string mem = doc.at("memory").get<std::string>();
    if (mem != "product" && mem != "stage") throw ModelError(fmt::format("policy: unknown memory model '{}'", mem));
    const auto memory = mem == "product" ? FiniteMemoryPolicy::Memory::Product : FiniteMemoryPolicy::Memory::Stage;
    const auto actions = doc.at("actions").get<std::vector<std::string>>();
    if (actions != mdp.actionNames()) throw ModelError("policy: action list does not match the model");
    std::vector<Dfa> dfas;
    for (const auto& a : doc.at("automata")) dfas.push_back(dfaFromJson(a));
    if (memory == FiniteMemoryPolicy::Memory::Stage && !dfas.empty())
      throw ModelError("policy: stage memory carries no automata");
    std::map<FiniteMemoryPolicy::Key, std::vector<double>> decisions;
    for (const auto& n : doc.at("nodes")) {
      auto s = mdp.findState(n.at("state").get<std::string>());
      if (!s) throw ModelError(fmt::format("policy: unknown state '{}'", n.at("state").get<std::string>()));
      FiniteMemoryPolicy::Key k{static_cast<int>(*s), n.at("stage").get<int>()};
      if (n.contains("q"))
        for (int q : n.at("q").get<std::vector<int>>()) k.push_back(q);
      if (k.size() != 2 + dfas.size()) throw ModelError("policy: node memory does not match the automata count");
      decisions[k] = n.at("dist").get<std::vector<double>>();
    }
    return FiniteMemoryPolicy(mdp, memory, doc.at("horizon").get<int>(), std::move(dfas), decisions);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(fmt::format("policy: {}", e.what()));
  }
}

FiniteMemoryPolicy loadPolicyFile(const Mdp& mdp, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(fmt::format("{}: cannot open policy file", path));
  try {
    return policyFromJson(mdp, nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(fmt::format("{}: {}", path, e.what()));
  } catch (const std::exception& e) {
    throw ModelError(fmt::format("{}: {}", path, e.what()));
  }
}

}  // namespace veil
