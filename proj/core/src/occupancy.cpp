#include "veil/occupancy.hpp"

#include <deque>

namespace veil::opt {

FlowOracle::FlowOracle(const FlowStructure& flow) : flow_(&flow) {
  const auto& st = flow.states;
  std::vector<int> indeg(st.size(), 0);
  for (const auto& s : st)
    for (const auto& a : s.actions)
      for (auto [to, p] : a.succ)
        if (to >= 0) ++indeg[to];
  std::deque<int> ready;
  for (int s = 0; s < static_cast<int>(st.size()); ++s)
    if (indeg[s] == 0) ready.push_back(s);
  order_.reserve(st.size());
  while (!ready.empty()) {
    int s = ready.front();
    ready.pop_front();
    order_.push_back(s);
    for (const auto& a : st[s].actions)
      for (auto [to, p] : a.succ)
        if (to >= 0 && --indeg[to] == 0) ready.push_back(to);
  }
  if (order_.size() != st.size()) throw ProgramError("flow structure contains a cycle among flow states");
  for (const auto& s : st)
    if (s.actions.size() > 127) throw ProgramError("flow state has more than 127 actions");
}

FlowOracle::Vertex FlowOracle::maximize(const std::vector<double>& reward) const {
  const auto& st = flow_->states;
  std::vector<double> value(st.size(), 0.0);
  Vertex out;
  out.choice.assign(st.size(), -1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const int s = *it;
    double best = -kInf;
    int arg = -1;
    const auto& acts = st[s].actions;
    for (int a = 0; a < static_cast<int>(acts.size()); ++a) {
      double q = reward[acts[a].var];
      for (auto [to, p] : acts[a].succ)
        if (to >= 0) q += p * value[to];
      if (q > best) {
        best = q;
        arg = a;
      }
    }
    value[s] = arg >= 0 ? best : 0.0;
    out.choice[s] = static_cast<std::int8_t>(arg);
  }
  for (std::size_t s = 0; s < st.size(); ++s) out.value += st[s].alpha * value[s];
  out.occupancy = occupancy(out.choice);
  return out;
}

std::vector<SparseEntry> FlowOracle::occupancy(const std::vector<std::int8_t>& choice) const {
  const auto& st = flow_->states;
  std::vector<double> mass(st.size(), 0.0);
  for (std::size_t s = 0; s < st.size(); ++s) mass[s] = st[s].alpha;
  std::vector<SparseEntry> occ;
  for (int s : order_) {
    if (mass[s] == 0.0 || choice[s] < 0) continue;
    const auto& a = st[s].actions[choice[s]];
    occ.push_back({a.var, mass[s]});
    for (auto [to, p] : a.succ)
      if (to >= 0) mass[to] += p * mass[s];
  }
  return occ;
}

}  // namespace veil::opt
