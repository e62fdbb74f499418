#include "veil/program.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace veil::opt {

double LinearExpr::eval(const std::vector<double>& x) const {
  double v = constant;
  for (const auto& t : terms) v += t.value * x[t.index];
  return v;
}

int SynthesisProgram::addVariable(std::string name, VarKind kind, double lb, double ub) {
  if (lb > ub) throw ProgramError(fmt::format("variable {}: empty bounds [{}, {}]", name, lb, ub));
  if (kind == VarKind::Binary && (lb < 0.0 || ub > 1.0))
    throw ProgramError(fmt::format("binary {}: bounds must lie in [0,1]", name));
  vars_.push_back({std::move(name), kind, lb, ub});
  isOcc_.push_back(false);
  return static_cast<int>(vars_.size()) - 1;
}

int SynthesisProgram::addConstraint(std::vector<SparseEntry> terms, double lo, double hi, RowKind kind,
                                    std::string name) {
  for (const auto& t : terms)
    if (t.index < 0 || t.index >= static_cast<int>(vars_.size()))
      throw ProgramError(fmt::format("constraint {}: references unregistered variable {}", name, t.index));
  // Merge duplicate indices.
  std::sort(terms.begin(), terms.end(), [](auto& a, auto& b) { return a.index < b.index; });
  std::vector<SparseEntry> merged;
  for (const auto& t : terms) {
    if (!merged.empty() && merged.back().index == t.index)
      merged.back().value += t.value;
    else
      merged.push_back(t);
  }
  std::erase_if(merged, [](const SparseEntry& e) { return e.value == 0.0; });
  rows_.push_back({std::move(merged), lo, hi, kind, std::move(name)});
  return static_cast<int>(rows_.size()) - 1;
}

void SynthesisProgram::setBounds(int var, double lb, double ub) {
  vars_.at(var).lb = lb;
  vars_.at(var).ub = ub;
}

void SynthesisProgram::materializeFlowRows() {
  const auto& st = flow_.states;
  std::vector<std::vector<SparseEntry>> rows(st.size());
  for (std::size_t s = 0; s < st.size(); ++s)
    for (const auto& a : st[s].actions) {
      rows[s].push_back({a.var, 1.0});
      for (auto [to, p] : a.succ)
        if (to >= 0) rows[to].push_back({a.var, -p});
    }
  for (const auto& a : st)
    for (const auto& act : a.actions) isOcc_.at(act.var) = true;
  for (int v : flow_.frozenVars) isOcc_.at(v) = true;
  for (std::size_t s = 0; s < st.size(); ++s)
    addConstraint(std::move(rows[s]), st[s].alpha, st[s].alpha, RowKind::Flow,
                  st[s].name.empty() ? fmt::format("flow[{}]", s) : "flow" + st[s].name);
}

std::size_t SynthesisProgram::numContinuous() const {
  return static_cast<std::size_t>(std::count_if(vars_.begin(), vars_.end(),
                                                [](const Variable& v) { return v.kind == VarKind::Continuous; }));
}

std::size_t SynthesisProgram::numBinary() const { return vars_.size() - numContinuous(); }

std::size_t SynthesisProgram::numFreeBinary() const {
  return static_cast<std::size_t>(std::count_if(vars_.begin(), vars_.end(), [](const Variable& v) {
    return v.kind == VarKind::Binary && v.lb < v.ub;
  }));
}

std::optional<int> SynthesisProgram::findVariable(const std::string& name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name == name) return static_cast<int>(i);
  return std::nullopt;
}

void SynthesisProgram::validate() const {
  if (entropy_.empty()) throw ProgramError("program has no entropy terms");
  for (int v : entropy_)
    if (v < 0 || v >= static_cast<int>(vars_.size())) throw ProgramError("entropy term out of range");
  for (const auto& s : flow_.states)
    for (const auto& a : s.actions) {
      if (a.var < 0 || a.var >= static_cast<int>(vars_.size()))
        throw ProgramError("flow action references unregistered variable");
      if (vars_[a.var].lb < 0.0) throw ProgramError(fmt::format("occupancy {} lacks a nonnegativity bound", vars_[a.var].name));
      for (auto [to, p] : a.succ)
        if (to >= static_cast<int>(flow_.states.size())) throw ProgramError("flow successor out of range");
    }
  for (const auto& b : blocks_) {
    for (int v : b.vars)
      if (v < 0 || v >= static_cast<int>(vars_.size()) || vars_[v].kind != VarKind::Binary)
        throw ProgramError(fmt::format("block {} references a non-binary variable", b.name));
    if (b.selectors.size() != b.vars.size()) throw ProgramError(fmt::format("block {}: selector count mismatch", b.name));
    if (b.output >= static_cast<int>(vars_.size())) throw ProgramError(fmt::format("block {}: output out of range", b.name));
  }
}

std::optional<SynthesisProgram> fixVariables(const SynthesisProgram& program,
                                             const std::vector<std::pair<int, double>>& fixed) {
  constexpr double tol = 1e-9;
  const auto& vars = program.variables();
  std::vector<double> lb(vars.size()), ub(vars.size());
  for (std::size_t v = 0; v < vars.size(); ++v) {
    lb[v] = vars[v].lb;
    ub[v] = vars[v].ub;
  }
  for (auto [v, val] : fixed) lb[v] = ub[v] = val;

  std::vector<Constraint> rows;
  for (const auto& r : program.constraints())
    if (r.kind != RowKind::Flow) rows.push_back(r);
  std::vector<bool> alive(rows.size(), true);

  for (bool changed = true; changed;) {
    changed = false;
    std::map<std::vector<std::pair<int, double>>, std::size_t> seen;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (!alive[k]) continue;
      auto& r = rows[k];
      std::erase_if(r.terms, [&](const SparseEntry& t) {
        if (lb[t.index] != ub[t.index]) return false;
        r.lo -= t.value * lb[t.index];
        r.hi -= t.value * lb[t.index];
        return true;
      });
      if (r.terms.empty()) {
        // Violated target rows stay for elastic solves.
        if (r.kind == RowKind::Target && (r.lo > tol || r.hi < -tol)) continue;
        if (r.lo > tol || r.hi < -tol) return std::nullopt;
        alive[k] = false;
        continue;
      }
      if (r.kind != RowKind::Linking) continue;
      const int v = r.terms[0].index;
      if (r.terms.size() == 1 && vars[v].kind == VarKind::Continuous && !program.isOccupancy(v)) {
        const double c = r.terms[0].value;
        const double lo = c > 0 ? r.lo / c : r.hi / c, hi = c > 0 ? r.hi / c : r.lo / c;
        lb[v] = std::max(lb[v], lo);
        ub[v] = std::min(ub[v], hi);
        if (lb[v] > ub[v] + tol) return std::nullopt;
        if (ub[v] - lb[v] <= 1e-12) lb[v] = ub[v] = 0.5 * (lb[v] + ub[v]);
        alive[k] = false;
        changed = true;
        continue;
      }
      // Proportional linking rows collapse into one range.
      const double scale = r.terms[0].value;
      std::vector<std::pair<int, double>> key;
      for (const auto& t : r.terms) key.push_back({t.index, t.value / scale});
      double lo = scale > 0 ? r.lo / scale : r.hi / scale, hi = scale > 0 ? r.hi / scale : r.lo / scale;
      if (auto it = seen.find(key); it != seen.end()) {
        auto& q = rows[it->second];
        const double qs = q.terms[0].value;
        double qlo = qs > 0 ? q.lo / qs : q.hi / qs, qhi = qs > 0 ? q.hi / qs : q.lo / qs;
        qlo = std::max(qlo, lo);
        qhi = std::min(qhi, hi);
        if (qlo > qhi + tol) return std::nullopt;
        if (qhi - qlo <= 1e-12) qlo = qhi = 0.5 * (qlo + qhi);
        for (auto& t : q.terms) t.value /= qs;
        q.lo = qlo;
        q.hi = qhi;
        alive[k] = false;
        changed = true;
        continue;
      }
      seen.emplace(std::move(key), k);
    }
  }

  SynthesisProgram out;
  for (std::size_t v = 0; v < vars.size(); ++v) out.addVariable(vars[v].name, vars[v].kind, lb[v], ub[v]);
  out.setFlow(program.flow());
  out.materializeFlowRows();
  for (std::size_t k = 0; k < rows.size(); ++k)
    if (alive[k]) out.addConstraint(std::move(rows[k].terms), rows[k].lo, rows[k].hi, rows[k].kind, std::move(rows[k].name));
  for (const auto& b : program.blocks()) out.addBlock(b);
  out.setEntropyTerms(program.entropyTerms());
  return out;
}

double entropyDenominator(const std::vector<double>& nu) {
  double s = 0.0;
  for (double v : nu) s += v;
  return s;
}

double entropyNumerator(const std::vector<double>& nu) {
  const double s = entropyDenominator(nu);
  if (s <= 0.0) return 0.0;
  double f = 0.0;
  for (double v : nu)
    if (v > 0.0) f -= v * std::log2(v / s);
  return f;
}

double entropyBits(const std::vector<double>& nu) {
  const double s = entropyDenominator(nu);
  return s > 0.0 ? entropyNumerator(nu) / s : 0.0;
}

std::vector<double> gather(const std::vector<double>& x, const std::vector<int>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(x[i]);
  return out;
}

WitnessCheck checkWitness(const SynthesisProgram& program, const std::vector<double>& x, double theta) {
  if (x.size() != program.numVariables()) throw ProgramError("witness size does not match the program");
  WitnessCheck c;
  const auto& vars = program.variables();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    c.maxBoundViolation = std::max({c.maxBoundViolation, vars[i].lb - x[i], x[i] - vars[i].ub});
    if (vars[i].kind == VarKind::Binary)
      c.maxIntegrality = std::max(c.maxIntegrality, std::min(std::abs(x[i]), std::abs(1.0 - x[i])));
  }
  for (const auto& r : program.constraints()) {
    double act = 0.0;
    for (const auto& t : r.terms) act += t.value * x[t.index];
    double viol = std::max({0.0, r.lo - act, act - r.hi});
    if (r.kind == RowKind::Flow) {
      c.maxFlowViolation = std::max(c.maxFlowViolation, viol);
    } else if (viol > c.maxRowViolation) {
      c.maxRowViolation = viol;
      c.worstRow = r.name;
    }
  }
  auto nu = gather(x, program.entropyTerms());
  c.f1 = entropyNumerator(nu);
  c.f2 = entropyDenominator(nu);
  c.gap = c.f1 - theta * c.f2;
  return c;
}

namespace {

nlohmann::json boundJson(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

const char* rowKindName(RowKind k) {
  switch (k) {
    case RowKind::Flow: return "flow";
    case RowKind::Linking: return "linking";
    case RowKind::Region: return "region";
    case RowKind::Target: return "target";
  }
  return "?";
}

}  // namespace

nlohmann::json exportProgram(const SynthesisProgram& program, double theta) {
  using nlohmann::json;
  json doc;
  doc["format"] = "veil-program/1";
  doc["theta"] = theta;
  doc["objective"] = "find x: f1(nu) >= theta * f2(nu), f1 = -sum nu_i log2(nu_i/sum nu), f2 = sum nu";
  json vars = json::array();
  for (const auto& v : program.variables())
    vars.push_back({{"name", v.name},
                    {"kind", v.kind == VarKind::Binary ? "binary" : "continuous"},
                    {"lb", boundJson(v.lb)},
                    {"ub", boundJson(v.ub)}});
  doc["variables"] = std::move(vars);
  json rows = json::array();
  for (const auto& r : program.constraints()) {
    json idx = json::array(), val = json::array();
    for (const auto& t : r.terms) {
      idx.push_back(t.index);
      val.push_back(t.value);
    }
    rows.push_back({{"name", r.name},
                    {"kind", rowKindName(r.kind)},
                    {"lo", boundJson(r.lo)},
                    {"hi", boundJson(r.hi)},
                    {"index", std::move(idx)},
                    {"value", std::move(val)}});
  }
  doc["constraints"] = std::move(rows);
  doc["entropyTerms"] = program.entropyTerms();
  return doc;
}

std::vector<double> importWitness(const SynthesisProgram& program, const nlohmann::json& doc) {
  std::vector<double> x(program.numVariables(), 0.0);
  if (doc.contains("x")) {
    const auto& arr = doc.at("x");
    if (!arr.is_array() || arr.size() != x.size())
      throw ProgramError(fmt::format("witness: 'x' must be an array of {} numbers", x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = arr[i].get<double>();
    return x;
  }
  if (!doc.contains("values") || !doc.at("values").is_object())
    throw ProgramError("witness: expected a 'values' object or an 'x' array");
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < program.numVariables(); ++i) index.emplace(program.variables()[i].name, static_cast<int>(i));
  for (const auto& [name, value] : doc.at("values").items()) {
    auto it = index.find(name);
    if (it == index.end()) throw ProgramError(fmt::format("witness: unknown variable '{}'", name));
    x[it->second] = value.get<double>();
  }
  return x;
}

nlohmann::json exportWitness(const SynthesisProgram& program, const std::vector<double>& x) {
  nlohmann::json values = nlohmann::json::object();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) values[program.variables()[i].name] = x[i];
  return {{"values", std::move(values)}};
}

}  // namespace veil::opt
