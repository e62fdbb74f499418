#include "veil/synth_approx.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "veil/synth_exact.hpp"

namespace veil {

using opt::RowKind;
using opt::SparseEntry;
using opt::VarKind;

namespace {

struct Bounded {
  int var;
  double lo, hi;
};

class BlockBuilder {
 public:
  explicit BlockBuilder(opt::SynthesisProgram& program) : prog_(program) {}

  /// out = max_k in_k through a one-hot selector.
  Bounded maxOf(const std::vector<Bounded>& in, const std::string& name) {
    if (in.size() == 1) return in[0];
    double lo = -opt::kInf, hi = -opt::kInf;
    for (const auto& b : in) {
      lo = std::max(lo, b.lo);
      hi = std::max(hi, b.hi);
    }
    const int out = prog_.addVariable(name, VarKind::Continuous, lo, hi);
    opt::BinaryBlock block{opt::BlockKind::OneHot, name, {}, {}, 0.0, out};
    std::vector<SparseEntry> sum{{out, 1.0}}, onehot;
    for (std::size_t k = 0; k < in.size(); ++k) {
      const auto& v = in[k];
      const int y = prog_.addVariable(fmt::format("{}.y[{}]", name, k), VarKind::Binary, 0.0, 1.0);
      const int g = prog_.addVariable(fmt::format("{}.g[{}]", name, k), VarKind::Continuous, std::min(v.lo, 0.0),
                                      std::max(v.hi, 0.0));
      addProductEnvelope(prog_, g, y, v.var, v.lo, v.hi, fmt::format("{}.g[{}]", name, k));
      prog_.addConstraint({{out, 1.0}, {v.var, -1.0}}, 0.0, opt::kInf, RowKind::Region, fmt::format("{}.max[{}]", name, k));
      sum.push_back({g, -1.0});
      onehot.push_back({y, 1.0});
      block.vars.push_back(y);
      block.selectors.push_back({{{v.var, 1.0}}, 0.0});
    }
    prog_.addConstraint(std::move(sum), 0.0, 0.0, RowKind::Linking, name + ".sel");
    prog_.addConstraint(std::move(onehot), 1.0, 1.0, RowKind::Linking, name + ".onehot");
    prog_.addBlock(std::move(block));
    return {out, lo, hi};
  }

  /// out = max{0, sum_k in_k - width} through a threshold selector.
  Bounded clampOf(const std::vector<Bounded>& in, int width, const std::string& name) {
    if (in.size() == 1 && width == 0 && in[0].lo >= 0.0) return in[0];
    double slo = -width, shi = -width;
    for (const auto& b : in) {
      slo += b.lo;
      shi += b.hi;
    }
    const double lo = std::min(slo, 0.0), hi = std::max(shi, 0.0);
    const int out = prog_.addVariable(name, VarKind::Continuous, lo, hi);
    const int y = prog_.addVariable(name + ".y", VarKind::Binary, 0.0, 1.0);
    std::vector<SparseEntry> link{{out, 1.0}, {y, static_cast<double>(width)}}, floor{{out, 1.0}};
    opt::LinearExpr selector{{}, -static_cast<double>(width)};
    for (std::size_t k = 0; k < in.size(); ++k) {
      const auto& v = in[k];
      const int g = prog_.addVariable(fmt::format("{}.g[{}]", name, k), VarKind::Continuous, std::min(v.lo, 0.0),
                                      std::max(v.hi, 0.0));
      addProductEnvelope(prog_, g, y, v.var, v.lo, v.hi, fmt::format("{}.g[{}]", name, k));
      link.push_back({g, -1.0});
      floor.push_back({v.var, -1.0});
      selector.terms.push_back({v.var, 1.0});
    }
    prog_.addConstraint({{out, 1.0}}, 0.0, opt::kInf, RowKind::Region, name + ".pos");
    prog_.addConstraint(std::move(floor), -static_cast<double>(width), opt::kInf, RowKind::Region, name + ".sum");
    prog_.addConstraint(std::move(link), 0.0, 0.0, RowKind::Linking, name + ".sel");
    opt::BinaryBlock block{opt::BlockKind::Threshold, name, {y}, {std::move(selector)}, 0.0, out};
    prog_.addBlock(std::move(block));
    return {out, lo, hi};
  }

 private:
  opt::SynthesisProgram& prog_;
};

double clampSum(double sum, int width) { return std::max(0.0, sum - width); }

}  // namespace

double frechetInner(Form form, int m, Interval inner, const std::vector<double>& eta, int etaFirst) {
  auto e = [&](int k) { return eta.at(static_cast<std::size_t>(k - etaFirst)); };
  if (form == Form::FG) {
    double s = 0.0;
    for (int t = m + inner.lo; t <= m + inner.hi; ++t) s += e(t);
    return clampSum(s, inner.width());
  }
  double best = 0.0;
  for (int t = m + inner.lo; t <= m + inner.hi; ++t) best = std::max(best, e(t));
  return best;
}

double frechetBound(Form form, Interval outer, Interval inner, const std::vector<double>& eta, int etaFirst) {
  auto e = [&](int k) { return eta.at(static_cast<std::size_t>(k - etaFirst)); };
  switch (form) {
    case Form::Atom: return e(0);
    case Form::F: {
      double best = 0.0;
      for (int k = outer.lo; k <= outer.hi; ++k) best = std::max(best, e(k));
      return best;
    }
    case Form::G: {
      double s = 0.0;
      for (int k = outer.lo; k <= outer.hi; ++k) s += e(k);
      return clampSum(s, outer.width());
    }
    case Form::FG: {
      double best = 0.0;
      for (int m = outer.lo; m <= outer.hi; ++m) best = std::max(best, frechetInner(form, m, inner, eta, etaFirst));
      return best;
    }
    case Form::GF: {
      double s = 0.0;
      for (int m = outer.lo; m <= outer.hi; ++m) s += frechetInner(form, m, inner, eta, etaFirst);
      return clampSum(s, outer.width());
    }
  }
  return 0.0;
}

FrechetCheck checkFrechet(const FrechetLayout& block, const std::vector<double>& witness) {
  FrechetCheck c;
  std::vector<double> eta;
  for (int v : block.eta) eta.push_back(witness[v]);
  const double mu = witness[block.mu];
  if (block.form == Form::FG || block.form == Form::GF) {
    std::vector<double> zeta;
    for (std::size_t j = 0; j < block.zeta.size(); ++j) {
      const int m = block.outer.lo + static_cast<int>(j);
      zeta.push_back(witness[block.zeta[j]]);
      c.maxZetaDeviation =
          std::max(c.maxZetaDeviation, std::abs(zeta.back() - frechetInner(block.form, m, block.inner, eta, block.etaFirst)));
    }
    double expr = 0.0;
    if (block.form == Form::FG) {
      for (double z : zeta) expr = std::max(expr, z);
    } else {
      expr = clampSum(std::accumulate(zeta.begin(), zeta.end(), 0.0), block.outer.width());
    }
    c.maxMuDeviation = std::abs(mu - expr);
  } else {
    c.maxMuDeviation = std::abs(mu - frechetBound(block.form, block.outer, block.inner, eta, block.etaFirst));
  }
  return c;
}

BuiltProgram assembleApproxProgram(const Mdp& mdp, const ProblemInstance& instance) {
  instance.validate();
  const int horizon = arenaHorizon(instance);
  const ExpandedMdp ex = expand(mdp, horizon);
  BuiltProgram built;
  auto& prog = built.program;
  auto& lay = built.layout;
  const std::size_t nA = mdp.numActions();

  for (const auto& s : instance.specs)
    if (!mdp.findProp(s.formula.literal().prop))
      throw AutomatonError(
          fmt::format("specification '{}' reads proposition '{}' unknown to the model", s.name, s.formula.literal().prop));

  std::vector<bool> seen(ex.numStates(), false);
  std::deque<std::uint32_t> queue{ex.initial()};
  seen[ex.initial()] = true;
  std::vector<std::uint32_t> reach;
  while (!queue.empty()) {
    const auto i = queue.front();
    queue.pop_front();
    reach.push_back(i);
    for (ActionId a = 0; a < nA; ++a)
      for (const auto& e : ex.successors(i, a))
        if (!seen[e.to]) {
          seen[e.to] = true;
          queue.push_back(e.to);
        }
  }
  std::sort(reach.begin(), reach.end(), [&](auto a, auto b) {
    return std::pair(ex.baseState(a), ex.stage(a)) < std::pair(ex.baseState(b), ex.stage(b));
  });
  std::vector<int> flowIndex(ex.numStates(), -1);
  for (std::size_t f = 0; f < reach.size(); ++f) flowIndex[reach[f]] = static_cast<int>(f);

  opt::FlowStructure flow;
  std::vector<std::vector<int>> lam(reach.size());
  for (std::size_t f = 0; f < reach.size(); ++f) {
    const auto i = reach[f];
    opt::FlowState fs;
    fs.alpha = i == ex.initial() ? 1.0 : 0.0;
    fs.name = fmt::format("({},{})", mdp.stateName(ex.baseState(i)), ex.stage(i));
    for (ActionId a = 0; a < nA; ++a) {
      const int v = prog.addVariable(fmt::format("lam[{},{}]", fs.name, mdp.actionName(a)), VarKind::Continuous, 0.0,
                                     opt::kInf);
      lam[f].push_back(v);
      opt::FlowAction fa{v, {}};
      // Stage T+1 is the sink frontier.
      if (ex.stage(i) < horizon)
        for (const auto& e : ex.successors(i, a)) fa.succ.push_back({flowIndex[e.to], e.prob});
      fs.actions.push_back(std::move(fa));
    }
    flow.states.push_back(std::move(fs));
    lay.flowKeys.push_back({static_cast<int>(ex.baseState(i)), ex.stage(i)});
  }
  prog.setFlow(std::move(flow));
  prog.materializeFlowRows();

  std::map<std::tuple<std::string, bool, int>, int> etaCache;
  auto eta = [&](const Literal& lit, int k) {
    auto key = std::tuple(lit.prop, lit.negated, k);
    if (auto it = etaCache.find(key); it != etaCache.end()) return it->second;
    const std::string name = fmt::format("eta[{}{},{}]", lit.negated ? "!" : "", lit.prop, k);
    const int v = prog.addVariable(name, VarKind::Continuous, 0.0, 1.0);
    const PropId p = *mdp.findProp(lit.prop);
    std::vector<SparseEntry> row{{v, 1.0}};
    for (std::size_t f = 0; f < reach.size(); ++f) {
      const auto i = reach[f];
      if (ex.stage(i) != k + 1 || mdp.hasLabel(ex.baseState(i), p) == lit.negated) continue;
      for (int l : lam[f]) row.push_back({l, -1.0});
    }
    prog.addConstraint(std::move(row), 0.0, 0.0, RowKind::Linking, name);
    etaCache.emplace(key, v);
    return v;
  };

  BlockBuilder bb(prog);
  std::vector<double> muLo, muHi;
  for (std::size_t i = 0; i < instance.size(); ++i) {
    const auto& f = instance.specs[i].formula;
    const auto& lit = f.literal();
    FrechetLayout block;
    block.spec = i;
    block.form = f.form();
    if (!f.ops().empty()) block.outer = f.ops()[0].window;
    if (f.ops().size() > 1) block.inner = f.ops()[1].window;
    int kLo = 0, kHi = 0;
    if (block.form == Form::F || block.form == Form::G) {
      kLo = block.outer.lo;
      kHi = block.outer.hi;
    } else if (block.form == Form::FG || block.form == Form::GF) {
      kLo = block.outer.lo + block.inner.lo;
      kHi = block.outer.hi + block.inner.hi;
    }
    block.etaFirst = kLo;
    std::vector<Bounded> etas;
    for (int k = kLo; k <= kHi; ++k) {
      block.eta.push_back(eta(lit, k));
      etas.push_back({block.eta.back(), 0.0, 1.0});
    }
    auto window = [&](int m) {
      return std::vector<Bounded>(etas.begin() + (m + block.inner.lo - kLo), etas.begin() + (m + block.inner.hi - kLo) + 1);
    };
    const std::string name = fmt::format("mu[{}]", i);
    Bounded mu{};
    switch (block.form) {
      case Form::Atom: mu = etas[0]; break;
      case Form::F: mu = bb.maxOf(etas, name); break;
      case Form::G: mu = bb.clampOf(etas, block.outer.width(), name); break;
      case Form::FG: {
        std::vector<Bounded> zs;
        for (int m = block.outer.lo; m <= block.outer.hi; ++m)
          zs.push_back(bb.clampOf(window(m), block.inner.width(), fmt::format("zeta[{},{}]", i, m)));
        for (const auto& z : zs) block.zeta.push_back(z.var);
        mu = bb.maxOf(zs, name);
        break;
      }
      case Form::GF: {
        std::vector<Bounded> zs;
        for (int m = block.outer.lo; m <= block.outer.hi; ++m)
          zs.push_back(bb.maxOf(window(m), fmt::format("zeta[{},{}]", i, m)));
        for (const auto& z : zs) block.zeta.push_back(z.var);
        mu = bb.clampOf(zs, block.outer.width(), name);
        break;
      }
    }
    block.mu = mu.var;
    lay.mu.push_back(mu.var);
    muLo.push_back(mu.lo);
    muHi.push_back(mu.hi);
    lay.blocks.push_back(std::move(block));
  }
  addCandidateRows(built, instance, muLo, muHi);

  lay.memory = FiniteMemoryPolicy::Memory::Stage;
  lay.horizon = horizon;
  lay.arenaStates = reach.size();
  prog.validate();
  return built;
}

SynthesisResult synthesizeApprox(const Mdp& mdp, const ProblemInstance& instance, const SynthesisOptions& options) {
  auto built = std::make_shared<BuiltProgram>(assembleApproxProgram(mdp, instance));
  return solveProgram("approx", mdp, instance, std::move(built), options);
}

}  // namespace veil
