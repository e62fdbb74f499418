#include "veil/synth_exact.hpp"

#include <fmt/format.h>

namespace veil {

using opt::RowKind;
using opt::VarKind;

int arenaHorizon(const ProblemInstance& instance) { return instance.horizon() + 1; }

std::vector<Dfa> instanceAutomata(const ProblemInstance& instance, int horizon) {
  std::vector<Dfa> dfas;
  for (const auto& s : instance.specs) dfas.push_back(addTerminal(buildDfa(s.formula, horizon)));
  return dfas;
}

BuiltProgram assembleExactProgram(const ProductMdp& product, const ProblemInstance& instance) {
  instance.validate();
  if (product.numDfas() != instance.size())
    throw opt::ProgramError(
        fmt::format("product carries {} automata for {} specifications", product.numDfas(), instance.size()));
  BuiltProgram built;
  auto& prog = built.program;
  auto& lay = built.layout;
  const auto& mdp = product.expanded().base();
  const std::size_t nS = product.numStates();
  const std::size_t nA = product.numActions();

  std::vector<int> flowIndex(nS, -1);
  std::vector<std::uint32_t> flowStates;
  for (std::uint32_t s = 0; s < nS; ++s)
    if (!product.inAbsorbing(s)) {
      flowIndex[s] = static_cast<int>(flowStates.size());
      flowStates.push_back(s);
    }

  auto keyOf = [&](std::uint32_t s) {
    FiniteMemoryPolicy::Key k{static_cast<int>(product.baseState(s)), product.stage(s)};
    for (std::size_t i = 0; i < product.numDfas(); ++i) k.push_back(product.dfaState(s, i));
    return k;
  };
  auto nameOf = [&](std::uint32_t s) {
    std::string n = fmt::format("({},{}", mdp.stateName(product.baseState(s)), product.stage(s));
    for (std::size_t i = 0; i < product.numDfas(); ++i) n += fmt::format(",{}", product.dfaState(s, i));
    return n + ")";
  };

  opt::FlowStructure flow;
  std::vector<std::vector<int>> lam(nS, std::vector<int>(nA, -1));
  for (std::uint32_t s = 0; s < nS; ++s)
    for (ActionId a = 0; a < nA; ++a)
      lam[s][a] = prog.addVariable(fmt::format("lam[{},{}]", nameOf(s), mdp.actionName(a)), VarKind::Continuous, 0.0,
                                   product.inAbsorbing(s) ? 0.0 : opt::kInf);
  for (std::uint32_t s : flowStates) {
    opt::FlowState fs;
    fs.alpha = s == product.initial() ? 1.0 : 0.0;
    fs.name = nameOf(s);
    for (ActionId a = 0; a < nA; ++a) {
      opt::FlowAction fa{lam[s][a], {}};
      for (auto e = product.edgesBegin(s, a); e != product.edgesEnd(s, a); ++e)
        fa.succ.push_back({flowIndex[e->to], e->prob});
      fs.actions.push_back(std::move(fa));
    }
    flow.states.push_back(std::move(fs));
    lay.flowKeys.push_back(keyOf(s));
  }
  for (std::uint32_t s = 0; s < nS; ++s)
    if (product.inAbsorbing(s))
      for (ActionId a = 0; a < nA; ++a) flow.frozenVars.push_back(lam[s][a]);
  prog.setFlow(std::move(flow));
  prog.materializeFlowRows();

  std::vector<double> lo, hi;
  for (std::size_t i = 0; i < instance.size(); ++i) {
    const int mu = prog.addVariable(fmt::format("mu[{}]", i), VarKind::Continuous, 0.0, 1.0);
    std::vector<opt::SparseEntry> row{{mu, 1.0}};
    for (std::uint32_t s : flowStates)
      if (product.inAccepting(s, i))
        for (ActionId a = 0; a < nA; ++a) row.push_back({lam[s][a], -1.0});
    prog.addConstraint(std::move(row), 0.0, 0.0, RowKind::Linking, fmt::format("accept[{}]", i));
    lay.mu.push_back(mu);
    lo.push_back(0.0);
    hi.push_back(1.0);
  }
  addCandidateRows(built, instance, lo, hi);

  lay.memory = FiniteMemoryPolicy::Memory::Product;
  lay.horizon = product.expanded().horizon();
  lay.dfas = product.dfas();
  lay.arenaStates = nS;
  prog.validate();
  return built;
}

FiniteMemoryPolicy extractPolicy(const BuiltProgram& built, const Mdp& mdp, const std::vector<double>& witness) {
  const auto& lay = built.layout;
  return FiniteMemoryPolicy(mdp, lay.memory, lay.horizon, lay.dfas, decisionsFromWitness(built, witness));
}

SynthesisResult synthesizeExact(const Mdp& mdp, const ProblemInstance& instance, const SynthesisOptions& options) {
  instance.validate();
  const int horizon = arenaHorizon(instance);
  auto arena = product(expand(mdp, horizon), instanceAutomata(instance, horizon));
  auto built = std::make_shared<BuiltProgram>(assembleExactProgram(arena, instance));
  return solveProgram("exact", mdp, instance, std::move(built), options);
}

}  // namespace veil
