#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "veil/model.hpp"
#include "veil/policy.hpp"
#include "veil/speclang.hpp"

namespace veil::test {

std::string assetPath(const std::string& name);

/// Window-count semantics of the fragment forms over literal truth values.
bool expandHolds(const std::vector<TemporalOp>& ops, const std::vector<bool>& truth, int k, std::size_t depth = 0);
bool expandHolds(const SpecFormula& formula, const std::vector<bool>& truth, int k = 0);

/// Total MDP with random sparse rows and random labels over props p0..p{nProps-1}.
Mdp randomMdp(std::mt19937_64& rng, std::size_t nStates, std::size_t nActions, std::size_t nProps);

/// Random fragment formula with horizon at most maxHorizon over props p0..p{nProps-1}.
SpecFormula randomFormula(std::mt19937_64& rng, int maxHorizon, std::size_t nProps);

/// Random action distributions for every (s, t) with t in 1..horizon.
std::map<FiniteMemoryPolicy::Key, std::vector<double>> randomStageDecisions(std::mt19937_64& rng, const Mdp& mdp,
                                                                           int horizon);

/// Satisfaction probability by enumerating every trajectory of
/// formula.horizon() steps; the action distribution is looked up per
/// (state, stage) in `decisions`, uniform when absent.
double enumerateSatisfaction(const Mdp& mdp, const std::map<FiniteMemoryPolicy::Key, std::vector<double>>& decisions,
                             const SpecFormula& formula);

/// Same enumeration for an arbitrary finite-memory policy, with the memory
/// advanced by the policy's own successor rule.
double enumerateSatisfaction(const FiniteMemoryPolicy& policy, const SpecFormula& formula);

}  // namespace veil::test
