#pragma once

#include <memory>

#include "veil/automata.hpp"
#include "veil/synthesis.hpp"

namespace veil {

/// Stage count of the arena for an instance: one past the largest
/// specification horizon, so every formula is decided before the last stage.
int arenaHorizon(const ProblemInstance& instance);

/// Modified DFAs of every specification over the given arena horizon.
std::vector<Dfa> instanceAutomata(const ProblemInstance& instance, int horizon);

/// Occupancy program on the product: flow rows on non-absorbing states,
/// mu(i) as accepting-state occupancy, threshold and McCormick rows.
BuiltProgram assembleExactProgram(const ProductMdp& product, const ProblemInstance& instance);

/// Finite-memory policy from a witness on the product arena.
FiniteMemoryPolicy extractPolicy(const BuiltProgram& built, const Mdp& mdp, const std::vector<double>& witness);

SynthesisResult synthesizeExact(const Mdp& mdp, const ProblemInstance& instance, const SynthesisOptions& options = {});

}  // namespace veil
