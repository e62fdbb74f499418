#pragma once

#include <vector>

#include "veil/synthesis.hpp"

namespace veil {

/// Occupancy program on the expanded MDP with horizon T + 1. Each
/// specification's probability is replaced by a Fréchet lower bound built
/// from per-stage literal probabilities eta.
BuiltProgram assembleApproxProgram(const Mdp& mdp, const ProblemInstance& instance);

/// The bound the block encodes, evaluated directly on literal
/// probabilities eta[k - etaFirst].
double frechetBound(Form form, Interval outer, Interval inner, const std::vector<double>& eta, int etaFirst);

/// Nested forms: the inner window value for outer index m.
double frechetInner(Form form, int m, Interval inner, const std::vector<double>& eta, int etaFirst);

struct FrechetCheck {
  double maxMuDeviation = 0.0;    // mu against the literal expression of the witness zeta (or eta)
  double maxZetaDeviation = 0.0;  // zeta against the literal expression of eta
};

/// Compares a witness against the literal max/clamp expressions.
FrechetCheck checkFrechet(const FrechetLayout& block, const std::vector<double>& witness);

SynthesisResult synthesizeApprox(const Mdp& mdp, const ProblemInstance& instance, const SynthesisOptions& options = {});

}  // namespace veil
