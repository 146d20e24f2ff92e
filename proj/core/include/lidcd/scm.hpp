#pragma once

#include <string>
#include <vector>

#include "lidcd/graph.hpp"
#include "lidcd/rng.hpp"

namespace lidcd {

enum class Family { LinearGauss, NonlinGauss, NonlinNonGauss };
enum class InterventionKind { Atomic, Stochastic, Imperfect };

std::string to_string(Family f);
std::string to_string(InterventionKind k);
Family family_from_string(const std::string& s);
InterventionKind intervention_kind_from_string(const std::string& s);

// Mechanism and exogenous noise for one variable. The mechanism reads only
// the coordinates listed in `parents`.
struct Assignment {
  enum class Mech { Constant, Linear, Mlp };
  Mech mech = Mech::Linear;
  std::vector<int> parents;

  // Linear: w . x[parents] + b
  std::vector<double> lin_w;
  double lin_b = 0.0;

  // Mlp: relu network with two hidden layers of `hidden` units, zero biases.
  int hidden = 5;
  std::vector<double> w1;     // hidden x |parents|
  std::vector<double> w2;     // hidden x hidden
  std::vector<double> w_out;  // hidden

  // Output scale/shift (the non-Gaussian family's k and l constants).
  double out_scale = 1.0;
  double out_shift = 0.0;

  double const_value = 0.0;  // Mech::Constant

  double noise_mean = 0.0;
  double noise_var = 0.015;

  // Noiseless mechanism value given a full joint sample.
  double mechanism(const std::vector<double>& x) const;
  std::vector<int> active_parents() const;
};

struct Scm {
  CausalGraph graph;
  Family family = Family::LinearGauss;
  std::vector<Assignment> assignments;
};

// Replacement assignments for the targeted variables; an empty target set is
// the observational regime.
struct InterventionSpec {
  InterventionKind kind = InterventionKind::Stochastic;
  std::vector<int> targets;
  std::vector<Assignment> replacements;  // aligned with targets

  bool empty() const { return targets.empty(); }
};

// Draw mechanisms and noises for a fixed graph.
Scm sample_scm(const CausalGraph& graph, Family family, RngStream& rng);

// Draw a single-target intervention for variable `target`.
InterventionSpec apply_intervention(const Scm& scm, InterventionKind kind, int target,
                                    RngStream& rng);

// One ancestral sample; spec == nullptr or an empty spec is observational.
std::vector<double> sample_joint(const Scm& scm, const InterventionSpec* spec,
                                 RngStream& rng);

}  // namespace lidcd
