#include "lidcd/scm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lidcd {

namespace {
constexpr double kWeightVar = 2.0;    // Table-style mechanism weight variance
constexpr double kNoiseVar = 0.015;   // exogenous noise variance
constexpr double kInterventionNoiseVar = 0.1;
}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::LinearGauss: return "linear";
    case Family::NonlinGauss: return "nonlinear";
    case Family::NonlinNonGauss: return "nongaussian";
  }
  return "?";
}

std::string to_string(InterventionKind k) {
  switch (k) {
    case InterventionKind::Atomic: return "atomic";
    case InterventionKind::Stochastic: return "stochastic";
    case InterventionKind::Imperfect: return "imperfect";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "linear" || s == "linear-gauss") return Family::LinearGauss;
  if (s == "nonlinear" || s == "nonlin-gauss") return Family::NonlinGauss;
  if (s == "nongaussian" || s == "nonlin-nongauss" || s == "flow")
    return Family::NonlinNonGauss;
  throw std::invalid_argument("unknown family: " + s);
}

InterventionKind intervention_kind_from_string(const std::string& s) {
  if (s == "atomic") return InterventionKind::Atomic;
  if (s == "stochastic") return InterventionKind::Stochastic;
  if (s == "imperfect") return InterventionKind::Imperfect;
  throw std::invalid_argument("unknown intervention kind: " + s);
}

double Assignment::mechanism(const std::vector<double>& x) const {
  switch (mech) {
    case Mech::Constant:
      return const_value;
    case Mech::Linear: {
      double s = lin_b;
      for (std::size_t p = 0; p < parents.size(); ++p)
        s += lin_w[p] * x[static_cast<std::size_t>(parents[p])];
      return out_scale * s + out_shift;
    }
    case Mech::Mlp: {
      const std::size_t np = parents.size();
      std::vector<double> h1(static_cast<std::size_t>(hidden), 0.0);
      for (int u = 0; u < hidden; ++u) {
        double s = 0.0;
        for (std::size_t p = 0; p < np; ++p)
          s += w1[static_cast<std::size_t>(u) * np + p] * x[static_cast<std::size_t>(parents[p])];
        h1[static_cast<std::size_t>(u)] = std::max(0.0, s);
      }
      std::vector<double> h2(static_cast<std::size_t>(hidden), 0.0);
      for (int u = 0; u < hidden; ++u) {
        double s = 0.0;
        for (int v = 0; v < hidden; ++v)
          s += w2[static_cast<std::size_t>(u) * hidden + v] * h1[static_cast<std::size_t>(v)];
        h2[static_cast<std::size_t>(u)] = std::max(0.0, s);
      }
      double out = 0.0;
      for (int u = 0; u < hidden; ++u) out += w_out[static_cast<std::size_t>(u)] * h2[static_cast<std::size_t>(u)];
      return out_scale * out + out_shift;
    }
  }
  return 0.0;
}

std::vector<int> Assignment::active_parents() const {
  if (mech == Mech::Constant) return {};
  return parents;
}

Scm sample_scm(const CausalGraph& graph, Family family, RngStream& rng) {
  if (!graph.is_acyclic()) throw std::invalid_argument("sample_scm: graph is cyclic");
  const double wstd = std::sqrt(kWeightVar);
  Scm scm;
  scm.graph = graph;
  scm.family = family;
  scm.assignments.resize(static_cast<std::size_t>(graph.d));
  for (int j = 0; j < graph.d; ++j) {
    Assignment& a = scm.assignments[static_cast<std::size_t>(j)];
    a.parents = graph.parents(j);
    a.noise_mean = 0.0;
    a.noise_var = kNoiseVar;
    if (family == Family::LinearGauss) {
      a.mech = Assignment::Mech::Linear;
      a.lin_w.resize(a.parents.size());
      for (double& w : a.lin_w) w = rng.normal(0.0, wstd);
      a.lin_b = 0.0;
    } else {
      a.mech = Assignment::Mech::Mlp;
      const std::size_t np = a.parents.size();
      a.w1.resize(static_cast<std::size_t>(a.hidden) * np);
      a.w2.resize(static_cast<std::size_t>(a.hidden) * a.hidden);
      a.w_out.resize(static_cast<std::size_t>(a.hidden));
      for (double& w : a.w1) w = rng.normal(0.0, wstd);
      for (double& w : a.w2) w = rng.normal(0.0, wstd);
      for (double& w : a.w_out) w = rng.normal(0.0, wstd);
      if (family == Family::NonlinNonGauss) {
        a.out_scale = rng.normal(0.1, std::sqrt(0.005));
        a.out_shift = rng.normal(0.0, std::sqrt(0.4));
      }
    }
  }
  return scm;
}

InterventionSpec apply_intervention(const Scm& scm, InterventionKind kind, int target,
                                    RngStream& rng) {
  if (target < 0 || target >= scm.graph.d)
    throw std::invalid_argument("apply_intervention: target out of range");
  const double u = rng.uniform(1.2, 2.2);
  const bool b = rng.bernoulli(0.5);
  const double level = (1.0 - 2.0 * (b ? 1.0 : 0.0)) * u;

  InterventionSpec spec;
  spec.kind = kind;
  spec.targets = {target};
  Assignment repl;
  switch (kind) {
    case InterventionKind::Atomic:
      repl.mech = Assignment::Mech::Constant;
      repl.const_value = level;
      repl.noise_mean = level;
      repl.noise_var = 0.0;
      break;
    case InterventionKind::Stochastic:
      repl.mech = Assignment::Mech::Linear;
      repl.parents = {};
      repl.lin_b = 0.0;
      repl.noise_mean = level;
      repl.noise_var = kInterventionNoiseVar;
      break;
    case InterventionKind::Imperfect: {
      repl = scm.assignments[static_cast<std::size_t>(target)];
      const double wstd = std::sqrt(kWeightVar);
      if (repl.mech == Assignment::Mech::Linear) {
        for (double& w : repl.lin_w) w = rng.normal(0.0, wstd);
      } else if (repl.mech == Assignment::Mech::Mlp) {
        for (double& w : repl.w_out) w = rng.normal(0.0, wstd);
      }
      repl.noise_mean = level;
      repl.noise_var = kInterventionNoiseVar;
      break;
    }
  }
  spec.replacements = {repl};
  return spec;
}

std::vector<double> sample_joint(const Scm& scm, const InterventionSpec* spec,
                                 RngStream& rng) {
  const int d = scm.graph.d;
  const std::vector<int> order = scm.graph.topological_order();
  std::vector<double> x(static_cast<std::size_t>(d), 0.0);
  for (int j : order) {
    const Assignment* a = &scm.assignments[static_cast<std::size_t>(j)];
    if (spec != nullptr) {
      for (std::size_t t = 0; t < spec->targets.size(); ++t) {
        if (spec->targets[t] == j) {
          a = &spec->replacements[t];
          break;
        }
      }
    }
    double v = a->mechanism(x);
    if (a->mech == Assignment::Mech::Constant) {
      x[static_cast<std::size_t>(j)] = v;
    } else {
      x[static_cast<std::size_t>(j)] = v + rng.normal(a->noise_mean, std::sqrt(a->noise_var));
    }
  }
  return x;
}

}  // namespace lidcd
