#pragma once

// Fixed-mass-spring bar: an elastic bar clamped at x = 0 whose free end
// carries a lumped mass, a linear spring and a cubic spring. One realization
// draws the elastic modulus from the maximum-entropy gamma model and a
// white-noise load history, assembles a linear finite element model and
// integrates it with the Newmark scheme.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mcpar/errors.hpp"
#include "mcpar/random.hpp"
#include "mcpar/tridiagonal.hpp"

namespace mcpar {

/// Initial displacement or velocity field, sampled at the mesh nodes.
struct NodalProfile {
  enum class Kind { zero, linear, sine, nodal };
  Kind kind = Kind::zero;
  /// Peak value at x = L for `linear` and `sine` (sin(pi x / 2L)).
  double amplitude = 0.0;
  /// For `nodal`: one value per mesh node including x = 0, which must be 0.
  std::vector<double> values;
};

/// Spatial distribution of the scalar white-noise load.
struct ForceProfile {
  enum class Kind { tip, uniform, nodal };
  Kind kind = Kind::tip;
  /// For `nodal`: weights for the free nodes x_1 .. x_N.
  std::vector<double> weights;
};

struct BarConfig {
  double rho = 7850.0;
  double area = 6.25e-4;
  double damping_c = 5.0;
  double e_mean = 203e9;
  double e_delta = 0.1;
  double k_lin = 650.0;
  double k_nl = 650e13;
  double mass_tip = 1.2;
  double length = 1.0;
  std::size_t n_elements = 50;
  double t_final = 8e-3;
  double dt = 8e-3 / 1024.0;
  double newmark_beta = 0.25;
  double newmark_gamma = 0.5;
  NodalProfile u0;
  NodalProfile v0;
  ForceProfile force_profile;
  /// Standard deviation of the load applied during each time step.
  double force_amplitude = 5000.0;

  std::size_t n_steps() const { return static_cast<std::size_t>(std::floor(t_final / dt + 1e-9)); }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("bar.") + name + " must be positive");
    };
    auto non_negative = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string("bar.") + name + " must be non-negative");
      }
    };
    positive(rho, "rho");
    positive(area, "area");
    positive(e_mean, "e_mean");
    positive(length, "length");
    positive(t_final, "t_final");
    positive(dt, "dt");
    non_negative(damping_c, "damping_c");
    non_negative(k_lin, "k_lin");
    non_negative(k_nl, "k_nl");
    non_negative(mass_tip, "mass_tip");
    non_negative(force_amplitude, "force_amplitude");
    if (!(e_delta >= 0.0) || !(e_delta < 1.0 / std::numbers::sqrt2)) {
      throw ConfigError("bar.e_delta must lie in [0, 1/sqrt(2))");
    }
    if (n_elements < 1) throw ConfigError("bar.n_elements must be at least 1");
    if (dt > t_final) throw ConfigError("bar.dt must not exceed bar.t_final");
    if (!(newmark_beta >= 0.0 && newmark_beta <= 0.5)) throw ConfigError("bar.newmark_beta must lie in [0, 0.5]");
    if (!(newmark_gamma >= 0.0 && newmark_gamma <= 1.0)) throw ConfigError("bar.newmark_gamma must lie in [0, 1]");
    for (const NodalProfile* p : {&u0, &v0}) {
      if (p->kind == NodalProfile::Kind::nodal) {
        if (p->values.size() != n_elements + 1) {
          throw ConfigError("nodal initial profile needs n_elements + 1 values");
        }
        if (p->values.front() != 0.0) throw ConfigError("nodal initial profile must vanish at the clamped end");
      }
    }
    if (force_profile.kind == ForceProfile::Kind::nodal && force_profile.weights.size() != n_elements) {
      throw ConfigError("nodal force profile needs one weight per free node (n_elements)");
    }
  }
};

/// Galerkin system M u'' + C u' + K u = f + f_NL on the free nodes.
struct AssembledSystem {
  SymTridiagonal mass;
  SymTridiagonal damping;
  SymTridiagonal stiffness;
  std::size_t n_dof = 0;
};

/// Linear hat-function model on a uniform mesh. The clamped node is
/// eliminated; the tip mass and linear spring act on the last free node.
/// The distributed damping term projects onto the consistent-mass pattern.
inline AssembledSystem assemble(const BarConfig& cfg, double e_modulus) {
  if (!(e_modulus > 0.0) || !std::isfinite(e_modulus)) {
    throw InvalidModulus("elastic modulus must be positive and finite, got " + std::to_string(e_modulus));
  }
  const std::size_t n = cfg.n_elements;
  const double h = cfg.length / static_cast<double>(n);
  const double k_e = e_modulus * cfg.area / h;
  const double m_e = cfg.rho * cfg.area * h / 6.0;
  const double c_e = cfg.damping_c * h / 6.0;

  AssembledSystem sys{SymTridiagonal(n), SymTridiagonal(n), SymTridiagonal(n), n};
  // Element e joins nodes e and e + 1, i.e. free dofs e - 1 and e.
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t right = e;
    sys.stiffness.diag[right] += k_e;
    sys.mass.diag[right] += 2.0 * m_e;
    sys.damping.diag[right] += 2.0 * c_e;
    if (e > 0) {
      const std::size_t left = e - 1;
      sys.stiffness.diag[left] += k_e;
      sys.mass.diag[left] += 2.0 * m_e;
      sys.damping.diag[left] += 2.0 * c_e;
      sys.stiffness.off[left] -= k_e;
      sys.mass.off[left] += m_e;
      sys.damping.off[left] += c_e;
    }
  }
  sys.mass.diag[n - 1] += cfg.mass_tip;
  sys.stiffness.diag[n - 1] += cfg.k_lin;
  return sys;
}

/// Restoring force of the cubic end spring: -k_nl u_N^3 on the last dof.
inline std::vector<double> nonlinear_force(std::span<const double> u, double k_nl) {
  std::vector<double> f(u.size(), 0.0);
  if (!u.empty()) {
    const double tip = u.back();
    f.back() = -k_nl * tip * tip * tip;
  }
  return f;
}

struct NewmarkSettings {
  double dt = 1e-3;
  std::size_t n_steps = 0;
  double beta = 0.25;
  double gamma = 0.5;
  double k_nl = 0.0;
  double tolerance = 1e-10;
  int max_iterations = 50;
  bool keep_full_state = false;
};

/// f(t_n) = amplitude[n] * weights; `amplitude` covers t_0 .. t_{n_steps}.
struct Forcing {
  std::vector<double> weights;
  std::vector<double> amplitude;
};

struct NodalState {
  std::vector<double> u, v, a;
};

struct BarSolution {
  std::vector<double> times;
  std::vector<double> tip_displacement;
  std::vector<NodalState> full_state;  // empty unless requested
};

/// Newmark integration in acceleration form. The cubic spring is treated by
/// fixed-point iteration on the (constant) effective matrix
/// M + gamma dt C + beta dt^2 K until the relative displacement change drops
/// below `tolerance`.
inline BarSolution newmark_solve(const AssembledSystem& sys, const NewmarkSettings& s,
                                 std::span<const double> u0, std::span<const double> v0,
                                 const Forcing& forcing) {
  const std::size_t n = sys.n_dof;
  if (u0.size() != n || v0.size() != n || forcing.weights.size() != n) {
    throw LengthMismatch("initial state and force weights must have one entry per dof");
  }
  if (forcing.amplitude.size() < s.n_steps + 1) {
    throw LengthMismatch("forcing history shorter than n_steps + 1");
  }
  if (!(s.dt > 0.0)) throw ConfigError("time step must be positive");

  const double dt = s.dt;
  const double bdt2 = s.beta * dt * dt;
  const double gdt = s.gamma * dt;
  const bool nonlinear = s.k_nl != 0.0;

  SymTridiagonal effective = sys.mass;
  effective.add_scaled(sys.damping, gdt).add_scaled(sys.stiffness, bdt2);
  const TridiagonalLdlt eff_solver(effective);

  std::vector<double> u(u0.begin(), u0.end());
  std::vector<double> v(v0.begin(), v0.end());
  std::vector<double> a(n, 0.0);
  std::vector<double> rhs(n), base(n), u_pred(n), v_pred(n), u_guess(n), u_new(n);

  auto load_into = [&](std::size_t step, std::span<double> out) {
    const double amp = forcing.amplitude[step];
    for (std::size_t i = 0; i < n; ++i) out[i] = amp * forcing.weights[i];
  };
  auto cubic = [&](double tip) { return -s.k_nl * tip * tip * tip; };

  // M a0 = f(0) + f_NL(u0) - C v0 - K u0
  load_into(0, a);
  a[n - 1] += cubic(u[n - 1]);
  sys.damping.multiply_subtract(v, a);
  sys.stiffness.multiply_subtract(u, a);
  TridiagonalLdlt(sys.mass).solve_in_place(a);

  BarSolution sol;
  sol.times.reserve(s.n_steps + 1);
  sol.tip_displacement.reserve(s.n_steps + 1);
  auto record = [&](std::size_t step) {
    sol.times.push_back(static_cast<double>(step) * dt);
    sol.tip_displacement.push_back(u[n - 1]);
    if (s.keep_full_state) sol.full_state.push_back({u, v, a});
  };
  record(0);

  for (std::size_t step = 1; step <= s.n_steps; ++step) {
    for (std::size_t i = 0; i < n; ++i) {
      u_pred[i] = u[i] + dt * v[i] + dt * dt * (0.5 - s.beta) * a[i];
      v_pred[i] = v[i] + dt * (1.0 - s.gamma) * a[i];
    }
    load_into(step, base);
    sys.damping.multiply_subtract(v_pred, base);
    sys.stiffness.multiply_subtract(u_pred, base);

    if (!nonlinear) {
      std::copy(base.begin(), base.end(), a.begin());
      eff_solver.solve_in_place(a);
      for (std::size_t i = 0; i < n; ++i) u_new[i] = u_pred[i] + bdt2 * a[i];
    } else {
      // Start from the previous acceleration.
      for (std::size_t i = 0; i < n; ++i) u_guess[i] = u_pred[i] + bdt2 * a[i];
      bool converged = false;
      for (int it = 0; it < s.max_iterations; ++it) {
        std::copy(base.begin(), base.end(), rhs.begin());
        rhs[n - 1] += cubic(u_guess[n - 1]);
        eff_solver.solve_in_place(rhs);
        double change = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          u_new[i] = u_pred[i] + bdt2 * rhs[i];
          change = std::max(change, std::abs(u_new[i] - u_guess[i]));
          scale = std::max(scale, std::abs(u_new[i]));
        }
        if (!std::isfinite(change)) break;
        std::copy(rhs.begin(), rhs.end(), a.begin());
        if (change <= s.tolerance * scale) {
          converged = true;
          break;
        }
        std::swap(u_guess, u_new);
      }
      if (!converged) {
        throw NonConvergentStep(step, "cubic spring iteration did not converge in " +
                                          std::to_string(s.max_iterations) + " iterations");
      }
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = v_pred[i] + gdt * a[i];
    std::swap(u, u_new);
    record(step);
  }
  return sol;
}

namespace bar_detail {

inline std::vector<double> profile_at_free_nodes(const NodalProfile& p, const BarConfig& cfg) {
  const std::size_t n = cfg.n_elements;
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 1; j <= n; ++j) {
    const double xi = static_cast<double>(j) / static_cast<double>(n);
    switch (p.kind) {
      case NodalProfile::Kind::zero:
        break;
      case NodalProfile::Kind::linear:
        out[j - 1] = p.amplitude * xi;
        break;
      case NodalProfile::Kind::sine:
        out[j - 1] = p.amplitude * std::sin(0.5 * std::numbers::pi * xi);
        break;
      case NodalProfile::Kind::nodal:
        out[j - 1] = p.values[j];
        break;
    }
  }
  return out;
}

inline std::vector<double> force_weights(const ForceProfile& p, const BarConfig& cfg) {
  const std::size_t n = cfg.n_elements;
  std::vector<double> w(n, 0.0);
  switch (p.kind) {
    case ForceProfile::Kind::tip:
      w[n - 1] = 1.0;
      break;
    case ForceProfile::Kind::uniform: {
      // Consistent load vector of a unit load per length.
      const double h = cfg.length / static_cast<double>(n);
      std::fill(w.begin(), w.end(), h);
      w[n - 1] = 0.5 * h;
      break;
    }
    case ForceProfile::Kind::nodal:
      w = p.weights;
      break;
  }
  return w;
}

}  // namespace bar_detail

inline NewmarkSettings newmark_settings(const BarConfig& cfg) {
  NewmarkSettings s;
  s.dt = cfg.dt;
  s.n_steps = cfg.n_steps();
  s.beta = cfg.newmark_beta;
  s.gamma = cfg.newmark_gamma;
  s.k_nl = cfg.k_nl;
  return s;
}

struct RealizationOutput {
  double e_modulus = 0.0;
  std::vector<double> tip_series;
  double tip_final = 0.0;
};

/// One realization: E is drawn once and held fixed for the whole history,
/// then one load value per time point t_0 .. t_N is drawn from the same
/// stream.
inline RealizationOutput simulate_realization(const BarConfig& cfg, RandomStream& stream) {
  const double e = sample_gamma(stream, GammaParams{cfg.e_mean, cfg.e_delta});
  const NewmarkSettings settings = newmark_settings(cfg);
  Forcing forcing{bar_detail::force_weights(cfg.force_profile, cfg),
                  sample_white_noise(stream, settings.n_steps + 1, cfg.force_amplitude)};
  const AssembledSystem sys = assemble(cfg, e);
  const auto u0 = bar_detail::profile_at_free_nodes(cfg.u0, cfg);
  const auto v0 = bar_detail::profile_at_free_nodes(cfg.v0, cfg);
  BarSolution sol = newmark_solve(sys, settings, u0, v0, forcing);
  RealizationOutput out;
  out.e_modulus = e;
  out.tip_final = sol.tip_displacement.back();
  out.tip_series = std::move(sol.tip_displacement);
  return out;
}

/// Engine adapter: one channel per time point of U(L, t); the tracked scalar
/// is U(L, T).
class BarProblem {
 public:
  explicit BarProblem(BarConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  std::size_t channel_count() const { return cfg_.n_steps() + 1; }

  std::vector<double> channel_times() const {
    std::vector<double> t(channel_count());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) * cfg_.dt;
    return t;
  }

  double realize(RandomStream& stream, std::span<double> channels) const {
    RealizationOutput out = simulate_realization(cfg_, stream);
    std::copy(out.tip_series.begin(), out.tip_series.end(), channels.begin());
    return out.tip_final;
  }

  const BarConfig& config() const noexcept { return cfg_; }

 private:
  BarConfig cfg_;
};

}  // namespace mcpar
