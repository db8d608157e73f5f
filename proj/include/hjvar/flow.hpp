#pragma once

// Hamiltonian / contact flow integration, the suspended flow on T*(R x N),
// and the commutator isotopy phi^t psi^s phi^-t psi^-s.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ham.hpp"

namespace hjvar {

inline constexpr double kBlowupThreshold = 1e12;

enum class Scheme { RK4, StormerVerlet };

struct TrajectorySample {
  double t;
  PhasePoint z;
};

struct Trajectory {
  Scheme scheme = Scheme::RK4;
  double step = 0.0;
  std::vector<TrajectorySample> samples;
  bool truncated = false;       // blowup hit; samples end at the last finite state
  double energy_drift = 0.0;    // |H(end) - H(start)| for autonomous H

  const PhasePoint& end() const { return samples.back().z; }
};

namespace flow_detail {

inline bool finite(const PhasePoint& z) {
  return std::isfinite(z.x) && std::isfinite(z.p) && std::fabs(z.x) < kBlowupThreshold &&
         std::fabs(z.p) < kBlowupThreshold;
}

// X_H with the active time variable bound to `time` and any other slots taken
// from `frozen`. For the single-time convention (time_var == t) both t and the
// frozen t1/t2 bindings are visible to the expression.
inline std::pair<double, double> field_at(const Hamiltonian& H, const PhasePoint& z, double time,
                                          Var time_var, const Bindings& frozen) {
  Bindings b = frozen;
  b.set(Var::x, z.x).set(Var::p, z.p).set(time_var, time);
  if (time_var == Var::t1 || time_var == Var::t2) {
    // keep plain t unbound unless frozen supplied it
  } else {
    b.set(Var::t, time);
  }
  return {H.partial(Var::p, b), -H.partial(Var::x, b)};
}

inline PhasePoint rk4_step(const Hamiltonian& H, const PhasePoint& z, double time, double h,
                           Var time_var, const Bindings& frozen) {
  auto [k1x, k1p] = field_at(H, z, time, time_var, frozen);
  auto [k2x, k2p] = field_at(H, {z.x + 0.5 * h * k1x, z.p + 0.5 * h * k1p}, time + 0.5 * h, time_var, frozen);
  auto [k3x, k3p] = field_at(H, {z.x + 0.5 * h * k2x, z.p + 0.5 * h * k2p}, time + 0.5 * h, time_var, frozen);
  auto [k4x, k4p] = field_at(H, {z.x + h * k3x, z.p + h * k3p}, time + h, time_var, frozen);
  return {z.x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
          z.p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)};
}

inline PhasePoint verlet_step(const Hamiltonian& H, const PhasePoint& z, double h) {
  Bindings b;
  b.set(Var::x, z.x).set(Var::p, z.p).set(Var::t, 0.0);
  double p_half = z.p - 0.5 * h * H.partial(Var::x, b);
  Bindings b2 = b;
  b2.set(Var::p, p_half);
  double x1 = z.x + h * H.partial(Var::p, b2);
  Bindings b3 = b2;
  b3.set(Var::x, x1);
  double p1 = p_half - 0.5 * h * H.partial(Var::x, b3);
  return {x1, p1};
}

inline void check_separable(const Hamiltonian& H) {
  if (!H.autonomous())
    throw std::invalid_argument("stormer-verlet requires an autonomous Hamiltonian");
  // H must split as T(p) + V(x): probe the cross second derivative.
  for (double xx : {-0.7, 0.3, 1.1})
    for (double pp : {-0.9, 0.5, 1.3}) {
      double h = 1e-4;
      Bindings b;
      b.set(Var::t, 0.0);
      auto hp = [&](double X, double P) {
        Bindings bb = b;
        bb.set(Var::x, X).set(Var::p, P);
        return H.partial(Var::p, bb);
      };
      double cross = (hp(xx + h, pp) - hp(xx - h, pp)) / (2 * h);
      if (std::fabs(cross) > 1e-6)
        throw std::invalid_argument("stormer-verlet requires a separable Hamiltonian");
    }
}

}  // namespace flow_detail

// Integrates z' = X_H from t0 to t1 in `steps` equal steps. t1 < t0 integrates
// backward. Blowup truncates the trajectory and sets the flag.
inline Trajectory integrate(const Hamiltonian& H, const PhasePoint& z0, double t0, double t1,
                            int steps, Scheme scheme = Scheme::RK4, Var time_var = Var::t,
                            const Bindings& frozen = {}) {
  if (steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
  if (scheme == Scheme::StormerVerlet) flow_detail::check_separable(H);

  Trajectory traj;
  traj.scheme = scheme;
  traj.step = (t1 - t0) / steps;
  traj.samples.reserve(steps + 1);
  traj.samples.push_back({t0, z0});

  PhasePoint z = z0;
  for (int k = 0; k < steps; ++k) {
    double tk = t0 + traj.step * k;
    PhasePoint next = scheme == Scheme::RK4
                          ? flow_detail::rk4_step(H, z, tk, traj.step, time_var, frozen)
                          : flow_detail::verlet_step(H, z, traj.step);
    if (!flow_detail::finite(next)) {
      traj.truncated = true;
      break;
    }
    z = next;
    traj.samples.push_back({t0 + traj.step * (k + 1), z});
  }

  if (H.autonomous() && !traj.truncated) {
    Bindings s = phase_bindings(z0, t0), e = phase_bindings(z, t1);
    traj.energy_drift = std::fabs(H.value(e) - H.value(s));
  }
  return traj;
}

struct CharacteristicResult {
  Trajectory traj;
  double action = 0.0;  // trapezoid quadrature of p*xdot - H on the step grid
};

// Integration with action transport. The integrand p*H_p - H is sampled on the
// same grid as the integrator and accumulated by the trapezoid rule.
inline CharacteristicResult integrate_action(const Hamiltonian& H, const PhasePoint& z0, double t0,
                                             double t1, int steps, Var time_var = Var::t,
                                             const Bindings& frozen = {}) {
  if (steps < 1) throw std::invalid_argument("integrate_action: steps must be >= 1");
  CharacteristicResult res;
  res.traj.scheme = Scheme::RK4;
  res.traj.step = (t1 - t0) / steps;
  res.traj.samples.push_back({t0, z0});

  auto integrand = [&](const PhasePoint& z, double time) {
    Bindings b = frozen;
    b.set(Var::x, z.x).set(Var::p, z.p).set(time_var, time);
    if (time_var == Var::t) b.set(Var::t, time);
    else if (!b.get(Var::t)) b.set(Var::t, time);
    return z.p * H.partial(Var::p, b) - H.value(b);
  };

  PhasePoint z = z0;
  double g_prev = integrand(z0, t0);
  for (int k = 0; k < steps; ++k) {
    double tk = t0 + res.traj.step * k;
    PhasePoint next = flow_detail::rk4_step(H, z, tk, res.traj.step, time_var, frozen);
    if (!flow_detail::finite(next)) {
      res.traj.truncated = true;
      break;
    }
    z = next;
    double g = integrand(z, tk + res.traj.step);
    res.action += 0.5 * (g_prev + g) * res.traj.step;
    g_prev = g;
    res.traj.samples.push_back({tk + res.traj.step, z});
  }
  return res;
}

struct SuspendedPoint {
  double t = 0.0;
  double tau = 0.0;
  PhasePoint z;
};

// Phi^s: (t,tau,z) -> (t+s, tau + H(t,z) - H(t+s, z'), z') with z' = phi_t^{t+s}(z).
inline SuspendedPoint suspended_flow(const Hamiltonian& H, const SuspendedPoint& pt, double s,
                                     int steps) {
  Trajectory traj = integrate(H, pt.z, pt.t, pt.t + s, steps);
  if (traj.truncated) throw std::runtime_error("suspended_flow: blowup during integration");
  SuspendedPoint out;
  out.t = pt.t + s;
  out.z = traj.end();
  out.tau = pt.tau + H.value(phase_bindings(pt.z, pt.t)) - H.value(phase_bindings(out.z, out.t));
  return out;
}

// phi^t psi^s phi^-t psi^-s applied to z0 (rightmost factor first).
inline PhasePoint commutator_isotopy(const Hamiltonian& H, const Hamiltonian& K, double s, double t,
                                     const PhasePoint& z0, int steps_per_leg) {
  auto leg = [&](const Hamiltonian& G, const PhasePoint& z, double duration) {
    if (duration == 0.0) return z;
    Trajectory traj = integrate(G, z, 0.0, duration, steps_per_leg);
    if (traj.truncated) throw std::runtime_error("commutator_isotopy: blowup on a leg");
    return traj.end();
  };
  PhasePoint z = leg(K, z0, -s);
  z = leg(H, z, -t);
  z = leg(K, z, s);
  z = leg(H, z, t);
  return z;
}

// L_s(t,z) = H(z) - H(psi^-s phi^-t (z)).
inline double commutator_hamiltonian(const Hamiltonian& H, const Hamiltonian& K, double s, double t,
                                     const PhasePoint& z, int steps_per_leg = 200) {
  auto leg = [&](const Hamiltonian& G, const PhasePoint& zz, double duration) {
    if (duration == 0.0) return zz;
    Trajectory traj = integrate(G, zz, 0.0, duration, steps_per_leg);
    if (traj.truncated) throw std::runtime_error("commutator_hamiltonian: blowup on a leg");
    return traj.end();
  };
  PhasePoint w = leg(H, z, -t);
  w = leg(K, w, -s);
  Bindings b0 = phase_bindings(z, 0.0), b1 = phase_bindings(w, 0.0);
  return H.value(b0) - H.value(b1);
}

struct ContactSample {
  double t;
  ContactPoint c;
};

struct ContactTrajectory {
  double step = 0.0;
  std::vector<ContactSample> samples;
  bool truncated = false;

  const ContactPoint& end() const { return samples.back().c; }
};

inline ContactTrajectory contact_integrate(const Hamiltonian& H, const ContactPoint& c0, double t0,
                                           double t1, int steps) {
  if (steps < 1) throw std::invalid_argument("contact_integrate: steps must be >= 1");
  ContactTrajectory traj;
  traj.step = (t1 - t0) / steps;
  traj.samples.push_back({t0, c0});

  auto field = [&](const ContactPoint& c) { return contact_vector_field(H, c); };
  auto ok = [](const ContactPoint& c) {
    return std::isfinite(c.x) && std::isfinite(c.p) && std::isfinite(c.u) &&
           std::fabs(c.x) < kBlowupThreshold && std::fabs(c.p) < kBlowupThreshold &&
           std::fabs(c.u) < kBlowupThreshold;
  };

  ContactPoint c = c0;
  double h = traj.step;
  for (int k = 0; k < steps; ++k) {
    auto k1 = field(c);
    auto k2 = field({c.x + 0.5 * h * k1[1], c.p + 0.5 * h * k1[2], c.u + 0.5 * h * k1[0]});
    auto k3 = field({c.x + 0.5 * h * k2[1], c.p + 0.5 * h * k2[2], c.u + 0.5 * h * k2[0]});
    auto k4 = field({c.x + h * k3[1], c.p + h * k3[2], c.u + h * k3[0]});
    ContactPoint next{c.x + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
                      c.p + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
                      c.u + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])};
    if (!ok(next)) {
      traj.truncated = true;
      break;
    }
    c = next;
    traj.samples.push_back({t0 + h * (k + 1), c});
  }
  return traj;
}

}  // namespace hjvar
