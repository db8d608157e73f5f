#pragma once

// Hamiltonians over 1-dimensional phase space and the four bracket flavors.
//
// Sign conventions, fixed once for the whole library:
//   sigma = dp ^ dx,   X_H = (H_p, -H_x),   {A,B} = A_x B_p - A_p B_x
//   [A,B](t,z)        = {A,B} + dA/dt - dB/dt
//   <<A,B>>(s,t,z)    = {A,B} + dA/dt - dB/ds          (s = t1, t = t2)
//   contact:  X~_H    = (pH_p - H) d/du + H_p d/dx - (H_x + pH_u) d/dp
//             [A,B]   = {A,B}_s + B_u (pA_p - A) - A_u (pB_p - B)
//             {A,B}_s = A_p B_x - A_x B_p

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "expr.hpp"

namespace hjvar {

struct PhasePoint {
  double x = 0.0;
  double p = 0.0;
};

struct ContactPoint {
  double x = 0.0;
  double p = 0.0;
  double u = 0.0;
};

enum class GradientMode { Symbolic, FiniteDifference };

// Central-difference step, h = cbrt(eps) * (1 + |coordinate|).
inline double fd_step(double coord) {
  static const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  return h0 * (1.0 + std::fabs(coord));
}

class Hamiltonian {
 public:
  Hamiltonian() = default;

  explicit Hamiltonian(Expression expr, GradientMode mode = GradientMode::Symbolic,
                       std::string label = "")
      : expr_(std::move(expr)), deps_(expr_.variables()), mode_(mode), label_(std::move(label)) {
    if (mode_ == GradientMode::Symbolic) {
      for (int i = 0; i < kNumVars; ++i) {
        Var v = static_cast<Var>(i);
        if (deps_ & var_bit(v)) partials_[i] = expr_.derivative(v);
      }
    }
  }

  static Hamiltonian parse(std::string_view text, GradientMode mode = GradientMode::Symbolic,
                           std::string label = "") {
    return Hamiltonian(Expression::parse(text), mode, std::move(label));
  }

  double value(const Bindings& b) const { return expr_.eval(b); }

  // Exactly 0 for variables outside the declared dependency set.
  double partial(Var v, const Bindings& b) const {
    if (!(deps_ & var_bit(v))) return 0.0;
    if (mode_ == GradientMode::Symbolic) return partials_[static_cast<int>(v)].eval(b);
    double c = b.get(v).value_or(0.0);
    double h = fd_step(c);
    Bindings bp = b, bm = b;
    bp.set(v, c + h);
    bm.set(v, c - h);
    return (expr_.eval(bp) - expr_.eval(bm)) / (2.0 * h);
  }

  const Expression& expression() const { return expr_; }
  VarSet declared_deps() const { return deps_; }
  bool depends_on(Var v) const { return (deps_ & var_bit(v)) != 0; }
  GradientMode gradient_mode() const { return mode_; }
  const std::string& label() const { return label_; }

  bool autonomous() const {
    return !(deps_ & (var_bit(Var::t) | var_bit(Var::t1) | var_bit(Var::t2)));
  }

  Hamiltonian with_mode(GradientMode mode) const { return Hamiltonian(expr_, mode, label_); }

  Hamiltonian scaled(double c) const {
    return Hamiltonian(Expression::constant(c) * expr_, mode_, label_);
  }

 private:
  Expression expr_;
  VarSet deps_ = 0;
  GradientMode mode_ = GradientMode::Symbolic;
  std::string label_;
  std::array<Expression, kNumVars> partials_{};
};

inline Bindings phase_bindings(const PhasePoint& z, double time) {
  Bindings b;
  b.set(Var::x, z.x).set(Var::p, z.p).set(Var::t, time);
  return b;
}

// X_H = (H_p, -H_x).
inline std::pair<double, double> hamiltonian_vector_field(const Hamiltonian& H, const PhasePoint& z,
                                                          double time = 0.0) {
  Bindings b = phase_bindings(z, time);
  return {H.partial(Var::p, b), -H.partial(Var::x, b)};
}

inline double poisson_bracket(const Hamiltonian& A, const Hamiltonian& B, const PhasePoint& z,
                              double time = 0.0) {
  Bindings b = phase_bindings(z, time);
  return A.partial(Var::x, b) * B.partial(Var::p, b) - A.partial(Var::p, b) * B.partial(Var::x, b);
}

inline double timedep_bracket(const Hamiltonian& A, const Hamiltonian& B, const PhasePoint& z,
                              double time) {
  Bindings b = phase_bindings(z, time);
  double pb = A.partial(Var::x, b) * B.partial(Var::p, b) - A.partial(Var::p, b) * B.partial(Var::x, b);
  return pb + A.partial(Var::t, b) - B.partial(Var::t, b);
}

// <<A,B>> with s = t1 (conjugate to B) and t = t2 (conjugate to A).
inline double multitime_bracket(const Hamiltonian& A, const Hamiltonian& B, const PhasePoint& z,
                                double s, double t) {
  Bindings b;
  b.set(Var::x, z.x).set(Var::p, z.p).set(Var::t1, s).set(Var::t2, t);
  double pb = A.partial(Var::x, b) * B.partial(Var::p, b) - A.partial(Var::p, b) * B.partial(Var::x, b);
  return pb + A.partial(Var::t2, b) - B.partial(Var::t1, b);
}

inline Bindings contact_bindings(const ContactPoint& c) {
  Bindings b;
  b.set(Var::x, c.x).set(Var::p, c.p).set(Var::u, c.u);
  return b;
}

// Returns (du/dt, dx/dt, dp/dt).
inline std::array<double, 3> contact_vector_field(const Hamiltonian& H, const ContactPoint& c) {
  Bindings b = contact_bindings(c);
  double h = H.value(b);
  double hx = H.partial(Var::x, b);
  double hp = H.partial(Var::p, b);
  double hu = H.partial(Var::u, b);
  return {c.p * hp - h, hp, -(hx + c.p * hu)};
}

inline double contact_bracket(const Hamiltonian& A, const Hamiltonian& B, const ContactPoint& c) {
  Bindings b = contact_bindings(c);
  double a = A.value(b), av = B.value(b);
  double ax = A.partial(Var::x, b), ap = A.partial(Var::p, b), au = A.partial(Var::u, b);
  double bx = B.partial(Var::x, b), bp = B.partial(Var::p, b), bu = B.partial(Var::u, b);
  double spatial = ap * bx - ax * bp;
  return spatial + bu * (c.p * ap - a) - au * (c.p * bp - av);
}

enum class BracketKind { Poisson, TimeDep, MultiTime, Contact };

struct BracketReport {
  BracketKind kind;
  double value;
  PhasePoint point;
  std::string label_a, label_b;
};

struct Box {
  struct Range {
    double lo = 0.0, hi = 0.0;
    bool degenerate() const { return lo == hi; }
  };
  Range x, p;
  Range t{0.0, 0.0}, t1{0.0, 0.0}, t2{0.0, 0.0}, u{0.0, 0.0};
};

struct SupNormReport {
  double value = 0.0;
  int samples_per_axis = 0;
  PhasePoint argmax;
};

// Grid max of |bracket| over the box; a lower bound of the true sup.
inline SupNormReport bracket_sup_norm(const Hamiltonian& A, const Hamiltonian& B, BracketKind kind,
                                      const Box& box, int samples) {
  if (samples < 2) samples = 2;
  auto axis = [&](const Box::Range& r, int i) {
    if (r.degenerate()) return r.lo;
    return r.lo + (r.hi - r.lo) * i / double(samples - 1);
  };
  auto count = [&](const Box::Range& r) { return r.degenerate() ? 1 : samples; };

  SupNormReport rep;
  rep.samples_per_axis = samples;
  for (int ix = 0; ix < count(box.x); ++ix)
    for (int ip = 0; ip < count(box.p); ++ip) {
      PhasePoint z{axis(box.x, ix), axis(box.p, ip)};
      int nt = (kind == BracketKind::Poisson || kind == BracketKind::TimeDep) ? count(box.t) : 1;
      int n1 = (kind == BracketKind::MultiTime) ? count(box.t1) : 1;
      int n2 = (kind == BracketKind::MultiTime) ? count(box.t2) : 1;
      int nu = (kind == BracketKind::Contact) ? count(box.u) : 1;
      for (int it = 0; it < nt; ++it)
        for (int i1 = 0; i1 < n1; ++i1)
          for (int i2 = 0; i2 < n2; ++i2)
            for (int iu = 0; iu < nu; ++iu) {
              double val = 0.0;
              switch (kind) {
                case BracketKind::Poisson:
                  val = poisson_bracket(A, B, z, axis(box.t, it));
                  break;
                case BracketKind::TimeDep:
                  val = timedep_bracket(A, B, z, axis(box.t, it));
                  break;
                case BracketKind::MultiTime:
                  val = multitime_bracket(A, B, z, axis(box.t1, i1), axis(box.t2, i2));
                  break;
                case BracketKind::Contact:
                  val = contact_bracket(A, B, ContactPoint{z.x, z.p, axis(box.u, iu)});
                  break;
              }
              if (std::fabs(val) > rep.value) {
                rep.value = std::fabs(val);
                rep.argmax = z;
              }
            }
    }
  return rep;
}

struct PropagationReport {
  double A = 0.0;  // slope of the fitted |X_H| <= A*r + B
  double B = 0.0;
  bool satisfied = false;
  double max_residual_ratio = 0.0;
};

// Fits sup|X_H| on shells |x|+|p| = r against A*r + B by least squares.
// satisfied = residual within 10% of the fit scale; a diagnostic, not a proof.
inline PropagationReport propagation_report(const Hamiltonian& H, const Box& box, int samples,
                                            double t_max = 1.0) {
  if (samples < 2) samples = 2;
  double R = std::max(std::max(std::fabs(box.x.lo), std::fabs(box.x.hi)),
                      std::max(std::fabs(box.p.lo), std::fabs(box.p.hi)));
  if (R <= 0.0) R = 1.0;

  int n_shell = samples;
  int n_angle = std::max(8, 4 * samples);
  int n_time = H.depends_on(Var::t) ? samples : 1;

  std::vector<double> radii(n_shell), sup(n_shell, 0.0);
  for (int k = 0; k < n_shell; ++k) {
    double r = R * (k + 1) / double(n_shell);
    radii[k] = r;
    for (int a = 0; a < n_angle; ++a) {
      // Walk the diamond |x|+|p| = r.
      double frac = a / double(n_angle);
      double s = 4.0 * frac;
      double xx, pp;
      if (s < 1.0) { xx = r * (1.0 - s); pp = r * s; }
      else if (s < 2.0) { xx = -r * (s - 1.0); pp = r * (2.0 - s); }
      else if (s < 3.0) { xx = -r * (3.0 - s); pp = -r * (s - 2.0); }
      else { xx = r * (s - 3.0); pp = -r * (4.0 - s); }
      for (int it = 0; it < n_time; ++it) {
        double time = n_time == 1 ? 0.0 : t_max * it / double(n_time - 1);
        auto [dx, dp] = hamiltonian_vector_field(H, PhasePoint{xx, pp}, time);
        double mag = std::hypot(dx, dp);
        if (mag > sup[k]) sup[k] = mag;
      }
    }
  }

  PropagationReport rep;
  double mmax = 0.0;
  for (double m : sup) mmax = std::max(mmax, m);
  if (mmax == 0.0) {
    rep.satisfied = true;
    return rep;
  }

  double sr = 0, srr = 0, sm = 0, srm = 0;
  for (int k = 0; k < n_shell; ++k) {
    sr += radii[k];
    srr += radii[k] * radii[k];
    sm += sup[k];
    srm += radii[k] * sup[k];
  }
  double n = n_shell;
  double det = n * srr - sr * sr;
  rep.A = (n * srm - sr * sm) / det;
  rep.B = (srr * sm - sr * srm) / det;

  double scale = 0.0, maxres = 0.0;
  for (int k = 0; k < n_shell; ++k) {
    double fit = rep.A * radii[k] + rep.B;
    scale = std::max(scale, std::fabs(fit));
    maxres = std::max(maxres, std::fabs(sup[k] - fit));
  }
  rep.max_residual_ratio = scale > 0 ? maxres / scale : maxres;
  rep.satisfied = rep.max_residual_ratio <= 0.10;
  return rep;
}

}  // namespace hjvar
