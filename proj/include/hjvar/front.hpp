#pragma once

// Discrete Lagrangian fronts: isotropic initial data seeded from a graph df,
// characteristic propagation with action transport, multi-time composition,
// fold and verticality detection.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flow.hpp"
#include "util.hpp"

namespace hjvar {

inline constexpr double kVerticalEps = 1e-3;

struct FrontPoint {
  double seed_x = 0.0;  // initial base point
  double x = 0.0;
  double p = 0.0;
  double action = 0.0;            // transported value of the action primitive
  std::vector<double> tau;        // -H_j records, one per Hamiltonian slot
  bool blown = false;
};

struct Front {
  std::vector<double> times;        // (t_1, ..., t_d)
  std::vector<FrontPoint> points;   // ordered by strictly increasing seed_x
  std::vector<std::size_t> fold_markers;
  bool vertical = false;
  double base_seed_spacing = 0.0;

  std::size_t dims() const { return times.size(); }
};

namespace front_detail {

inline Var slot_time_var(std::size_t d, std::size_t slot) {
  if (d <= 1) return Var::t;
  return slot == 0 ? Var::t1 : Var::t2;
}

// Bindings with every time slot fixed at the front's current times.
inline Bindings frozen_times(const Front& f, std::size_t active_slot) {
  Bindings b;
  if (f.dims() <= 1) return b;
  for (std::size_t j = 0; j < f.dims(); ++j) {
    if (j == active_slot) continue;
    b.set(slot_time_var(f.dims(), j), f.times[j]);
  }
  return b;
}

inline double eval_tau(const Hamiltonian& H, const Front& f, std::size_t slot, const FrontPoint& pt) {
  Bindings b;
  b.set(Var::x, pt.x).set(Var::p, pt.p);
  if (f.dims() <= 1) {
    b.set(Var::t, f.times.empty() ? 0.0 : f.times[0]);
  } else {
    for (std::size_t j = 0; j < f.dims(); ++j) b.set(slot_time_var(f.dims(), j), f.times[j]);
    b.set(Var::t, f.times[slot]);
  }
  return -H.value(b);
}

}  // namespace front_detail

inline void refresh_markers(Front& f, double vertical_eps = kVerticalEps) {
  f.fold_markers.clear();
  const auto& pts = f.points;
  double max_dx = 0.0;
  int prev_sign = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i].blown || pts[i + 1].blown) {
      prev_sign = 0;
      continue;
    }
    double dx = pts[i + 1].x - pts[i].x;
    max_dx = std::max(max_dx, std::fabs(dx));
    int sign = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    if (sign != 0 && prev_sign != 0 && sign != prev_sign) f.fold_markers.push_back(i + 1);
    if (sign != 0) prev_sign = sign;
  }
  f.vertical = f.base_seed_spacing > 0 && pts.size() > 1 &&
               max_dx < vertical_eps * f.base_seed_spacing;
}

// Lambda_{f;H_1,...,H_d} sampled at the given seed positions: at time zero
// x = seed, p = f'(seed), action = f(seed), tau_j = -H_j(0,...,0,x,p).
inline Front seed_front(const Expression& f, const std::vector<Hamiltonian>& Hs,
                        const std::vector<double>& seeds) {
  if (seeds.size() < 2) throw std::invalid_argument("seed_front: need at least 2 seeds");
  for (std::size_t i = 0; i + 1 < seeds.size(); ++i)
    if (!(seeds[i] < seeds[i + 1]))
      throw std::invalid_argument("seed_front: seeds must be strictly increasing");

  Expression df = f.derivative(Var::x);
  Front front;
  front.times.assign(Hs.empty() ? 1 : Hs.size(), 0.0);
  front.base_seed_spacing = (seeds.back() - seeds.front()) / double(seeds.size() - 1);
  front.points.resize(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    FrontPoint& pt = front.points[i];
    pt.seed_x = seeds[i];
    pt.x = seeds[i];
    Bindings b;
    b.set(Var::x, seeds[i]);
    pt.p = df.eval(b);
    pt.action = f.eval(b);
    pt.tau.resize(front.times.size());
    for (std::size_t j = 0; j < Hs.size(); ++j)
      pt.tau[j] = front_detail::eval_tau(Hs[j], front, j, pt);
  }
  refresh_markers(front);
  return front;
}

// Advances slot's time by dt under the flow of H. Action transported by the
// quadrature of p*xdot - H on the integrator's step grid; tau_slot refreshed
// at the endpoint. Blown characteristics are marked, the front is still built.
inline Front propagate_front(const Front& front, const Hamiltonian& H, std::size_t slot, double dt,
                             int steps) {
  if (slot >= front.dims()) throw std::invalid_argument("propagate_front: slot out of range");
  Front out = front;
  out.times[slot] += dt;
  Var tv = front_detail::slot_time_var(front.dims(), slot);
  Bindings frozen = front_detail::frozen_times(front, slot);
  double t_start = front.times[slot];

  parallel_for(out.points.size(), [&](std::size_t i) {
    FrontPoint& pt = out.points[i];
    if (pt.blown) return;
    CharacteristicResult res =
        integrate_action(H, {pt.x, pt.p}, t_start, t_start + dt, steps, tv, frozen);
    if (res.traj.truncated) {
      pt.blown = true;
      return;
    }
    pt.x = res.traj.end().x;
    pt.p = res.traj.end().p;
    pt.action += res.action;
    pt.tau[slot] = front_detail::eval_tau(H, out, slot, pt);
  });
  refresh_markers(out);
  return out;
}

// L^sigma for d = 2: the second listed slot flows first with the other time
// held at 0, then the first listed slot.
inline Front multi_time_front(const Expression& f, const Hamiltonian& H1, const Hamiltonian& H2,
                              std::pair<int, int> order, double T1, double T2,
                              const std::vector<double>& seeds, int steps_per_unit_time) {
  if (!((order.first == 1 && order.second == 2) || (order.first == 2 && order.second == 1)))
    throw std::invalid_argument("multi_time_front: order must be (1,2) or (2,1)");
  const Hamiltonian* Hs[2] = {&H1, &H2};
  double Ts[2] = {T1, T2};

  Front front = seed_front(f, {H1, H2}, seeds);
  for (int which : {order.second, order.first}) {
    std::size_t slot = static_cast<std::size_t>(which - 1);
    double T = Ts[slot];
    if (T == 0.0) continue;
    int steps = std::max(10, static_cast<int>(std::ceil(steps_per_unit_time * std::fabs(T))));
    front = propagate_front(front, *Hs[slot], slot, T, steps);
  }
  return front;
}

struct Branch {
  double p = 0.0;
  double action = 0.0;
};

// For each query x: linear interpolation within every monotone segment of the
// front's x-sequence that brackets x. Empty list where no segment covers x.
inline std::vector<std::vector<Branch>> branch_decompose(const Front& front,
                                                         const std::vector<double>& x_query) {
  if (front.points.size() < 2)
    throw std::invalid_argument("branch_decompose: front needs at least 2 points");

  std::vector<std::vector<Branch>> result(x_query.size());
  const auto& pts = front.points;

  // Maximal runs of consecutive non-blown points with monotone x.
  std::size_t i = 0;
  while (i + 1 < pts.size()) {
    if (pts[i].blown) {
      ++i;
      continue;
    }
    std::size_t j = i;
    int dir = 0;
    while (j + 1 < pts.size() && !pts[j + 1].blown) {
      double dx = pts[j + 1].x - pts[j].x;
      int s = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
      if (s == 0) break;
      if (dir == 0) dir = s;
      else if (s != dir) break;
      ++j;
    }
    if (j > i) {
      for (std::size_t q = 0; q < x_query.size(); ++q) {
        double xq = x_query[q];
        for (std::size_t k = i; k < j; ++k) {
          double xa = pts[k].x, xb = pts[k + 1].x;
          if ((xq >= std::min(xa, xb)) && (xq <= std::max(xa, xb))) {
            double w = (xb == xa) ? 0.5 : (xq - xa) / (xb - xa);
            result[q].push_back({pts[k].p + w * (pts[k + 1].p - pts[k].p),
                                 pts[k].action + w * (pts[k + 1].action - pts[k].action)});
            break;  // one branch per monotone segment
          }
        }
      }
      i = j;
    } else {
      ++i;
    }
  }
  return result;
}

struct VerticalityReport {
  bool vertical = false;
  double collapse_ratio = 0.0;
};

inline VerticalityReport detect_verticality(const Front& front) {
  VerticalityReport rep;
  if (front.points.size() < 2 || front.base_seed_spacing <= 0) return rep;
  double max_dx = 0.0;
  for (std::size_t i = 0; i + 1 < front.points.size(); ++i) {
    if (front.points[i].blown || front.points[i + 1].blown) continue;
    max_dx = std::max(max_dx, std::fabs(front.points[i + 1].x - front.points[i].x));
  }
  rep.collapse_ratio = max_dx / front.base_seed_spacing;
  rep.vertical = rep.collapse_ratio < kVerticalEps;
  return rep;
}

// Single-time slice at time t, re-integrated from the seeds, with up to
// `levels` rounds of seed bisection around detected folds to localize
// caustics. Refinement keeps base_seed_spacing from the original grid so the
// verticality diagnostic stays comparable across levels.
inline Front refined_slice(const Expression& f, const Hamiltonian& H, double t,
                           std::vector<double> seeds, int steps, int levels = 3) {
  auto build = [&](const std::vector<double>& s) {
    Front fr = seed_front(f, {H}, s);
    double spacing = fr.base_seed_spacing;
    if (t != 0.0) fr = propagate_front(fr, H, 0, t, steps);
    fr.base_seed_spacing = spacing;
    refresh_markers(fr);
    return fr;
  };

  double base_spacing = (seeds.back() - seeds.front()) / double(seeds.size() - 1);
  Front fr = build(seeds);
  fr.base_seed_spacing = base_spacing;
  refresh_markers(fr);
  for (int lvl = 0; lvl < levels && !fr.fold_markers.empty(); ++lvl) {
    std::vector<double> extra;
    for (std::size_t m : fr.fold_markers) {
      std::size_t lo = m > 1 ? m - 2 : 0;
      std::size_t hi = std::min(m + 1, fr.points.size() - 1);
      for (std::size_t k = lo; k < hi; ++k)
        extra.push_back(0.5 * (fr.points[k].seed_x + fr.points[k + 1].seed_x));
    }
    if (extra.empty()) break;
    std::vector<double> merged;
    merged.reserve(seeds.size() + extra.size());
    for (const auto& pt : fr.points) merged.push_back(pt.seed_x);
    merged.insert(merged.end(), extra.begin(), extra.end());
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    seeds = std::move(merged);
    fr = build(seeds);
    fr.base_seed_spacing = base_spacing;
    refresh_markers(fr);
  }
  return fr;
}

}  // namespace hjvar
