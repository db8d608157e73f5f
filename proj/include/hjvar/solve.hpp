#pragma once

// Solution fields: variational solutions (front + minimax selection), the
// Lax-Oleinik / Hopf viscosity oracle for convex p-only Hamiltonians,
// stability gaps, and the two-time order-discrepancy experiment.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gfqi.hpp"

namespace hjvar {

enum class SolveMethod { Variational, LaxOleinik, Hopf };

struct SolutionField {
  std::vector<double> t1;          // primary time grid
  std::vector<double> t2;          // empty for single-time problems
  std::vector<double> x;
  std::vector<double> u;           // [it1][it2][ix], NaN where undefined
  std::vector<int> branches;       // branch count per node (0 past blowup)
  std::optional<double> blowup_horizon;
  SolveMethod method = SolveMethod::Variational;

  std::size_t nt1() const { return t1.size(); }
  std::size_t nt2() const { return t2.empty() ? 1 : t2.size(); }
  std::size_t nx() const { return x.size(); }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return u[(i * nt2() + j) * nx() + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return u[(i * nt2() + j) * nx() + k];
  }
  int& branch_at(std::size_t i, std::size_t j, std::size_t k) {
    return branches[(i * nt2() + j) * nx() + k];
  }
  int branch_at(std::size_t i, std::size_t j, std::size_t k) const {
    return branches[(i * nt2() + j) * nx() + k];
  }
};

struct Grids {
  double x_min = -1.0, x_max = 1.0;
  int nx = 101;
  double seed_lo = 0.0, seed_hi = 0.0;  // 0,0 = derive from x range
  int n_seeds = 0;                      // 0 = nx
  int steps_per_unit_time = 100;
  int min_steps = 10;
  double p_min = -10.0, p_max = 10.0;   // Legendre oracle momentum range
  int np = 2001;
  int refine_levels = 3;

  std::vector<double> x_grid() const { return linspace(x_min, x_max, nx); }
  std::vector<double> seed_grid() const {
    double lo = seed_lo, hi = seed_hi;
    if (lo == 0.0 && hi == 0.0) {
      double span = x_max - x_min;
      lo = x_min - 0.5 * span - 1.0;
      hi = x_max + 0.5 * span + 1.0;
    }
    int n = n_seeds > 0 ? n_seeds : nx;
    return linspace(lo, hi, n);
  }
  int steps_for(double t) const {
    return std::max(min_steps,
                    static_cast<int>(std::ceil(steps_per_unit_time * std::fabs(t))));
  }
};

namespace solve_detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// Selection rule for one slice: where the front carries a single branch the
// solution is that branch's action; at multi-branch nodes it is the fiberwise
// minimax of the discrete generating family; with no covering branch the node
// is undefined.
inline void select_slice(SolutionField& field, std::size_t it, std::size_t jt, const Front& front,
                         const Expression& f, const Hamiltonian* H_for_family, double t_total,
                         const Grids& grids, const std::vector<double>& xg) {
  auto branches = branch_decompose(front, xg);
  bool need_family = false;
  for (const auto& br : branches)
    if (br.size() > 1) need_family = true;

  GeneratingFamily fam;
  bool have_family = false;
  if (need_family && H_for_family != nullptr) {
    try {
      auto seeds = grids.seed_grid();
      fam = build_discrete_family(f, *H_for_family, t_total, 1, xg,
                                  {seeds.front(), seeds.back(), static_cast<int>(seeds.size())},
                                  grids.steps_per_unit_time);
      have_family = true;
    } catch (const std::exception&) {
      have_family = false;
    }
  } else if (need_family) {
    // multi-time slice: the family comes from the final front itself
    try {
      fam = family_from_front(front, xg, +1);
      have_family = true;
    } catch (const std::exception&) {
      have_family = false;
    }
  }

  for (std::size_t k = 0; k < xg.size(); ++k) {
    field.branch_at(it, jt, k) = static_cast<int>(branches[k].size());
    if (branches[k].empty()) {
      field.at(it, jt, k) = nan();
    } else if (branches[k].size() == 1) {
      field.at(it, jt, k) = branches[k][0].action;
    } else if (have_family) {
      field.at(it, jt, k) = minimax_c1_fiber(fam, k).value;
    } else {
      field.at(it, jt, k) = nan();
    }
  }
}

inline double eval_f(const Expression& f, double x) {
  Bindings b;
  b.set(Var::x, x);
  return f.eval(b);
}

// Net orientation of the front's x-sequence (sign of the summed increments).
inline int front_orientation(const Front& fr) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < fr.points.size(); ++i) {
    if (fr.points[i].blown || fr.points[i + 1].blown) continue;
    s += fr.points[i + 1].x - fr.points[i].x;
  }
  return s > 0 ? 1 : (s < 0 ? -1 : 0);
}

}  // namespace solve_detail

// Variational solution of du/dt + H(t,x,du/dx) = 0, u(0,.) = f. Each time
// slice is re-integrated from the seeds. The blowup horizon, when hit, is
// localized by bisection in time on the verticality flag.
inline SolutionField variational_solution(const Expression& f, const Hamiltonian& H, double T,
                                          int nt, const Grids& grids) {
  if (nt < 2) throw std::invalid_argument("variational_solution: nt must be >= 2");
  SolutionField field;
  field.method = SolveMethod::Variational;
  field.t1 = linspace(0.0, T, nt);
  field.x = grids.x_grid();
  field.u.assign(field.nt1() * field.nx(), 0.0);
  field.branches.assign(field.nt1() * field.nx(), 1);

  auto seeds = grids.seed_grid();
  int prev_orient = 1;  // the seed front is a graph over increasing seeds
  double prev_t = 0.0;

  for (std::size_t it = 0; it < field.nt1(); ++it) {
    double t = field.t1[it];
    if (t == 0.0) {
      for (std::size_t k = 0; k < field.nx(); ++k)
        field.at(it, 0, k) = solve_detail::eval_f(f, field.x[k]);
      continue;
    }
    if (field.blowup_horizon && t >= *field.blowup_horizon) {
      for (std::size_t k = 0; k < field.nx(); ++k) {
        field.at(it, 0, k) = solve_detail::nan();
        field.branch_at(it, 0, k) = 0;
      }
      continue;
    }

    Front fr = refined_slice(f, H, t, seeds, grids.steps_for(t), grids.refine_levels);
    int orient = solve_detail::front_orientation(fr);
    bool collapsed = detect_verticality(fr).vertical;
    if (!collapsed && prev_orient != 0 && orient != 0 && orient != prev_orient) {
      // the front reversed orientation inside (prev_t, t): a vertical moment
      // sits in between; accept it as the horizon only if the front there is
      // genuinely collapsed, not merely folded
      double lo = prev_t, hi = t;
      for (int iter = 0; iter < 30 && (hi - lo) > 1e-5; ++iter) {
        double mid = 0.5 * (lo + hi);
        Front fm = refined_slice(f, H, mid, seeds, grids.steps_for(mid), 0);
        if (solve_detail::front_orientation(fm) == prev_orient) lo = mid;
        else hi = mid;
      }
      double t_flip = 0.5 * (lo + hi);
      Front fm = refined_slice(f, H, t_flip, seeds, grids.steps_for(t_flip), 0);
      if (detect_verticality(fm).collapse_ratio < 0.1) {
        field.blowup_horizon = t_flip;
        collapsed = true;
      }
    }
    if (collapsed) {
      if (!field.blowup_horizon) {
        // vertical right at a slice: bisect between the previous slice and it
        double lo = prev_t, hi = t;
        for (int iter = 0; iter < 30 && (hi - lo) > 1e-5; ++iter) {
          double mid = 0.5 * (lo + hi);
          Front fm = refined_slice(f, H, mid, seeds, grids.steps_for(mid), 0);
          if (detect_verticality(fm).vertical) hi = mid;
          else lo = mid;
        }
        field.blowup_horizon = 0.5 * (lo + hi);
      }
      for (std::size_t jt = it; jt < field.nt1(); ++jt)
        for (std::size_t k = 0; k < field.nx(); ++k) {
          field.at(jt, 0, k) = solve_detail::nan();
          field.branch_at(jt, 0, k) = 0;
        }
      break;
    }
    solve_detail::select_slice(field, it, 0, fr, f, &H, t, grids, field.x);
    prev_orient = orient;
    prev_t = t;
  }
  return field;
}

// Brute-force viscosity oracle for convex p-only H:
//   u(t,x) = min over the y-grid of f(y) + t H*((x-y)/t)
// with H* the Legendre transform computed by exhaustive max over a p-grid.
// The y-grid is the x-grid extended at the same spacing, so every needed
// slope (x-y)/t is one of a small set of exact grid ratios per slice.
inline SolutionField lax_oleinik(const Expression& f, const Hamiltonian& H, double T, int nt,
                                 const Grids& grids) {
  if (nt < 2) throw std::invalid_argument("lax_oleinik: nt must be >= 2");
  if (H.declared_deps() & ~var_bit(Var::p))
    throw std::invalid_argument("lax_oleinik: H must depend on p only");

  std::vector<double> pg = linspace(grids.p_min, grids.p_max, grids.np);
  std::vector<double> Hp(pg.size());
  for (std::size_t i = 0; i < pg.size(); ++i) {
    Bindings b;
    b.set(Var::p, pg[i]);
    Hp[i] = H.value(b);
  }
  for (std::size_t i = 1; i + 1 < pg.size(); ++i) {
    double d2 = Hp[i + 1] - 2 * Hp[i] + Hp[i - 1];
    if (d2 < -1e-9) throw std::invalid_argument("lax_oleinik: H fails the convexity check");
  }
  auto legendre = [&](double v) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pg.size(); ++i) best = std::max(best, pg[i] * v - Hp[i]);
    return best;
  };

  SolutionField field;
  field.method = SolveMethod::LaxOleinik;
  field.t1 = linspace(0.0, T, nt);
  field.x = grids.x_grid();
  field.u.assign(field.nt1() * field.nx(), 0.0);
  field.branches.assign(field.nt1() * field.nx(), 1);

  // y-grid: extend the x-grid by whole cells to cover the seed range
  double dx = (grids.x_max - grids.x_min) / double(grids.nx - 1);
  auto seeds = grids.seed_grid();
  int ext_lo = static_cast<int>(std::ceil(std::max(0.0, grids.x_min - seeds.front()) / dx));
  int ext_hi = static_cast<int>(std::ceil(std::max(0.0, seeds.back() - grids.x_max) / dx));
  std::vector<double> yg;
  for (int i = -ext_lo; i < grids.nx + ext_hi; ++i) yg.push_back(grids.x_min + dx * i);
  std::vector<double> fy(yg.size());
  for (std::size_t i = 0; i < yg.size(); ++i) fy[i] = solve_detail::eval_f(f, yg[i]);

  for (std::size_t it = 0; it < field.nt1(); ++it) {
    double t = field.t1[it];
    if (t == 0.0) {
      for (std::size_t k = 0; k < field.nx(); ++k)
        field.at(it, 0, k) = solve_detail::eval_f(f, field.x[k]);
      continue;
    }
    // offsets x - y are integer multiples of dx; memoize t*H*(offset/t)
    int max_off = static_cast<int>(yg.size()) + grids.nx;
    std::vector<double> cost(2 * max_off + 1);
    parallel_for(cost.size(), [&](std::size_t ci) {
      int off = static_cast<int>(ci) - max_off;
      cost[ci] = t * legendre(off * dx / t);
    });
    parallel_for(field.nx(), [&](std::size_t k) {
      // index of x in the extended grid: k + ext_lo
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < yg.size(); ++j) {
        int off = static_cast<int>(k) + ext_lo - static_cast<int>(j);
        best = std::min(best, fy[j] + cost[off + max_off]);
      }
      field.at(it, 0, k) = best;
    });
  }
  return field;
}

struct StabilityReport {
  double gap = 0.0;
  double bound = 0.0;
  bool ok = false;
};

// |u_H - u_K| <= T sup|H - K| (grid version on both sides).
inline StabilityReport stability_gap(const Hamiltonian& H, const Hamiltonian& K,
                                     const Expression& f, double T, int nt, const Grids& grids,
                                     double grid_tolerance = 1e-3) {
  SolutionField uh = variational_solution(f, H, T, nt, grids);
  SolutionField uk = variational_solution(f, K, T, nt, grids);
  StabilityReport rep;
  for (std::size_t i = 0; i < uh.u.size(); ++i) {
    if (std::isnan(uh.u[i]) || std::isnan(uk.u[i])) continue;
    rep.gap = std::max(rep.gap, std::fabs(uh.u[i] - uk.u[i]));
  }
  double sup_diff = 0.0;
  auto seeds = grids.seed_grid();
  for (double xx : linspace(seeds.front(), seeds.back(), 201))
    for (double pp : linspace(grids.p_min, grids.p_max, 41))
      for (double tt : linspace(0.0, T, 9)) {
        Bindings b;
        b.set(Var::x, xx).set(Var::p, pp).set(Var::t, tt);
        sup_diff = std::max(sup_diff, std::fabs(H.value(b) - K.value(b)));
      }
  rep.bound = T * sup_diff;
  rep.ok = rep.gap <= rep.bound + 2.0 * grid_tolerance;
  return rep;
}

// u^sigma(t1, t2, x) from multi-time fronts, same selection rule as the
// single-time variational solver.
inline SolutionField multitime_solve(const Expression& f, const Hamiltonian& H1,
                                     const Hamiltonian& H2, std::pair<int, int> order, double T1,
                                     double T2, int nt1, int nt2, const Grids& grids) {
  if (nt1 < 2 || nt2 < 2) throw std::invalid_argument("multitime_solve: nt1, nt2 must be >= 2");
  SolutionField field;
  field.method = SolveMethod::Variational;
  field.t1 = linspace(0.0, T1, nt1);
  field.t2 = linspace(0.0, T2, nt2);
  field.x = grids.x_grid();
  field.u.assign(field.nt1() * field.nt2() * field.nx(), 0.0);
  field.branches.assign(field.u.size(), 1);

  auto seeds = grids.seed_grid();
  for (std::size_t i = 0; i < field.nt1(); ++i)
    for (std::size_t j = 0; j < field.nt2(); ++j) {
      double a = field.t1[i], b = field.t2[j];
      if (a == 0.0 && b == 0.0) {
        for (std::size_t k = 0; k < field.nx(); ++k)
          field.at(i, j, k) = solve_detail::eval_f(f, field.x[k]);
        continue;
      }
      Front fr =
          multi_time_front(f, H1, H2, order, a, b, seeds, grids.steps_per_unit_time);
      solve_detail::select_slice(field, i, j, fr, f, nullptr, a + b, grids, field.x);
    }
  return field;
}

struct DiscrepancyRow {
  double eps = 0.0;
  double gap = 0.0;          // sup |u_{1,2} - u_{2,1}| over the grid
  double bracket_norm = 0.0; // sup |<<H1, eps*H2>>| over the sampled box
};

// Numerical mirror of the order-of-solving theorem: scale H2 by each eps,
// solve in both orders, report the sup gap next to the bracket sup-norm.
inline std::vector<DiscrepancyRow> order_discrepancy(const Expression& f, const Hamiltonian& H1,
                                                     const Hamiltonian& H2, double T1, double T2,
                                                     int nt1, int nt2, const Grids& grids,
                                                     const std::vector<double>& eps_list,
                                                     double p_box = 3.0) {
  std::vector<DiscrepancyRow> table;
  auto seeds = grids.seed_grid();
  for (double eps : eps_list) {
    Hamiltonian H2e = H2.scaled(eps);
    DiscrepancyRow row;
    row.eps = eps;
    if (eps == 0.0) {
      SolutionField u12 = multitime_solve(f, H1, H2e, {1, 2}, T1, T2, nt1, nt2, grids);
      SolutionField u21 = multitime_solve(f, H1, H2e, {2, 1}, T1, T2, nt1, nt2, grids);
      for (std::size_t i = 0; i < u12.u.size(); ++i)
        if (!std::isnan(u12.u[i]) && !std::isnan(u21.u[i]))
          row.gap = std::max(row.gap, std::fabs(u12.u[i] - u21.u[i]));
      row.bracket_norm = 0.0;
      table.push_back(row);
      continue;
    }
    SolutionField u12 = multitime_solve(f, H1, H2e, {1, 2}, T1, T2, nt1, nt2, grids);
    SolutionField u21 = multitime_solve(f, H1, H2e, {2, 1}, T1, T2, nt1, nt2, grids);
    for (std::size_t i = 0; i < u12.u.size(); ++i)
      if (!std::isnan(u12.u[i]) && !std::isnan(u21.u[i]))
        row.gap = std::max(row.gap, std::fabs(u12.u[i] - u21.u[i]));
    Box box;
    box.x = {seeds.front(), seeds.back()};
    box.p = {-p_box, p_box};
    box.t1 = {0.0, T1};
    box.t2 = {0.0, T2};
    row.bracket_norm = bracket_sup_norm(H1, H2e, BracketKind::MultiTime, box, 41).value;
    table.push_back(row);
  }
  return table;
}

}  // namespace hjvar
