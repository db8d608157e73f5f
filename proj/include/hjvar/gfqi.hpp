#pragma once

// Discrete generating families quadratic at infinity, minimax critical values
// c(1,.), c(mu,.), the gamma invariant, and a lower-bound estimator for
// gamma-tilde of a time-T flow map.
//
// Operational rules, by tail signature (fiber dims <= 2):
//   index 0 (all +):        c(1) = global min, c(mu) = max over x of fiber min
//   1 fiber, index 1 (-):   c(1) = union-find connect threshold of the two
//                           fiber ends through the sublevel set, c(mu) = -c(1,-S)
//   2 fibers, mixed (+,-):  c(1) = 3-d union-find across the negative fiber,
//                           c(mu) = -c(1,-S)
// c(mu) always goes through the duality c(1,-S) = -c(mu,S) where it is not
// covered by the index-0 closed rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "front.hpp"
#include "util.hpp"

namespace hjvar {

inline constexpr std::size_t kFamilyCellCap = 30'000'000;

struct Tail {
  int sign = +1;  // +1: Q = +xi^2 (index 0), -1: Q = -xi^2 (index 1)
  double match_radius = std::numeric_limits<double>::infinity();
};

struct GeneratingFamily {
  std::vector<double> x;    // base grid
  bool periodic = false;
  std::vector<double> xi;   // first fiber grid; empty => graph family
  std::vector<double> xi2;  // second fiber grid (difference families only)
  std::vector<double> S;    // values, layout [ix][i1][i2]
  Tail tail;                // xi direction
  int tail2_sign = 0;       // xi2 direction sign; 0 when unused

  // Generic-route metadata: characteristic endpoint per fiber seed, and the
  // masking radius for fiberwise queries. Empty/inf when not applicable.
  std::vector<double> endpoint_x;
  double reach_radius = std::numeric_limits<double>::infinity();

  std::size_t nx() const { return x.size(); }
  std::size_t n1() const { return xi.empty() ? 1 : xi.size(); }
  std::size_t n2() const { return xi2.empty() ? 1 : xi2.size(); }
  bool graph() const { return xi.empty(); }
  bool product() const { return !xi2.empty(); }

  double& at(std::size_t ix, std::size_t i1 = 0, std::size_t i2 = 0) {
    return S[(ix * n1() + i1) * n2() + i2];
  }
  double at(std::size_t ix, std::size_t i1 = 0, std::size_t i2 = 0) const {
    return S[(ix * n1() + i1) * n2() + i2];
  }
};

enum class MinimaxKind { C1Fiber, C1Global, CMuGlobal };

struct MinimaxValue {
  double value = 0.0;
  MinimaxKind kind = MinimaxKind::C1Global;
  std::size_t wx = 0, wxi = 0, wxi2 = 0;  // witness grid location
};

struct GammaResult {
  double value = 0.0;  // clamped to >= 0
  double raw = 0.0;
};

// ---------------------------------------------------------------------------
// Construction

inline GeneratingFamily graph_family(std::vector<double> x_grid, std::vector<double> values,
                                     bool periodic = false) {
  if (x_grid.size() != values.size())
    throw std::invalid_argument("graph_family: size mismatch");
  GeneratingFamily fam;
  fam.x = std::move(x_grid);
  fam.S = std::move(values);
  fam.periodic = periodic;
  return fam;
}

template <typename Fn>
GeneratingFamily make_family(const std::vector<double>& x_grid, const std::vector<double>& xi_grid,
                             Fn&& S_of, int tail_sign, bool periodic = false) {
  GeneratingFamily fam;
  fam.x = x_grid;
  fam.xi = xi_grid;
  fam.periodic = periodic;
  fam.tail.sign = tail_sign;
  fam.tail.match_radius = std::max(std::fabs(xi_grid.front()), std::fabs(xi_grid.back()));
  fam.S.resize(x_grid.size() * xi_grid.size());
  for (std::size_t ix = 0; ix < x_grid.size(); ++ix)
    for (std::size_t i1 = 0; i1 < xi_grid.size(); ++i1)
      fam.at(ix, i1) = S_of(x_grid[ix], xi_grid[i1]);
  return fam;
}

namespace gfqi_detail {

// Tail sign from the fiber second differences at both boundary regions of a
// reference base fiber. Throws if the two ends disagree or oscillate.
inline int classify_tail(const GeneratingFamily& fam) {
  std::size_t ix = fam.nx() / 2;
  std::size_t m = fam.n1();
  if (m < 5) throw std::invalid_argument("classify_tail: fiber grid too small");
  auto second_diff_sign = [&](std::size_t i) {
    double d2 = fam.at(ix, i + 1) - 2 * fam.at(ix, i) + fam.at(ix, i - 1);
    return d2 > 0 ? 1 : (d2 < 0 ? -1 : 0);
  };
  int left = 0, right = 0;
  for (std::size_t i = 1; i <= 3; ++i) {
    left += second_diff_sign(i);
    right += second_diff_sign(m - 1 - i);
  }
  if (left > 0 && right > 0) return +1;
  if (left < 0 && right < 0) return -1;
  throw std::runtime_error(
      "cannot classify generating-family tail (oscillating at boundary); enlarge xi_bounds");
}

struct DSU {
  std::vector<std::size_t> parent;
  explicit DSU(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
  bool same(std::size_t a, std::size_t b) { return find(a) == find(b); }
};

}  // namespace gfqi_detail

// Discrete generating family S(x, xi) = f(xi) + A(xi, x, t) with one broken
// node (M = 1, fiber variable = initial seed position).
//  - quadratic-in-p Hamiltonians: exact one-jump action
//    A = (x - xi - b t)^2 / (4 a t) - c t  for H = a p^2 + b p + c
//  - otherwise: integrated action of the characteristic shot from
//    (xi, f'(xi)) plus the linear correction p_end * (x - x_end); fiberwise
//    queries mask seeds whose endpoint is farther than reach_radius from x.
struct FiberGrid {
  double lo = 0.0, hi = 0.0;
  int n = 0;
};

inline GeneratingFamily family_from_front(const Front& front, const std::vector<double>& x_grid,
                                          int tail_sign) {
  GeneratingFamily fam;
  fam.x = x_grid;
  fam.xi.reserve(front.points.size());
  fam.tail.sign = tail_sign;
  std::vector<const FrontPoint*> pts;
  for (const auto& pt : front.points)
    if (!pt.blown) pts.push_back(&pt);
  if (pts.size() < 2) throw std::runtime_error("family_from_front: too few live characteristics");
  for (const auto* pt : pts) fam.xi.push_back(pt->seed_x);
  fam.tail.match_radius = std::max(std::fabs(fam.xi.front()), std::fabs(fam.xi.back()));
  fam.endpoint_x.reserve(pts.size());
  for (const auto* pt : pts) fam.endpoint_x.push_back(pt->x);

  double max_gap = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    max_gap = std::max(max_gap, std::fabs(pts[i + 1]->x - pts[i]->x));
  double xrange = x_grid.empty() ? 1.0 : (x_grid.back() - x_grid.front());
  fam.reach_radius = std::max(0.05 * std::fabs(xrange), 4.0 * max_gap);

  fam.S.resize(x_grid.size() * pts.size());
  for (std::size_t ix = 0; ix < x_grid.size(); ++ix)
    for (std::size_t i1 = 0; i1 < pts.size(); ++i1) {
      const FrontPoint& pt = *pts[i1];
      fam.at(ix, i1) = pt.action + pt.p * (x_grid[ix] - pt.x);
    }
  return fam;
}

inline GeneratingFamily build_discrete_family(const Expression& f, const Hamiltonian& H, double t,
                                              int M, const std::vector<double>& x_grid,
                                              const FiberGrid& xi_bounds,
                                              int steps_per_unit_time = 100) {
  if (M != 1) throw std::invalid_argument("build_discrete_family: only M = 1 is supported");
  if (xi_bounds.n < 5) throw std::invalid_argument("build_discrete_family: fiber grid too small");
  std::vector<double> xi_grid = linspace(xi_bounds.lo, xi_bounds.hi, xi_bounds.n);

  // p-only quadratic H: exact one-jump action.
  bool p_only = !(H.declared_deps() & ~(var_bit(Var::p)));
  if (p_only && t != 0.0) {
    Bindings b;
    b.set(Var::p, 0.0);
    double c0 = H.value(b);
    double b0 = H.partial(Var::p, b);
    Bindings b1;
    b1.set(Var::p, 1.0);
    Bindings b2;
    b2.set(Var::p, 2.0);
    double h1 = H.value(b1), h2 = H.value(b2);
    double a0 = h1 - c0 - b0;                      // H(1)-H(0)-H'(0) for quadratic = a
    double cubic_probe = h2 - c0 - 2 * b0 - 4 * a0;  // 0 iff quadratic
    if (std::fabs(cubic_probe) < 1e-10 && std::fabs(a0) > 1e-12) {
      auto S_of = [&](double x, double xi) {
        Bindings fb;
        fb.set(Var::x, xi);
        double jump = x - xi - b0 * t;
        return f.eval(fb) + jump * jump / (4.0 * a0 * t) - c0 * t;
      };
      GeneratingFamily fam;
      fam.x = x_grid;
      fam.xi = xi_grid;
      fam.tail.match_radius = std::max(std::fabs(xi_grid.front()), std::fabs(xi_grid.back()));
      fam.S.resize(x_grid.size() * xi_grid.size());
      for (std::size_t ix = 0; ix < x_grid.size(); ++ix)
        for (std::size_t i1 = 0; i1 < xi_grid.size(); ++i1)
          fam.at(ix, i1) = S_of(x_grid[ix], xi_grid[i1]);
      fam.tail.sign = gfqi_detail::classify_tail(fam);
      return fam;
    }
  }

  if (t == 0.0) {
    Front fr = seed_front(f, {H}, xi_grid);
    int sign = +1;
    try {
      // tail follows f when there is no dynamics
      GeneratingFamily probe;
      probe.x = {0.0};
      probe.xi = xi_grid;
      probe.S.resize(xi_grid.size());
      for (std::size_t i = 0; i < xi_grid.size(); ++i) {
        Bindings fb;
        fb.set(Var::x, xi_grid[i]);
        probe.S[i] = f.eval(fb);
      }
      sign = gfqi_detail::classify_tail(probe);
    } catch (const std::exception&) {
      sign = +1;
    }
    return family_from_front(fr, x_grid, sign);
  }

  // Generic route: shoot characteristics. Tail sign from the p-convexity of H
  // sampled over the momenta the seeds actually carry, falling back to the
  // boundary second differences.
  Front fr = seed_front(f, {H}, xi_grid);
  int steps = std::max(20, static_cast<int>(std::ceil(steps_per_unit_time * std::fabs(t))));
  fr = propagate_front(fr, H, 0, t, steps);

  int convex_votes = 0, concave_votes = 0;
  for (double pp : linspace(-3.0, 3.0, 13)) {
    double h = 1e-4;
    auto Hval = [&](double x, double p) {
      Bindings b;
      b.set(Var::x, x).set(Var::p, p).set(Var::t, 0.0);
      return H.value(b);
    };
    double d2 = Hval(0.0, pp + h) - 2 * Hval(0.0, pp) + Hval(0.0, pp - h);
    if (d2 > 1e-12) ++convex_votes;
    else if (d2 < -1e-12) ++concave_votes;
  }
  int sign;
  if (convex_votes > 0 && concave_votes == 0) sign = +1;
  else if (concave_votes > 0 && convex_votes == 0) sign = -1;
  else {
    GeneratingFamily probe = family_from_front(fr, x_grid, +1);
    sign = gfqi_detail::classify_tail(probe);
  }
  return family_from_front(fr, x_grid, sign);
}

// ---------------------------------------------------------------------------
// Minimax

namespace gfqi_detail {

inline bool masked(const GeneratingFamily& fam, std::size_t ix, std::size_t i1) {
  if (fam.endpoint_x.empty()) return false;
  return std::fabs(fam.endpoint_x[i1] - fam.x[ix]) > fam.reach_radius;
}

// Connect threshold between the two xi ends through the sublevel set of a
// single-fiber index-1 family: sorted-insertion union-find over the 2-d grid.
inline MinimaxValue connect_threshold_2d(const GeneratingFamily& fam) {
  std::size_t nx = fam.nx(), m = fam.n1();
  std::size_t n = nx * m;
  DSU dsu(n + 2);
  std::size_t left = n, right = n + 1;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return fam.S[a] < fam.S[b]; });

  std::vector<char> added(n, 0);
  for (std::size_t v : order) {
    std::size_t ix = v / m, i1 = v % m;
    added[v] = 1;
    if (i1 == 0) dsu.unite(v, left);
    if (i1 == m - 1) dsu.unite(v, right);
    if (i1 > 0 && added[v - 1]) dsu.unite(v, v - 1);
    if (i1 + 1 < m && added[v + 1]) dsu.unite(v, v + 1);
    if (ix > 0 && added[v - m]) dsu.unite(v, v - m);
    if (ix + 1 < nx && added[v + m]) dsu.unite(v, v + m);
    if (fam.periodic && nx > 2) {
      if (ix == 0 && added[(nx - 1) * m + i1]) dsu.unite(v, (nx - 1) * m + i1);
      if (ix == nx - 1 && added[i1]) dsu.unite(v, i1);
    }
    if (dsu.same(left, right)) {
      MinimaxValue mv;
      mv.value = fam.S[v];
      mv.kind = MinimaxKind::C1Global;
      mv.wx = ix;
      mv.wxi = i1;
      return mv;
    }
  }
  throw std::runtime_error("connect_threshold_2d: tails never connected");
}

// Same sweep over (x, xi1, xi2) grids, connecting the two ends of the
// negative fiber direction. `neg_is_xi2` says which fiber axis is negative.
inline MinimaxValue connect_threshold_3d(const GeneratingFamily& fam, bool neg_is_xi2) {
  std::size_t nx = fam.nx(), m1 = fam.n1(), m2 = fam.n2();
  std::size_t n = nx * m1 * m2;
  if (n > kFamilyCellCap)
    throw std::runtime_error("difference family grid too large; coarsen the grids");
  DSU dsu(n + 2);
  std::size_t left = n, right = n + 1;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return fam.S[a] < fam.S[b]; });

  auto id = [&](std::size_t ix, std::size_t i1, std::size_t i2) {
    return (ix * m1 + i1) * m2 + i2;
  };

  std::vector<char> added(n, 0);
  for (std::size_t v : order) {
    std::size_t i2 = v % m2;
    std::size_t i1 = (v / m2) % m1;
    std::size_t ix = v / (m1 * m2);
    added[v] = 1;
    std::size_t neg_index = neg_is_xi2 ? i2 : i1;
    std::size_t neg_count = neg_is_xi2 ? m2 : m1;
    if (neg_index == 0) dsu.unite(v, left);
    if (neg_index == neg_count - 1) dsu.unite(v, right);
    if (i2 > 0 && added[id(ix, i1, i2 - 1)]) dsu.unite(v, id(ix, i1, i2 - 1));
    if (i2 + 1 < m2 && added[id(ix, i1, i2 + 1)]) dsu.unite(v, id(ix, i1, i2 + 1));
    if (i1 > 0 && added[id(ix, i1 - 1, i2)]) dsu.unite(v, id(ix, i1 - 1, i2));
    if (i1 + 1 < m1 && added[id(ix, i1 + 1, i2)]) dsu.unite(v, id(ix, i1 + 1, i2));
    if (ix > 0 && added[id(ix - 1, i1, i2)]) dsu.unite(v, id(ix - 1, i1, i2));
    if (ix + 1 < nx && added[id(ix + 1, i1, i2)]) dsu.unite(v, id(ix + 1, i1, i2));
    if (fam.periodic && nx > 2) {
      if (ix == 0 && added[id(nx - 1, i1, i2)]) dsu.unite(v, id(nx - 1, i1, i2));
      if (ix == nx - 1 && added[id(0, i1, i2)]) dsu.unite(v, id(0, i1, i2));
    }
    if (dsu.same(left, right)) {
      MinimaxValue mv;
      mv.value = fam.S[v];
      mv.kind = MinimaxKind::C1Global;
      mv.wx = ix;
      mv.wxi = i1;
      mv.wxi2 = i2;
      return mv;
    }
  }
  throw std::runtime_error("connect_threshold_3d: tails never connected");
}

inline GeneratingFamily negated(const GeneratingFamily& fam) {
  GeneratingFamily out = fam;
  for (double& v : out.S) v = -v;
  out.tail.sign = -fam.tail.sign;
  if (fam.tail2_sign != 0) out.tail2_sign = -fam.tail2_sign;
  return out;
}

inline MinimaxValue global_min(const GeneratingFamily& fam) {
  MinimaxValue mv;
  mv.kind = MinimaxKind::C1Global;
  mv.value = std::numeric_limits<double>::infinity();
  for (std::size_t ix = 0; ix < fam.nx(); ++ix)
    for (std::size_t i1 = 0; i1 < fam.n1(); ++i1)
      for (std::size_t i2 = 0; i2 < fam.n2(); ++i2)
        if (fam.at(ix, i1, i2) < mv.value) {
          mv.value = fam.at(ix, i1, i2);
          mv.wx = ix;
          mv.wxi = i1;
          mv.wxi2 = i2;
        }
  return mv;
}

inline MinimaxValue max_of_fiber_min(const GeneratingFamily& fam) {
  MinimaxValue mv;
  mv.kind = MinimaxKind::CMuGlobal;
  mv.value = -std::numeric_limits<double>::infinity();
  for (std::size_t ix = 0; ix < fam.nx(); ++ix) {
    double fmin = std::numeric_limits<double>::infinity();
    std::size_t w1 = 0, w2 = 0;
    for (std::size_t i1 = 0; i1 < fam.n1(); ++i1)
      for (std::size_t i2 = 0; i2 < fam.n2(); ++i2)
        if (fam.at(ix, i1, i2) < fmin) {
          fmin = fam.at(ix, i1, i2);
          w1 = i1;
          w2 = i2;
        }
    if (fmin > mv.value) {
      mv.value = fmin;
      mv.wx = ix;
      mv.wxi = w1;
      mv.wxi2 = w2;
    }
  }
  return mv;
}

inline bool index0(const GeneratingFamily& fam) {
  if (fam.graph()) return false;
  if (!fam.product()) return fam.tail.sign > 0;
  return fam.tail.sign > 0 && fam.tail2_sign > 0;
}

}  // namespace gfqi_detail

// c(1_x, S_x): fiberwise minimax at one base point.
inline MinimaxValue minimax_c1_fiber(const GeneratingFamily& fam, std::size_t ix) {
  if (ix >= fam.nx()) throw std::invalid_argument("minimax_c1_fiber: base index out of range");
  MinimaxValue mv;
  mv.kind = MinimaxKind::C1Fiber;
  mv.wx = ix;
  if (fam.graph()) {
    mv.value = fam.at(ix);
    return mv;
  }
  if (fam.product()) throw std::invalid_argument("minimax_c1_fiber: product families unsupported");

  if (fam.tail.sign > 0) {
    // index 0: sublevel first relatively essential at the fiber minimum
    mv.value = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i1 = 0; i1 < fam.n1(); ++i1) {
      if (gfqi_detail::masked(fam, ix, i1)) continue;
      any = true;
      if (fam.at(ix, i1) < mv.value) {
        mv.value = fam.at(ix, i1);
        mv.wxi = i1;
      }
    }
    if (!any) {
      // no seed reaches this base point; fall back to the nearest endpoint
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i1 = 0; i1 < fam.n1(); ++i1) {
        double d = std::fabs(fam.endpoint_x[i1] - fam.x[ix]);
        if (d < best) {
          best = d;
          mv.wxi = i1;
        }
      }
      mv.value = fam.at(ix, mv.wxi);
    }
    return mv;
  }

  // index 1: connect-the-ends threshold; the only grid path joining the two
  // tail ends in one fiber dimension passes every node, so the threshold is
  // the fiber maximum.
  mv.value = -std::numeric_limits<double>::infinity();
  for (std::size_t i1 = 0; i1 < fam.n1(); ++i1)
    if (fam.at(ix, i1) > mv.value) {
      mv.value = fam.at(ix, i1);
      mv.wxi = i1;
    }
  return mv;
}

inline MinimaxValue minimax_c1_global(const GeneratingFamily& fam) {
  if (fam.graph()) {
    MinimaxValue mv = gfqi_detail::global_min(fam);
    mv.kind = MinimaxKind::C1Global;
    return mv;
  }
  if (!fam.product()) {
    if (fam.tail.sign > 0) return gfqi_detail::global_min(fam);
    return gfqi_detail::connect_threshold_2d(fam);
  }
  if (fam.tail.sign > 0 && fam.tail2_sign > 0) return gfqi_detail::global_min(fam);
  if (fam.tail.sign > 0 && fam.tail2_sign < 0) return gfqi_detail::connect_threshold_3d(fam, true);
  if (fam.tail.sign < 0 && fam.tail2_sign > 0) return gfqi_detail::connect_threshold_3d(fam, false);
  // all-minus product: c(1,S) = -c(mu,-S) with -S all-plus
  MinimaxValue dual = gfqi_detail::max_of_fiber_min(gfqi_detail::negated(fam));
  MinimaxValue mv;
  mv.kind = MinimaxKind::C1Global;
  mv.value = -dual.value;
  mv.wx = dual.wx;
  mv.wxi = dual.wxi;
  mv.wxi2 = dual.wxi2;
  return mv;
}

// c(mu, S) = -c(1, -S) (duality used as the algorithm), with the index-0 case
// closed directly as max over x of the fiber min.
inline MinimaxValue minimax_cmu_global(const GeneratingFamily& fam) {
  if (fam.graph()) {
    MinimaxValue mv;
    mv.kind = MinimaxKind::CMuGlobal;
    mv.value = -std::numeric_limits<double>::infinity();
    for (std::size_t ix = 0; ix < fam.nx(); ++ix)
      if (fam.at(ix) > mv.value) {
        mv.value = fam.at(ix);
        mv.wx = ix;
      }
    return mv;
  }
  if (gfqi_detail::index0(fam)) return gfqi_detail::max_of_fiber_min(fam);
  MinimaxValue dual = minimax_c1_global(gfqi_detail::negated(fam));
  MinimaxValue mv;
  mv.kind = MinimaxKind::CMuGlobal;
  mv.value = -dual.value;
  mv.wx = dual.wx;
  mv.wxi = dual.wxi;
  mv.wxi2 = dual.wxi2;
  return mv;
}

// gamma = c(mu) - c(1), clamped to >= 0 with the raw value kept.
inline GammaResult gamma_of_family(const GeneratingFamily& fam) {
  GammaResult g;
  g.raw = minimax_cmu_global(fam).value - minimax_c1_global(fam).value;
  g.value = std::max(0.0, g.raw);
  return g;
}

// gamma of the difference family S1(x,xi1) - S2(x,xi2).
inline GammaResult gamma_difference(const GeneratingFamily& fam1, const GeneratingFamily& fam2) {
  if (fam1.nx() != fam2.nx())
    throw std::invalid_argument("gamma_difference: base grids differ");
  for (std::size_t i = 0; i < fam1.nx(); ++i)
    if (fam1.x[i] != fam2.x[i])
      throw std::invalid_argument("gamma_difference: base grids differ");

  // graphs: oscillation of the difference
  if (fam1.graph() && fam2.graph()) {
    std::vector<double> d(fam1.nx());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = fam1.at(i) - fam2.at(i);
    GammaResult g;
    g.raw = oscillation(d);
    g.value = std::max(0.0, g.raw);
    return g;
  }

  // one side a graph: subtract it pointwise, single fiber stays
  if (fam2.graph()) {
    GeneratingFamily d = fam1;
    d.endpoint_x.clear();
    d.reach_radius = std::numeric_limits<double>::infinity();
    for (std::size_t ix = 0; ix < d.nx(); ++ix)
      for (std::size_t i1 = 0; i1 < d.n1(); ++i1) d.at(ix, i1) -= fam2.at(ix);
    return gamma_of_family(d);
  }
  if (fam1.graph()) {
    GeneratingFamily d = fam2;
    d.endpoint_x.clear();
    d.reach_radius = std::numeric_limits<double>::infinity();
    for (std::size_t ix = 0; ix < d.nx(); ++ix)
      for (std::size_t i1 = 0; i1 < d.n1(); ++i1) d.at(ix, i1) = fam1.at(ix) - d.at(ix, i1);
    d.tail.sign = -fam2.tail.sign;
    return gamma_of_family(d);
  }

  // gamma is symmetric in its arguments; swap so the product signature avoids
  // the all-minus case
  if (fam1.tail.sign < 0 && fam2.tail.sign > 0) return gamma_difference(fam2, fam1);

  std::size_t cells = fam1.nx() * fam1.n1() * fam2.n1();
  if (cells > kFamilyCellCap)
    throw std::runtime_error("gamma_difference: product grid too large; coarsen the grids");

  GeneratingFamily d;
  d.x = fam1.x;
  d.periodic = fam1.periodic;
  d.xi = fam1.xi;
  d.xi2 = fam2.xi;
  d.tail.sign = fam1.tail.sign;
  d.tail.match_radius = fam1.tail.match_radius;
  d.tail2_sign = -fam2.tail.sign;
  d.S.resize(cells);
  for (std::size_t ix = 0; ix < d.nx(); ++ix)
    for (std::size_t i1 = 0; i1 < d.n1(); ++i1)
      for (std::size_t i2 = 0; i2 < d.n2(); ++i2)
        d.at(ix, i1, i2) = fam1.at(ix, i1) - fam2.at(ix, i2);
  return gamma_of_family(d);
}

struct GammaTildeEstimate {
  double value = 0.0;
  int used = 0;
  int skipped = 0;
  std::vector<std::string> warnings;
};

// Lower bound for gamma-tilde of the time-T map of H: max over the sample
// Lagrangians (graphs df) of gamma(psi(L) - L). Samples whose propagated
// front fails to be a graph over the base grid are skipped with a warning.
inline GammaTildeEstimate gamma_tilde_lower_bound(const Hamiltonian& H,
                                                  const std::vector<Expression>& sample_fs,
                                                  double T, const std::vector<double>& x_grid,
                                                  int steps = 200) {
  if (x_grid.size() < 2) throw std::invalid_argument("gamma_tilde_lower_bound: base grid too small");
  GammaTildeEstimate est;

  // seeds extend past the base grid so the propagated graph still covers it
  double span = x_grid.back() - x_grid.front();
  double margin = 0.5 * span + 1.0;
  std::vector<double> seeds =
      linspace(x_grid.front() - margin, x_grid.back() + margin, static_cast<int>(x_grid.size() * 2));

  for (std::size_t k = 0; k < sample_fs.size(); ++k) {
    const Expression& f = sample_fs[k];
    Front fr = seed_front(f, {H}, seeds);
    if (T != 0.0) fr = propagate_front(fr, H, 0, T, steps);

    auto branches = branch_decompose(fr, x_grid);
    bool graph = true;
    std::vector<double> g(x_grid.size());
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
      if (branches[i].size() != 1) {
        graph = false;
        break;
      }
      g[i] = branches[i][0].action;
    }
    if (!graph) {
      ++est.skipped;
      est.warnings.push_back("sample " + std::to_string(k) +
                             ": propagated front is not a graph over the base grid; skipped");
      continue;
    }
    std::vector<double> f0(x_grid.size());
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
      Bindings b;
      b.set(Var::x, x_grid[i]);
      f0[i] = f.eval(b);
    }
    GammaResult gr = gamma_difference(graph_family(x_grid, g), graph_family(x_grid, f0));
    est.value = std::max(est.value, gr.value);
    ++est.used;
  }
  return est;
}

}  // namespace hjvar
