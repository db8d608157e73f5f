#include <doctest.h>

#include <cmath>

#include <hjvar/front.hpp>

using namespace hjvar;

TEST_CASE("seed front fields") {
  auto seeds = linspace(-2, 2, 41);

  Expression f0 = Expression::parse("0");
  Hamiltonian free = Hamiltonian::parse("p^2/2");
  Front a = seed_front(f0, {free}, seeds);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].x == seeds[i]);
    CHECK(a.points[i].p == 0.0);
    CHECK(a.points[i].action == 0.0);
    CHECK(a.points[i].tau[0] == 0.0);
  }

  Expression fq = Expression::parse("x^2/2");
  Front b = seed_front(fq, {free}, seeds);
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    CHECK(b.points[i].p == doctest::Approx(seeds[i]).epsilon(1e-15));
    CHECK(b.points[i].action == doctest::Approx(seeds[i] * seeds[i] / 2).epsilon(1e-15));
    CHECK(b.points[i].tau[0] == doctest::Approx(-seeds[i] * seeds[i] / 2).epsilon(1e-15));
  }

  Hamiltonian osc = Hamiltonian::parse("-x^2 - p^2/4");
  Front c = seed_front(f0, {osc}, seeds);
  for (std::size_t i = 0; i < c.points.size(); ++i)
    CHECK(c.points[i].tau[0] == doctest::Approx(seeds[i] * seeds[i]).epsilon(1e-15));

  CHECK_THROWS_AS(seed_front(f0, {free}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(seed_front(f0, {free}, {1.0, 1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("propagation: zero Hamiltonian and the Hopf case") {
  auto seeds = linspace(-2, 2, 81);
  Expression fq = Expression::parse("x^2/2");
  Hamiltonian zero = Hamiltonian::parse("0");
  Front fr = seed_front(fq, {zero}, seeds);
  Front moved = propagate_front(fr, zero, 0, 1.0, 100);
  CHECK(moved.times[0] == 1.0);
  for (std::size_t i = 0; i < fr.points.size(); ++i) {
    CHECK(std::fabs(moved.points[i].x - fr.points[i].x) <= 1e-12);
    CHECK(std::fabs(moved.points[i].p - fr.points[i].p) <= 1e-12);
    CHECK(std::fabs(moved.points[i].action - fr.points[i].action) <= 1e-12);
  }

  Hamiltonian free = Hamiltonian::parse("p^2/2");
  Front hopf = propagate_front(seed_front(fq, {free}, seeds), free, 0, 1.0, 100);
  for (std::size_t i = 0; i < hopf.points.size(); ++i) {
    double x0 = seeds[i];
    CHECK(std::fabs(hopf.points[i].x - 2 * x0) <= 1e-10);
    CHECK(std::fabs(hopf.points[i].p - x0) <= 1e-10);
    CHECK(std::fabs(hopf.points[i].action - x0 * x0) <= 1e-8);  // u(x) = x^2/4 on the graph
  }
}

TEST_CASE("the concave oscillator front carries u = tan(t) x^2") {
  auto seeds = linspace(-2, 2, 101);
  Expression f0 = Expression::parse("0");
  Hamiltonian osc = Hamiltonian::parse("-x^2 - p^2/4");
  for (double t : {0.4, 1.0, 1.3}) {
    Front fr = propagate_front(seed_front(f0, {osc}, seeds), osc, 0, t, 400);
    for (std::size_t i = 0; i < fr.points.size(); ++i) {
      double a = seeds[i];
      CHECK(std::fabs(fr.points[i].x - a * std::cos(t)) <= 1e-6);
      CHECK(std::fabs(fr.points[i].p - 2 * a * std::sin(t)) <= 1e-6);
      CHECK(std::fabs(fr.points[i].action - a * a * std::sin(t) * std::cos(t)) <= 1e-5);
    }
  }
}

TEST_CASE("action transport converges at second order") {
  auto seeds = linspace(-1, 1, 21);
  Expression f0 = Expression::parse("0");
  Hamiltonian osc = Hamiltonian::parse("-x^2 - p^2/4");
  double t = 1.0;
  auto sup_err = [&](int steps) {
    Front fr = propagate_front(seed_front(f0, {osc}, seeds), osc, 0, t, steps);
    double e = 0.0;
    for (std::size_t i = 0; i < fr.points.size(); ++i) {
      double a = seeds[i];
      e = std::max(e, std::fabs(fr.points[i].action - a * a * std::sin(t) * std::cos(t)));
    }
    return e;
  };
  double e1 = sup_err(50), e2 = sup_err(100);
  CHECK(e2 * 3.5 <= e1 + 1e-14);
}

TEST_CASE("multi-time composition") {
  auto seeds = linspace(-3, 3, 121);
  Expression fq = Expression::parse("x^2/2");
  Hamiltonian h1 = Hamiltonian::parse("p^2/2");
  Hamiltonian h2 = Hamiltonian::parse("p^2/2");

  Front f12 = multi_time_front(fq, h1, h2, {1, 2}, 0.6, 0.9, seeds, 100);
  Front f21 = multi_time_front(fq, h1, h2, {2, 1}, 0.6, 0.9, seeds, 100);
  CHECK(f12.times[0] == doctest::Approx(0.6));
  CHECK(f12.times[1] == doctest::Approx(0.9));
  for (std::size_t i = 0; i < f12.points.size(); ++i) {
    CHECK(std::fabs(f12.points[i].x - f21.points[i].x) <= 1e-6);
    CHECK(std::fabs(f12.points[i].p - f21.points[i].p) <= 1e-6);
    CHECK(std::fabs(f12.points[i].action - f21.points[i].action) <= 1e-6);
    // Hopf: u = x^2 / (2 (1 + t1 + t2)) along the graph
    double x = f12.points[i].x;
    CHECK(std::fabs(f12.points[i].action - x * x / (2 * (1 + 0.6 + 0.9))) <= 1e-4);
  }

  Front f00 = multi_time_front(fq, h1, h2, {1, 2}, 0.0, 0.0, seeds, 100);
  Front seedfr = seed_front(fq, {h1, h2}, seeds);
  for (std::size_t i = 0; i < f00.points.size(); ++i) {
    CHECK(f00.points[i].x == seedfr.points[i].x);
    CHECK(f00.points[i].p == seedfr.points[i].p);
    CHECK(f00.points[i].action == seedfr.points[i].action);
  }
}

TEST_CASE("branch decomposition") {
  auto seeds = linspace(-2, 2, 201);
  Hamiltonian free = Hamiltonian::parse("p^2/2");

  // pre-caustic graph: one branch everywhere strictly inside
  Expression fq = Expression::parse("x^2/2");
  Front graph = propagate_front(seed_front(fq, {free}, seeds), free, 0, 0.3, 50);
  auto single = branch_decompose(graph, linspace(-1, 1, 41));
  for (const auto& br : single) CHECK(br.size() == 1);

  // f = -x^4 past the first caustic: 3 branches inside the swallowtail
  Expression fquart = Expression::parse("0 - x^4");
  Front swallow = propagate_front(seed_front(fquart, {free}, seeds), free, 0, 0.5, 100);
  auto multi = branch_decompose(swallow, {0.0, 3.5});
  CHECK(multi[0].size() == 3);
  CHECK(multi[1].size() == 1);
}

TEST_CASE("verticality detection") {
  auto seeds = linspace(-2, 2, 101);
  Expression f0 = Expression::parse("0");

  Hamiltonian zero = Hamiltonian::parse("0");
  Front still = propagate_front(seed_front(f0, {zero}, seeds), zero, 0, 1.0, 20);
  auto r0 = detect_verticality(still);
  CHECK_FALSE(r0.vertical);
  CHECK(r0.collapse_ratio == doctest::Approx(1.0).epsilon(1e-9));

  Hamiltonian osc = Hamiltonian::parse("-x^2 - p^2/4");
  Front near = propagate_front(seed_front(f0, {osc}, seeds), osc, 0, 1.5, 300);
  auto r1 = detect_verticality(near);
  CHECK_FALSE(r1.vertical);
  CHECK(r1.collapse_ratio == doctest::Approx(std::cos(1.5)).epsilon(1e-3));

  Front collapsed = propagate_front(seed_front(f0, {osc}, seeds), osc, 0, 1.5707, 400);
  CHECK(detect_verticality(collapsed).vertical);
  auto empty = branch_decompose(collapsed, {0.5, -0.7});
  CHECK(empty[0].empty());
  CHECK(empty[1].empty());

  Expression fq = Expression::parse("x^2/2");
  Hamiltonian free = Hamiltonian::parse("p^2/2");
  Front spread = propagate_front(seed_front(fq, {free}, seeds), free, 0, 2.0, 100);
  CHECK_FALSE(detect_verticality(spread).vertical);
}

TEST_CASE("fold markers and refinement") {
  auto seeds = linspace(-2, 2, 101);
  Expression fquart = Expression::parse("0 - x^4");
  Hamiltonian free = Hamiltonian::parse("p^2/2");
  Front folded = propagate_front(seed_front(fquart, {free}, seeds), free, 0, 0.5, 100);
  CHECK(folded.fold_markers.size() == 2);

  Front refined = refined_slice(fquart, free, 0.5, seeds, 100, 3);
  CHECK(refined.points.size() > folded.points.size());
  CHECK(refined.base_seed_spacing == doctest::Approx(folded.base_seed_spacing));
  // seed_x stays strictly increasing after refinement
  for (std::size_t i = 0; i + 1 < refined.points.size(); ++i)
    CHECK(refined.points[i].seed_x < refined.points[i + 1].seed_x);
}
