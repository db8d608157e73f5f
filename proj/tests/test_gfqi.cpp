#include <doctest.h>

#include <cmath>
#include <random>

#include <hjvar/gfqi.hpp>

using namespace hjvar;

TEST_CASE("fiberwise minimax on hand-solvable families") {
  auto xg = linspace(-1, 1, 5);
  auto xi = linspace(-6, 6, 2401);

  GeneratingFamily neg = make_family(xg, xi, [](double, double q) { return -q * q; }, -1);
  CHECK(minimax_c1_fiber(neg, 2).value == doctest::Approx(0.0).epsilon(1e-12));

  GeneratingFamily bump = make_family(
      xg, xi, [](double, double q) { return -q * q + 2 * std::exp(-q * q); }, -1);
  CHECK(std::fabs(minimax_c1_fiber(bump, 2).value - 2.0) <= 1e-3);
  CHECK(std::fabs(minimax_c1_global(bump).value - 2.0) <= 1e-3);

  GeneratingFamily pos = make_family(xg, xi, [](double, double q) { return q * q; }, +1);
  CHECK(minimax_c1_fiber(pos, 2).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("global minimax of S = f(x) - xi^2") {
  auto xg = linspace(-M_PI, M_PI, 257);
  auto xi = linspace(-4, 4, 401);
  GeneratingFamily fam = make_family(
      xg, xi, [](double x, double q) { return std::sin(3 * x) + 0.3 * x - q * q; }, -1);
  double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
  for (double x : xg) {
    double v = std::sin(3 * x) + 0.3 * x;
    fmin = std::min(fmin, v);
    fmax = std::max(fmax, v);
  }
  CHECK(std::fabs(minimax_c1_global(fam).value - fmin) <= 1e-6);
  CHECK(std::fabs(minimax_cmu_global(fam).value - fmax) <= 1e-6);
  CHECK(std::fabs(gamma_of_family(fam).value - (fmax - fmin)) <= 1e-6);
}

TEST_CASE("x-independent families have gamma zero; shifts act on the filtration") {
  auto xg = linspace(-1, 1, 33);
  auto xi = linspace(-5, 5, 501);
  GeneratingFamily fam = make_family(
      xg, xi, [](double, double q) { return q * q + std::cos(q); }, +1);
  double c1 = minimax_c1_global(fam).value;
  double cmu = minimax_cmu_global(fam).value;
  CHECK(std::fabs(cmu - c1) <= 1e-9);
  CHECK(gamma_of_family(fam).value <= 1e-9);

  GeneratingFamily shifted = make_family(
      xg, xi, [](double, double q) { return q * q + std::cos(q) + 0.7; }, +1);
  CHECK(minimax_c1_global(shifted).value == doctest::Approx(c1 + 0.7).epsilon(1e-12));
  CHECK(minimax_cmu_global(shifted).value == doctest::Approx(cmu + 0.7).epsilon(1e-12));
}

TEST_CASE("duality and monotonicity on random families") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> amp(-1, 1);
  auto xg = linspace(-1, 1, 17);
  auto xi = linspace(-3, 3, 121);
  for (int trial = 0; trial < 50; ++trial) {
    double a = amp(rng), b = amp(rng), c = amp(rng);
    int sign = trial % 2 == 0 ? +1 : -1;
    auto fn = [&](double x, double q) {
      return sign * q * q + a * std::sin(3 * q + b * x) + c * x * std::exp(-q * q);
    };
    GeneratingFamily fam = make_family(xg, xi, fn, sign);
    double cmu = minimax_cmu_global(fam).value;
    double dual = -minimax_c1_global(gfqi_detail::negated(fam)).value;
    CHECK(cmu == dual);

    auto fn_up = [&](double x, double q) { return fn(x, q) + 0.2 * (1 + std::cos(x * q)); };
    GeneratingFamily bigger = make_family(xg, xi, fn_up, sign);
    CHECK(minimax_c1_global(fam).value <= minimax_c1_global(bigger).value + 1e-12);
    CHECK(minimax_cmu_global(fam).value <= minimax_cmu_global(bigger).value + 1e-12);
  }
}

TEST_CASE("gamma on graph Lagrangians") {
  auto xg = linspace(-M_PI, M_PI, 513);
  std::vector<double> s(xg.size()), z(xg.size(), 0.0);
  for (std::size_t i = 0; i < xg.size(); ++i) s[i] = std::sin(xg[i]);
  GeneratingFamily gsin = graph_family(xg, s, true);
  GeneratingFamily gzero = graph_family(xg, z, true);

  CHECK(std::fabs(gamma_of_family(gsin).value - 2.0) <= 2e-3);
  CHECK(gamma_of_family(gzero).value == 0.0);
  CHECK(gamma_difference(gsin, gsin).value == 0.0);
  CHECK(std::fabs(gamma_difference(gsin, gzero).value - 2.0) <= 2e-3);

  std::vector<double> co(xg.size());
  for (std::size_t i = 0; i < xg.size(); ++i) co[i] = std::cos(xg[i]);
  GeneratingFamily gcos = graph_family(xg, co, true);
  CHECK(std::fabs(gamma_difference(gsin, gcos).value - 2 * std::sqrt(2.0)) <= 5e-3);
}

TEST_CASE("triangle inequality on 20 random graph triples") {
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> amp(-1.5, 1.5);
  auto xg = linspace(-M_PI, M_PI, 129);
  auto rand_graph = [&]() {
    double a = amp(rng), b = amp(rng), k = std::ceil(std::fabs(amp(rng)) * 2) + 1;
    std::vector<double> v(xg.size());
    for (std::size_t i = 0; i < xg.size(); ++i) v[i] = a * std::sin(k * xg[i]) + b * xg[i] * xg[i] / 3;
    return graph_family(xg, v, true);
  };
  for (int trial = 0; trial < 20; ++trial) {
    GeneratingFamily L1 = rand_graph(), L2 = rand_graph(), L3 = rand_graph();
    double d13 = gamma_difference(L1, L3).value;
    double d12 = gamma_difference(L1, L2).value;
    double d23 = gamma_difference(L2, L3).value;
    CHECK(d13 <= d12 + d23 + 1e-6);
    CHECK(d12 >= 0.0);
  }
}

TEST_CASE("mixed graph/family gamma difference") {
  auto xg = linspace(-1, 1, 65);
  auto xi = linspace(-4, 4, 161);
  std::vector<double> z(xg.size(), 0.0);
  GeneratingFamily gzero = graph_family(xg, z);
  // family generating the graph of d(x^2/2): S(x, q) = x^2/2 + (q - x)^2
  GeneratingFamily fam = make_family(
      xg, xi, [](double x, double q) { return x * x / 2 + (q - x) * (q - x); }, +1);
  double g = gamma_difference(fam, gzero).value;
  CHECK(std::fabs(g - 0.5) <= 5e-3);  // osc of x^2/2 on [-1,1]
  // symmetric in its arguments
  CHECK(std::fabs(gamma_difference(gzero, fam).value - g) <= 5e-3);
}

TEST_CASE("discrete family from the quadratic-in-p route") {
  Expression fq = Expression::parse("x^2/2");
  Hamiltonian free = Hamiltonian::parse("p^2/2");
  auto xg = linspace(-1, 1, 41);
  GeneratingFamily fam = build_discrete_family(fq, free, 1.0, 1, xg, {-6, 6, 1201}, 100);
  CHECK(fam.tail.sign == +1);
  for (std::size_t ix = 0; ix < fam.nx(); ++ix) {
    double x = fam.x[ix];
    // S(x, q) = q^2/2 + (x - q)^2 / 2, fiber min = x^2/4
    CHECK(std::fabs(minimax_c1_fiber(fam, ix).value - x * x / 4) <= 1e-4);
  }

  Expression f0 = Expression::parse("0");
  Hamiltonian conc = Hamiltonian::parse("0 - p^2/4");
  GeneratingFamily fam2 = build_discrete_family(f0, conc, 1.0, 1, xg, {-6, 6, 1201}, 100);
  CHECK(fam2.tail.sign == -1);
  for (std::size_t ix = 0; ix < fam2.nx(); ix += 8)
    CHECK(std::fabs(minimax_c1_fiber(fam2, ix).value) <= 1e-4);

  CHECK_THROWS_AS(build_discrete_family(fq, free, 1.0, 2, xg, {-6, 6, 1201}, 100),
                  std::invalid_argument);
}

TEST_CASE("discrete family from the generic characteristic route") {
  // nonquadratic convex H: the shot-characteristic family must still select
  // values close to the Lax-Oleinik solution on a smooth window
  Expression f = Expression::parse("sin(x)");
  Hamiltonian H = Hamiltonian::parse("sqrt(1 + p^2)");
  auto xg = linspace(-1, 1, 21);
  GeneratingFamily fam = build_discrete_family(f, H, 0.25, 1, xg, {-4, 4, 801}, 100);
  CHECK(fam.tail.sign == +1);
  // smooth pre-shock regime: value matches the characteristic action at x
  for (std::size_t ix = 5; ix < 16; ++ix) {
    double v = minimax_c1_fiber(fam, ix).value;
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("gamma tilde lower bound estimator") {
  auto xg = linspace(-M_PI, M_PI, 257);
  std::vector<Expression> fs = {Expression::parse("0"), Expression::parse("x^2/8"),
                                Expression::parse("sin(x)/2")};

  // H = 0: exact value is 0; residual is the O(h^2) seed-interpolation error
  GammaTildeEstimate e0 = gamma_tilde_lower_bound(Hamiltonian::parse("0"), fs, 1.0, xg);
  CHECK(e0.value <= 5e-4);

  for (double eps : {0.1, 0.5, 1.0}) {
    Hamiltonian H = Hamiltonian::parse(std::to_string(eps) + "*sin(x)");
    GammaTildeEstimate est = gamma_tilde_lower_bound(H, fs, 1.0, xg);
    CHECK(est.value >= 2 * eps - 5e-3);
    CHECK(est.value <= 2 * eps + 5e-3);
    CHECK(est.used > 0);
  }

  // x-only Hamiltonian: estimate approaches T * osc(g)
  Hamiltonian G = Hamiltonian::parse("cos(2*x)/2");
  GammaTildeEstimate eg = gamma_tilde_lower_bound(G, fs, 0.7, xg);
  CHECK(std::fabs(eg.value - 0.7 * 1.0) <= 5e-3);
}

TEST_CASE("grid refinement moves c by at most the cell oscillation") {
  auto xi_c = linspace(-4, 4, 201);
  auto xi_f = linspace(-4, 4, 401);
  auto xg_c = linspace(-M_PI, M_PI, 129);
  auto xg_f = linspace(-M_PI, M_PI, 257);
  auto fn = [](double x, double q) { return std::sin(x) - q * q + std::exp(-q * q); };
  GeneratingFamily coarse = make_family(xg_c, xi_c, fn, -1, true);
  GeneratingFamily fine = make_family(xg_f, xi_f, fn, -1, true);
  CHECK(std::fabs(minimax_c1_global(coarse).value - minimax_c1_global(fine).value) <= 2e-2);
  CHECK(std::fabs(minimax_cmu_global(coarse).value - minimax_cmu_global(fine).value) <= 2e-2);
}
