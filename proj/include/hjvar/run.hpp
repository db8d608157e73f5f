#pragma once

// Command dispatch for the hjvar tool.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "cli.hpp"

namespace hjvar {

namespace run_detail {

inline const Hamiltonian slot_ham(const ProblemSpec& spec, int slot) {
  for (std::size_t i = 0; i < spec.hamiltonians.size(); ++i)
    if (spec.hamiltonians[i].slot == slot) return spec.ham(i);
  throw SpecError("spec has no Hamiltonian for slot " + std::to_string(slot));
}

inline int fail_validation(const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}

// ---- selfcheck battery ----------------------------------------------------

struct CheckTable {
  bool all_ok = true;
  void row(std::ostream& out, const std::string& name, bool ok) {
    out << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    all_ok = all_ok && ok;
  }
};

inline bool selfcheck(std::ostream& out) {
  CheckTable tab;
  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> unit(-1.5, 1.5);

  {  // expression round-trip and derivative vs central differences
    bool ok = true;
    for (const char* src : {"p^2/2 + cos(x)", "-x^2 - p^2/4", "exp(p)*sin(x) - t*x",
                            "sqrt(1 + p^2)", "x^3/3 - x*p + t^2"}) {
      Expression e = Expression::parse(src);
      std::string s1 = e.str();
      std::string s2 = Expression::parse(s1).str();
      ok = ok && (s1 == s2);
      for (Var v : {Var::x, Var::p, Var::t}) {
        if (!e.depends_on(v)) continue;
        Expression d = e.derivative(v);
        for (int k = 0; k < 20; ++k) {
          Bindings b;
          b.set(Var::x, unit(rng)).set(Var::p, unit(rng)).set(Var::t, unit(rng));
          double c = b.get(v).value_or(0.0);
          double h = fd_step(c);
          Bindings bp = b, bm = b;
          bp.set(v, c + h);
          bm.set(v, c - h);
          double fd = (e.eval(bp) - e.eval(bm)) / (2 * h);
          double sym = d.eval(b);
          ok = ok && std::fabs(sym - fd) <= 1e-6 * (1.0 + std::fabs(sym));
        }
      }
    }
    tab.row(out, "expr: print round-trip and symbolic vs central differences", ok);
  }

  {  // bracket antisymmetry + Jacobi + timedep consistency
    Hamiltonian A = Hamiltonian::parse("x^2*p + sin(x)");
    Hamiltonian B = Hamiltonian::parse("p^2/2 + cos(x)*p");
    Hamiltonian C = Hamiltonian::parse("x*p^2 - x^3/3");
    bool anti = true, jacobi = true, consist = true;
    for (int k = 0; k < 100; ++k) {
      PhasePoint z{unit(rng), unit(rng)};
      anti = anti && poisson_bracket(A, B, z) == -poisson_bracket(B, A, z);
      consist = consist && timedep_bracket(A, B, z, 0.3) == poisson_bracket(A, B, z, 0.3);
    }
    auto pb = [](const Hamiltonian& P, const Hamiltonian& Q) {
      Expression e = P.expression().derivative(Var::x) * Q.expression().derivative(Var::p) -
                     P.expression().derivative(Var::p) * Q.expression().derivative(Var::x);
      return Hamiltonian(e);
    };
    Hamiltonian AB = pb(A, B), BC = pb(B, C), CA = pb(C, A);
    for (int k = 0; k < 30; ++k) {
      PhasePoint z{unit(rng), unit(rng)};
      double s = poisson_bracket(A, BC, z) + poisson_bracket(B, CA, z) + poisson_bracket(C, AB, z);
      jacobi = jacobi && std::fabs(s) <= 1e-6;
    }
    tab.row(out, "ham: Poisson antisymmetry exact on 100 random points", anti);
    tab.row(out, "ham: Jacobi identity <= 1e-6 on a polynomial triple", jacobi);
    tab.row(out, "ham: timedep bracket equals Poisson for autonomous operands", consist);
  }

  {  // rk4 order on the harmonic oscillator
    Hamiltonian H = Hamiltonian::parse("(x^2 + p^2)/2");
    auto err = [&](int steps) {
      Trajectory tr = integrate(H, {1.0, 0.0}, 0.0, 2.0, steps);
      double cx = std::cos(2.0), cp = -std::sin(2.0);
      return std::hypot(tr.end().x - cx, tr.end().p - cp);
    };
    double e1 = err(50), e2 = err(100);
    double order = std::log2(e1 / e2);
    tab.row(out, "flow: rk4 order exponent in [3.7, 4.3]", order > 3.7 && order < 4.3);

    Trajectory a = integrate(H, {1.0, 0.0}, 0.0, 0.8, 80);
    Trajectory b = integrate(H, a.end(), 0.8, 2.0, 120);
    Trajectory c = integrate(H, {1.0, 0.0}, 0.0, 2.0, 200);
    bool comp = std::hypot(b.end().x - c.end().x, b.end().p - c.end().p) <= 1e-9;
    tab.row(out, "flow: composition over [0,a]+[a,b] matches [0,b] within 1e-9", comp);
  }

  {  // stormer-verlet step map has unit Jacobian determinant
    Hamiltonian H = Hamiltonian::parse("p^2/2 + x^4/4");
    double h = 0.05, d = 1e-6;
    auto step = [&](PhasePoint z) {
      Trajectory tr = integrate(H, z, 0.0, h, 1, Scheme::StormerVerlet);
      return tr.end();
    };
    PhasePoint z0{0.4, -0.3};
    PhasePoint fx1 = step({z0.x + d, z0.p}), fx0 = step({z0.x - d, z0.p});
    PhasePoint fp1 = step({z0.x, z0.p + d}), fp0 = step({z0.x, z0.p - d});
    double j11 = (fx1.x - fx0.x) / (2 * d), j12 = (fp1.x - fp0.x) / (2 * d);
    double j21 = (fx1.p - fx0.p) / (2 * d), j22 = (fp1.p - fp0.p) / (2 * d);
    double det = j11 * j22 - j12 * j21;
    tab.row(out, "flow: stormer-verlet step determinant 1 within 1e-8", std::fabs(det - 1.0) <= 1e-8);
  }

  {  // front: t=0 propagate is the identity
    Expression f = Expression::parse("x^2/2");
    Hamiltonian H = Hamiltonian::parse("p^2/2");
    Front fr = seed_front(f, {H}, linspace(-2, 2, 41));
    Front fr0 = propagate_front(fr, H, 0, 0.0, 1);
    bool ok = true;
    for (std::size_t i = 0; i < fr.points.size(); ++i)
      ok = ok && fr.points[i].x == fr0.points[i].x && fr.points[i].p == fr0.points[i].p &&
           fr.points[i].action == fr0.points[i].action;
    tab.row(out, "front: zero-time propagation is the identity", ok);
  }

  {  // gfqi: duality, gamma axioms on graphs, gamma(graph d sin) = 2
    auto xg = linspace(-M_PI, M_PI, 257);
    std::vector<double> s1(xg.size()), s2(xg.size()), zero(xg.size(), 0.0);
    for (std::size_t i = 0; i < xg.size(); ++i) {
      s1[i] = std::sin(xg[i]);
      s2[i] = std::cos(xg[i]);
    }
    GeneratingFamily g1 = graph_family(xg, s1, true), g2 = graph_family(xg, s2, true);
    GeneratingFamily z = graph_family(xg, zero, true);
    double gs = gamma_difference(g1, z).value;
    bool gsin = std::fabs(gs - 2.0) <= 2e-2;
    double t12 = gamma_difference(g1, g2).value;
    bool tri = t12 <= gamma_difference(g1, z).value + gamma_difference(z, g2).value + 1e-9;
    bool self = gamma_difference(g1, g1).value == 0.0;

    auto xi = linspace(-4.0, 4.0, 201);
    GeneratingFamily fam = make_family(xg, xi, [&](double x, double q) {
      return std::sin(x) - q * q;
    }, -1, true);
    double c1 = minimax_c1_global(fam).value;
    double cmu = minimax_cmu_global(fam).value;
    double c1n = minimax_c1_global(gfqi_detail::negated(fam)).value;
    bool dual = cmu == -c1n;
    bool fiber_vals = std::fabs(c1 - (-1.0)) < 2e-2 && std::fabs(cmu - 1.0) < 2e-2;
    tab.row(out, "gfqi: gamma(graph d sin) = 2 within 2e-2", gsin);
    tab.row(out, "gfqi: triangle inequality on graphs", tri);
    tab.row(out, "gfqi: gamma(L - L) = 0 exactly", self);
    tab.row(out, "gfqi: duality c(mu,S) = -c(1,-S) by construction", dual);
    tab.row(out, "gfqi: c(1), c(mu) of sin(x) - xi^2 match min/max of sin", fiber_vals);
  }

  {  // csv determinism
    SolutionField field;
    field.t1 = {0.0, 0.5};
    field.x = {-1.0, 0.0, 1.0};
    field.u = {1, 2, 3, 4, 5, std::numeric_limits<double>::quiet_NaN()};
    field.branches = {1, 1, 1, 1, 1, 0};
    std::ostringstream a, b;
    emit_csv(field, a);
    emit_csv(field, b);
    tab.row(out, "cli: CSV emission bit-identical across runs", a.str() == b.str());
  }

  return tab.all_ok;
}

}  // namespace run_detail

inline int run_command(int argc, const char* const* argv) {
  CLI::App app{"variational solutions of single- and multi-time Hamilton-Jacobi equations"};
  app.require_subcommand(1);

  std::string spec_path, out_path;
  bool allow_blowup = false;
  int nt_override = 0, nx_override = 0, spu_override = 0;
  double t_max_override = 0.0;
  std::string order_str = "1,2";
  double x0 = 0.0, p0 = 1.0, u0 = 0.0;
  std::string family_csv;

  auto add_common = [&](CLI::App* cmd, bool needs_spec = true) {
    auto* opt = cmd->add_option("--spec", spec_path, "problem spec JSON file");
    if (needs_spec) opt->required();
    cmd->add_option("--out", out_path, "output path (default stdout)");
    cmd->add_option("--nt", nt_override, "override number of time slices");
    cmd->add_option("--nx", nx_override, "override number of space nodes");
    cmd->add_option("--t-max", t_max_override, "override time horizon");
    cmd->add_option("--steps-per-unit-time", spu_override, "override integrator resolution");
    cmd->add_flag("--allow-blowup", allow_blowup, "emit NaN past the blowup horizon instead of failing");
  };

  auto* solve_cmd = app.add_subcommand("solve", "single-time solve, CSV (t,x,u,branches)");
  add_common(solve_cmd);
  auto* multitime_cmd = app.add_subcommand("multitime", "two-time solve, CSV (t1,t2,x,u,branches)");
  add_common(multitime_cmd);
  multitime_cmd->add_option("--order", order_str, "solving order: 1,2 or 2,1");
  auto* flow_cmd = app.add_subcommand("flow", "integrate one trajectory, CSV (t,x,p[,u])");
  add_common(flow_cmd);
  flow_cmd->add_option("--x0", x0, "initial x");
  flow_cmd->add_option("--p0", p0, "initial p");
  flow_cmd->add_option("--u0", u0, "initial u (contact flows)");
  auto* front_cmd = app.add_subcommand("front", "propagate the front to t_max, CSV per point");
  add_common(front_cmd);
  auto* bracket_cmd = app.add_subcommand("bracket", "bracket sup-norms over the spec box");
  add_common(bracket_cmd);
  auto* gamma_cmd = app.add_subcommand("gamma", "c(1), c(mu), gamma of the discrete family");
  add_common(gamma_cmd);
  gamma_cmd->add_option("--family-csv", family_csv, "also dump the family matrix as CSV");
  auto* disc_cmd = app.add_subcommand("discrepancy", "order-discrepancy table, CSV");
  add_common(disc_cmd);
  auto* selfcheck_cmd = app.add_subcommand("selfcheck", "run the module invariant suite");
  (void)selfcheck_cmd;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (selfcheck_cmd->parsed()) return run_detail::selfcheck(std::cout) ? 0 : 1;

    ProblemSpec spec = parse_problem(spec_path);
    if (!out_path.empty()) spec.out_path = out_path;
    if (nt_override > 0) spec.nt = nt_override;
    if (nx_override > 0) spec.grids.nx = nx_override;
    if (t_max_override > 0) spec.t_max = t_max_override;
    if (spu_override > 0) spec.grids.steps_per_unit_time = spu_override;
    if (allow_blowup) spec.allow_blowup = true;

    if (solve_cmd->parsed()) {
      Expression f = spec.f_expr();
      Hamiltonian H = run_detail::slot_ham(spec, 1);
      SolutionField field;
      if (spec.method == "variational") {
        field = variational_solution(f, H, spec.t_max, spec.nt, spec.grids);
        if (field.blowup_horizon && *field.blowup_horizon < spec.t_max && !spec.allow_blowup) {
          std::cerr << "error: blowup detected at t = " << *field.blowup_horizon
                    << " before the requested horizon " << spec.t_max
                    << " (pass --allow-blowup to emit NaN past it)\n";
          return 2;
        }
      } else {
        field = lax_oleinik(f, H, spec.t_max, spec.nt, spec.grids);
      }
      emit_csv_to_path(field, spec.out_path);
      return 0;
    }

    if (multitime_cmd->parsed()) {
      if (spec.t2_max <= 0.0 || spec.nt2 < 2)
        throw SpecError("multitime requires grid.t2_max > 0 and grid.nt2 >= 2");
      std::pair<int, int> order{1, 2};
      if (order_str == "2,1") order = {2, 1};
      else if (order_str != "1,2") throw SpecError("--order must be 1,2 or 2,1");
      Expression f = spec.f_expr();
      Hamiltonian H1 = run_detail::slot_ham(spec, 1);
      Hamiltonian H2 = run_detail::slot_ham(spec, 2);
      if (H1.depends_on(Var::t) || H2.depends_on(Var::t))
        throw SpecError("multitime Hamiltonians must use t1/t2, not t");
      SolutionField field = multitime_solve(f, H1, H2, order, spec.t_max, spec.t2_max, spec.nt,
                                            spec.nt2, spec.grids);
      emit_csv_to_path(field, spec.out_path);
      return 0;
    }

    if (flow_cmd->parsed()) {
      Hamiltonian H = run_detail::slot_ham(spec, 1);
      int steps = spec.grids.steps_for(spec.t_max);
      if (H.depends_on(Var::u)) {
        ContactTrajectory traj = contact_integrate(H, {x0, p0, u0}, 0.0, spec.t_max, steps);
        if (traj.truncated && !spec.allow_blowup) {
          std::cerr << "error: trajectory blowup before the requested horizon\n";
          return 2;
        }
        emit_csv_to_path(traj, spec.out_path);
      } else {
        Trajectory traj = integrate(H, {x0, p0}, 0.0, spec.t_max, steps);
        if (traj.truncated && !spec.allow_blowup) {
          std::cerr << "error: trajectory blowup before the requested horizon\n";
          return 2;
        }
        emit_csv_to_path(traj, spec.out_path);
      }
      return 0;
    }

    if (front_cmd->parsed()) {
      Expression f = spec.f_expr();
      Hamiltonian H = run_detail::slot_ham(spec, 1);
      Front fr = refined_slice(f, H, spec.t_max, spec.grids.seed_grid(),
                               spec.grids.steps_for(spec.t_max), spec.grids.refine_levels);
      emit_csv_to_path(fr, spec.out_path);
      return 0;
    }

    if (bracket_cmd->parsed()) {
      Hamiltonian H1 = run_detail::slot_ham(spec, 1);
      Hamiltonian H2 = spec.hamiltonians.size() > 1 ? run_detail::slot_ham(spec, 2) : H1;
      Box box;
      box.x = {spec.grids.x_min, spec.grids.x_max};
      box.p = {spec.grids.p_min, spec.grids.p_max};
      box.t = {0.0, spec.t_max};
      box.t1 = {0.0, spec.t_max};
      box.t2 = {0.0, spec.t2_max > 0 ? spec.t2_max : spec.t_max};
      box.u = {-1.0, 1.0};
      std::ostringstream os;
      os << "kind,sup_norm\n";
      os << "poisson," << csv_detail::num(bracket_sup_norm(H1, H2, BracketKind::Poisson, box, 41).value) << "\n";
      os << "timedep," << csv_detail::num(bracket_sup_norm(H1, H2, BracketKind::TimeDep, box, 41).value) << "\n";
      os << "multitime," << csv_detail::num(bracket_sup_norm(H1, H2, BracketKind::MultiTime, box, 21).value) << "\n";
      os << "contact," << csv_detail::num(bracket_sup_norm(H1, H2, BracketKind::Contact, box, 21).value) << "\n";
      if (spec.out_path.empty() || spec.out_path == "-") std::cout << os.str();
      else std::ofstream(spec.out_path, std::ios::binary) << os.str();
      return 0;
    }

    if (gamma_cmd->parsed()) {
      Expression f = spec.f_expr();
      Hamiltonian H = run_detail::slot_ham(spec, 1);
      auto seeds = spec.grids.seed_grid();
      GeneratingFamily fam = build_discrete_family(
          f, H, spec.t_max, 1, spec.grids.x_grid(),
          {seeds.front(), seeds.back(), static_cast<int>(seeds.size())},
          spec.grids.steps_per_unit_time);
      MinimaxValue c1 = minimax_c1_global(fam);
      MinimaxValue cmu = minimax_cmu_global(fam);
      GammaResult g = gamma_of_family(fam);
      std::ostringstream os;
      os << "quantity,value,witness_x,witness_xi\n";
      os << "c1," << csv_detail::num(c1.value) << ',' << csv_detail::num(fam.x[c1.wx]) << ','
         << csv_detail::num(fam.xi.empty() ? 0.0 : fam.xi[c1.wxi]) << "\n";
      os << "cmu," << csv_detail::num(cmu.value) << ',' << csv_detail::num(fam.x[cmu.wx]) << ','
         << csv_detail::num(fam.xi.empty() ? 0.0 : fam.xi[cmu.wxi]) << "\n";
      os << "gamma," << csv_detail::num(g.value) << ",," << "\n";
      os << "gamma_raw," << csv_detail::num(g.raw) << ",," << "\n";
      if (spec.out_path.empty() || spec.out_path == "-") std::cout << os.str();
      else std::ofstream(spec.out_path, std::ios::binary) << os.str();
      if (!family_csv.empty()) {
        std::ofstream fs(family_csv, std::ios::binary);
        fs << "x";
        for (double q : fam.xi) fs << ',' << csv_detail::num(q);
        fs << "\n";
        for (std::size_t ix = 0; ix < fam.nx(); ++ix) {
          fs << csv_detail::num(fam.x[ix]);
          for (std::size_t i1 = 0; i1 < fam.n1(); ++i1) fs << ',' << csv_detail::num(fam.at(ix, i1));
          fs << "\n";
        }
      }
      return 0;
    }

    if (disc_cmd->parsed()) {
      if (spec.eps_list.empty())
        throw SpecError("discrepancy requires options.eps_list");
      if (spec.t2_max <= 0.0 || spec.nt2 < 2)
        throw SpecError("discrepancy requires grid.t2_max > 0 and grid.nt2 >= 2");
      Expression f = spec.f_expr();
      Hamiltonian H1 = run_detail::slot_ham(spec, 1);
      Hamiltonian H2 = run_detail::slot_ham(spec, 2);
      auto table = order_discrepancy(f, H1, H2, spec.t_max, spec.t2_max, spec.nt, spec.nt2,
                                     spec.grids, spec.eps_list);
      emit_csv_to_path(table, spec.out_path);
      return 0;
    }
  } catch (const SpecError& e) {
    return run_detail::fail_validation(e);
  } catch (const ParseError& e) {
    return run_detail::fail_validation(e);
  } catch (const std::invalid_argument& e) {
    return run_detail::fail_validation(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace hjvar
