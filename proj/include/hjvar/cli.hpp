#pragma once

// Problem-spec ingestion (JSON), CSV emission, and the command runners behind
// the hjvar tool. Exit codes: 0 success, 1 validation error, 2 numerical
// failure (blowup before the requested horizon without allow_blowup).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "solve.hpp"

namespace hjvar {

struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProblemSpec {
  struct Ham {
    std::string label;
    std::string expression;
    int slot = 1;
  };
  std::vector<Ham> hamiltonians;
  std::string initial_condition;
  Grids grids;
  double t_max = 1.0;
  int nt = 11;
  double t2_max = 0.0;
  int nt2 = 0;
  std::string method = "variational";
  std::vector<double> eps_list;
  bool allow_blowup = false;
  std::string out_path;

  Expression f_expr() const { return Expression::parse(initial_condition); }
  Hamiltonian ham(std::size_t i) const {
    return Hamiltonian::parse(hamiltonians.at(i).expression, GradientMode::Symbolic,
                              hamiltonians.at(i).label);
  }
};

inline ProblemSpec parse_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("spec is not valid JSON: ") + e.what());
  }

  ProblemSpec spec;
  if (!j.contains("hamiltonians") || !j["hamiltonians"].is_array() || j["hamiltonians"].empty())
    throw SpecError("field 'hamiltonians': required non-empty array");
  int auto_slot = 1;
  for (const auto& h : j["hamiltonians"]) {
    ProblemSpec::Ham ham;
    if (!h.contains("expression") || !h["expression"].is_string())
      throw SpecError("field 'hamiltonians[].expression': required string");
    ham.expression = h["expression"].get<std::string>();
    ham.label = h.value("label", "H" + std::to_string(auto_slot));
    ham.slot = h.value("slot", auto_slot);
    ++auto_slot;
    spec.hamiltonians.push_back(ham);
  }
  if (!j.contains("initial_condition") || !j["initial_condition"].is_string())
    throw SpecError("field 'initial_condition': required string");
  spec.initial_condition = j["initial_condition"].get<std::string>();

  if (!j.contains("grid") || !j["grid"].is_object())
    throw SpecError("field 'grid': required object");
  const auto& g = j["grid"];
  spec.grids.x_min = g.value("x_min", -1.0);
  spec.grids.x_max = g.value("x_max", 1.0);
  spec.grids.nx = g.value("nx", 101);
  spec.t_max = g.value("t_max", 1.0);
  spec.nt = g.value("nt", 11);
  spec.t2_max = g.value("t2_max", 0.0);
  spec.nt2 = g.value("nt2", 0);
  spec.grids.steps_per_unit_time = g.value("steps_per_unit_time", 100);
  spec.grids.n_seeds = g.value("n_seeds", 0);
  spec.grids.seed_lo = g.value("seed_lo", 0.0);
  spec.grids.seed_hi = g.value("seed_hi", 0.0);
  spec.grids.p_min = g.value("p_min", -10.0);
  spec.grids.p_max = g.value("p_max", 10.0);
  spec.grids.np = g.value("np", 2001);
  spec.grids.refine_levels = g.value("refine_levels", 3);

  spec.method = j.value("method", "variational");
  if (j.contains("options")) {
    const auto& o = j["options"];
    if (o.contains("eps_list")) spec.eps_list = o["eps_list"].get<std::vector<double>>();
    spec.allow_blowup = o.value("allow_blowup", false);
    spec.out_path = o.value("output_path", "");
  }

  // eager validation
  if (spec.grids.nx < 2) throw SpecError("field 'grid.nx': must be >= 2");
  if (spec.nt < 2) throw SpecError("field 'grid.nt': must be >= 2");
  if (!(spec.grids.x_min < spec.grids.x_max))
    throw SpecError("field 'grid.x_min': must be < x_max");
  if (!(spec.t_max > 0.0)) throw SpecError("field 'grid.t_max': must be > 0");
  if (spec.method != "variational" && spec.method != "lax-oleinik" && spec.method != "hopf")
    throw SpecError("field 'method': must be one of variational, lax-oleinik, hopf");

  Expression f;
  try {
    f = Expression::parse(spec.initial_condition);
  } catch (const ParseError& e) {
    throw SpecError(std::string("field 'initial_condition': ") + e.what());
  }
  if (f.variables() & ~var_bit(Var::x))
    throw SpecError("field 'initial_condition': may only reference x");

  const VarSet ham_legal = static_cast<VarSet>(var_bit(Var::t) | var_bit(Var::t1) |
                                               var_bit(Var::t2) | var_bit(Var::x) | var_bit(Var::p));
  for (const auto& h : spec.hamiltonians) {
    Expression e;
    try {
      e = Expression::parse(h.expression);
    } catch (const ParseError& pe) {
      throw SpecError("field 'hamiltonians[" + h.label + "].expression': " + pe.what());
    }
    if (e.variables() & ~ham_legal)
      throw SpecError("field 'hamiltonians[" + h.label +
                      "].expression': may only reference t, t1, t2, x, p");
    if (h.slot < 1 || h.slot > 2)
      throw SpecError("field 'hamiltonians[" + h.label + "].slot': must be 1 or 2");
  }
  if (spec.hamiltonians.size() > 2) throw SpecError("field 'hamiltonians': at most 2 supported");
  return spec;
}

// ---------------------------------------------------------------------------
// CSV emission: 17 significant digits, '.' decimal, LF endings, deterministic
// row order (time-major, then x). NaN cells are spelled "nan".

namespace csv_detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace csv_detail

inline void emit_csv(const SolutionField& field, std::ostream& out) {
  if (field.t2.empty()) {
    out << "t,x,u,branches\n";
    for (std::size_t i = 0; i < field.nt1(); ++i)
      for (std::size_t k = 0; k < field.nx(); ++k)
        out << csv_detail::num(field.t1[i]) << ',' << csv_detail::num(field.x[k]) << ','
            << csv_detail::num(field.at(i, 0, k)) << ',' << field.branch_at(i, 0, k) << '\n';
  } else {
    out << "t1,t2,x,u,branches\n";
    for (std::size_t i = 0; i < field.nt1(); ++i)
      for (std::size_t j = 0; j < field.nt2(); ++j)
        for (std::size_t k = 0; k < field.nx(); ++k)
          out << csv_detail::num(field.t1[i]) << ',' << csv_detail::num(field.t2[j]) << ','
              << csv_detail::num(field.x[k]) << ',' << csv_detail::num(field.at(i, j, k)) << ','
              << field.branch_at(i, j, k) << '\n';
  }
}

inline void emit_csv(const Trajectory& traj, std::ostream& out) {
  out << "t,x,p\n";
  for (const auto& s : traj.samples)
    out << csv_detail::num(s.t) << ',' << csv_detail::num(s.z.x) << ',' << csv_detail::num(s.z.p)
        << '\n';
}

inline void emit_csv(const ContactTrajectory& traj, std::ostream& out) {
  out << "t,x,p,u\n";
  for (const auto& s : traj.samples)
    out << csv_detail::num(s.t) << ',' << csv_detail::num(s.c.x) << ',' << csv_detail::num(s.c.p)
        << ',' << csv_detail::num(s.c.u) << '\n';
}

inline void emit_csv(const Front& front, std::ostream& out) {
  out << "seed_x";
  for (std::size_t j = 0; j < front.dims(); ++j) out << ",t" << (j + 1);
  out << ",x,p,action\n";
  for (const auto& pt : front.points) {
    out << csv_detail::num(pt.seed_x);
    for (double t : front.times) out << ',' << csv_detail::num(t);
    if (pt.blown)
      out << ",nan,nan,nan\n";
    else
      out << ',' << csv_detail::num(pt.x) << ',' << csv_detail::num(pt.p) << ','
          << csv_detail::num(pt.action) << '\n';
  }
}

inline void emit_csv(const std::vector<DiscrepancyRow>& table, std::ostream& out) {
  out << "eps,gap,bracket_norm\n";
  for (const auto& row : table)
    out << csv_detail::num(row.eps) << ',' << csv_detail::num(row.gap) << ','
        << csv_detail::num(row.bracket_norm) << '\n';
}

template <typename T>
void emit_csv_to_path(const T& value, const std::string& path) {
  if (path.empty() || path == "-") {
    emit_csv(value, std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output path: " + path);
  emit_csv(value, out);
}

}  // namespace hjvar
