#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <hjvar/cli.hpp>

using namespace hjvar;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  std::string path = "cli_fixture_" + name;
  std::ofstream out(path, std::ios::binary);
  out << body;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(HJVAR_CLI_PATH) + " " + args + " 2> cli_fixture_stderr.txt";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

const char* kConcaveOsc = R"({
  "hamiltonians": [{"label": "H", "expression": "-x^2 - p^2/4"}],
  "initial_condition": "0",
  "grid": {"x_min": -1, "x_max": 1, "nx": 21, "t_max": 1.2, "nt": 5,
           "steps_per_unit_time": 100, "n_seeds": 81},
  "method": "variational"
})";

}  // namespace

TEST_CASE("problem spec parsing and validation") {
  std::string good = write_temp("good.json", kConcaveOsc);
  ProblemSpec spec = parse_problem(good);
  CHECK(spec.hamiltonians.size() == 1);
  CHECK(spec.t_max == 1.2);
  CHECK(spec.grids.nx == 21);
  CHECK(spec.method == "variational");

  auto reject = [&](const std::string& name, const std::string& body, const std::string& needle) {
    std::string p = write_temp(name, body);
    try {
      parse_problem(p);
      FAIL("expected rejection of ", name);
    } catch (const SpecError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  reject("f_uses_p.json",
         R"({"hamiltonians": [{"expression": "p^2/2"}], "initial_condition": "p",
             "grid": {"nx": 11, "nt": 3}})",
         "initial_condition");
  reject("nx1.json",
         R"({"hamiltonians": [{"expression": "p^2/2"}], "initial_condition": "0",
             "grid": {"nx": 1, "nt": 3}})",
         "grid.nx");
  reject("bad_method.json",
         R"({"hamiltonians": [{"expression": "p^2/2"}], "initial_condition": "0",
             "grid": {"nx": 11, "nt": 3}, "method": "magic"})",
         "method");
  reject("h_uses_u.json",
         R"({"hamiltonians": [{"expression": "u + p"}], "initial_condition": "0",
             "grid": {"nx": 11, "nt": 3}})",
         "hamiltonians");
  reject("bad_json.json", "{", "JSON");
  reject("no_f.json",
         R"({"hamiltonians": [{"expression": "p^2/2"}], "grid": {"nx": 11, "nt": 3}})",
         "initial_condition");
  CHECK_THROWS_AS(parse_problem("does_not_exist.json"), SpecError);
}

TEST_CASE("csv formatting rules") {
  CHECK(csv_detail::num(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(csv_detail::num(0.1) == "0.10000000000000001");
  CHECK(csv_detail::num(-2.0) == "-2");

  Front empty;
  empty.times = {0.5};
  std::ostringstream os;
  emit_csv(empty, os);
  CHECK(os.str() == "seed_x,t1,x,p,action\n");

  // round-trip: values parsed back from a trajectory CSV reproduce bits
  Hamiltonian H = Hamiltonian::parse("(x^2 + p^2)/2");
  Trajectory tr = integrate(H, {0.3, -1.1}, 0, 1.0, 17);
  std::ostringstream body;
  emit_csv(tr, body);
  std::istringstream in(body.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x,p");
  for (const auto& s : tr.samples) {
    std::getline(in, line);
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    CHECK(std::strtod(cell.c_str(), nullptr) == s.t);
    std::getline(row, cell, ',');
    CHECK(std::strtod(cell.c_str(), nullptr) == s.z.x);
    std::getline(row, cell, ',');
    CHECK(std::strtod(cell.c_str(), nullptr) == s.z.p);
  }
}

TEST_CASE("solve subcommand end to end") {
  std::string spec = write_temp("osc.json", kConcaveOsc);

  CHECK(run_cli("solve --spec " + spec + " --out cli_fixture_u.csv") == 0);
  std::string csv = slurp("cli_fixture_u.csv");
  CHECK(csv.substr(0, 16) == "t,x,u,branches\n0");
  CHECK(csv.find("\r") == std::string::npos);

  // determinism: bit-identical on a second run
  CHECK(run_cli("solve --spec " + spec + " --out cli_fixture_u2.csv") == 0);
  CHECK(slurp("cli_fixture_u2.csv") == csv);

  // blowup without --allow-blowup: exit 2; with the flag: exit 0 and NaN cells
  CHECK(run_cli("solve --spec " + spec + " --t-max 1.8 --out cli_fixture_u3.csv") == 2);
  CHECK(run_cli("solve --spec " + spec +
                " --t-max 1.8 --allow-blowup --out cli_fixture_u3.csv") == 0);
  CHECK(slurp("cli_fixture_u3.csv").find("nan") != std::string::npos);

  // validation failures exit 1
  std::string bad = write_temp("bad.json", R"({"hamiltonians": []})");
  CHECK(run_cli("solve --spec " + bad) == 1);
  CHECK(run_cli("solve --spec does_not_exist.json") == 1);
}

TEST_CASE("flow, front, bracket, gamma subcommands") {
  std::string spec = write_temp("osc2.json", kConcaveOsc);

  CHECK(run_cli("flow --spec " + spec + " --x0 1 --p0 0 --out cli_fixture_tr.csv") == 0);
  std::string tr = slurp("cli_fixture_tr.csv");
  CHECK(tr.substr(0, 6) == "t,x,p\n");

  CHECK(run_cli("front --spec " + spec + " --out cli_fixture_fr.csv") == 0);
  std::string fr = slurp("cli_fixture_fr.csv");
  CHECK(fr.substr(0, 20) == "seed_x,t1,x,p,action");

  CHECK(run_cli("bracket --spec " + spec + " --out cli_fixture_br.csv") == 0);
  std::string br = slurp("cli_fixture_br.csv");
  CHECK(br.find("poisson,") != std::string::npos);
  CHECK(br.find("timedep,") != std::string::npos);
  CHECK(br.find("multitime,") != std::string::npos);
  CHECK(br.find("contact,") != std::string::npos);

  std::string gspec = write_temp("gamma.json", R"({
    "hamiltonians": [{"expression": "p^2/2"}],
    "initial_condition": "x^2/2",
    "grid": {"x_min": -1, "x_max": 1, "nx": 41, "t_max": 1.0, "nt": 3, "n_seeds": 201},
    "method": "variational"
  })");
  CHECK(run_cli("gamma --spec " + gspec + " --out cli_fixture_g.csv") == 0);
  std::string g = slurp("cli_fixture_g.csv");
  CHECK(g.find("c1,") != std::string::npos);
  CHECK(g.find("cmu,") != std::string::npos);
  CHECK(g.find("gamma,") != std::string::npos);
}

TEST_CASE("multitime and discrepancy subcommands") {
  std::string spec = write_temp("mt.json", R"({
    "hamiltonians": [{"expression": "p^2/2", "slot": 1}, {"expression": "x*p", "slot": 2}],
    "initial_condition": "x^2/2",
    "grid": {"x_min": -1, "x_max": 1, "nx": 21, "t_max": 0.5, "nt": 3,
             "t2_max": 0.5, "nt2": 3, "n_seeds": 101},
    "options": {"eps_list": [0.2, 0.1]}
  })");
  CHECK(run_cli("multitime --spec " + spec + " --out cli_fixture_mt.csv") == 0);
  std::string mt = slurp("cli_fixture_mt.csv");
  CHECK(mt.substr(0, 19) == "t1,t2,x,u,branches\n");
  CHECK(run_cli("multitime --spec " + spec + " --order 2,1 --out cli_fixture_mt2.csv") == 0);
  CHECK(run_cli("multitime --spec " + spec + " --order 3,1") == 1);

  CHECK(run_cli("discrepancy --spec " + spec + " --out cli_fixture_d.csv") == 0);
  std::string d = slurp("cli_fixture_d.csv");
  CHECK(d.substr(0, 21) == "eps,gap,bracket_norm\n");

  // missing eps_list is a validation failure
  std::string nospec = write_temp("mt2.json", R"({
    "hamiltonians": [{"expression": "p^2/2", "slot": 1}, {"expression": "x*p", "slot": 2}],
    "initial_condition": "x^2/2",
    "grid": {"x_min": -1, "x_max": 1, "nx": 21, "t_max": 0.5, "nt": 3, "t2_max": 0.5, "nt2": 3}
  })");
  CHECK(run_cli("discrepancy --spec " + nospec) == 1);
}

TEST_CASE("selfcheck and usage errors") {
  CHECK(run_cli("selfcheck > cli_fixture_sc.txt") == 0);
  std::string sc = slurp("cli_fixture_sc.txt");
  CHECK(sc.find("[PASS]") != std::string::npos);
  CHECK(sc.find("[FAIL]") == std::string::npos);

  CHECK(run_cli("frobnicate") != 0);
  CHECK(run_cli("solve") != 0);  // --spec required
}
