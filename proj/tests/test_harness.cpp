#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "elab/harness.hpp"

using namespace elab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

const char* kSmall = R"(# small line scenario
id = small
model = euclidean-line
solution = expline:1,1
x = 0
t_grid.min = 0.25
t_grid.max = 1
t_grid.count = 4
mc.paths = 2000
mc.dt = 2e-3
domains = interval:-1,1; interval:-2,2
analyses = entropy-curve, conditions, local, bounds
)";

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("elab_harness_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("scenario grammar round-trips") {
  const Scenario s = parse_scenario(kSmall);
  CHECK(s.id == "small");
  CHECK(s.t_grid.values() == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  REQUIRE(s.mc);
  CHECK(s.mc->seed == kDefaultSeed);
  CHECK(s.mc->n_paths == 2000);
  CHECK(s.domains.size() == 2);
  CHECK(parse_scenario(serialize_scenario(s)) == s);

  Scenario odd = s;
  odd.t_grid = {0.1, 1.0 / 3.0, 7, TimeGridSpec::Spacing::Log};
  odd.mc->dt = 1.0 / 1024.0 + 1e-17;
  odd.mc->seed = 0xDEADBEEFCAFEull;
  odd.delta = 0.1 + 0.2;
  odd.analyses = {"entropy-curve", "classify"};
  CHECK(parse_scenario(serialize_scenario(odd)) == odd);

  for (const auto& f : fs::directory_iterator(ELAB_SCENARIO_DIR)) {
    CAPTURE(f.path().string());
    const Scenario a = load_scenario(f.path().string());
    CHECK(parse_scenario(serialize_scenario(a)) == a);
  }
}

TEST_CASE("sphere base point given by embedding coordinates") {
  const Scenario s = parse_scenario(
      "id = s\nmodel = sphere2:1,2\nsolution = sphere-spec:2,(1,0.5)\nx = 0.6, -0.8, 0\nt_grid.max = 1\n");
  const auto o = resolve(s);
  CHECK(o.x.size() == 2);
  CHECK(sphere_embed(o.x).isApprox(Vec3(0.6, -0.8, 0.0), 1e-14));
  CHECK_THROWS_AS(parse_scenario("id = s\nmodel = sphere2:1,2\nsolution = const:1\nx = 0.6, 0.6, 0\nt_grid.max = 1\n"),
                  Error);
}

TEST_CASE("configuration errors") {
  const auto code = [](const std::string& text) {
    try {
      parse_scenario(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;  // marker: no error
  };
  const std::string base = "id = x\nmodel = euclidean-line\nsolution = const:1\nx = 0\n";
  CHECK(code(base) == ErrorCode::InvalidArgument);
  CHECK(code(base + "bogus = 1\n") == ErrorCode::ConfigError);
  CHECK(code(base + "id = y\n") == ErrorCode::ConfigError);
  CHECK(code(base + "t_grid.min = zero\n") == ErrorCode::ConfigError);
  CHECK(code(base + "analyses = entropy-curve, dance\n") == ErrorCode::ConfigError);
  CHECK(code(base + "mc.scheme = projected-sphere\n") == ErrorCode::ConfigError);
  CHECK(code("id = x\nmodel = torus\nsolution = const:1\nx = 0\n") == ErrorCode::ConfigError);
  CHECK(code("id = x\nmodel = euclidean-line\nsolution = wave:1\nx = 0\n") == ErrorCode::ConfigError);
  CHECK(code("id = x\nmodel = punctured-3\nsolution = radial3\nx = 0, 0, 0\n") == ErrorCode::ConfigError);
  CHECK(code(base + "domains = interval:1\n") == ErrorCode::ConfigError);

  // the shrinking circle c(t) = 1 - 0.1 t degenerates at t = 10
  const std::string shrink = "id = c\nmodel = circle:1,-0.1\nsolution = const:1\nx = 0\nt_grid.max = 12\n";
  try {
    parse_scenario(shrink);
    FAIL("window violation accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    CHECK(std::string(e.what()).find("window") != std::string::npos);
    CHECK(std::string(e.what()).find("circle:1,-0.1") != std::string::npos);
  }
}

TEST_CASE("overrides") {
  Scenario s = parse_scenario("id = q\nmodel = euclidean-line\nsolution = const:1\nx = 0\n");
  CHECK_FALSE(s.mc);
  Overrides o;
  o.paths = 123;
  o.seed = 7;
  o.refine = 2;
  s = apply_overrides(s, o);
  REQUIRE(s.mc);
  CHECK(s.mc->n_paths == 123);
  CHECK(s.mc->seed == 7);
  CHECK(s.mc->dt == 1e-3);
  CHECK(s.refine == 2);
  Overrides bad;
  bad.dt = -1.0;
  CHECK_THROWS_AS(apply_overrides(s, bad), Error);
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_number(4.0) == "4");
  CHECK(format_number(INFINITY) == "inf");
  CHECK(format_number(NAN) == "nan");
  for (double v : {1e-300, 123456.789, -2.5e17, 0.30000000000000004}) CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("run writes the documented outputs, reproducibly") {
  const Scenario s = parse_scenario(kSmall);
  const fs::path a = temp_dir("a"), b = temp_dir("b");
  const RunManifest m = run_scenario(s, a.string());
  run_scenario(s, b.string());
  CHECK(m.seed == kDefaultSeed);
  CHECK(m.outputs == std::vector<std::string>{"entropy.csv", "local.csv", "analysis.json", "manifest.json"});
  CHECK(m.refinement_levels.size() == 4);
  CHECK_FALSE(m.version.empty());
  for (const char* f : {"entropy.csv", "local.csv", "analysis.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }

  const auto ent = lines(slurp(a / "entropy.csv"));
  REQUIRE(ent.size() == 1 + 4 + 4);
  CHECK(ent[0] == kEntropyCsvHeader);
  // quadrature rows: E(t) = t, cond2 = e^{2t}
  for (int i = 1; i <= 4; ++i) {
    const auto f = fields(ent[i]);
    REQUIRE(f.size() == 16);
    const double t = std::stod(f[0]);
    CHECK(f[10] == "quadrature");
    CHECK(std::abs(std::stod(f[1]) - t) <= 1e-8);
    CHECK(std::abs(std::stod(f[8]) / std::exp(2 * t) - 1) <= 1e-6);
  }
  for (int i = 5; i <= 8; ++i) {
    const auto f = fields(ent[i]);
    CHECK(f[10] == "monte-carlo");
    CHECK(f[7] == "nan");
    CHECK(std::abs(std::stod(f[1]) - std::stod(f[0])) <= 4 * std::stod(f[2]));
  }
  const auto loc = lines(slurp(a / "local.csv"));
  CHECK(loc[0] == kLocalCsvHeader);
  CHECK(loc.size() == 1 + 2 * 4);

  const auto rep = slurp(a / "analysis.json");
  for (const char* key : {"\"scenario_id\"", "\"theta\"", "\"growth_class\"", "\"slope\"", "\"mixed_residual\"",
                          "\"bounds\"", "\"divergence_tables\""}) {
    CHECK(rep.find(key) != std::string::npos);
  }
  CHECK(slurp(a / "manifest.json").find("\"seed\": \"0xC0FFEE\"") != std::string::npos);

  // a different seed changes the Monte Carlo rows only
  Overrides o;
  o.seed = 1;
  run_scenario(apply_overrides(s, o), b.string());
  const auto ent2 = lines(slurp(b / "entropy.csv"));
  for (int i = 0; i <= 4; ++i) CHECK(ent2[i] == ent[i]);
  CHECK(ent2[5] != ent[5]);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("scenario without an analytic kernel") {
  const Scenario s = parse_scenario(
      "id = h\nmodel = hyperbolic-static\nsolution = const:2\nx = 0, 1\nt_grid.max = 0.5\nt_grid.count = 2\n"
      "mc.paths = 500\n");
  const fs::path d = temp_dir("h");
  run_scenario(s, d.string());
  const auto ent = lines(slurp(d / "entropy.csv"));
  REQUIRE(ent.size() == 3);
  CHECK(fields(ent[1])[10] == "monte-carlo");
  CHECK(std::abs(std::stod(fields(ent[1])[1]) - 2 * std::log(2.0)) <= 1e-12);
  fs::remove_all(d);
}

TEST_CASE("suites") {
  CHECK(parse_suite("all") == Suite::All);
  CHECK_THROWS_AS(parse_suite("everything"), Error);
  auto a = suite_criteria(Suite::Examples), b = suite_criteria(Suite::Properties);
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  CHECK(a == suite_criteria(Suite::All));
  CHECK(suite_criteria(Suite::All).size() == 12);
  CHECK_FALSE(CriterionResult{}.pass());
  const auto r = run_criterion(2);
  CHECK(r.pass());
  CHECK(r.rows.size() == 6);
  CHECK_THROWS_AS(run_criterion(13), Error);
}
