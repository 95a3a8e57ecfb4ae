#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fbt;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("framebound-test-" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field;
  }
  return "<accepted>";
}

const char* kMeyer = R"({"schema": "framebound/1", "name": "m",
  "system": {"type": "wavelet", "dilation": "2", "lattice": "1", "j_min": -10, "j_max": 10,
             "generators": ["meyer_wavelet_hat"]},
  "grid": {"kind": "annulus", "resolution": 32}})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("scenario catalogue") {
  CHECK(scenario_names().size() == 9);
  for (const auto& n : scenario_names()) CHECK_NOTHROW(scenario(n));
  try {
    scenario("nope");
    FAIL("unknown scenario accepted");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("nadic2") != std::string::npos);
    CHECK(std::string(e.what()).find("bendlet_ti") != std::string::npos);
  }

  RunConfig n2 = scenario("nadic2");
  CHECK(n2.system["N"] == 2);
  CHECK(n2.system["j_max"] == 12);
  REQUIRE(n2.oracle.has_value());
  CHECK(n2.oracle->n == 4096);

  RunConfig haar = scenario("haar_tchamitchian");
  REQUIRE(haar.runs.size() == 3);
  CHECK(haar.runs[0].system["lattice"] == "1/2");
  CHECK(haar.runs[2].system["lattice"] == "2");

  RunConfig cone = scenario("shearlet_cone");
  CHECK(cone.system["j_max"] == 4);
  SystemSpec sys = build_system(cone.system);
  CHECK(sys.layers.size() == 1 + 2 * (3 + 5 + 9 + 17 + 33));
}

TEST_CASE("config errors carry positions and fields") {
  try {
    parse_config(std::string("{\"schema\": \"framebound/1\",\n  \"system\": {\"type\": \"wavelet\",}\n}"));
    FAIL("malformed JSON accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(field_of(R"({"system": {}})") == "/schema");
  CHECK(field_of(R"({"schema": "framebound/0", "system": {}})") == "/schema");
  CHECK(field_of(R"({"schema": "framebound/1", "system": {"type": "wavelet", "dilation": "2", "lattice": "0",
                     "j_min": 0, "j_max": 1, "generators": ["meyer_wavelet_hat"]}})") == "/system/lattice");
  CHECK(field_of(R"({"schema": "framebound/1", "system": {"type": "nadic", "N": 2, "j_max": 4},
                     "grid": {"resolution": 8}})") == "/grid/resolution");
  CHECK(field_of(R"({"schema": "framebound/1", "system": {"type": "nadic", "N": 2, "j_max": 4, "jmax": 3}})") ==
        "/system/jmax");
  CHECK(field_of(R"({"schema": "framebound/1", "system": {"type": "gabor", "translation": 1,
                     "modulation": "0", "generators": ["gaussian_hat"]}})") == "/system/modulation");
  CHECK(field_of(R"({"schema": "framebound/1", "system": {"type": "continuous_ti", "family": "alpha_shearlet",
                     "order": 2, "generator": "shearlet_hat"}})") == "/system/order");
  CHECK(field_of(kMeyer) == "<accepted>");
}

TEST_CASE("rational entries") {
  RunConfig c = parse_config(std::string(R"({"schema": "framebound/1",
    "system": {"type": "gabor", "translation": 0.5, "modulation": "1/3", "generators": ["gaussian_hat"]},
    "grid": {"kind": "auto"}})"));
  SystemSpec sys = build_system(c.system);
  CHECK(*sys.period == scalar(Rational(1, 3)));
  CHECK(*sys.layers[0].group.exact_lattice() == LatticeQ(scalar(Rational(1, 2))));
  Grid g = build_grid(sys, c.grid);
  CHECK(g.description.find("fundamental") != std::string::npos);
}

TEST_CASE("runs are deterministic and write every artifact") {
  RunConfig cfg = parse_config(std::string(kMeyer));
  auto d1 = scratch("a"), d2 = scratch("b");
  std::ostringstream log;
  CHECK(run(cfg, {d1.string(), 1}, log) == kOk);
  CHECK(run(cfg, {d2.string(), 0}, log) == kOk);
  for (const char* f : {"bounds.csv", "t_alpha.csv"}) {
    CHECK(std::filesystem::exists(d1 / f));
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  const std::string csv = slurp(d1 / "bounds.csv");
  CHECK(csv.rfind("omega,t0,R,R_abs,l2_norm\n", 0) == 0);
  CHECK(slurp(d1 / "report.txt").find("1-UCP") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(d1 / "oracle.csv"));
}

TEST_CASE("user-asserted 1-UCP still prints the disclaimer") {
  std::string text = kMeyer;
  text.replace(text.find("\"generators\""), 0, "\"ucp_asserted\": true, ");
  auto d = scratch("ucp");
  std::ostringstream log;
  run(parse_config(text), {d.string(), 0}, log);
  const std::string report = slurp(d / "report.txt");
  CHECK(report.find("1-UCP asserted by the user, not verified") != std::string::npos);
}

TEST_CASE("exit codes") {
  std::ostringstream log;
  RunConfig n3 = scenario("nadic3");
  n3.oracle.reset();
  CHECK(run(n3, {scratch("n3").string(), 0}, log) == kDivergent);
  RunConfig n2 = scenario("nadic2");
  n2.oracle->n = 512;
  auto d = scratch("n2");
  CHECK(run(n2, {d.string(), 0}, log) == kOk);
  CHECK(std::filesystem::exists(d / "oracle.csv"));
}

TEST_CASE("csv number format") {
  CHECK(csv_number(0.1) == "0.10000000000000001");
  CHECK(csv_number(kInf) == "inf");
  CHECK(csv_number(-kInf) == "-inf");
}

}
