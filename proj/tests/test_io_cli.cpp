#include <doctest.h>

#include "recon/cli.hpp"
#include "recon/config.hpp"
#include "recon/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace recon;
using Mat = Matrix<double>;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(RECON_TEST_DATA_DIR) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int run(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

/// Synthetic dataset (intercept, s, y) written as CSV.
fs::path regression_csv(const fs::path& dir, Index n) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Mat x(n, 3);
  for (Index i = 0; i < n; ++i) {
    const double s = 1.0 + 0.15 * nd(rng);
    x.row(i) << 1.0, s, 0.26 + 0.6 * s + 0.18 * nd(rng);
  }
  const fs::path p = dir / "data.csv";
  io::write_csv(p.string(), {"intercept", "mom", "kid"}, x);
  return p;
}

}  // namespace

TEST_CASE("csv round trip is bitwise") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Mat m(7, 3);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng) * std::pow(10.0, double(i % 9) - 4);
  std::stringstream s;
  io::write_csv(s, {"a", "b", "c"}, m);
  const auto t = io::parse_csv(s, "mem");
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.rows == m);
}

TEST_CASE("malformed csv rows name the row") {
  std::stringstream bad_count("a,b\n1,2\n3\n");
  CHECK_THROWS_WITH_AS(io::parse_csv(bad_count, "f.csv"), doctest::Contains("row 3"), IoError);
  std::stringstream bad_value("a,b\n1,x\n");
  CHECK_THROWS_WITH_AS(io::parse_csv(bad_value, "f.csv"), doctest::Contains("row 2 column 'b'"), IoError);
  std::stringstream empty("");
  CHECK_THROWS_AS(io::parse_csv(empty, "f.csv"), IoError);
}

TEST_CASE("draws files") {
  const fs::path dir = scratch("draws");
  Mat d(1000, 3);
  for (Index i = 0; i < d.rows(); ++i) d.row(i) << 26.0 + 0.01 * double(i), 0.6, 18.0;
  io::save_draws((dir / "ref.csv").string(), PosteriorDraws<double>(d, DrawSource::File, {"beta.1", "beta.2", "sigma"}));
  const auto back = io::load_draws((dir / "ref.csv").string());
  CHECK(back.count() == 1000);
  CHECK(back.dim() == 3);
  CHECK(back.names == std::vector<std::string>{"beta.1", "beta.2", "sigma"});
  CHECK(back.draws == d);
  CHECK_THROWS_AS(io::load_draws((dir / "missing.csv").string()), IoError);
}

TEST_CASE("measure and layout files") {
  const fs::path dir = scratch("measure");
  const auto layout = DataLayout::regression(1, true, {"one", "s", "y"});
  Mat p(2, 3);
  p << 1, 0.25, -3, 1, 1e-300, 7.5;
  Vector<double> w(2);
  w << 0.1, 2.0;
  io::save_measure((dir / "m.csv").string(), Measure(w, p), layout);
  CHECK(slurp(dir / "m.csv").substr(0, 11) == "weight,s,y\n");
  const auto back = io::load_measure((dir / "m.csv").string(), layout);
  CHECK(back.points() == p);
  CHECK(back.weights() == w);

  const auto j = io::layout_to_json(layout);
  const auto l2 = io::layout_from_json(j);
  CHECK(l2.names() == layout.names());
  CHECK(l2.free_coords() == layout.free_coords());
  json extra = j;
  extra["bogus"] = 1;
  CHECK_THROWS(io::layout_from_json(extra));
}

TEST_CASE("run config parsing") {
  const fs::path dir = scratch("config");
  const auto data = regression_csv(dir, 10);
  json doc = {{"model", {{"name", "kidscore"}}},
              {"data", {{"path", data.string()}}},
              {"sampler", {{"kind", "rwm"}, {"seed", 4}}},
              {"attack", {{"objective", "sfd"}, {"seed", 9}, {"M", 5}}}};
  const auto rc = config::parse_run_config(doc);
  CHECK(rc.model.name == "kidscore");
  CHECK(rc.attack->M == 5);
  CHECK(rc.attack->seed == 9);

  SUBCASE("environment seed overrides every seed") {
    const auto o = config::parse_run_config(doc, 123);
    CHECK(o.attack->seed == 123);
    CHECK(o.sampler->config.seed == 123);
    CHECK(o.raw["attack"]["seed"] == 123);
  }
  SUBCASE("unknown keys are rejected by name") {
    json bad = doc;
    bad["attack"]["learning_rate"] = 0.1;
    CHECK_THROWS_WITH_AS(config::parse_run_config(bad), doctest::Contains("attack.learning_rate"), ConfigError);
  }
  SUBCASE("missing read paths are rejected") {
    json bad = doc;
    bad["data"]["path"] = (dir / "nope.csv").string();
    CHECK_THROWS_WITH_AS(config::parse_run_config(bad), doctest::Contains("data.path"), ConfigError);
  }
  SUBCASE("objective must match the model kind") {
    json bad = doc;
    bad["attack"]["objective"] = "nonbayes";
    CHECK_THROWS_AS(config::parse_run_config(bad), ConfigError);
  }
}

TEST_CASE("cli sample is reproducible") {
  const fs::path dir = scratch("cli_sample");
  Mat x(5, 2);
  x << 0, 1, 2, 0.5, -1, 1, 0.3, 0.3, 1, 2;
  io::write_csv((dir / "x.csv").string(), {"a", "b"}, x);
  const json doc = {{"model", {{"name", "gaussian_mean"}}},
                    {"data", {{"path", (dir / "x.csv").string()}}},
                    {"sampler", {{"kind", "exact"}, {"T", 1000}, {"seed", 7}}},
                    {"output", {{"dir", (dir / "out").string()}}}};
  write_text(dir / "run.json", doc.dump());
  REQUIRE(run({"sample", "--config", (dir / "run.json").string()}) == cli::kExitOk);
  const std::string first = slurp(dir / "out" / "draws.csv");
  REQUIRE(run({"sample", "--config", (dir / "run.json").string()}) == cli::kExitOk);
  CHECK(slurp(dir / "out" / "draws.csv") == first);
  const auto t = io::read_csv((dir / "out" / "draws.csv").string());
  CHECK(t.rows.rows() == 1000);
  CHECK(first.find('\r') == std::string::npos);
}

TEST_CASE("cli attack and report") {
  const fs::path dir = scratch("cli_attack");
  const auto data = regression_csv(dir, 30);
  const json doc = {{"model", {{"name", "kidscore"}}},
                    {"data", {{"path", data.string()}}},
                    {"sampler",
                     {{"kind", "rwm"}, {"T", 50}, {"seed", 2}, {"step_scale", 0.02}, {"init", {0.26, 0.6, 0.18}}}},
                    {"attack", {{"objective", "sfd"}, {"M", 6}, {"iters", 30}, {"trace_every", 10}, {"seed", 5}}},
                    {"output", {{"dir", (dir / "out").string()}}}};
  write_text(dir / "run.json", doc.dump());
  std::string out, err;
  REQUIRE(run({"attack", "--config", (dir / "run.json").string()}, &out, &err) == cli::kExitOk);

  const json summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary.contains("total_mass"));
  CHECK(summary["attack"]["adam"]["beta2"] == 0.999);
  CHECK(summary["seeds"]["attack"] == 5);
  CHECK(summary["seeds"]["sampler"] == 2);
  CHECK(summary["attack"]["L"] == 10);
  CHECK(summary["config"] == doc);

  const auto m = io::read_csv((dir / "out" / "measure.csv").string());
  CHECK(m.rows.rows() == 6);
  CHECK(m.header == std::vector<std::string>{"weight", "mom", "kid"});

  const auto trace = io::read_csv((dir / "out" / "trace.csv").string());
  CHECK(trace.rows.rows() == 4);
  CHECK(trace.header[0] == "iteration");
  CHECK(trace.header[2] == "total_mass");

  std::string report;
  REQUIRE(run({"report", "--measure", (dir / "out" / "measure.csv").string(), "--data", data.string(), "--layout",
               (dir / "out" / "layout.json").string()},
              &report) == cli::kExitOk);
  CHECK(json::parse(report)["errors"] == summary["errors"]);

  SUBCASE("same seed gives identical outputs") {
    const std::string first = slurp(dir / "out" / "trace.csv");
    REQUIRE(run({"attack", "--config", (dir / "run.json").string()}) == cli::kExitOk);
    CHECK(slurp(dir / "out" / "trace.csv") == first);
  }
}

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch("cli_errors");
  std::string err;
  CHECK(run({"attack", "--config", (dir / "none.json").string()}, nullptr, &err) == cli::kExitConfigError);
  CHECK(err.find("none.json") != std::string::npos);

  write_text(dir / "bad.json", R"({"model": {"name": "kidscore", "colour": 1}})");
  CHECK(run({"sample", "--config", (dir / "bad.json").string()}, nullptr, &err) == cli::kExitConfigError);
  CHECK(err.find("model.colour") != std::string::npos);

  CHECK(run({"frobnicate"}) == cli::kExitConfigError);
  CHECK(run({"verify", "--filter", "no_such_check"}) == cli::kExitConfigError);

  std::string out;
  CHECK(run({"verify", "--filter", "nonbayes_mmd_identity"}, &out) == cli::kExitOk);
  CHECK(out.rfind("PASS nonbayes_mmd_identity", 0) == 0);
}
