#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "wasscert/cli.hpp"
#include "wasscert/config.hpp"
#include "wasscert/errors.hpp"
#include "wasscert/io.hpp"

using namespace wasscert;
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("wasscert-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return (path / name).string();
  }
};

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path only_run_dir(const fs::path& parent) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(parent)) dirs.push_back(e.path());
  REQUIRE(dirs.size() == 1);
  return dirs.front();
}

std::string config_error(const std::string& text) {
  try {
    config_from_json(Json::parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config takes the documented defaults") {
  const auto c = config_from_json(Json::parse("{}"));
  CHECK(c.p == 2.0);
  CHECK(c.reps == 1);
  CHECK(c.n == 64);
  CHECK(c.hidden == std::vector<std::size_t>{64});
  CHECK(c.training.restarts == 5);
  CHECK(c.training.steps == 5000);
  CHECK(c.training.step_size == 0.01);
  CHECK(c.distribution == SamplingDistribution::uniform_cube(1));
  CHECK(c.output_dir == "results");
}

TEST_CASE("out-of-range and unknown keys are named") {
  CHECK(config_error(R"({"p": 0})").find("p >= 1") != std::string::npos);
  CHECK(config_error(R"({"bogus": 1})").find("bogus") != std::string::npos);
  CHECK(config_error(R"({"training": {"stepz": 1}})").find("training.stepz") != std::string::npos);
  CHECK(config_error(R"({"reps": "many"})").find("reps") != std::string::npos);
  CHECK(config_error(R"({"distribution": {"kind": "cauchy"}})").find("distribution") != std::string::npos);
}

TEST_CASE("persisted config reloads to an equal value") {
  const char* text = R"({
    "command": "converge-width",
    "distribution": {"kind": "two-component-mixture", "dim": 2,
                     "components": [{"mean": [0.2, 0.3], "scale": 0.1, "weight": 0.4},
                                    {"mean": [0.7, 0.8], "scale": 0.2, "weight": 0.6}],
                     "box": [0.0, 1.0]},
    "target": {"kind": "sinusoid", "amplitude": 0.5, "frequency": [1.0, 2.0]},
    "network": {"hidden": [8, 4], "activation": "tanh"},
    "training": {"restarts": 3, "steps": 10, "mode": "single-run-local", "spectral_cap": 2.5},
    "p": 1.5, "grid": [4, 8], "reps": 7, "schedule": "square", "seed": 18446744073709551615
  })";
  const auto c = config_from_json(Json::parse(text));
  CHECK(c.seed == 18446744073709551615ULL);
  CHECK(c.schedule == WidthSchedule::Square);
  const auto round = config_from_json(config_to_json(c));
  CHECK(round == c);
  CHECK(config_to_json(round).dump() == config_to_json(c).dump());
}

TEST_CASE("point files round-trip bit for bit") {
  TempDir dir;
  const PointCloud cloud(3, {0.1, -1e-300, 1.0 / 3.0, 2.5e10, 0.0, -7.0});
  const auto path = (dir.path / "p.csv").string();
  write_points(path, cloud);
  CHECK(read_points(path) == cloud);
  CHECK_THROWS_AS(read_points(dir.file("ragged.csv", "1,2\n3\n")), ConfigError);
  CHECK_THROWS_AS(read_points(dir.file("nan.csv", "1,x\n")), ConfigError);
}

TEST_CASE("wasserstein on identical files prints zero") {
  TempDir dir;
  const auto a = dir.file("a.csv", "0.1,0.2\n0.5,0.9\n0.3,0.3\n");
  const auto r = run_cli({"wasserstein", "--a", a, "--b", a, "--p", "2"});
  CHECK(r.code == kExitOk);
  const auto j = Json::parse(r.out);
  CHECK(j["distance"] == 0.0);
  CHECK(j["method"] == "exact-assignment");
  CHECK(j["residual"] == 0.0);
}

TEST_CASE("missing flags and bad configs exit with status 1") {
  TempDir dir;
  const auto r = run_cli({"wasserstein", "--a", "x.csv"});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("--b") != std::string::npos);
  const auto bad = run_cli({"train", "--config", dir.file("bad.json", R"({"p": 0})")});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("p >= 1") != std::string::npos);
  CHECK(run_cli({"nope"}).code == kExitConfig);
  CHECK(run_cli({}).code == kExitConfig);
}

TEST_CASE("driver failures exit with status 2") {
  TempDir dir;
  const auto cfg = dir.file("rf.json", R"({"grid": [4, 8, 16, 32], "reps": 20, "identical_pairs": true})");
  const auto r = run_cli({"rate-fit", "--config", cfg, "--out", (dir.path / "res").string()});
  CHECK(r.code == kExitOk);
  CHECK(Json::parse(r.out)["fitted"] == false);
  const auto a = dir.file("a.csv", "0\n1\n");
  const auto b = dir.file("b.csv", "0\n1\n2\n");
  const auto e = run_cli({"wasserstein", "--a", a, "--b", b, "--method", "exact"});
  CHECK(e.code == kExitNumerical);
}

TEST_CASE("sample writes a reproducible point file") {
  TempDir dir;
  const auto p1 = (dir.path / "1.csv").string(), p2 = (dir.path / "2.csv").string();
  CHECK(run_cli({"sample", "--dim", "2", "--n", "5", "--seed", "9", "--out", p1}).code == 0);
  CHECK(run_cli({"sample", "--dim", "2", "--n", "5", "--seed", "9", "--out", p2}).code == 0);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(read_points(p1).size() == 5);
}

TEST_CASE("rate-fit twice with the same seed gives identical cells") {
  TempDir dir;
  const auto cfg = dir.file("rate.json", R"({"distribution": {"kind": "uniform-cube", "dim": 2}, "p": 1,
                                               "grid": [4, 8, 16, 32], "reps": 20, "seed": 5})");
  const auto r1 = (dir.path / "r1").string(), r2 = (dir.path / "r2").string();
  REQUIRE(run_cli({"rate-fit", "--config", cfg, "--out", r1}).code == 0);
  REQUIRE(run_cli({"rate-fit", "--config", cfg, "--out", r2}).code == 0);
  const auto d1 = only_run_dir(fs::path(r1) / "rate-fit"), d2 = only_run_dir(fs::path(r2) / "rate-fit");
  const auto cells = slurp(d1 / "cells.csv");
  CHECK(cells == slurp(d2 / "cells.csv"));
  CHECK(cells.substr(0, cells.find('\n')) == "axis_value,rep,loss,risk,risk_se,wp,seed");
  CHECK(slurp(d1 / "summary.json") == slurp(d2 / "summary.json"));
  auto persisted = load_config((d1 / "config.json").string());
  CHECK(persisted.command == "rate-fit");
  CHECK(persisted.reps == 20);
}

TEST_CASE("train writes its run directory and certify appends rows") {
  TempDir dir;
  const auto cfg = dir.file("t.json", R"({"network": {"hidden": [4]}, "n": 8, "seed": 3,
                                            "training": {"restarts": 1, "steps": 50}})");
  const auto out = (dir.path / "res").string();
  const auto r = run_cli({"train", "--config", cfg, "--out", out});
  REQUIRE(r.code == 0);
  const auto run_dir = only_run_dir(fs::path(out) / "train");
  for (const char* f : {"config.json", "model.bin", "trace.csv", "summary.json", "points.csv"}) {
    CHECK(fs::exists(run_dir / f));
  }
  const auto trace = slurp(run_dir / "trace.csv");
  CHECK(trace.substr(0, trace.find('\n')) == "iteration,loss,restart");

  const auto csv = (dir.path / "certs.csv").string();
  for (int k = 0; k < 2; ++k) {
    const auto c = run_cli({"certify", "--config", cfg, "--model", (run_dir / "model.bin").string(), "--points",
                            (run_dir / "points.csv").string(), "--csv", csv});
    REQUIRE(c.code == 0);
    const auto j = Json::parse(c.out);
    CHECK(j["measured_risk"].get<double>() <= j["bound"].get<double>() + 1e-9);
  }
  std::istringstream rows(slurp(csv));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(rows, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "seed,N,M_ref,p,empirical_term,lipschitz,matching_term,bound,measured_risk,exact");
  CHECK(lines[1] == lines[2]);
}

TEST_CASE("a config written for another driver is refused") {
  TempDir dir;
  const auto cfg = dir.file("c.json", R"({"command": "rate-fit"})");
  const auto r = run_cli({"train", "--config", cfg, "--out", (dir.path / "o").string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("command") != std::string::npos);
}
