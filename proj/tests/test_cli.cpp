#include "doctest.h"

#include "vbones/cli.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = vbones::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workspace() {
  static const fs::path dir = [] {
    auto p = fs::temp_directory_path() / "vbones_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    std::ofstream(p / "tiny.json") << R"({
      "model": {"hidden_width": 16, "num_residual_blocks": 1, "num_random_frames": 4},
      "training": {"epochs": 1, "batch_size": 32},
      "data": {"sequences_per_subject": 1, "motion": {"num_frames": 40}}
    })";
    return p;
  }();
  return dir;
}

nlohmann::json read(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("paths subcommand lists routes") {
  const Result r = run({"paths", "--config", "VB5", "--joint", "right_wrist", "--max-edges", "6"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("3 paths to right_wrist", 0) == 0);
  CHECK(r.out.find("pelvis -> thorax -> right_shoulder") == std::string::npos);
  CHECK(r.out.find("pelvis -> spine -> thorax -> right_shoulder -> right_elbow -> right_wrist") !=
        std::string::npos);
  const Result bad = run({"paths", "--config", "VB5", "--joint", "tail"});
  CHECK(bad.code == 1);
  CHECK(bad.err.rfind("error: code=", 0) == 0);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 2);
  CHECK(run({"paths", "--bogus"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"train", "--frames", "10", "--data", "x", "--out", "y"}).code == 2);
}

TEST_CASE("synth, train, eval and plot pipeline") {
  const fs::path ws = workspace();
  const std::string cfg = (ws / "tiny.json").string();
  Result r = run({"synth", "--config", cfg, "--out", (ws / "data").string(), "--seed", "2"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(ws / "data" / "index.json"));
  const auto manifest = read(ws / "data" / "manifest.json");
  CHECK(manifest.at("command") == "synth");
  CHECK(manifest.at("seed") == 2);
  CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
  CHECK(manifest.contains("code_version"));

  // Refuses to write into a non-empty directory unless forced.
  r = run({"synth", "--config", cfg, "--out", (ws / "data").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("code=io") != std::string::npos);

  r = run({"train", "--config", cfg, "--data", (ws / "data").string(), "--out", (ws / "run").string()});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(ws / "run" / "final.vbckpt"));
  CHECK(fs::exists(ws / "run" / "train_log.jsonl"));

  r = run({"eval", "--checkpoint", (ws / "run" / "final.vbckpt").string(), "--data",
           (ws / "data").string(), "--split", "test", "--out", (ws / "eval").string()});
  REQUIRE(r.code == 0);
  const auto report = read(ws / "eval" / "report.json");
  CHECK(report.at("average").at("protocol1_mpjpe").get<double>() > 0.0);

  // Prediction equal to ground truth scores zero everywhere.
  const std::string seq = (ws / "data" / "S9").string();
  std::string file;
  for (const auto& e : fs::directory_iterator(seq)) file = e.path().string();
  r = run({"eval", "--pred", file, "--gt", file, "--out", (ws / "same").string()});
  REQUIRE(r.code == 0);
  const auto same = read(ws / "same" / "report.json").at("average");
  for (const auto& [k, v] : same.items()) {
    if (v.is_number_float()) CHECK(v.get<double>() < 1e-9);
  }

  r = run({"plot", "--run", (ws / "run").string(), "--data", (ws / "data").string(), "--out",
           (ws / "plots").string()});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(ws / "plots" / "training_curves.png"));

  r = run({"eval", "--checkpoint", (ws / "missing.vbckpt").string(), "--data", (ws / "data").string(),
           "--out", (ws / "eval2").string()});
  CHECK(r.code == 1);
}

TEST_CASE("gradcheck subcommand") {
  const Result r = run({"gradcheck", "--params", "16", "--virtual", "VB5", "--batch", "4"});
  CHECK(r.code == 0);
  CHECK(r.out.find("max relative error") != std::string::npos);
}

TEST_CASE("config hash is stable") {
  CHECK(vbones::cli::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(vbones::cli::fnv1a_hex("a") == "af63dc4c8601ec8c");
}
