#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI in dir with stderr merged into stdout.
Result run(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" STANCE_CLI "' " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh copy of the CLI fixture directory.
fs::path workspace(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stance_cli_" + name);
  fs::remove_all(dir);
  fs::copy(fs::path(STANCE_FIXTURE_DIR) / "cli", dir, fs::copy_options::recursive);
  return dir;
}

}  // namespace

TEST_CASE("evaluate reproduces the hand-computed 0.65") {
  const fs::path dir = workspace("evaluate");
  const Result r = run(dir, "evaluate --config config.json --topic AT --predictions example_predictions.tsv");
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(r.out.find("AT\t0.6500\t0.5000\t0.8000") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(dir / "out/reports/handmade.evaluation.json"));
  CHECK(report["topics"]["AT"]["official"].get<double>() == doctest::Approx(0.65));
  CHECK(report["seed"] == 7);
  CHECK(report["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("theorem-check passes with 100 trials") {
  const Result r = run(fs::temp_directory_path(), "theorem-check --trials 100 --posts 10");
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("max attention deviation") != std::string::npos);
}

TEST_CASE("grad-check passes") {
  const Result r = run(fs::temp_directory_path(), "grad-check");
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("cnn graph: PASS") != std::string::npos);
}

TEST_CASE("stats prints per-topic counts") {
  const Result r = run(workspace("stats"), "stats --config config.json");
  CHECK(r.code == 0);
  CHECK(r.out.find("AT\t10\t10\t10\t2\t2\t2") != std::string::npos);
  CHECK(r.out.find("HC\t10\t10\t10\t2\t2\t2") != std::string::npos);
}

TEST_CASE("exit codes") {
  const fs::path dir = workspace("exit");
  std::ofstream(dir / "bad_key.json") << R"({"model": "sen", "modle": "tan"})";
  std::ofstream(dir / "bad_path.json") << R"({"data": {"semeval_train": "missing.tsv"}})";
  Result r = run(dir, "stats --config bad_key.json");
  CHECK(r.code == 1);
  CHECK(r.out.find("'modle'") != std::string::npos);
  r = run(dir, "stats --config bad_path.json");
  CHECK(r.code == 1);
  CHECK(r.out.find((dir / "missing.tsv").string()) != std::string::npos);
  CHECK(run(dir, "nonsense").code == 1);
  CHECK(run(dir, "train --config config.json --model rnn").code == 1);
  CHECK(run(dir, "predict --config config.json --model sen").code == 1);
  CHECK(run(dir, "evaluate --config config.json --predictions example_predictions.tsv").code == 1);
  CHECK(run(dir, "ingest --config config.json --out /proc/stance-out").code == 2);
}

TEST_CASE("pipeline commands are reproducible") {
  const fs::path dir = workspace("pipeline");
  const auto all_outputs = [&] {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir / "out")) {
      if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return files;
  };
  const std::vector<std::string> commands = {
      "ingest --config config.json",
      "preprocess --config config.json",
      "train --config config.json --model sen",
      "predict --config config.json --model sen",
      "train --config config.json --model two-step",
      "predict --config config.json --model two-step",
      "train --config config.json --model cnn",
      "predict --config config.json --model cnn",
      "import-external --config config.json --topic AT --predictions example_predictions.tsv",
      "evaluate --config config.json --model sen",
      "compare --config config.json --topic AT --model sen,two-step,cnn,handmade --reference-rows",
      "error-analysis --config config.json --topic AT --model sen,cnn,handmade",
      "tune --config config.json --model sen",
  };
  std::vector<std::map<std::string, std::string>> snapshots;
  for (int round = 0; round < 2; ++round) {
    fs::remove_all(dir / "out");
    for (const std::string& c : commands) {
      const Result r = run(dir, c);
      INFO(c << "\n" << r.out);
      REQUIRE(r.code == 0);
    }
    snapshots.push_back(all_outputs());
  }
  CHECK(snapshots[0] == snapshots[1]);
  const auto& files = snapshots[0];
  for (const auto& [name, body] : files) {
    INFO(name);
    if (name.find("out/data/") == 0 && name.find("ingest.json") == std::string::npos) continue;
    if (name.find(".ckpt") != std::string::npos || name.find(".model") != std::string::npos ||
        name.find(".stage") != std::string::npos) {
      continue;
    }
    CHECK(body.find("config_hash") != std::string::npos);
  }
  const std::string table = files.at("out/reports/comparison.txt");
  CHECK(table.find("handmade") != std::string::npos);
  CHECK(table.find("CNN (reported)") != std::string::npos);
  const auto tune = nlohmann::json::parse(files.at("out/reports/AT.sen.tune.json"));
  CHECK(tune["test_split_reads"] == 0);
  const auto errors = nlohmann::json::parse(files.at("out/reports/error_analysis.json"));
  CHECK(errors["report"]["models"].size() == 3);
}

TEST_CASE("voting is byte-identical across reruns") {
  const fs::path dir = workspace("vote");
  std::vector<std::string> runs;
  for (int round = 0; round < 2; ++round) {
    fs::remove_all(dir / "out_vote");
    REQUIRE(run(dir, "train --config config_vote.json --model tan- --topic AT").code == 0);
    REQUIRE(run(dir, "predict --config config_vote.json --model tan- --topic AT").code == 0);
    runs.push_back(slurp(dir / "out_vote/predictions/AT.tan-.tsv") + slurp(dir / "out_vote/models/AT.tan-.votes.tsv"));
  }
  CHECK(runs[0] == runs[1]);
  CHECK(runs[0].find("config_hash=") == 2);
}
