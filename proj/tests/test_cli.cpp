#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "calving/cli/commands.hpp"
#include "calving/cli/verify.hpp"
#include "calving/synth/io.hpp"

using namespace calving;
using namespace calving::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() /
                   ("calving_cli_" + std::to_string(Rng(std::random_device{}()).next_u64()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::trunc);
  out << body;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config parsing: defaults, unknown keys, bad values, env overrides") {
  CHECK(parse_config(nlohmann::json::object()).seed == 1);
  CHECK(parse_config(nlohmann::json::object()).systems.size() == 11);

  CHECK_THROWS_AS(parse_config({{"seeed", 3}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"corpus", {{"drop_rat", 0.1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"systems", nlohmann::json::array({"ss-bogus"})}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"train", {{"learning_rate", -1.0}}}}), ContractViolation);
  CHECK_THROWS_AS(parse_config({{"eval", {{"threshold", 1.5}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config({{"corpus", {{"drop_rate", "lots"}}}}), ConfigError);

  auto cfg = parse_config({{"seed", 7},
                           {"systems", nlohmann::json::array({"ss-posture", "e2e"})},
                           {"corpus", {{"drop_rate", 0.2}}},
                           {"train", {{"max_epochs", 3}}}});
  CHECK(cfg.seed == 7);
  CHECK(cfg.systems ==
        std::vector<eval::SystemKind>{eval::SystemKind::ss_posture, eval::SystemKind::e2e});
  CHECK(cfg.corpus.drop_rate == 0.2);
  CHECK(cfg.cv.train.max_epochs == 3);

  setenv("CALVING_SEED", "99", 1);
  setenv("CALVING_OUT", "/tmp/elsewhere", 1);
  auto overridden = parse_config({{"seed", 7}, {"out_dir", "somewhere"}});
  CHECK(overridden.seed == 99);
  CHECK(overridden.out_dir == "/tmp/elsewhere");
  setenv("CALVING_SEED", "not-a-number", 1);
  CHECK_THROWS_AS(parse_config(nlohmann::json::object()), ConfigError);
  unsetenv("CALVING_SEED");
  unsetenv("CALVING_OUT");
}

TEST_CASE("cli round trip: synth, train, evaluate, resume and missing-model errors") {
  TempDir dir;
  const auto corpus_dir = dir.path / "corpus";
  const auto models_dir = dir.path / "models";
  const auto report_dir = dir.path / "report";

  // A small corpus keeps this test quick; the CLI reads whatever the
  // manifest describes.
  synth::CorpusConfig cc;
  cc.n_cows = 5;
  cc.windows_per_segment = 2;
  synth::write_corpus(synth::generate_corpus(cc, 5), corpus_dir.string());

  const std::string config = write_file(dir.path / "config.json", R"({
    "seed": 5,
    "systems": ["ss-posture", "ms-hlo-mixer"],
    "train": {"max_epochs": 3, "batch_size": 8}
  })");

  REQUIRE(cmd_train(config, corpus_dir.string(), models_dir.string(), 2) == kOk);
  CHECK(fs::exists(models_dir / "posture.0.model"));
  CHECK(fs::exists(models_dir / "movement.4.model"));
  CHECK(fs::exists(models_dir / "hlo-mixer.2.model"));
  CHECK(fs::exists(models_dir / "posture.0.history.json"));
  CHECK_FALSE(fs::exists(models_dir / "e2e.0.model"));
  CHECK_FALSE(fs::exists(models_dir / "INCOMPLETE.json"));

  // Resume: a second run must not rewrite anything.
  const auto before = fs::last_write_time(models_dir / "posture.0.model");
  const std::string bytes_before = slurp(models_dir / "posture.0.model");
  REQUIRE(cmd_train(config, corpus_dir.string(), models_dir.string(), 1) == kOk);
  CHECK(fs::last_write_time(models_dir / "posture.0.model") == before);
  CHECK(slurp(models_dir / "posture.0.model") == bytes_before);

  REQUIRE(cmd_evaluate(config, corpus_dir.string(), models_dir.string(),
                       report_dir.string()) == kOk);
  CHECK(fs::exists(report_dir / "report.json"));
  CHECK(fs::exists(report_dir / "summary.csv"));
  CHECK(fs::exists(report_dir / "roc_ss-posture.csv"));
  CHECK(fs::exists(report_dir / "weights_ms-hlo-mixer.csv"));

  const std::string summary = slurp(report_dir / "summary.csv");
  CHECK(summary.find("system,precision,recall,f1,auc") == 0);
  CHECK(summary.find("ss-posture,") != std::string::npos);

  // Weight-trace rows: one per window, 5 columns.
  const std::string trace = slurp(report_dir / "weights_ms-hlo-mixer.csv");
  long rows = std::count(trace.begin(), trace.end(), '\n');
  CHECK(rows == 1 + 20);  // header + 5 cows x 2 segments x 2 windows

  // Missing artifacts are named with their fold and system.
  fs::remove(models_dir / "movement.3.model");
  CHECK(cmd_evaluate(config, corpus_dir.string(), models_dir.string(), report_dir.string()) ==
        kMissingArtifact);

  // A fingerprint mismatch (config change) is a validation error.
  const std::string other_config = write_file(dir.path / "config2.json", R"({
    "seed": 5,
    "systems": ["ss-posture"],
    "train": {"max_epochs": 2, "batch_size": 8}
  })");
  CHECK(cmd_evaluate(other_config, corpus_dir.string(), models_dir.string(),
                     report_dir.string()) == kValidation);
}

TEST_CASE("cmd_synth writes a loadable corpus and is byte-stable across reruns") {
  TempDir dir;
  const std::string config = write_file(dir.path / "config.json", R"({"seed": 3})");
  const auto out_a = dir.path / "a";
  const auto out_b = dir.path / "b";
  REQUIRE(cmd_synth(config, out_a.string()) == kOk);
  REQUIRE(cmd_synth(config, out_b.string()) == kOk);
  CHECK(slurp(out_a / "manifest.json") == slurp(out_b / "manifest.json"));
  CHECK(slurp(out_a / "cow_00.jsonl") == slurp(out_b / "cow_00.jsonl"));
  synth::Corpus corpus = synth::read_corpus(out_a.string());
  CHECK(corpus.windows.size() == 180);

  CHECK(cmd_synth(write_file(dir.path / "bad.json", R"({"corpus": {"drop_rate": 2.0}})"),
                  (dir.path / "c").string()) == kValidation);
  CHECK(cmd_synth((dir.path / "nonexistent.json").string(), (dir.path / "d").string()) == kIo);
}

TEST_CASE("verify passes clean and fails under the gradient fault hook") {
  // Capture the per-check output so the intentional failure does not
  // pollute the test log.
  std::ostringstream captured;
  auto* old = std::cout.rdbuf(captured.rdbuf());
  const int clean = cmd_verify({});
  const int faulty = cmd_verify({true});
  std::cout.rdbuf(old);
  CHECK(clean == 0);
  CHECK(faulty != 0);
  CHECK(captured.str().find("[FAIL] gradients") != std::string::npos);
}
