#include "doctest.h"

#include "calving/eval/cross_validation.hpp"
#include "calving/eval/report_io.hpp"

using namespace calving;
using namespace calving::eval;

namespace {

synth::Corpus small_corpus(uint64_t seed) {
  synth::CorpusConfig cfg;
  cfg.n_cows = 5;
  cfg.windows_per_segment = 2;
  return synth::generate_corpus(cfg, seed);
}

CvConfig fast_cv() {
  CvConfig cfg;
  cfg.train.max_epochs = 4;
  cfg.train.batch_size = 8;
  return cfg;
}

}  // namespace

TEST_CASE("nested CV scores every window exactly once per system") {
  synth::Corpus corpus = small_corpus(21);
  const std::vector<SystemKind> systems{SystemKind::ss_posture, SystemKind::ms_posterior_average,
                                        SystemKind::ms_hlo_mixer, SystemKind::upper_limit};
  EvalReport report = run_nested_cv(corpus, systems, fast_cv(), 21);
  for (SystemKind sys : systems) {
    const auto& sr = report.systems.at(sys);
    CHECK(sr.scores.size() == corpus.windows.size());
    for (size_t i = 0; i < sr.scores.size(); ++i)
      CHECK(sr.scores[i].window_id == static_cast<int>(i));  // each exactly once, sorted
    CHECK(sr.folds.size() == 5);
    CHECK(sr.counts.total() == static_cast<long>(corpus.windows.size()));
    CHECK(sr.auc >= 0.0);
    CHECK(sr.auc <= 1.0);
  }
  // Mixer systems carry weight traces for every window.
  for (const auto& ws : report.systems.at(SystemKind::ms_hlo_mixer).scores) {
    REQUIRE(ws.weights.has_value());
    const auto& w = *ws.weights;
    CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (const auto& ws : report.systems.at(SystemKind::ss_posture).scores)
    CHECK_FALSE(ws.weights.has_value());
}

TEST_CASE("nested CV is deterministic and parallelism does not change results") {
  synth::Corpus corpus = small_corpus(8);
  const std::vector<SystemKind> systems{SystemKind::ss_rotation, SystemKind::ms_hlo_mixer};
  CvConfig serial = fast_cv();
  EvalReport a = run_nested_cv(corpus, systems, serial, 5);
  EvalReport b = run_nested_cv(corpus, systems, serial, 5);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());

  CvConfig parallel = fast_cv();
  parallel.jobs = 3;
  EvalReport c = run_nested_cv(corpus, systems, parallel, 5);
  CHECK(report_to_json(a).dump() == report_to_json(c).dump());
}

TEST_CASE("upper limit dominates every other system on the same outputs") {
  synth::Corpus corpus = small_corpus(33);
  const std::vector<SystemKind> systems{
      SystemKind::ss_posture,         SystemKind::ss_rotation,
      SystemKind::ss_movement,        SystemKind::ms_posterior_average,
      SystemKind::max_prob_selection, SystemKind::min_prob_selection,
      SystemKind::upper_limit};
  EvalReport report = run_nested_cv(corpus, systems, fast_cv(), 33);
  const double ul = report.systems.at(SystemKind::upper_limit).auc;
  for (SystemKind sys : systems) CHECK(ul >= report.systems.at(sys).auc);

  const auto& max_prf = report.systems.at(SystemKind::max_prob_selection).prf;
  const auto& min_prf = report.systems.at(SystemKind::min_prob_selection).prf;
  CHECK(max_prf.recall >= min_prf.recall);
}

TEST_CASE("stream parameters stay frozen through fusion training") {
  synth::Corpus corpus = small_corpus(44);
  const FeatureTable table = build_feature_table(corpus);
  const FoldPlan plan = make_fold_plan(corpus.n_cows, 44);
  // train_fold contains the fingerprint assertion; surviving it is the test.
  FoldArtifacts artifacts = train_fold(corpus, table, plan, 0,
                                       {SystemKind::ms_hlo_mixer, SystemKind::ms_posterior_mixer},
                                       fast_cv(), 44);
  CHECK(artifacts.streams.size() == 3);
  CHECK(artifacts.fusions.count(fusion::FusionKind::hlo_mixer) == 1);
  CHECK(artifacts.fusions.count(fusion::FusionKind::posterior_mixer) == 1);
  CHECK(artifacts.fusions.at(fusion::FusionKind::hlo_mixer).mixer.has_value());
  CHECK(artifacts.fusions.at(fusion::FusionKind::hlo_mixer).head.has_value());
}

TEST_CASE("report serialization carries the table order and roc endpoints") {
  synth::Corpus corpus = small_corpus(13);
  const std::vector<SystemKind> systems{SystemKind::ms_posterior_average,
                                        SystemKind::ss_posture};
  EvalReport report = run_nested_cv(corpus, systems, fast_cv(), 13);
  auto j = report_to_json(report);
  CHECK(j.at("systems").size() == 2);
  CHECK(j.at("systems")[0].at("system") == "ms-posterior-average");
  CHECK(j.at("systems")[1].at("system") == "ss-posture");

  const std::string csv = summary_csv(report);
  CHECK(csv.find("system,precision,recall,f1,auc\n") == 0);
  CHECK(csv.find("ms-posterior-average,") != std::string::npos);

  const auto& sr = report.systems.at(SystemKind::ss_posture);
  CHECK(sr.roc.points.front().fpr == 0.0);
  CHECK(sr.roc.points.front().tpr == 0.0);
  CHECK(sr.roc.points.back().fpr == 1.0);
  CHECK(sr.roc.points.back().tpr == 1.0);

  const std::string trace = weight_trace_csv(report.systems.at(SystemKind::ms_posterior_average));
  CHECK(trace == "window_id,w_posture,w_rotation,w_movement,fused_probability\n");
}

TEST_CASE("run_nested_cv validates its inputs") {
  synth::Corpus corpus = small_corpus(3);
  CHECK_THROWS_AS(run_nested_cv(corpus, {}, fast_cv(), 3), ContractViolation);
}
