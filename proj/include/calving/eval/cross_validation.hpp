#pragma once

#include <atomic>
#include <map>
#include <optional>
#include <thread>
#include <vector>

#include "calving/eval/metrics.hpp"
#include "calving/fusion/fusion.hpp"
#include "calving/synth/corpus.hpp"

namespace calving::eval {

// The systems compared by the harness, in the order the summary table uses.
enum class SystemKind {
  ms_posterior_average,
  ms_posterior_mixer,
  ms_hlo_concat,
  ms_hlo_mixer,
  upper_limit,
  max_prob_selection,
  min_prob_selection,
  e2e,
  ss_posture,
  ss_rotation,
  ss_movement
};

inline constexpr std::array<SystemKind, 11> kAllSystems = {
    SystemKind::ms_posterior_average, SystemKind::ms_posterior_mixer,
    SystemKind::ms_hlo_concat,        SystemKind::ms_hlo_mixer,
    SystemKind::upper_limit,          SystemKind::max_prob_selection,
    SystemKind::min_prob_selection,   SystemKind::e2e,
    SystemKind::ss_posture,           SystemKind::ss_rotation,
    SystemKind::ss_movement};

inline std::string system_name(SystemKind k) {
  switch (k) {
    case SystemKind::ms_posterior_average: return "ms-posterior-average";
    case SystemKind::ms_posterior_mixer: return "ms-posterior-mixer";
    case SystemKind::ms_hlo_concat: return "ms-hlo-concat";
    case SystemKind::ms_hlo_mixer: return "ms-hlo-mixer";
    case SystemKind::upper_limit: return "upper-limit";
    case SystemKind::max_prob_selection: return "max-prob-selection";
    case SystemKind::min_prob_selection: return "min-prob-selection";
    case SystemKind::e2e: return "e2e";
    case SystemKind::ss_posture: return "ss-posture";
    case SystemKind::ss_rotation: return "ss-rotation";
    case SystemKind::ss_movement: return "ss-movement";
  }
  throw ContractViolation("unknown system kind");
}

inline std::optional<SystemKind> parse_system(const std::string& name) {
  for (SystemKind k : kAllSystems)
    if (system_name(k) == name) return k;
  return std::nullopt;
}

inline bool is_single_stream(SystemKind k) {
  return k == SystemKind::e2e || k == SystemKind::ss_posture ||
         k == SystemKind::ss_rotation || k == SystemKind::ss_movement;
}

inline streams::StreamKind stream_of(SystemKind k) {
  switch (k) {
    case SystemKind::e2e: return streams::StreamKind::e2e;
    case SystemKind::ss_posture: return streams::StreamKind::posture;
    case SystemKind::ss_rotation: return streams::StreamKind::rotation;
    case SystemKind::ss_movement: return streams::StreamKind::movement;
    default: throw ContractViolation(system_name(k) + " is not a single-stream system");
  }
}

inline fusion::FusionKind fusion_of(SystemKind k) {
  switch (k) {
    case SystemKind::ms_posterior_average: return fusion::FusionKind::posterior_average;
    case SystemKind::ms_posterior_mixer: return fusion::FusionKind::posterior_mixer;
    case SystemKind::ms_hlo_concat: return fusion::FusionKind::hlo_concat;
    case SystemKind::ms_hlo_mixer: return fusion::FusionKind::hlo_mixer;
    case SystemKind::upper_limit: return fusion::FusionKind::upper_limit;
    case SystemKind::max_prob_selection: return fusion::FusionKind::max_prob;
    case SystemKind::min_prob_selection: return fusion::FusionKind::min_prob;
    default: throw ContractViolation(system_name(k) + " is not a fusion system");
  }
}

// Leave-one-cow-out outer folds with a rotating, seeded pair of inner
// validation cows drawn from the remaining ones.
struct FoldPlan {
  struct Fold {
    int test_cow = 0;
    std::vector<int> val_cows;
    std::vector<int> train_cows;
  };
  std::vector<Fold> folds;
};

inline constexpr int kInnerValidationCows = 2;

inline FoldPlan make_fold_plan(int n_cows, uint64_t seed) {
  if (n_cows < kInnerValidationCows + 2)
    throw ContractViolation("fold plan needs at least " +
                            std::to_string(kInnerValidationCows + 2) + " cows");
  FoldPlan plan;
  for (int test = 0; test < n_cows; ++test) {
    FoldPlan::Fold fold;
    fold.test_cow = test;
    std::vector<int> rest;
    for (int c = 0; c < n_cows; ++c)
      if (c != test) rest.push_back(c);
    Rng rng(mix_seed(seed, static_cast<uint64_t>(test), 0xF01D));
    rng.shuffle(rest);
    fold.val_cows.assign(rest.begin(), rest.begin() + kInnerValidationCows);
    fold.train_cows.assign(rest.begin() + kInnerValidationCows, rest.end());
    std::sort(fold.val_cows.begin(), fold.val_cows.end());
    std::sort(fold.train_cows.begin(), fold.train_cows.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

// Structural leakage check: every cow is the test cow exactly once and the
// test cow never appears in its fold's train or validation set.
inline void validate_fold_plan(const FoldPlan& plan, int n_cows) {
  std::vector<int> test_seen(static_cast<size_t>(n_cows), 0);
  for (const auto& fold : plan.folds) {
    ++test_seen[static_cast<size_t>(fold.test_cow)];
    std::vector<int> seen(static_cast<size_t>(n_cows), 0);
    seen[static_cast<size_t>(fold.test_cow)] = 1;
    if (static_cast<int>(fold.val_cows.size()) != kInnerValidationCows)
      throw ContractViolation("fold plan: wrong validation cow count");
    for (int c : fold.val_cows) {
      if (c == fold.test_cow)
        throw ContractViolation("fold plan leak: test cow in validation set");
      if (seen[static_cast<size_t>(c)]++)
        throw ContractViolation("fold plan: duplicate cow assignment");
    }
    for (int c : fold.train_cows) {
      if (c == fold.test_cow) throw ContractViolation("fold plan leak: test cow in train set");
      if (seen[static_cast<size_t>(c)]++)
        throw ContractViolation("fold plan: duplicate cow assignment");
    }
    for (int v : seen)
      if (v != 1) throw ContractViolation("fold plan: cow missing from a fold");
  }
  for (int v : test_seen)
    if (v != 1) throw ContractViolation("fold plan: some cow is not tested exactly once");
}

// Per-window features plus per-stream input tensors, shared by all folds.
struct FeatureTable {
  std::vector<streams::WindowFeatureSet> features;
  std::map<streams::StreamKind, std::vector<Tensor>> inputs;
  std::vector<int> labels;
};

inline FeatureTable build_feature_table(const synth::Corpus& corpus,
                                        bool raw_mixer_coordinates = false) {
  FeatureTable table;
  table.features.reserve(corpus.windows.size());
  for (const auto& w : corpus.windows) {
    table.features.push_back(streams::extract_features(w, raw_mixer_coordinates));
    table.labels.push_back(w.label);
  }
  for (streams::StreamKind kind :
       {streams::StreamKind::posture, streams::StreamKind::rotation,
        streams::StreamKind::movement, streams::StreamKind::e2e}) {
    auto& vec = table.inputs[kind];
    vec.reserve(table.features.size());
    for (const auto& f : table.features) vec.push_back(streams::stream_input(f, kind));
  }
  return table;
}

struct CvConfig {
  nn::TrainConfig train;
  double threshold = 0.5;  // decision threshold on the pre-calving probability
  bool raw_mixer_coordinates = false;
  int jobs = 1;
};

// Everything trained for one outer fold.
struct FoldArtifacts {
  int fold = 0;
  std::map<streams::StreamKind, streams::TrainedStream> streams;
  std::map<fusion::FusionKind, fusion::FusionModel> fusions;
};

namespace detail {

inline std::vector<int> windows_of_cows(const synth::Corpus& corpus,
                                        const std::vector<int>& cows) {
  std::vector<int> idx;
  for (size_t i = 0; i < corpus.windows.size(); ++i)
    for (int c : cows)
      if (corpus.windows[i].cow_id == c) idx.push_back(static_cast<int>(i));
  return idx;
}

// Any fusion/selection system consumes the outputs of all three core
// streams; single-stream systems need just their own.
inline bool needs_fusion_dataset(const std::vector<SystemKind>& systems) {
  for (SystemKind s : systems)
    if (!is_single_stream(s)) return true;
  return false;
}

inline std::vector<streams::StreamKind> required_streams(
    const std::vector<SystemKind>& systems) {
  std::vector<streams::StreamKind> out;
  auto add = [&](streams::StreamKind k) {
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  };
  if (needs_fusion_dataset(systems))
    for (streams::StreamKind k : streams::kFusedStreams) add(k);
  for (SystemKind s : systems)
    if (is_single_stream(s)) add(stream_of(s));
  return out;
}

}  // namespace detail

// Builds the frozen-stream dataset for fusion training/scoring: stream
// outputs and mixer inputs for every window, under this fold's streams.
inline fusion::FusionDataset build_fusion_dataset(const FeatureTable& table,
                                                  const FoldArtifacts& artifacts) {
  fusion::FusionDataset data;
  data.labels = table.labels;
  data.mixer_inputs.reserve(table.features.size());
  data.outputs.reserve(table.features.size());
  for (size_t i = 0; i < table.features.size(); ++i) {
    data.mixer_inputs.push_back(table.features[i].mixer);
    std::array<streams::StreamOutput, 3> outs;
    for (size_t s = 0; s < streams::kFusedStreams.size(); ++s) {
      const streams::StreamKind kind = streams::kFusedStreams[s];
      outs[s] = streams::stream_predict(artifacts.streams.at(kind).net,
                                        table.inputs.at(kind)[i], kind);
    }
    data.outputs.push_back(std::move(outs));
  }
  return data;
}

// Trains the streams and trainable fusion strategies for one fold. Stream
// parameters are frozen before fusion training begins; the fingerprint
// comparison makes any violation loud.
inline FoldArtifacts train_fold(const synth::Corpus& corpus, const FeatureTable& table,
                                const FoldPlan& plan, int fold,
                                const std::vector<SystemKind>& systems, const CvConfig& cfg,
                                uint64_t master_seed) {
  const auto& f = plan.folds[static_cast<size_t>(fold)];
  const std::vector<int> train_idx = detail::windows_of_cows(corpus, f.train_cows);
  const std::vector<int> val_idx = detail::windows_of_cows(corpus, f.val_cows);

  FoldArtifacts artifacts;
  artifacts.fold = fold;

  auto train_one = [&](streams::StreamKind kind) {
    nn::TrainConfig cfg_k = cfg.train;
    cfg_k.seed = mix_seed(master_seed, static_cast<uint64_t>(fold),
                          0x100 + static_cast<uint64_t>(kind));
    artifacts.streams[kind] =
        streams::train_stream(kind, table.inputs.at(kind), table.labels, train_idx, val_idx,
                              cfg_k);
  };

  for (streams::StreamKind kind : detail::required_streams(systems)) train_one(kind);

  std::vector<fusion::FusionKind> trainable;
  for (SystemKind s : systems)
    if (!is_single_stream(s) && fusion::fusion_trainable(fusion_of(s)))
      trainable.push_back(fusion_of(s));
  if (!trainable.empty()) {
    const fusion::FusionDataset data = build_fusion_dataset(table, artifacts);
    std::vector<uint64_t> frozen;
    for (streams::StreamKind kind : streams::kFusedStreams)
      frozen.push_back(artifacts.streams.at(kind).net.fingerprint());
    for (fusion::FusionKind fk : trainable) {
      nn::TrainConfig cfg_f = cfg.train;
      cfg_f.seed = mix_seed(master_seed, static_cast<uint64_t>(fold),
                            0x200 + static_cast<uint64_t>(fk));
      artifacts.fusions[fk] = fusion::train_fusion(fk, data, train_idx, val_idx, cfg_f);
    }
    for (size_t s = 0; s < streams::kFusedStreams.size(); ++s)
      if (artifacts.streams.at(streams::kFusedStreams[s]).net.fingerprint() != frozen[s])
        throw std::logic_error("stream parameters changed during fusion training");
  }
  return artifacts;
}

struct WindowScore {
  int window_id = 0;
  int cow_id = 0;
  int fold = 0;
  int label = 0;
  bool interference = false;
  double score = 0.0;  // pre-calving probability
  std::optional<fusion::MixtureWeights> weights;
};

// Scores this fold's test windows for every requested system.
inline std::map<SystemKind, std::vector<WindowScore>> score_fold(
    const synth::Corpus& corpus, const FeatureTable& table, const FoldPlan& plan, int fold,
    const std::vector<SystemKind>& systems, const FoldArtifacts& artifacts) {
  const auto& f = plan.folds[static_cast<size_t>(fold)];
  const std::vector<int> test_idx = detail::windows_of_cows(corpus, {f.test_cow});

  std::optional<fusion::FusionDataset> fusion_data;
  if (detail::needs_fusion_dataset(systems)) fusion_data = build_fusion_dataset(table, artifacts);

  std::map<SystemKind, std::vector<WindowScore>> scores;
  for (SystemKind sys : systems) scores[sys] = {};

  for (int i : test_idx) {
    const auto& w = corpus.windows[static_cast<size_t>(i)];
    WindowScore base;
    base.window_id = w.window_id;
    base.cow_id = w.cow_id;
    base.fold = fold;
    base.label = w.label;
    base.interference = w.interference;
    for (SystemKind sys : systems) {
      WindowScore ws = base;
      if (is_single_stream(sys)) {
        const streams::StreamKind kind = stream_of(sys);
        const auto out = streams::stream_predict(artifacts.streams.at(kind).net,
                                                 table.inputs.at(kind)[static_cast<size_t>(i)],
                                                 kind);
        ws.score = out.posterior[1];
      } else {
        const fusion::FusionKind fk = fusion_of(sys);
        fusion::FusionModel ephemeral{fk, std::nullopt, std::nullopt, {}};
        const fusion::FusionModel& model =
            artifacts.fusions.count(fk) ? artifacts.fusions.at(fk) : ephemeral;
        const auto pred = fusion::fusion_predict(
            model, fusion_data->outputs[static_cast<size_t>(i)],
            fusion_data->mixer_inputs[static_cast<size_t>(i)], w.label);
        ws.score = pred.posterior[1];
        ws.weights = pred.weights;
      }
      scores[sys].push_back(ws);
    }
  }
  return scores;
}

struct FoldMetrics {
  int fold = 0;
  int test_cow = 0;
  ConfusionCounts counts;
  PrfResult prf;
  double auc = 0.0;
  bool auc_defined = true;
};

struct SystemReport {
  SystemKind system = SystemKind::ss_posture;
  std::vector<WindowScore> scores;  // every corpus window exactly once
  std::vector<FoldMetrics> folds;
  ConfusionCounts counts;  // pooled over folds
  PrfResult prf;
  double auc = 0.0;
  RocResult roc;
};

struct EvalReport {
  uint64_t master_seed = 0;
  double threshold = 0.5;
  std::vector<SystemKind> systems_order;
  std::map<SystemKind, SystemReport> systems;
};

// Pools per-window scores into per-fold and aggregate metrics. Aggregate
// metrics pool all test scores across folds (micro-averaging).
inline EvalReport assemble_report(const synth::Corpus& corpus,
                                  const std::vector<SystemKind>& systems,
                                  std::map<SystemKind, std::vector<WindowScore>> all_scores,
                                  double threshold, uint64_t master_seed, int n_folds) {
  EvalReport report;
  report.master_seed = master_seed;
  report.threshold = threshold;
  report.systems_order = systems;
  for (SystemKind sys : systems) {
    SystemReport sr;
    sr.system = sys;
    sr.scores = std::move(all_scores.at(sys));
    std::sort(sr.scores.begin(), sr.scores.end(),
              [](const WindowScore& a, const WindowScore& b) {
                return a.window_id < b.window_id;
              });
    if (sr.scores.size() != corpus.windows.size())
      throw std::logic_error("system " + system_name(sys) + " scored " +
                             std::to_string(sr.scores.size()) + " windows, expected " +
                             std::to_string(corpus.windows.size()));
    for (size_t i = 1; i < sr.scores.size(); ++i)
      if (sr.scores[i].window_id == sr.scores[i - 1].window_id)
        throw std::logic_error("window scored twice for system " + system_name(sys));

    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;
    for (const auto& ws : sr.scores) {
      pooled_scores.push_back(ws.score);
      pooled_labels.push_back(ws.label);
    }
    sr.counts = confusion_counts(pooled_scores, pooled_labels, threshold);
    sr.prf = precision_recall_f1(sr.counts);
    sr.roc = roc_auc(pooled_scores, pooled_labels);
    sr.auc = sr.roc.auc;

    for (int fold = 0; fold < n_folds; ++fold) {
      std::vector<double> fs;
      std::vector<int> fl;
      int test_cow = -1;
      for (const auto& ws : sr.scores)
        if (ws.fold == fold) {
          fs.push_back(ws.score);
          fl.push_back(ws.label);
          test_cow = ws.cow_id;
        }
      FoldMetrics fm;
      fm.fold = fold;
      fm.test_cow = test_cow;
      fm.counts = confusion_counts(fs, fl, threshold);
      fm.prf = precision_recall_f1(fm.counts);
      const bool both = std::count(fl.begin(), fl.end(), 1) > 0 &&
                        std::count(fl.begin(), fl.end(), 0) > 0;
      if (both) {
        fm.auc = roc_auc(fs, fl).auc;
      } else {
        fm.auc_defined = false;
      }
      sr.folds.push_back(std::move(fm));
    }
    report.systems.emplace(sys, std::move(sr));
  }
  return report;
}

// The full protocol: per outer fold, train streams on the inner-train cows
// with early stopping on the inner-validation cows, train fusion with the
// streams frozen, then score the held-out cow. Deterministic per seed;
// folds run in parallel when cfg.jobs > 1 (results are independent of the
// thread count).
inline EvalReport run_nested_cv(const synth::Corpus& corpus,
                                const std::vector<SystemKind>& systems, const CvConfig& cfg,
                                uint64_t master_seed,
                                std::vector<FoldArtifacts>* artifacts_out = nullptr) {
  if (systems.empty()) throw ContractViolation("run_nested_cv: no systems requested");
  const FoldPlan plan = make_fold_plan(corpus.n_cows, master_seed);
  validate_fold_plan(plan, corpus.n_cows);
  const FeatureTable table = build_feature_table(corpus, cfg.raw_mixer_coordinates);

  const int n_folds = static_cast<int>(plan.folds.size());
  std::vector<std::map<SystemKind, std::vector<WindowScore>>> fold_scores(
      static_cast<size_t>(n_folds));
  std::vector<FoldArtifacts> artifacts(static_cast<size_t>(n_folds));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n_folds));

  auto run_one = [&](int fold) {
    try {
      artifacts[static_cast<size_t>(fold)] =
          train_fold(corpus, table, plan, fold, systems, cfg, master_seed);
      fold_scores[static_cast<size_t>(fold)] =
          score_fold(corpus, table, plan, fold, systems, artifacts[static_cast<size_t>(fold)]);
    } catch (...) {
      errors[static_cast<size_t>(fold)] = std::current_exception();
    }
  };

  const int jobs = std::max(1, std::min(cfg.jobs, n_folds));
  if (jobs == 1) {
    for (int fold = 0; fold < n_folds; ++fold) run_one(fold);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&] {
        for (;;) {
          const int fold = next.fetch_add(1);
          if (fold >= n_folds) return;
          run_one(fold);
        }
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::map<SystemKind, std::vector<WindowScore>> all_scores;
  for (SystemKind sys : systems) all_scores[sys] = {};
  for (const auto& fs : fold_scores)
    for (const auto& [sys, scores] : fs)
      all_scores[sys].insert(all_scores[sys].end(), scores.begin(), scores.end());

  if (artifacts_out) *artifacts_out = std::move(artifacts);
  return assemble_report(corpus, systems, std::move(all_scores), cfg.threshold, master_seed,
                         n_folds);
}

}  // namespace calving::eval
