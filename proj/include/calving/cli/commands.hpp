#pragma once

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "calving/cli/config.hpp"
#include "calving/eval/report_io.hpp"
#include "calving/nn/serialize.hpp"
#include "calving/synth/io.hpp"

namespace calving::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,       // reserved for the argument parser
  kValidation = 2,  // config or contract violations
  kIo = 3,          // filesystem and parse failures
  kTraining = 4,    // divergence during training
  kMissingArtifact = 5,
  kVerifyFailed = 6,
  kInternal = 10,
};

struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const MissingArtifactError& e) {
    std::cerr << "error (missing artifact): " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const nn::TrainDiverged& e) {
    std::cerr << "error (training): " << e.what() << "\n";
    return kTraining;
  } catch (const ConfigError& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return kValidation;
  } catch (const ParseError& e) {
    std::cerr << "error (parse): " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return kIo;
  } catch (const ContractViolation& e) {
    std::cerr << "error (validation): " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

namespace detail {

inline uint64_t hash_u64(uint64_t h, uint64_t v) { return fnv1a(&v, sizeof v, h); }

inline uint64_t corpus_fingerprint(const synth::Corpus& corpus) {
  uint64_t h = 0xcbf29ce484222325ULL;
  h = hash_u64(h, corpus.master_seed);
  h = hash_u64(h, static_cast<uint64_t>(corpus.n_cows));
  for (const auto& w : corpus.windows) {
    h = hash_u64(h, static_cast<uint64_t>(w.window_id));
    h = hash_u64(h, static_cast<uint64_t>(w.cow_id));
    h = hash_u64(h, static_cast<uint64_t>(w.label));
    h = hash_u64(h, static_cast<uint64_t>(w.interference));
    for (const auto& f : w.frames) {
      h = hash_u64(h, static_cast<uint64_t>(f.valid));
      h = fnv1a(std::span<const double>(f.posture_posterior), h);
      h = fnv1a(std::span<const double>(f.posture_hidden), h);
      h = fnv1a(std::span<const double>(f.neck_heatmap), h);
      h = fnv1a(std::span<const double>(f.tail_heatmap), h);
      h = fnv1a(std::span<const double>(f.bbox), h);
    }
  }
  return h;
}

inline uint64_t train_fingerprint(uint64_t corpus_fp, const RunConfig& cfg, int fold) {
  uint64_t h = corpus_fp;
  h = hash_u64(h, cfg.seed);
  const auto& t = cfg.cv.train;
  h = fnv1a(&t.learning_rate, sizeof t.learning_rate, h);
  h = hash_u64(h, static_cast<uint64_t>(t.batch_size));
  h = fnv1a(&t.lr_decay_factor, sizeof t.lr_decay_factor, h);
  h = hash_u64(h, static_cast<uint64_t>(t.patience_decay));
  h = hash_u64(h, static_cast<uint64_t>(t.patience_stop));
  h = hash_u64(h, static_cast<uint64_t>(t.max_epochs));
  h = hash_u64(h, static_cast<uint64_t>(cfg.cv.raw_mixer_coordinates));
  h = hash_u64(h, static_cast<uint64_t>(fold));
  return h;
}

inline std::string hex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

inline std::string model_path(const std::string& dir, const std::string& name, int fold) {
  return (std::filesystem::path(dir) / (name + "." + std::to_string(fold) + ".model")).string();
}

inline std::string history_path(const std::string& dir, const std::string& name, int fold) {
  return (std::filesystem::path(dir) / (name + "." + std::to_string(fold) + ".history.json"))
      .string();
}

// Names of the model files a fold must produce for the requested systems.
inline std::vector<std::string> artifact_names(const std::vector<eval::SystemKind>& systems) {
  std::vector<std::string> names;
  for (auto kind : eval::detail::required_streams(systems))
    names.push_back(streams::stream_name(kind));
  for (eval::SystemKind s : systems)
    if (!eval::is_single_stream(s) && fusion::fusion_trainable(eval::fusion_of(s)))
      names.push_back(fusion::fusion_name(eval::fusion_of(s)));
  return names;
}

inline void save_fusion_model(const fusion::FusionModel& model, const std::string& path,
                              const std::string& fingerprint) {
  nlohmann::json j;
  j["schema_version"] = nn::kModelSchemaVersion;
  j["fusion"] = fusion::fusion_name(model.kind);
  j["mixer"] = model.mixer ? nn::network_to_json(*model.mixer) : nlohmann::json();
  j["head"] = model.head ? nn::network_to_json(*model.head) : nlohmann::json();
  j["train_fingerprint"] = fingerprint;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(0) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline fusion::FusionModel load_fusion_model(const std::string& path,
                                             nlohmann::json* full = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model file '" + path + "': " + e.what());
  }
  if (full) *full = j;
  fusion::FusionModel model;
  const std::string name = j.at("fusion").get<std::string>();
  bool found = false;
  for (auto fk : {fusion::FusionKind::posterior_average, fusion::FusionKind::posterior_mixer,
                  fusion::FusionKind::hlo_concat, fusion::FusionKind::hlo_mixer,
                  fusion::FusionKind::max_prob, fusion::FusionKind::min_prob,
                  fusion::FusionKind::upper_limit})
    if (fusion::fusion_name(fk) == name) {
      model.kind = fk;
      found = true;
    }
  if (!found) throw IoError("unknown fusion kind '" + name + "' in '" + path + "'");
  if (!j.at("mixer").is_null()) model.mixer = nn::network_from_json(j.at("mixer"));
  if (!j.at("head").is_null()) model.head = nn::network_from_json(j.at("head"));
  return model;
}

inline std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    return {};
  }
  if (!j.contains("train_fingerprint")) return {};
  return j.at("train_fingerprint").get<std::string>();
}

}  // namespace detail

// synth: generate the corpus and write it under out_dir.
inline int cmd_synth(const std::string& config_path, const std::string& out_dir) {
  return run_guarded([&] {
    RunConfig cfg = load_config(config_path);
    const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
    synth::Corpus corpus = synth::generate_corpus(cfg.corpus, cfg.seed);
    synth::write_corpus(corpus, dir);
    long pos = 0, neg = 0;
    for (const auto& w : corpus.windows) (w.label == 1 ? pos : neg)++;
    std::cout << "corpus written to " << dir << "\n"
              << "windows: " << corpus.windows.size() << " (pre-calving " << pos << ", normal "
              << neg << ")\n";
    return kOk;
  });
}

// train: per outer fold, train the stream identifiers and trainable fusion
// strategies and save them with their histories. Completed folds whose
// fingerprints match are skipped, which makes reruns resume-safe.
inline int cmd_train(const std::string& config_path, const std::string& corpus_dir,
                     const std::string& out_dir, int jobs) {
  return run_guarded([&] {
    RunConfig cfg = load_config(config_path);
    const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
    std::filesystem::create_directories(dir);
    const synth::Corpus corpus = synth::read_corpus(corpus_dir);
    const uint64_t corpus_fp = detail::corpus_fingerprint(corpus);
    const eval::FoldPlan plan = eval::make_fold_plan(corpus.n_cows, cfg.seed);
    eval::validate_fold_plan(plan, corpus.n_cows);
    const eval::FeatureTable table =
        eval::build_feature_table(corpus, cfg.cv.raw_mixer_coordinates);
    const auto names = detail::artifact_names(cfg.systems);
    const int n_folds = static_cast<int>(plan.folds.size());

    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<size_t>(n_folds));
    std::atomic<long> skipped{0};

    auto run_fold = [&](int fold) {
      const std::string fp = detail::hex(detail::train_fingerprint(corpus_fp, cfg, fold));
      bool complete = true;
      for (const auto& name : names) {
        if (detail::file_fingerprint(detail::model_path(dir, name, fold)) != fp ||
            !std::filesystem::exists(detail::history_path(dir, name, fold))) {
          complete = false;
          break;
        }
      }
      if (complete) {
        ++skipped;
        return;
      }
      eval::FoldArtifacts artifacts =
          eval::train_fold(corpus, table, plan, fold, cfg.systems, cfg.cv, cfg.seed);
      for (const auto& [kind, trained] : artifacts.streams) {
        const std::string name = streams::stream_name(kind);
        nn::save_network(trained.net, detail::model_path(dir, name, fold),
                         {{"train_fingerprint", fp}, {"stream", name}});
        eval::detail::write_json_file(nn::history_to_json(trained.history),
                                      detail::history_path(dir, name, fold));
      }
      for (const auto& [fkind, model] : artifacts.fusions) {
        const std::string name = fusion::fusion_name(fkind);
        detail::save_fusion_model(model, detail::model_path(dir, name, fold), fp);
        eval::detail::write_json_file(nn::history_to_json(model.history),
                                      detail::history_path(dir, name, fold));
      }
    };

    const int workers = std::max(1, std::min(jobs, n_folds));
    auto worker = [&] {
      for (;;) {
        const int fold = next.fetch_add(1);
        if (fold >= n_folds) return;
        try {
          run_fold(fold);
        } catch (...) {
          errors[static_cast<size_t>(fold)] = std::current_exception();
        }
      }
    };
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int j = 0; j < workers; ++j) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (int fold = 0; fold < n_folds; ++fold) {
      if (errors[static_cast<size_t>(fold)]) {
        // Flag the partial state before propagating the failure.
        eval::detail::write_json_file(
            nlohmann::json{{"incomplete", true}, {"failed_fold", fold}},
            (std::filesystem::path(dir) / "INCOMPLETE.json").string());
        std::rethrow_exception(errors[static_cast<size_t>(fold)]);
      }
    }
    std::filesystem::remove(std::filesystem::path(dir) / "INCOMPLETE.json");
    std::cout << "trained " << (n_folds - skipped.load()) << " fold(s), skipped "
              << skipped.load() << " up-to-date fold(s); models in " << dir << "\n";
    return kOk;
  });
}

// evaluate: load per-fold models, score every held-out window, and emit the
// report JSON, the summary table, ROC points, and mixer weight traces.
inline int cmd_evaluate(const std::string& config_path, const std::string& corpus_dir,
                        const std::string& models_dir, const std::string& out_dir) {
  return run_guarded([&] {
    RunConfig cfg = load_config(config_path);
    const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
    std::filesystem::create_directories(dir);
    const synth::Corpus corpus = synth::read_corpus(corpus_dir);
    const uint64_t corpus_fp = detail::corpus_fingerprint(corpus);
    const eval::FoldPlan plan = eval::make_fold_plan(corpus.n_cows, cfg.seed);
    eval::validate_fold_plan(plan, corpus.n_cows);
    const eval::FeatureTable table =
        eval::build_feature_table(corpus, cfg.cv.raw_mixer_coordinates);
    const auto names = detail::artifact_names(cfg.systems);
    const int n_folds = static_cast<int>(plan.folds.size());

    // All artifacts must exist before any scoring starts.
    std::vector<std::string> missing;
    for (int fold = 0; fold < n_folds; ++fold)
      for (const auto& name : names)
        if (!std::filesystem::exists(detail::model_path(models_dir, name, fold)))
          missing.push_back(name + " (fold " + std::to_string(fold) + ")");
    if (!missing.empty()) {
      std::string what = "missing model files:";
      for (const auto& m : missing) what += " " + m + ";";
      throw MissingArtifactError(what);
    }

    std::map<eval::SystemKind, std::vector<eval::WindowScore>> all_scores;
    for (auto sys : cfg.systems) all_scores[sys] = {};
    for (int fold = 0; fold < n_folds; ++fold) {
      const std::string fp = detail::hex(detail::train_fingerprint(corpus_fp, cfg, fold));
      eval::FoldArtifacts artifacts;
      artifacts.fold = fold;
      auto load_stream = [&](streams::StreamKind kind) {
        const std::string path =
            detail::model_path(models_dir, streams::stream_name(kind), fold);
        nlohmann::json full;
        nn::Network net = nn::load_network(path, &full);
        if (full.contains("train_fingerprint") &&
            full.at("train_fingerprint").get<std::string>() != fp)
          throw ConfigError("model '" + path +
                            "' was trained under a different corpus/config (fingerprint "
                            "mismatch); re-run train");
        artifacts.streams[kind] = streams::TrainedStream{std::move(net), {}};
      };
      for (auto kind : eval::detail::required_streams(cfg.systems)) load_stream(kind);
      for (eval::SystemKind s : cfg.systems) {
        if (eval::is_single_stream(s)) continue;
        const auto fk = eval::fusion_of(s);
        if (!fusion::fusion_trainable(fk)) continue;
        artifacts.fusions[fk] = detail::load_fusion_model(
            detail::model_path(models_dir, fusion::fusion_name(fk), fold));
      }
      auto fold_scores = eval::score_fold(corpus, table, plan, fold, cfg.systems, artifacts);
      for (auto& [sys, scores] : fold_scores)
        all_scores[sys].insert(all_scores[sys].end(), scores.begin(), scores.end());
    }

    eval::EvalReport report = eval::assemble_report(corpus, cfg.systems, std::move(all_scores),
                                                    cfg.cv.threshold, cfg.seed, n_folds);
    namespace fs = std::filesystem;
    eval::write_report_json(report, (fs::path(dir) / "report.json").string());
    eval::detail::write_text((fs::path(dir) / "summary.csv").string(),
                             eval::summary_csv(report));
    for (auto sys : cfg.systems) {
      const auto& sr = report.systems.at(sys);
      eval::detail::write_text(
          (fs::path(dir) / ("roc_" + eval::system_name(sys) + ".csv")).string(),
          eval::roc_csv(sr));
      if (sys == eval::SystemKind::ms_posterior_mixer || sys == eval::SystemKind::ms_hlo_mixer)
        eval::detail::write_text(
            (fs::path(dir) / ("weights_" + eval::system_name(sys) + ".csv")).string(),
            eval::weight_trace_csv(sr));
    }
    std::cout << "report written to " << dir << "\n" << eval::summary_csv(report);
    return kOk;
  });
}

}  // namespace calving::cli
