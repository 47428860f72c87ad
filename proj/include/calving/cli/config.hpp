#pragma once

#include <cstdlib>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "calving/eval/cross_validation.hpp"
#include "calving/synth/corpus.hpp"

namespace calving::cli {

struct ConfigError : ContractViolation {
  using ContractViolation::ContractViolation;
};

// Single JSON run configuration. Every key is optional (defaults apply);
// unknown keys are rejected. Environment overrides exist for the seed
// (CALVING_SEED) and output directory (CALVING_OUT) only.
struct RunConfig {
  uint64_t seed = 1;
  std::string out_dir = "out";
  std::vector<eval::SystemKind> systems{eval::kAllSystems.begin(), eval::kAllSystems.end()};
  synth::CorpusConfig corpus;
  eval::CvConfig cv;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& scope) {
  if (!j.is_object()) throw ConfigError("config: '" + scope + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in " + scope);
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline synth::StateRates parse_rates(const nlohmann::json& j, const synth::StateRates& base,
                                     const std::string& scope) {
  check_keys(j,
             {"posture_switch_per_hour", "tail_raise_prob", "rotation_per_hour",
              "walk_fraction", "walk_speed", "heatmap_noise", "hidden_noise"},
             scope);
  synth::StateRates r = base;
  r.posture_switch_per_hour = get_or(j, "posture_switch_per_hour", r.posture_switch_per_hour);
  r.tail_raise_prob = get_or(j, "tail_raise_prob", r.tail_raise_prob);
  r.rotation_per_hour = get_or(j, "rotation_per_hour", r.rotation_per_hour);
  r.walk_fraction = get_or(j, "walk_fraction", r.walk_fraction);
  r.walk_speed = get_or(j, "walk_speed", r.walk_speed);
  r.heatmap_noise = get_or(j, "heatmap_noise", r.heatmap_noise);
  r.hidden_noise = get_or(j, "hidden_noise", r.hidden_noise);
  return r;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig cfg;
  detail::check_keys(j, {"seed", "out_dir", "systems", "corpus", "train", "eval"}, "config root");

  cfg.seed = detail::get_or<uint64_t>(j, "seed", cfg.seed);
  cfg.out_dir = detail::get_or<std::string>(j, "out_dir", cfg.out_dir);

  if (j.contains("systems")) {
    cfg.systems.clear();
    for (const auto& sj : j.at("systems")) {
      const std::string name = sj.get<std::string>();
      if (name == "all") {
        cfg.systems.assign(eval::kAllSystems.begin(), eval::kAllSystems.end());
        break;
      }
      auto kind = eval::parse_system(name);
      if (!kind) throw ConfigError("config: unknown system '" + name + "'");
      cfg.systems.push_back(*kind);
    }
    if (cfg.systems.empty()) throw ConfigError("config: 'systems' must not be empty");
  }

  if (j.contains("corpus")) {
    const auto& cj = j.at("corpus");
    detail::check_keys(cj,
                       {"drop_rate", "cow_jitter", "garbage_prob", "posture_confusion_prob",
                        "interference", "profile"},
                       "corpus");
    cfg.corpus.drop_rate = detail::get_or(cj, "drop_rate", cfg.corpus.drop_rate);
    cfg.corpus.cow_jitter = detail::get_or(cj, "cow_jitter", cfg.corpus.cow_jitter);
    cfg.corpus.profile.garbage_prob =
        detail::get_or(cj, "garbage_prob", cfg.corpus.profile.garbage_prob);
    cfg.corpus.profile.posture_confusion_prob = detail::get_or(
        cj, "posture_confusion_prob", cfg.corpus.profile.posture_confusion_prob);
    if (cj.contains("interference")) {
      const auto& ij = cj.at("interference");
      detail::check_keys(ij, {"enabled", "window_fraction", "frame_prob"},
                         "corpus.interference");
      cfg.corpus.interference.enabled =
          detail::get_or(ij, "enabled", cfg.corpus.interference.enabled);
      cfg.corpus.interference.window_fraction =
          detail::get_or(ij, "window_fraction", cfg.corpus.interference.window_fraction);
      cfg.corpus.interference.frame_prob =
          detail::get_or(ij, "frame_prob", cfg.corpus.interference.frame_prob);
    }
    if (cj.contains("profile")) {
      const auto& pj = cj.at("profile");
      detail::check_keys(pj, {"normal", "pre_calving"}, "corpus.profile");
      if (pj.contains("normal"))
        cfg.corpus.profile.normal =
            detail::parse_rates(pj.at("normal"), cfg.corpus.profile.normal,
                                "corpus.profile.normal");
      if (pj.contains("pre_calving"))
        cfg.corpus.profile.pre_calving =
            detail::parse_rates(pj.at("pre_calving"), cfg.corpus.profile.pre_calving,
                                "corpus.profile.pre_calving");
    }
  }

  if (j.contains("train")) {
    const auto& tj = j.at("train");
    detail::check_keys(tj,
                       {"learning_rate", "batch_size", "lr_decay_factor", "patience_decay",
                        "patience_stop", "max_epochs"},
                       "train");
    auto& t = cfg.cv.train;
    t.learning_rate = detail::get_or(tj, "learning_rate", t.learning_rate);
    t.batch_size = detail::get_or(tj, "batch_size", t.batch_size);
    t.lr_decay_factor = detail::get_or(tj, "lr_decay_factor", t.lr_decay_factor);
    t.patience_decay = detail::get_or(tj, "patience_decay", t.patience_decay);
    t.patience_stop = detail::get_or(tj, "patience_stop", t.patience_stop);
    t.max_epochs = detail::get_or(tj, "max_epochs", t.max_epochs);
  }

  if (j.contains("eval")) {
    const auto& ej = j.at("eval");
    detail::check_keys(ej, {"threshold", "raw_mixer_coordinates"}, "eval");
    cfg.cv.threshold = detail::get_or(ej, "threshold", cfg.cv.threshold);
    cfg.cv.raw_mixer_coordinates =
        detail::get_or(ej, "raw_mixer_coordinates", cfg.cv.raw_mixer_coordinates);
    if (!(cfg.cv.threshold > 0.0 && cfg.cv.threshold < 1.0))
      throw ConfigError("config: eval.threshold must be in (0, 1)");
  }

  // Environment overrides (seed and output directory only).
  if (const char* env_seed = std::getenv("CALVING_SEED")) {
    try {
      cfg.seed = std::stoull(env_seed);
    } catch (const std::exception&) {
      throw ConfigError("CALVING_SEED must be an unsigned integer, got '" +
                        std::string(env_seed) + "'");
    }
  }
  if (const char* env_out = std::getenv("CALVING_OUT")) cfg.out_dir = env_out;

  cfg.corpus.validate();
  cfg.cv.train.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: malformed JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace calving::cli
