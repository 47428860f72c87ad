#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "calving/eval/cross_validation.hpp"

namespace calving::eval {

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

// %.17g round-trips doubles exactly and keeps CSV output byte-stable.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["master_seed"] = report.master_seed;
  j["threshold"] = report.threshold;
  nlohmann::json systems = nlohmann::json::array();
  for (SystemKind sys : report.systems_order) {
    const SystemReport& sr = report.systems.at(sys);
    nlohmann::json sj;
    sj["system"] = system_name(sys);
    sj["aggregate"] = {
        {"tp", sr.counts.tp},
        {"fp", sr.counts.fp},
        {"tn", sr.counts.tn},
        {"fn", sr.counts.fn},
        {"precision", sr.prf.precision},
        {"recall", sr.prf.recall},
        {"f1", sr.prf.f1},
        {"precision_defined", sr.prf.precision_defined},
        {"recall_defined", sr.prf.recall_defined},
        {"f1_defined", sr.prf.f1_defined},
        {"auc", sr.auc},
    };
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& fm : sr.folds) {
      folds.push_back({{"fold", fm.fold},
                       {"test_cow", fm.test_cow},
                       {"tp", fm.counts.tp},
                       {"fp", fm.counts.fp},
                       {"tn", fm.counts.tn},
                       {"fn", fm.counts.fn},
                       {"precision", fm.prf.precision},
                       {"recall", fm.prf.recall},
                       {"f1", fm.prf.f1},
                       {"auc", fm.auc},
                       {"auc_defined", fm.auc_defined}});
    }
    sj["folds"] = std::move(folds);
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& ws : sr.scores) {
      nlohmann::json wj = {{"window", ws.window_id}, {"cow", ws.cow_id},
                           {"fold", ws.fold},       {"label", ws.label},
                           {"interference", ws.interference}, {"score", ws.score}};
      if (ws.weights)
        wj["weights"] = {(*ws.weights)[0], (*ws.weights)[1], (*ws.weights)[2]};
      scores.push_back(std::move(wj));
    }
    sj["scores"] = std::move(scores);
    nlohmann::json roc = nlohmann::json::array();
    for (const auto& p : sr.roc.points) roc.push_back({p.fpr, p.tpr});
    sj["roc"] = std::move(roc);
    systems.push_back(std::move(sj));
  }
  j["systems"] = std::move(systems);
  return j;
}

inline void write_report_json(const EvalReport& report, const std::string& path) {
  detail::write_text(path, report_to_json(report).dump(2) + "\n");
}

// One row per system, in the fixed table order.
inline std::string summary_csv(const EvalReport& report) {
  std::string out = "system,precision,recall,f1,auc\n";
  for (SystemKind sys : report.systems_order) {
    const SystemReport& sr = report.systems.at(sys);
    out += system_name(sys) + "," + detail::num(sr.prf.precision) + "," +
           detail::num(sr.prf.recall) + "," + detail::num(sr.prf.f1) + "," +
           detail::num(sr.auc) + "\n";
  }
  return out;
}

inline std::string roc_csv(const SystemReport& sr) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : sr.roc.points)
    out += detail::num(p.fpr) + "," + detail::num(p.tpr) + "\n";
  return out;
}

// One row per window: the mixture weights and the fused probability.
inline std::string weight_trace_csv(const SystemReport& sr) {
  std::string out = "window_id,w_posture,w_rotation,w_movement,fused_probability\n";
  for (const auto& ws : sr.scores) {
    if (!ws.weights) continue;
    out += std::to_string(ws.window_id) + "," + detail::num((*ws.weights)[0]) + "," +
           detail::num((*ws.weights)[1]) + "," + detail::num((*ws.weights)[2]) + "," +
           detail::num(ws.score) + "\n";
  }
  return out;
}

}  // namespace calving::eval
