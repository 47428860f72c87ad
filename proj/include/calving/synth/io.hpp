#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "calving/synth/corpus.hpp"

namespace calving::synth {

inline constexpr int kCorpusSchemaVersion = 1;

namespace detail {

inline nlohmann::json frame_to_json(const FrameFeature& f) {
  nlohmann::json j;
  j["t"] = f.t;
  j["valid"] = f.valid;
  j["posture"] = f.posture_posterior;
  j["hidden"] = f.posture_hidden;
  j["neck"] = f.neck_heatmap;
  j["tail"] = f.tail_heatmap;
  j["bbox"] = f.bbox;
  return j;
}

template <size_t N>
void read_array(const nlohmann::json& j, const char* key, std::array<double, N>& out) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != N)
    throw IoError(std::string("field '") + key + "' must be an array of " + std::to_string(N));
  for (size_t i = 0; i < N; ++i) out[i] = a[i].get<double>();
}

inline FrameFeature frame_from_json(const nlohmann::json& j) {
  FrameFeature f;
  f.t = j.at("t").get<int>();
  f.valid = j.at("valid").get<bool>();
  read_array(j, "posture", f.posture_posterior);
  read_array(j, "hidden", f.posture_hidden);
  read_array(j, "neck", f.neck_heatmap);
  read_array(j, "tail", f.tail_heatmap);
  read_array(j, "bbox", f.bbox);
  return f;
}

inline std::string cow_file_name(int cow) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cow_%02d.jsonl", cow);
  return buf;
}

}  // namespace detail

// Layout: <dir>/manifest.json plus one JSONL record file per cow, one frame
// per line, windows addressed by (file, start_line, frames) in the manifest.
inline void write_corpus(const Corpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::map<int, std::ofstream> files;
  std::map<int, long> next_line;
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : corpus.windows) {
    auto [it, created] = files.try_emplace(w.cow_id);
    if (created) {
      const auto path = fs::path(dir) / detail::cow_file_name(w.cow_id);
      it->second.open(path, std::ios::binary | std::ios::trunc);
      if (!it->second) throw IoError("cannot open '" + path.string() + "' for writing");
      next_line[w.cow_id] = 0;
    }
    nlohmann::json entry;
    entry["id"] = w.window_id;
    entry["cow"] = w.cow_id;
    entry["label"] = w.label;
    entry["interference"] = w.interference;
    entry["file"] = detail::cow_file_name(w.cow_id);
    entry["start_line"] = next_line[w.cow_id];
    entry["frames"] = w.frames.size();
    windows.push_back(std::move(entry));
    for (const auto& f : w.frames) {
      it->second << detail::frame_to_json(f).dump() << '\n';
      ++next_line[w.cow_id];
    }
  }
  for (auto& [cow, out] : files)
    if (!out) throw IoError("write failed for record file of cow " + std::to_string(cow));

  nlohmann::json manifest;
  manifest["schema_version"] = kCorpusSchemaVersion;
  manifest["n_cows"] = corpus.n_cows;
  manifest["master_seed"] = corpus.master_seed;
  manifest["window_frames"] = kWindowFrames;
  manifest["windows"] = std::move(windows);
  const auto manifest_path = fs::path(dir) / "manifest.json";
  std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + manifest_path.string() + "' for writing");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + manifest_path.string() + "'");
}

inline Corpus read_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus manifest '" + manifest_path.string() + "'");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest '" + manifest_path.string() + "': " + e.what());
  }
  const int version = manifest.at("schema_version").get<int>();
  if (version != kCorpusSchemaVersion)
    throw IoError("corpus schema version " + std::to_string(version) +
                  " not supported (expected " + std::to_string(kCorpusSchemaVersion) + ")");

  // Load every record file as parsed lines, with line numbers for errors.
  std::map<std::string, std::vector<nlohmann::json>> records;
  for (const auto& wj : manifest.at("windows")) {
    const std::string file = wj.at("file").get<std::string>();
    if (records.count(file)) continue;
    const auto path = fs::path(dir) / file;
    std::ifstream rec(path, std::ios::binary);
    if (!rec) throw IoError("cannot open record file '" + path.string() + "'");
    std::vector<nlohmann::json> lines;
    std::string line;
    long line_no = 0;
    while (std::getline(rec, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        lines.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed frame record: ") + e.what(), path.string(),
                         line_no);
      }
    }
    records.emplace(file, std::move(lines));
  }

  Corpus corpus;
  corpus.n_cows = manifest.at("n_cows").get<int>();
  corpus.master_seed = manifest.at("master_seed").get<uint64_t>();
  long referenced = 0;
  for (const auto& wj : manifest.at("windows")) {
    WindowSample w;
    w.window_id = wj.at("id").get<int>();
    w.cow_id = wj.at("cow").get<int>();
    w.label = wj.at("label").get<int>();
    w.interference = wj.at("interference").get<bool>();
    const std::string file = wj.at("file").get<std::string>();
    const long start = wj.at("start_line").get<long>();
    const long count = wj.at("frames").get<long>();
    const auto& lines = records.at(file);
    if (start < 0 || start + count > static_cast<long>(lines.size()))
      throw IoError("manifest window " + std::to_string(w.window_id) + " references lines [" +
                    std::to_string(start) + ", " + std::to_string(start + count) +
                    ") beyond record file '" + file + "' with " +
                    std::to_string(lines.size()) + " records");
    for (long i = 0; i < count; ++i) {
      try {
        w.frames.push_back(detail::frame_from_json(lines[static_cast<size_t>(start + i)]));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad frame record: ") + e.what(),
                         (fs::path(dir) / file).string(), start + i + 1);
      } catch (const IoError& e) {
        throw ParseError(e.what(), (fs::path(dir) / file).string(), start + i + 1);
      }
    }
    referenced += count;
    corpus.windows.push_back(std::move(w));
  }
  long available = 0;
  for (const auto& [file, lines] : records) available += static_cast<long>(lines.size());
  if (referenced != available)
    throw IoError("manifest references " + std::to_string(referenced) +
                  " frame records but files contain " + std::to_string(available));
  return corpus;
}

}  // namespace calving::synth
