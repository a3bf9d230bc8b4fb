#pragma once

// Run configuration: flat `key = value` files, overridable per key.

#include "rfqa/error.hpp"
#include "rfqa/features.hpp"
#include "rfqa/forest.hpp"
#include "rfqa/parallel.hpp"
#include "rfqa/qa_engine.hpp"
#include "rfqa/text.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace rfqa {

struct RunConfig {
  std::filesystem::path pools;        // <pools>/<target>/*.pdb
  std::filesystem::path natives;      // <natives>/<target>.pdb
  std::filesystem::path annotations;  // <annotations>/<target>.ann
  std::filesystem::path model;        // persisted forest
  std::filesystem::path features;     // feature table
  std::filesystem::path predictions;  // directory of QA files
  std::filesystem::path truths;       // `<target> <model> <gdt_ts>` lines
  std::filesystem::path scores;       // external single-model scores
  std::filesystem::path out = ".";

  ForestParams forest;
  double gate = kDefaultGate;
  double cap = kDefaultDistanceCap;
  double d0 = kDefaultD0;
  std::size_t per_class = 10000;
  std::size_t cv_folds = 10;  // 0 disables cross-validation
  std::size_t cv_repeats = 10;
  std::vector<double> thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::uint64_t seed = 1;
  unsigned threads = default_threads();

  void set(std::string_view key, std::string_view value);
  void validate() const;
};

namespace config_detail {

inline Error bad(std::string_view key, std::string_view value, std::string_view what) {
  return Error(ErrorCode::validation,
               "config key '" + std::string(key) + "': " + std::string(what) + " (got '" + std::string(value) + "')");
}

inline double real(std::string_view key, std::string_view value) {
  auto v = text::to_double(value);
  if (!v) throw bad(key, value, "expected a number");
  return *v;
}

template <class T>
T count(std::string_view key, std::string_view value) {
  auto v = text::to_int<T>(value);
  if (!v) throw bad(key, value, "expected a non-negative integer");
  return *v;
}

inline bool boolean(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw bad(key, value, "expected true or false");
}

}  // namespace config_detail

inline void RunConfig::set(std::string_view key, std::string_view raw) {
  using namespace config_detail;
  const auto value = text::trim(raw);
  if (key == "pools") pools = value;
  else if (key == "natives") natives = value;
  else if (key == "annotations") annotations = value;
  else if (key == "model") model = value;
  else if (key == "features") features = value;
  else if (key == "predictions") predictions = value;
  else if (key == "truths") truths = value;
  else if (key == "scores") scores = value;
  else if (key == "out") out = value;
  else if (key == "trees") forest.n_trees = count<std::size_t>(key, value);
  else if (key == "mtry") forest.mtry = count<std::size_t>(key, value);
  else if (key == "min_leaf") forest.min_leaf = count<std::size_t>(key, value);
  else if (key == "max_depth") forest.max_depth = count<std::size_t>(key, value);
  else if (key == "bootstrap") forest.bootstrap = boolean(key, value);
  else if (key == "gate") gate = real(key, value);
  else if (key == "cap") cap = real(key, value);
  else if (key == "d0") d0 = real(key, value);
  else if (key == "per_class") per_class = count<std::size_t>(key, value);
  else if (key == "cv_folds") cv_folds = count<std::size_t>(key, value);
  else if (key == "cv_repeats") cv_repeats = count<std::size_t>(key, value);
  else if (key == "seed") seed = count<std::uint64_t>(key, value);
  else if (key == "threads") {
    threads = count<unsigned>(key, value);
    if (threads == 0) threads = default_threads();
  } else if (key == "thresholds") {
    thresholds.clear();
    std::string list(value);
    for (auto& ch : list)
      if (ch == ',') ch = ' ';
    for (auto tok : text::split_ws(list)) thresholds.push_back(real(key, tok));
  } else {
    throw Error(ErrorCode::validation, "unknown config key '" + std::string(key) + "'");
  }
}

inline void RunConfig::validate() const {
  if (!(gate >= 0.0 && gate <= 1.0)) throw Error(ErrorCode::validation, "gate must lie in [0,1]");
  if (!(cap > 0.0)) throw Error(ErrorCode::validation, "cap must be positive");
  if (!(d0 > 0.0)) throw Error(ErrorCode::validation, "d0 must be positive");
  if (forest.n_trees == 0) throw Error(ErrorCode::validation, "trees must be positive");
  if (forest.min_leaf == 0) throw Error(ErrorCode::validation, "min_leaf must be positive");
  if (forest.mtry > kFeatureCount) throw Error(ErrorCode::validation, "mtry exceeds the feature count");
  if (per_class == 0) throw Error(ErrorCode::validation, "per_class must be positive");
  if (cv_folds == 1) throw Error(ErrorCode::validation, "cv_folds must be 0 (off) or at least 2");
  if (cv_folds && cv_repeats == 0) throw Error(ErrorCode::validation, "cv_repeats must be positive");
  if (thresholds.empty()) throw Error(ErrorCode::validation, "thresholds must not be empty");
}

/// `key = value` lines; `#` starts a comment. Keys are returned in file order.
inline std::vector<std::pair<std::string, std::string>> parse_config(std::string_view content) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  for (auto raw : text::lines(content)) {
    ++line_no;
    auto line = raw.substr(0, raw.find('#'));
    if (text::trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::validation, "config line " + std::to_string(line_no) + ": expected key = value");
    auto key = text::trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::validation, "config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(text::trim(line.substr(eq + 1))));
  }
  return out;
}

inline RunConfig load_config(std::string_view content) {
  RunConfig c;
  for (const auto& [k, v] : parse_config(content)) c.set(k, v);
  return c;
}

}  // namespace rfqa
