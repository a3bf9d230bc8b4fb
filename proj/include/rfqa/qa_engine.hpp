#pragma once

// Global (hybrid pairwise / single-model) and local (per-residue distance)
// quality prediction.

#include "rfqa/consensus.hpp"
#include "rfqa/features.hpp"
#include "rfqa/forest.hpp"
#include "rfqa/structure_io.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rfqa {

inline constexpr double kDefaultGate = 0.2;
inline constexpr double kDefaultDistanceCap = 15.0;

/// Inverse S-score, saturating at `cap`; s <= 0 (or NaN) maps to the cap.
inline double s_to_distance(double s, double d0 = kDefaultD0, double cap = kDefaultDistanceCap) {
  if (!(s > 0.0)) return cap;
  if (s >= 1.0) return 0.0;
  double d = d0 * std::sqrt(1.0 / s - 1.0);
  return std::min(d, cap);
}

struct QaOptions {
  double gate = kDefaultGate;
  double d0 = kDefaultD0;
  double cap = kDefaultDistanceCap;
  unsigned threads = 1;
};

struct LocalPrediction {
  int seq_index = 0;
  double quality = 0;   // predicted S-score
  double distance = 0;  // Å, capped
};

inline std::vector<LocalPrediction> local_predict(const StructureModel& model, const PredictedAnnotations& ann,
                                                  const RandomForestModel& forest, const QaOptions& opt = {}) {
  forest.require_layout(kFeatureLayoutVersion, kFeatureCount);
  ModelFeaturizer featurizer(model, ann);
  std::vector<LocalPrediction> out;
  out.reserve(model.size());
  for (const auto& r : model.residues) {
    double q = forest.predict(featurizer.window(r.seq_index));
    out.push_back({r.seq_index, q, s_to_distance(q, opt.d0, opt.cap)});
  }
  return out;
}

/// Lines of `<model_id> <score in [0,1]>`.
inline std::map<std::string, double> parse_score_file(std::string_view content) {
  std::map<std::string, double> out;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    auto tok = text::split_ws(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    auto v = tok.size() == 2 ? text::to_double(tok[1]) : std::nullopt;
    if (!v) throw Error(ErrorCode::parse, "score file line " + std::to_string(line_no) + ": expected '<model> <score>'");
    if (!(*v >= 0.0 && *v <= 1.0))
      throw Error(ErrorCode::validation, "score file line " + std::to_string(line_no) + ": score outside [0,1]");
    out[std::string(tok[0])] = *v;
  }
  return out;
}

inline double mean_quality(const std::vector<LocalPrediction>& local) {
  if (local.empty()) return 0.0;
  // offsets from the first value keep a constant input exact
  const double base = local.front().quality;
  double offset = 0;
  for (const auto& p : local) offset += p.quality - base;
  return std::clamp(base + offset / static_cast<double>(local.size()), 0.0, 1.0);
}

/// Single-model global score: the mean predicted residue quality, unless an
/// external score for this model is supplied.
inline double single_model_global(const StructureModel& model, const PredictedAnnotations& ann,
                                  const RandomForestModel& forest,
                                  const std::map<std::string, double>* overrides = nullptr) {
  if (overrides) {
    if (auto it = overrides->find(model.model_id); it != overrides->end()) return it->second;
  }
  return mean_quality(local_predict(model, ann, forest));
}

enum class GlobalMethod { pairwise, single };

inline const char* to_string(GlobalMethod m) { return m == GlobalMethod::pairwise ? "pairwise" : "single"; }

/// Pairwise consensus is used only when the pool has more than one model
/// and its best consensus score is strictly above the gate.
inline GlobalMethod choose_method(std::size_t pool_size, std::optional<double> pool_max, double gate) {
  if (pool_size > 1 && pool_max && *pool_max > gate) return GlobalMethod::pairwise;
  return GlobalMethod::single;
}

struct ModelPrediction {
  std::string model_id;
  double global_score = 0;
  std::vector<LocalPrediction> local;
};

struct QaPrediction {
  std::string target_id;
  GlobalMethod method = GlobalMethod::single;
  std::optional<double> pool_max;  // set when the pool had >= 2 models
  std::vector<ModelPrediction> models;
};

/// Hybrid global scores plus local predictions for every model of a pool.
inline QaPrediction predict_pool(const ModelPool& pool, const PredictedAnnotations& ann,
                                 const RandomForestModel& forest, const QaOptions& opt = {},
                                 const std::map<std::string, double>* overrides = nullptr) {
  if (pool.models.empty()) throw Error(ErrorCode::empty_pool, "pool " + pool.target_id + " has no models");
  QaPrediction out;
  out.target_id = pool.target_id;
  std::optional<ConsensusScores> consensus;
  if (pool.models.size() > 1) {
    consensus = pairwise_scores(pool, opt.threads);
    out.pool_max = consensus->pool_max;
  }
  out.method = choose_method(pool.models.size(), out.pool_max, opt.gate);

  out.models.resize(pool.models.size());
  parallel_for(pool.models.size(), opt.threads, [&](std::size_t i) {
    const auto& m = pool.models[i];
    auto& mp = out.models[i];
    mp.model_id = m.model_id;
    mp.local = local_predict(m, ann, forest, opt);
    if (out.method == GlobalMethod::pairwise) {
      mp.global_score = std::clamp(consensus->scores[i], 0.0, 1.0);
    } else {
      auto it = overrides ? overrides->find(m.model_id) : std::map<std::string, double>::const_iterator{};
      mp.global_score = overrides && it != overrides->end() ? it->second : mean_quality(mp.local);
    }
  });
  return out;
}

/// Global scores only: consensus when the gate admits it, otherwise the
/// single-model score of each model.
inline QaPrediction hybrid_global(const ModelPool& pool, const PredictedAnnotations& ann,
                                  const RandomForestModel& forest, const QaOptions& opt = {},
                                  const std::map<std::string, double>* overrides = nullptr) {
  if (pool.models.empty()) throw Error(ErrorCode::empty_pool, "pool " + pool.target_id + " has no models");
  QaPrediction out;
  out.target_id = pool.target_id;
  std::optional<ConsensusScores> consensus;
  if (pool.models.size() > 1) {
    consensus = pairwise_scores(pool, opt.threads);
    out.pool_max = consensus->pool_max;
  }
  out.method = choose_method(pool.models.size(), out.pool_max, opt.gate);
  out.models.resize(pool.models.size());
  parallel_for(pool.models.size(), opt.threads, [&](std::size_t i) {
    const auto& m = pool.models[i];
    out.models[i].model_id = m.model_id;
    out.models[i].global_score = out.method == GlobalMethod::pairwise
                                     ? std::clamp(consensus->scores[i], 0.0, 1.0)
                                     : single_model_global(m, ann, forest, overrides);
  });
  return out;
}

/// QA records with one distance slot per target position (X where the
/// model has no residue).
inline std::vector<QaRecord> to_qa_records(const QaPrediction& p, std::size_t target_length) {
  std::vector<QaRecord> out;
  out.reserve(p.models.size());
  for (const auto& m : p.models) {
    QaRecord rec;
    rec.model_id = m.model_id;
    rec.global_score = m.global_score;
    rec.distances.assign(target_length, std::nullopt);
    for (const auto& lp : m.local)
      if (lp.seq_index >= 1 && static_cast<std::size_t>(lp.seq_index) <= target_length)
        rec.distances[static_cast<std::size_t>(lp.seq_index - 1)] = lp.distance;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace rfqa
