#pragma once

// Structural annotations of a model (secondary structure, accessible area)
// and the per-residue feature vectors used by the local quality predictor.
//
// Feature layout "rfqa-features-v1" (313 values):
//   [0, 300)   one-hot amino acid for window offsets -7..+7, 20 digits each
//              (order ACDEFGHIKLMNPQRSTVWY); all zero where the position is
//              outside the sequence or not resolved in the model
//   300..305   window ss_diff, euclid_score, ss_penalty, surface_polar,
//              weighted_exposed, total_surface over resolved window residues
//   306..312   whole-model ss_diff, sa_diff, euclid_score, ss_penalty,
//              surface_polar, weighted_exposed, total_surface

#include "rfqa/amino_acids.hpp"
#include "rfqa/error.hpp"
#include "rfqa/geometry.hpp"
#include "rfqa/parallel.hpp"
#include "rfqa/structure.hpp"
#include "rfqa/text.hpp"

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rfqa {

inline constexpr double kDefaultD0 = 3.8;

/// S-score transform of a CA deviation: 1 / (1 + (d/d0)^2).
inline double s_score(double distance, double d0 = kDefaultD0) {
  double r = distance / d0;
  return 1.0 / (1.0 + r * r);
}

// ---------------------------------------------------------------------------
// Secondary structure (Kabsch-Sander hydrogen-bond patterns, 3-state)

namespace ss_detail {

inline constexpr double kCoupling = 0.084 * 332.0;  // kcal/mol
inline constexpr double kHBondCutoff = -0.5;        // kcal/mol
inline constexpr double kMinDistance = 0.5;         // Å, clamps the Coulomb terms
inline constexpr double kCaNeighbourCutoff = 9.0;   // Å
inline constexpr double kPeptideBondMax = 2.5;      // Å, C(i)-N(i+1)

/// Electrostatic H-bond energy between C=O of `acceptor` and N-H of `donor`.
inline double hbond_energy(const Vec3& c, const Vec3& o, const Vec3& n, const Vec3& h) {
  auto inv = [](const Vec3& a, const Vec3& b) { return 1.0 / std::max((a - b).norm(), kMinDistance); };
  return kCoupling * (inv(o, n) + inv(c, h) - inv(o, h) - inv(c, n));
}

}  // namespace ss_detail

/// Three-state secondary structure per residue ('H', 'E', 'C').
/// Helix: two consecutive i->i+4 turns mark i+1..i+4 as H. Strand: a ladder
/// of at least two consecutive bridges of the same kind. Residues lacking
/// N, C or O take part in no hydrogen bond and end up as coil.
inline std::string assign_ss(const StructureModel& model) {
  using namespace ss_detail;
  const std::size_t n = model.size();
  std::string ss(n, 'C');
  if (n < 3) return ss;
  const auto& res = model.residues;

  // linked[k]: residues k and k+1 are joined by a peptide bond
  std::vector<bool> linked(n, false);
  for (std::size_t k = 0; k + 1 < n; ++k)
    linked[k] = res[k].has_backbone() && res[k + 1].has_backbone() &&
                res[k + 1].seq_index == res[k].seq_index + 1 &&
                (*res[k].c - *res[k + 1].n).norm() < kPeptideBondMax;

  std::vector<std::optional<Vec3>> hydrogen(n);
  for (std::size_t k = 1; k < n; ++k) {
    if (!linked[k - 1] || res[k].aa == 'P') continue;
    Vec3 co = *res[k - 1].c - *res[k - 1].o;
    hydrogen[k] = *res[k].n + co.normalized();
  }

  // hb[i * n + j]: C=O of i accepts from N-H of j
  std::vector<char> hb(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!res[i].has_backbone()) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || j == i + 1 || !hydrogen[j]) continue;
      if ((res[i].ca - res[j].ca).norm() >= kCaNeighbourCutoff) continue;
      double e = hbond_energy(*res[i].c, *res[i].o, *res[j].n, *hydrogen[j]);
      if (e < kHBondCutoff) hb[i * n + j] = 1;
    }
  }
  auto hbond = [&](std::size_t i, std::size_t j) { return i < n && j < n && hb[i * n + j] != 0; };
  auto continuous = [&](std::size_t from, std::size_t to) {
    if (to >= n) return false;
    for (std::size_t k = from; k < to; ++k)
      if (!linked[k]) return false;
    return true;
  };

  std::vector<bool> turn4(n, false);
  for (std::size_t i = 0; i + 4 < n; ++i) turn4[i] = continuous(i, i + 4) && hbond(i, i + 4);
  std::vector<bool> helix(n, false);
  for (std::size_t i = 1; i + 4 < n; ++i)
    if (turn4[i - 1] && turn4[i])
      for (std::size_t k = i; k <= i + 3; ++k) helix[k] = true;

  enum class Kind { parallel, antiparallel };
  struct Bridge {
    std::size_t i, j;
    Kind kind;
  };
  std::vector<Bridge> bridges;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!continuous(i - 1, i + 1)) continue;
    for (std::size_t j = i + 3; j + 1 < n; ++j) {
      if (!continuous(j - 1, j + 1)) continue;
      bool par = (hbond(i - 1, j) && hbond(j, i + 1)) || (hbond(j - 1, i) && hbond(i, j + 1));
      bool anti = (hbond(i, j) && hbond(j, i)) || (hbond(i - 1, j + 1) && hbond(j - 1, i + 1));
      if (par) bridges.push_back({i, j, Kind::parallel});
      if (anti) bridges.push_back({i, j, Kind::antiparallel});
    }
  }
  std::vector<bool> strand(n, false);
  for (const auto& a : bridges) {
    for (const auto& b : bridges) {
      if (a.kind != b.kind || b.i != a.i + 1) continue;
      bool next = a.kind == Kind::parallel ? b.j == a.j + 1 : b.j + 1 == a.j;
      if (!next) continue;
      strand[a.i] = strand[b.i] = strand[a.j] = strand[b.j] = true;
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (helix[k])
      ss[k] = 'H';
    else if (strand[k])
      ss[k] = 'E';
  }
  return ss;
}

// ---------------------------------------------------------------------------
// Solvent accessible surface (Shrake-Rupley)

inline constexpr double kProbeRadius = 1.4;
inline constexpr int kSpherePoints = 92;

inline double atomic_radius(std::string_view element) {
  if (element == "N") return 1.55;
  if (element == "C") return 1.70;
  if (element == "O") return 1.52;
  if (element == "S") return 1.80;
  return 1.80;
}

/// Quasi-uniform unit-sphere points on a golden-angle spiral.
inline const std::vector<Vec3>& sphere_points() {
  static const std::vector<Vec3> pts = [] {
    std::vector<Vec3> v;
    v.reserve(kSpherePoints);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < kSpherePoints; ++k) {
      double y = 1.0 - (2.0 * k + 1.0) / kSpherePoints;
      double r = std::sqrt(1.0 - y * y);
      double phi = golden * k;
      v.emplace_back(std::cos(phi) * r, y, std::sin(phi) * r);
    }
    return v;
  }();
  return pts;
}

/// Per-residue accessible area (Å²). The sphere point set is laid out in
/// the model's principal frame, which makes the result independent of the
/// model's orientation.
inline std::vector<double> sasa(const StructureModel& model) {
  struct Ball {
    Vec3 pos;
    double radius;
    std::size_t residue;
  };
  std::vector<Ball> balls;
  for (std::size_t k = 0; k < model.size(); ++k) {
    const auto& r = model.residues[k];
    auto add = [&](const Vec3& p, std::string_view el) { balls.push_back({p, atomic_radius(el) + kProbeRadius, k}); };
    if (r.n) add(*r.n, "N");
    add(r.ca, "C");
    if (r.c) add(*r.c, "C");
    if (r.o) add(*r.o, "O");
    for (const auto& a : r.side_chain) add(a.pos, a.element);
  }
  std::vector<Vec3> raw;
  raw.reserve(balls.size());
  for (const auto& b : balls) raw.push_back(b.pos);
  const Frame frame = principal_frame(raw);
  for (auto& b : balls) b.pos = frame.to_local(b.pos);

  const auto& unit = sphere_points();
  std::vector<double> area(model.size(), 0.0);
  std::vector<std::size_t> neighbours;
  for (std::size_t i = 0; i < balls.size(); ++i) {
    neighbours.clear();
    for (std::size_t j = 0; j < balls.size(); ++j) {
      if (j == i) continue;
      double reach = balls[i].radius + balls[j].radius;
      if ((balls[i].pos - balls[j].pos).squaredNorm() < reach * reach) neighbours.push_back(j);
    }
    int exposed = 0;
    for (const auto& u : unit) {
      Vec3 p = balls[i].pos + balls[i].radius * u;
      bool buried = false;
      for (auto j : neighbours) {
        if ((p - balls[j].pos).squaredNorm() < balls[j].radius * balls[j].radius) {
          buried = true;
          break;
        }
      }
      if (!buried) ++exposed;
    }
    double sphere = 4.0 * std::numbers::pi * balls[i].radius * balls[i].radius;
    area[balls[i].residue] += sphere * exposed / kSpherePoints;
  }
  return area;
}

struct ModelAnnotations {
  std::string ss;            // per model residue
  std::vector<double> sasa;  // Å²
  std::vector<double> rsa;   // sasa / max_area, clamped to [0,1]
};

inline ModelAnnotations annotate(const StructureModel& model) {
  ModelAnnotations a;
  a.ss = assign_ss(model);
  a.sasa = sasa(model);
  a.rsa.resize(model.size());
  for (std::size_t k = 0; k < model.size(); ++k)
    a.rsa[k] = std::clamp(a.sasa[k] / aa::max_area(model.residues[k].aa), 0.0, 1.0);
  return a;
}

// ---------------------------------------------------------------------------
// Feature vectors

inline constexpr const char* kFeatureLayoutVersion = "rfqa-features-v1";
inline constexpr int kWindowSize = 15;
inline constexpr int kHalfWindow = kWindowSize / 2;
inline constexpr std::size_t kOneHotSize = static_cast<std::size_t>(kWindowSize) * aa::kCount;
inline constexpr std::size_t kWindowScoreCount = 6;
inline constexpr std::size_t kGlobalFeatureCount = 7;
inline constexpr std::size_t kFeatureCount = kOneHotSize + kWindowScoreCount + kGlobalFeatureCount;
static_assert(kFeatureCount == 313);

inline constexpr double kExposedRsa = 0.25;

struct GlobalFeatures {
  double ss_diff = 0;
  double sa_diff = 0;
  double euclid_score = 0;
  double ss_penalty = 0;
  double surface_polar = 0;
  double weighted_exposed = 0;
  double total_surface = 0;
};

using FeatureVector = std::vector<double>;

namespace feature_detail {

inline void check_coverage(const StructureModel& model, const PredictedAnnotations& ann) {
  if (ann.sa.size() != ann.ss.size())
    throw Error(ErrorCode::length_mismatch, "annotation SS and SA lengths differ");
  for (const auto& r : model.residues)
    if (r.seq_index < 1 || static_cast<std::size_t>(r.seq_index) > ann.size())
      throw Error(ErrorCode::length_mismatch, "model " + model.model_id + " residue " +
                                                  std::to_string(r.seq_index) + " beyond annotation length " +
                                                  std::to_string(ann.size()));
}

/// The seven scores over a subset of model residues (positions into
/// model.residues, ascending).
inline GlobalFeatures fragment_scores(const StructureModel& model, const ModelAnnotations& mine,
                                      const PredictedAnnotations& pred, std::span<const std::size_t> positions) {
  GlobalFeatures f;
  if (positions.empty()) return f;
  const double count = static_cast<double>(positions.size());

  std::size_t ss_mismatch = 0, predicted_he = 0, he_mismatch = 0;
  double sa_abs = 0;
  double exposed_area = 0, exposed_nonpolar = 0, exposed_weighted = 0, area = 0, max_area = 0;
  for (auto k : positions) {
    const auto& r = model.residues[k];
    auto idx = static_cast<std::size_t>(r.seq_index - 1);
    char p = pred.ss[idx];
    char m = mine.ss[k];
    if (p != m) ++ss_mismatch;
    if (p == 'H' || p == 'E') {
      ++predicted_he;
      if (m != p) ++he_mismatch;
    }
    sa_abs += std::abs(mine.rsa[k] - pred.sa[idx]);
    area += mine.sasa[k];
    max_area += aa::max_area(r.aa);
    if (mine.rsa[k] > kExposedRsa) {
      exposed_area += mine.sasa[k];
      if (aa::is_nonpolar(r.aa)) exposed_nonpolar += mine.sasa[k];
      exposed_weighted += mine.sasa[k] * aa::hydrophobicity_weight(r.aa);
    }
  }
  f.ss_diff = static_cast<double>(ss_mismatch) / count;
  f.sa_diff = sa_abs / count;
  f.ss_penalty = predicted_he ? static_cast<double>(he_mismatch) / static_cast<double>(predicted_he) : 0.0;
  f.surface_polar = exposed_area > 0 ? exposed_nonpolar / exposed_area : 0.0;
  f.weighted_exposed = area > 0 ? std::clamp(exposed_weighted / area, 0.0, 1.0) : 0.0;
  f.total_surface = max_area > 0 ? std::clamp(area / max_area, 0.0, 1.0) : 0.0;

  // mean CA-CA distance relative to the same residues laid out in a line
  if (positions.size() < 2) {
    f.euclid_score = 1.0;
  } else {
    double model_sum = 0, extended_sum = 0;
    for (std::size_t a = 0; a < positions.size(); ++a) {
      const auto& ra = model.residues[positions[a]];
      Vec3 ea(kDefaultD0 * ra.seq_index, 0, 0);
      for (std::size_t b = a + 1; b < positions.size(); ++b) {
        const auto& rb = model.residues[positions[b]];
        Vec3 eb(kDefaultD0 * rb.seq_index, 0, 0);
        model_sum += (ra.ca - rb.ca).norm();
        extended_sum += (ea - eb).norm();
      }
    }
    f.euclid_score = model_sum / extended_sum;
  }
  return f;
}

}  // namespace feature_detail

inline GlobalFeatures global_features(const StructureModel& model, const ModelAnnotations& mine,
                                      const PredictedAnnotations& pred) {
  feature_detail::check_coverage(model, pred);
  std::vector<std::size_t> all(model.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  return feature_detail::fragment_scores(model, mine, pred, all);
}

inline GlobalFeatures global_features(const StructureModel& model, const PredictedAnnotations& pred) {
  return global_features(model, annotate(model), pred);
}

/// Precomputed per-model state for extracting many window vectors.
class ModelFeaturizer {
 public:
  ModelFeaturizer(const StructureModel& model, const PredictedAnnotations& pred)
      : model_(model), pred_(pred), mine_(annotate(model)) {
    feature_detail::check_coverage(model, pred);
    globals_ = global_features(model, mine_, pred);
  }

  const ModelAnnotations& annotations() const { return mine_; }
  const GlobalFeatures& globals() const { return globals_; }

  FeatureVector window(int center, int window = kWindowSize) const {
    if (!model_.find(center))
      throw Error(ErrorCode::validation, "residue " + std::to_string(center) + " not in model " + model_.model_id);
    if (window != kWindowSize)
      throw Error(ErrorCode::layout_mismatch, "feature layout is fixed to a window of " + std::to_string(kWindowSize));
    FeatureVector v(kFeatureCount, 0.0);
    std::vector<std::size_t> positions;
    for (int off = -kHalfWindow; off <= kHalfWindow; ++off) {
      auto pos = model_.position_of(center + off);
      if (!pos) continue;
      positions.push_back(*pos);
      auto digit = aa::index_of(model_.residues[*pos].aa);
      auto slot = static_cast<std::size_t>(off + kHalfWindow);
      v[slot * aa::kCount + static_cast<std::size_t>(*digit)] = 1.0;
    }
    auto w = feature_detail::fragment_scores(model_, mine_, pred_, positions);
    std::size_t k = kOneHotSize;
    for (double x : {w.ss_diff, w.euclid_score, w.ss_penalty, w.surface_polar, w.weighted_exposed, w.total_surface})
      v[k++] = x;
    const auto& g = globals_;
    for (double x : {g.ss_diff, g.sa_diff, g.euclid_score, g.ss_penalty, g.surface_polar, g.weighted_exposed,
                     g.total_surface})
      v[k++] = x;
    return v;
  }

 private:
  const StructureModel& model_;
  const PredictedAnnotations& pred_;
  ModelAnnotations mine_;
  GlobalFeatures globals_;
};

inline FeatureVector window_features(const StructureModel& model, const PredictedAnnotations& pred, int center,
                                     int window = kWindowSize) {
  return ModelFeaturizer(model, pred).window(center, window);
}

/// Column names of the feature layout, in order.
inline std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  names.reserve(kFeatureCount);
  for (int off = -kHalfWindow; off <= kHalfWindow; ++off)
    for (char code : aa::kOrder) names.push_back("aa" + std::string(off < 0 ? "m" : "p") + std::to_string(std::abs(off)) + "_" + code);
  for (const char* s : {"win_ss_diff", "win_euclid_score", "win_ss_penalty", "win_surface_polar",
                        "win_weighted_exposed", "win_total_surface", "ss_diff", "sa_diff", "euclid_score",
                        "ss_penalty", "surface_polar", "weighted_exposed", "total_surface"})
    names.emplace_back(s);
  return names;
}

/// Indices of features whose value is a fraction in [0,1] (everything but
/// the two Euclidean-distance ratios).
inline bool is_fractional_feature(std::size_t index) {
  return index != kOneHotSize + 1 && index != kOneHotSize + kWindowScoreCount + 2;
}

// ---------------------------------------------------------------------------
// Labelled dataset

struct LabeledSample {
  std::string target_id;
  std::string model_id;
  int seq_index = 0;
  FeatureVector features;
  double true_distance = 0;
  double true_quality = 0;
};

struct TrainingTarget {
  ModelPool pool;
  std::optional<StructureModel> native;
  PredictedAnnotations annotations;
};

struct DatasetBuild {
  std::vector<LabeledSample> samples;
  std::vector<std::string> diagnostics;
};

/// One sample per (model, residue shared with the native), ordered by
/// target, model and residue.
inline DatasetBuild build_dataset(const std::vector<TrainingTarget>& targets, unsigned threads = 1,
                                  double d0 = kDefaultD0) {
  struct Job {
    const TrainingTarget* target;
    const StructureModel* model;
  };
  DatasetBuild out;
  std::vector<Job> jobs;
  for (const auto& t : targets) {
    if (!t.native) {
      out.diagnostics.push_back("target " + t.pool.target_id + ": no native structure, skipped");
      continue;
    }
    for (const auto& m : t.pool.models) jobs.push_back({&t, &m});
  }
  std::vector<std::vector<LabeledSample>> per_job(jobs.size());
  std::vector<std::string> job_error(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t k) {
    const auto& job = jobs[k];
    std::vector<ResidueDistance> truth;
    try {
      truth = per_residue_distances(*job.model, *job.target->native);
    } catch (const Error& e) {
      job_error[k] = "target " + job.target->pool.target_id + " model " + job.model->model_id + ": " + e.what();
      return;
    }
    ModelFeaturizer featurizer(*job.model, job.target->annotations);
    auto& samples = per_job[k];
    samples.reserve(truth.size());
    for (const auto& rd : truth) {
      LabeledSample s;
      s.target_id = job.target->pool.target_id;
      s.model_id = job.model->model_id;
      s.seq_index = rd.seq_index;
      s.features = featurizer.window(rd.seq_index);
      s.true_distance = rd.distance;
      s.true_quality = s_score(rd.distance, d0);
      samples.push_back(std::move(s));
    }
  });
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (!job_error[k].empty()) out.diagnostics.push_back(job_error[k]);
    for (auto& s : per_job[k]) out.samples.push_back(std::move(s));
  }
  return out;
}

/// Tab-separated table: header, then
/// `target model residue <313 features> true_distance true_quality`.
inline std::string write_feature_table(const std::vector<LabeledSample>& samples) {
  std::string out = "target\tmodel\tresidue";
  for (const auto& name : feature_names()) out += "\t" + name;
  out += "\ttrue_distance\ttrue_quality\n";
  for (const auto& s : samples) {
    out += s.target_id;
    out += '\t';
    out += s.model_id;
    out += '\t';
    out += std::to_string(s.seq_index);
    for (double v : s.features) {
      out += '\t';
      out += text::exact(v);
    }
    out += '\t';
    out += text::exact(s.true_distance);
    out += '\t';
    out += text::exact(s.true_quality);
    out += '\n';
  }
  return out;
}

inline std::vector<LabeledSample> parse_feature_table(std::string_view content) {
  auto rows = text::lines(content);
  if (rows.empty()) throw Error(ErrorCode::parse, "feature table is empty");
  auto header = text::split_ws(rows[0]);
  auto names = feature_names();
  bool layout_ok = header.size() == names.size() + 5 && header[0] == "target" && header[1] == "model" &&
                   header[2] == "residue" && header[header.size() - 2] == "true_distance" &&
                   header.back() == "true_quality";
  for (std::size_t i = 0; layout_ok && i < names.size(); ++i) layout_ok = header[i + 3] == names[i];
  if (!layout_ok)
    throw Error(ErrorCode::layout_mismatch,
                std::string("feature table header does not match layout ") + kFeatureLayoutVersion);

  std::vector<LabeledSample> samples;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (text::trim(rows[r]).empty()) continue;
    auto tok = text::split_ws(rows[r]);
    if (tok.size() != header.size())
      throw Error(ErrorCode::parse, "feature table row " + std::to_string(r + 1) + ": expected " +
                                        std::to_string(header.size()) + " columns, got " + std::to_string(tok.size()));
    LabeledSample s;
    s.target_id = std::string(tok[0]);
    s.model_id = std::string(tok[1]);
    auto seq = text::to_int<int>(tok[2]);
    if (!seq) throw Error(ErrorCode::parse, "feature table row " + std::to_string(r + 1) + ": bad residue index");
    s.seq_index = *seq;
    s.features.resize(kFeatureCount);
    for (std::size_t i = 0; i < kFeatureCount + 2; ++i) {
      auto v = text::to_double(tok[i + 3]);
      if (!v) throw Error(ErrorCode::parse, "feature table row " + std::to_string(r + 1) + ": bad number");
      if (i < kFeatureCount)
        s.features[i] = *v;
      else if (i == kFeatureCount)
        s.true_distance = *v;
      else
        s.true_quality = *v;
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace rfqa
