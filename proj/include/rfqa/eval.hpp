#pragma once

// Evaluation of global and local predictions against known truths.

#include "rfqa/consensus.hpp"
#include "rfqa/error.hpp"
#include "rfqa/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rfqa {

/// Sample Pearson correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw Error(ErrorCode::length_mismatch, "pearson: lengths " + std::to_string(xs.size()) + " and " +
                                                std::to_string(ys.size()) + " differ");
  if (xs.size() < 2) throw Error(ErrorCode::validation, "pearson: need at least 2 pairs");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

using ScoreMap = std::map<std::string, double>;  // model_id -> score

/// True score of the best model minus true score of the model ranked first
/// by the predictor (ties go to the smallest model_id).
inline double gdt_loss(const ScoreMap& truth, const ScoreMap& predicted) {
  if (truth.empty() || predicted.empty()) throw Error(ErrorCode::validation, "gdt_loss: empty score map");
  if (truth.size() != predicted.size())
    throw Error(ErrorCode::validation, "gdt_loss: truth and prediction cover different models");
  double best_truth = -std::numeric_limits<double>::infinity();
  for (const auto& [id, v] : truth) best_truth = std::max(best_truth, v);
  const std::string* top = nullptr;
  double top_score = 0;
  for (const auto& [id, v] : predicted) {
    if (!top || v > top_score) {
      top = &id;
      top_score = v;
    }
  }
  auto it = truth.find(*top);
  if (it == truth.end()) throw Error(ErrorCode::validation, "gdt_loss: model " + *top + " missing from truth");
  return best_truth - it->second;
}

struct TargetEval {
  std::string target_id;
  std::size_t n_models = 0;
  std::optional<double> pearson;
  double loss = 0;
};

struct LocalBin {
  double lo = 0;
  double hi = 0;  // +inf for the last bin
  std::size_t count = 0;
  std::optional<double> mean_abs_error;
};

struct EvalReport {
  std::vector<TargetEval> per_target;  // sorted by target_id
  std::optional<double> ave_corr;
  std::optional<double> over_corr;
  double ave_loss = 0;
  std::size_t excluded_correlations = 0;
  std::vector<LocalBin> local_bins;
  std::vector<std::string> diagnostics;
};

using TargetScores = std::map<std::string, ScoreMap>;  // target_id -> scores

/// Per-target correlation and loss over the models present in both maps.
/// Undefined correlations are left out of ave_corr (and counted); targets
/// with no shared models are skipped.
inline EvalReport evaluate_global(const TargetScores& predictions, const TargetScores& truths) {
  EvalReport rep;
  std::vector<double> pooled_pred, pooled_truth;
  double corr_sum = 0, loss_sum = 0;
  std::size_t corr_n = 0;
  for (const auto& [target, pred] : predictions) {
    auto tt = truths.find(target);
    if (tt == truths.end()) {
      rep.diagnostics.push_back("target " + target + ": no truth scores, skipped");
      continue;
    }
    ScoreMap p, t;
    for (const auto& [model, v] : pred) {
      auto it = tt->second.find(model);
      if (it == tt->second.end()) continue;
      p[model] = v;
      t[model] = it->second;
    }
    if (p.empty()) {
      rep.diagnostics.push_back("target " + target + ": no models shared with truth, skipped");
      continue;
    }
    TargetEval te;
    te.target_id = target;
    te.n_models = p.size();
    std::vector<double> xs, ys;
    for (const auto& [model, v] : p) {
      xs.push_back(v);
      ys.push_back(t[model]);
    }
    pooled_pred.insert(pooled_pred.end(), xs.begin(), xs.end());
    pooled_truth.insert(pooled_truth.end(), ys.begin(), ys.end());
    if (xs.size() >= 2) te.pearson = pearson(xs, ys);
    if (!te.pearson) {
      ++rep.excluded_correlations;
      rep.diagnostics.push_back("target " + target + ": correlation undefined (" +
                                (xs.size() < 2 ? "single model" : "zero variance") + "), excluded from average");
    } else {
      corr_sum += *te.pearson;
      ++corr_n;
    }
    te.loss = gdt_loss(t, p);
    loss_sum += te.loss;
    rep.per_target.push_back(te);
  }
  if (rep.per_target.empty()) throw Error(ErrorCode::validation, "no target overlaps between predictions and truths");
  if (corr_n) rep.ave_corr = corr_sum / static_cast<double>(corr_n);
  if (pooled_pred.size() >= 2) rep.over_corr = pearson(pooled_pred, pooled_truth);
  rep.ave_loss = loss_sum / static_cast<double>(rep.per_target.size());
  return rep;
}

inline constexpr std::size_t kLocalBins = 20;

/// Mean |real - predicted| per 1 Å bin of the real distance; the last bin
/// is open-ended.
inline std::vector<LocalBin> local_binned_error(std::span<const double> real, std::span<const double> predicted) {
  if (real.size() != predicted.size())
    throw Error(ErrorCode::length_mismatch, "local_binned_error: lengths differ");
  std::vector<LocalBin> bins(kLocalBins);
  std::vector<double> sums(kLocalBins, 0.0);
  for (std::size_t b = 0; b < kLocalBins; ++b) {
    bins[b].lo = static_cast<double>(b);
    bins[b].hi = b + 1 == kLocalBins ? std::numeric_limits<double>::infinity() : static_cast<double>(b + 1);
  }
  for (std::size_t i = 0; i < real.size(); ++i) {
    auto b = real[i] <= 0 ? std::size_t{0}
                          : std::min(kLocalBins - 1, static_cast<std::size_t>(std::floor(real[i])));
    ++bins[b].count;
    sums[b] += std::abs(real[i] - predicted[i]);
  }
  for (std::size_t b = 0; b < kLocalBins; ++b)
    if (bins[b].count) bins[b].mean_abs_error = sums[b] / static_cast<double>(bins[b].count);
  return bins;
}

struct SweepInput {
  std::string target_id;
  double pool_max = 0;
  ScoreMap consensus;
  ScoreMap truth;
};

struct SweepRow {
  double threshold = 0;
  std::size_t n_targets = 0;
  std::optional<double> average_corr;
};

inline SweepInput make_sweep_input(const ConsensusScores& c, const std::string& target_id, const ScoreMap& truth) {
  SweepInput in;
  in.target_id = target_id;
  in.pool_max = c.pool_max;
  for (std::size_t i = 0; i < c.model_ids.size(); ++i) in.consensus[c.model_ids[i]] = c.scores[i];
  in.truth = truth;
  return in;
}

/// For each threshold t: targets with pool_max <= t, and the mean of their
/// defined consensus-vs-truth correlations.
inline std::vector<SweepRow> threshold_sweep(std::span<const SweepInput> targets, std::span<const double> thresholds) {
  std::vector<std::optional<double>> corr(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::vector<double> xs, ys;
    for (const auto& [model, v] : targets[i].consensus) {
      auto it = targets[i].truth.find(model);
      if (it == targets[i].truth.end()) continue;
      xs.push_back(v);
      ys.push_back(it->second);
    }
    if (xs.size() >= 2) corr[i] = pearson(xs, ys);
  }
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    SweepRow row;
    row.threshold = t;
    double sum = 0;
    std::size_t defined = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i].pool_max > t) continue;
      ++row.n_targets;
      if (corr[i]) {
        sum += *corr[i];
        ++defined;
      }
    }
    if (defined) row.average_corr = sum / static_cast<double>(defined);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Files

/// Lines of `<target_id> <model_id> <gdt_ts>`.
inline TargetScores parse_truth_file(std::string_view content) {
  TargetScores out;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    auto tok = text::split_ws(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    auto v = tok.size() == 3 ? text::to_double(tok[2]) : std::nullopt;
    if (!v) throw Error(ErrorCode::parse, "truth file line " + std::to_string(line_no) + ": expected '<target> <model> <gdt_ts>'");
    out[std::string(tok[0])][std::string(tok[1])] = *v;
  }
  return out;
}

inline std::string write_truth_file(const TargetScores& truths) {
  std::string out;
  for (const auto& [target, scores] : truths)
    for (const auto& [model, v] : scores) out += target + " " + model + " " + text::exact(v) + "\n";
  return out;
}

namespace eval_detail {
inline std::string opt(const std::optional<double>& v, int decimals = 6) {
  return v ? text::fixed(*v, decimals) : std::string();
}
}  // namespace eval_detail

inline std::string write_global_summary(const EvalReport& r) {
  return "n_targets\tave_corr\tover_corr\tave_loss\texcluded_corr\n" + std::to_string(r.per_target.size()) + "\t" +
         eval_detail::opt(r.ave_corr) + "\t" + eval_detail::opt(r.over_corr) + "\t" + text::fixed(r.ave_loss, 6) +
         "\t" + std::to_string(r.excluded_correlations) + "\n";
}

inline std::string write_per_target(const EvalReport& r) {
  std::string out = "target\tn_models\tpearson\tloss\n";
  for (const auto& t : r.per_target)
    out += t.target_id + "\t" + std::to_string(t.n_models) + "\t" + eval_detail::opt(t.pearson) + "\t" +
           text::fixed(t.loss, 6) + "\n";
  return out;
}

inline std::string write_local_bins(std::span<const LocalBin> bins) {
  std::string out = "bin_lo\tbin_hi\tcount\tmean_abs_error\n";
  for (const auto& b : bins)
    out += text::fixed(b.lo, 0) + "\t" + (std::isinf(b.hi) ? std::string("inf") : text::fixed(b.hi, 0)) + "\t" +
           std::to_string(b.count) + "\t" + eval_detail::opt(b.mean_abs_error) + "\n";
  return out;
}

inline std::string write_sweep(std::span<const SweepRow> rows) {
  std::string out = "threshold\tn_targets\taverage_corr\n";
  for (const auto& r : rows)
    out += text::decimal(r.threshold) + "\t" + std::to_string(r.n_targets) + "\t" + eval_detail::opt(r.average_corr) + "\n";
  return out;
}

}  // namespace rfqa
