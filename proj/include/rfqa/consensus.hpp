#pragma once

// Multi-model (pairwise) global quality.

#include "rfqa/error.hpp"
#include "rfqa/geometry.hpp"
#include "rfqa/parallel.hpp"
#include "rfqa/structure.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <string>
#include <vector>

namespace rfqa {

struct ConsensusScores {
  std::vector<std::string> model_ids;  // pool order
  std::vector<double> scores;          // mean GDT-TS against every other model
  double pool_max = 0.0;
  Eigen::MatrixXd gdt;  // symmetric pairwise GDT-TS, unit diagonal
};

/// Each model's mean GDT-TS against the rest of the pool. Pairs are
/// normalised by the target sequence length and evaluated once per
/// unordered pair; pairs sharing fewer than 3 residues score 0.
inline ConsensusScores pairwise_scores(const ModelPool& pool, unsigned threads = 1) {
  const std::size_t n = pool.models.size();
  if (n < 2) throw Error(ErrorCode::not_applicable, "pairwise scoring needs at least 2 models");

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  const std::size_t length = pool.sequence.empty() ? 0 : pool.sequence.size();
  std::vector<double> values(pairs.size(), 0.0);
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto& a = pool.models[pairs[k].first];
    const auto& b = pool.models[pairs[k].second];
    try {
      values[k] = gdt_ts(a, b, length ? std::optional<std::size_t>(length) : std::nullopt).gdt_ts;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::insufficient_overlap) throw;
      values[k] = 0.0;
    }
  });

  ConsensusScores out;
  out.gdt = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto i = static_cast<Eigen::Index>(pairs[k].first), j = static_cast<Eigen::Index>(pairs[k].second);
    out.gdt(i, j) = out.gdt(j, i) = values[k];
  }
  out.model_ids.reserve(n);
  out.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.model_ids.push_back(pool.models[i].model_id);
    // summed in sorted order so the mean does not depend on pool order
    std::vector<double> row;
    row.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(out.gdt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    std::sort(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += v;
    out.scores[i] = sum / static_cast<double>(n - 1);
  }
  out.pool_max = *std::max_element(out.scores.begin(), out.scores.end());
  return out;
}

}  // namespace rfqa
