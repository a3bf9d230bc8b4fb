#pragma once

// Random forest regression: CART trees grown on bootstrap resamples with a
// random feature subset tried at every split.

#include "rfqa/error.hpp"
#include "rfqa/features.hpp"
#include "rfqa/parallel.hpp"
#include "rfqa/random.hpp"
#include "rfqa/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rfqa {

/// Dense row-major design matrix with one label per row.
struct TrainingSet {
  std::size_t n_features = 0;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * n_features, n_features}; }
  double at(std::size_t i, std::size_t f) const { return x[i * n_features + f]; }

  void add(std::span<const double> features, double label) {
    if (features.size() != n_features) throw Error(ErrorCode::length_mismatch, "training row has wrong width");
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label);
  }
};

/// Labels are the S-score qualities of the samples.
inline TrainingSet to_training_set(std::span<const LabeledSample> samples) {
  TrainingSet t;
  t.n_features = samples.empty() ? kFeatureCount : samples.front().features.size();
  t.x.reserve(samples.size() * t.n_features);
  for (const auto& s : samples) t.add(s.features, s.true_quality);
  return t;
}

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;         // leaf output

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Nodes in pre-order; the root is nodes[0].
struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    std::size_t k = 0;
    while (!nodes[k].is_leaf()) {
      const auto& nd = nodes[k];
      k = static_cast<std::size_t>(x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
    }
    return nodes[k].value;
  }

  bool operator==(const Tree&) const = default;
};

struct TreeParams {
  std::size_t mtry = 1;
  std::size_t min_leaf = 5;
  std::size_t max_depth = 0;  // 0 = unlimited
};

struct SplitChoice {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;  // reduction of the sum of squared deviations
};

namespace forest_detail {

/// Best variance-reduction split of `rows` over the candidate features.
/// Thresholds are midpoints between consecutive distinct values; both sides
/// must keep at least `min_leaf` rows. Candidates are scanned by ascending
/// feature then threshold and replace the incumbent only when strictly
/// better beyond rounding noise, so ties keep the lowest feature/threshold.
inline std::optional<SplitChoice> best_split(const TrainingSet& data, std::span<const std::size_t> rows,
                                             std::span<const std::size_t> features, std::size_t min_leaf) {
  const std::size_t n = rows.size();
  double total = 0.0, total_sq = 0.0;
  for (auto r : rows) {
    total += data.y[r];
    total_sq += data.y[r] * data.y[r];
  }
  const double base = total * total / static_cast<double>(n);
  const double tolerance = 1e-12 * std::max(1.0, total_sq);

  std::optional<SplitChoice> best;
  std::vector<std::pair<double, double>> column(n);
  for (auto f : features) {
    for (std::size_t i = 0; i < n; ++i) column[i] = {data.at(rows[i], f), data.y[rows[i]]};
    std::sort(column.begin(), column.end());
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += column[i].second;
      if (column[i].first == column[i + 1].first) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double right_sum = total - left_sum;
      const double gain =
          left_sum * left_sum / static_cast<double>(nl) + right_sum * right_sum / static_cast<double>(nr) - base;
      if (gain <= tolerance) continue;
      if (!best || gain > best->gain + tolerance) {
        double lo = column[i].first, hi = column[i + 1].first;
        double mid = lo + (hi - lo) / 2.0;
        if (!(mid >= lo && mid < hi)) mid = lo;
        best = SplitChoice{f, mid, gain};
      }
    }
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, const TreeParams& params, std::uint64_t tree_seed)
      : data_(data), params_(params), seed_(tree_seed), all_features_(data.n_features) {
    std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
  }

  Tree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const auto index = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    double lo = data_.y[rows[0]], hi = lo, sum = 0.0;
    for (auto r : rows) {
      lo = std::min(lo, data_.y[r]);
      hi = std::max(hi, data_.y[r]);
      sum += data_.y[r];
    }
    auto make_leaf = [&] {
      auto& nd = tree_.nodes[static_cast<std::size_t>(index)];
      nd.value = lo == hi ? lo : std::clamp(sum / static_cast<double>(rows.size()), lo, hi);
      return index;
    };
    if (rows.size() < 2 * params_.min_leaf || lo == hi || (params_.max_depth && depth >= params_.max_depth))
      return make_leaf();

    // the node's own stream picks the candidate features
    Rng rng(derive_seed(seed_, {static_cast<std::uint64_t>(index)}));
    std::vector<std::size_t> features = all_features_;
    const std::size_t m = std::min(params_.mtry, features.size());
    for (std::size_t i = 0; i < m; ++i) {
      auto j = i + static_cast<std::size_t>(rng.below(features.size() - i));
      std::swap(features[i], features[j]);
    }
    features.resize(m);
    std::sort(features.begin(), features.end());

    auto split = best_split(data_, rows, features, params_.min_leaf);
    if (!split) return make_leaf();

    std::vector<std::size_t> left, right;
    for (auto r : rows) (data_.at(r, split->feature) <= split->threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    std::int32_t l = grow(std::move(left), depth + 1);
    std::int32_t r = grow(std::move(right), depth + 1);
    auto& nd = tree_.nodes[static_cast<std::size_t>(index)];
    nd.feature = static_cast<std::int32_t>(split->feature);
    nd.threshold = split->threshold;
    nd.left = l;
    nd.right = r;
    return index;
  }

  const TrainingSet& data_;
  TreeParams params_;
  std::uint64_t seed_;
  std::vector<std::size_t> all_features_;
  Tree tree_;
};

}  // namespace forest_detail

/// Grows one CART regression tree on `rows` (duplicates allowed).
inline Tree train_tree(const TrainingSet& data, std::vector<std::size_t> rows, const TreeParams& params,
                       std::uint64_t tree_seed) {
  if (rows.empty()) throw Error(ErrorCode::validation, "train_tree: no samples");
  if (params.min_leaf == 0 || params.mtry == 0) throw Error(ErrorCode::validation, "train_tree: bad parameters");
  return forest_detail::TreeBuilder(data, params, tree_seed).build(std::move(rows));
}

inline Tree train_tree(const TrainingSet& data, const TreeParams& params, std::uint64_t tree_seed) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return train_tree(data, std::move(rows), params, tree_seed);
}

struct ForestParams {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;  // 0 = floor(sqrt(n_features))
  std::size_t min_leaf = 5;
  std::size_t max_depth = 0;  // 0 = unlimited
  bool bootstrap = true;

  std::size_t resolved_mtry(std::size_t n_features) const {
    if (mtry) return mtry;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features)))));
  }

  void validate(std::size_t n_features) const {
    if (n_trees == 0) throw Error(ErrorCode::validation, "n_trees must be positive");
    if (min_leaf == 0) throw Error(ErrorCode::validation, "min_leaf must be positive");
    if (resolved_mtry(n_features) > n_features)
      throw Error(ErrorCode::validation, "mtry exceeds the number of features");
  }

  bool operator==(const ForestParams&) const = default;
};

/// Seed of tree `t`'s stream under a forest seed.
inline std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t t) {
  return derive_seed(forest_seed, {0x7EEULL, static_cast<std::uint64_t>(t)});
}

struct RandomForestModel {
  std::vector<Tree> trees;
  std::size_t n_features = 0;
  ForestParams params;  // mtry stored resolved
  std::uint64_t seed = 0;
  std::string feature_layout_version = kFeatureLayoutVersion;

  /// Mean of the tree outputs, confined to the range of those outputs.
  double predict(std::span<const double> x) const {
    if (x.size() != n_features)
      throw Error(ErrorCode::layout_mismatch, "feature vector has " + std::to_string(x.size()) +
                                                  " values, model expects " + std::to_string(n_features));
    if (trees.empty()) throw Error(ErrorCode::validation, "forest has no trees");
    double sum = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t t = 0; t < trees.size(); ++t) {
      double v = trees[t].predict(x);
      sum += v;
      lo = t ? std::min(lo, v) : v;
      hi = t ? std::max(hi, v) : v;
    }
    return std::clamp(sum / static_cast<double>(trees.size()), lo, hi);
  }

  void require_layout(std::string_view version, std::size_t width) const {
    if (feature_layout_version != version || n_features != width)
      throw Error(ErrorCode::layout_mismatch, "model layout " + feature_layout_version + "/" +
                                                  std::to_string(n_features) + " does not match " +
                                                  std::string(version) + "/" + std::to_string(width));
  }

  bool operator==(const RandomForestModel&) const = default;
};

/// Tree t is grown on a with-replacement resample (same size) drawn from
/// its own stream, so trees are independent of training order and thread
/// count.
inline RandomForestModel train_forest(const TrainingSet& data, const ForestParams& params, std::uint64_t seed,
                                      unsigned threads = 1) {
  if (data.size() == 0) throw Error(ErrorCode::validation, "train_forest: empty training set");
  params.validate(data.n_features);
  RandomForestModel model;
  model.n_features = data.n_features;
  model.params = params;
  model.params.mtry = params.resolved_mtry(data.n_features);
  model.seed = seed;
  model.trees.resize(params.n_trees);
  const TreeParams tp{model.params.mtry, params.min_leaf, params.max_depth};
  parallel_for(params.n_trees, threads, [&](std::size_t t) {
    const std::uint64_t ts = tree_seed(seed, t);
    std::vector<std::size_t> rows(data.size());
    if (params.bootstrap) {
      Rng rng(derive_seed(ts, {0xB007ULL}));
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(data.size()));
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    model.trees[t] = train_tree(data, std::move(rows), tp, ts);
  });
  return model;
}

// ---------------------------------------------------------------------------
// Persistence: line-oriented text, trees in pre-order, reals in shortest
// round-trip decimal form.

inline constexpr int kForestFormatVersion = 1;

inline std::string save_forest(const RandomForestModel& m) {
  std::string out = "rfqa-forest " + std::to_string(kForestFormatVersion) + "\n";
  out += "layout " + m.feature_layout_version + "\n";
  out += "n_features " + std::to_string(m.n_features) + "\n";
  out += "n_trees " + std::to_string(m.params.n_trees) + "\n";
  out += "mtry " + std::to_string(m.params.mtry) + "\n";
  out += "min_leaf " + std::to_string(m.params.min_leaf) + "\n";
  out += "max_depth " + std::to_string(m.params.max_depth) + "\n";
  out += "bootstrap " + std::string(m.params.bootstrap ? "1" : "0") + "\n";
  out += "seed " + std::to_string(m.seed) + "\n";
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    out += "tree " + std::to_string(t) + " " + std::to_string(m.trees[t].nodes.size()) + "\n";
    for (const auto& nd : m.trees[t].nodes) {
      if (nd.is_leaf())
        out += "L " + text::exact(nd.value) + "\n";
      else
        out += "S " + std::to_string(nd.feature) + " " + text::exact(nd.threshold) + "\n";
    }
  }
  out += "end\n";
  return out;
}

inline RandomForestModel load_forest(std::string_view content) {
  auto rows = text::lines(content);
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> Error {
    return Error(ErrorCode::parse, "forest file line " + std::to_string(pos) + ": " + msg);
  };
  auto next = [&]() -> std::vector<std::string_view> {
    while (pos < rows.size()) {
      auto tok = text::split_ws(rows[pos++]);
      if (!tok.empty()) return tok;
    }
    throw fail("unexpected end of file");
  };
  auto field = [&](std::string_view key) -> std::string_view {
    auto tok = next();
    if (tok.size() != 2 || tok[0] != key) throw fail("expected '" + std::string(key) + "'");
    return tok[1];
  };
  auto number = [&](std::string_view key) -> std::uint64_t {
    auto v = text::to_int<std::uint64_t>(field(key));
    if (!v) throw fail("bad value for " + std::string(key));
    return *v;
  };

  auto head = next();
  if (head.size() != 2 || head[0] != "rfqa-forest") throw fail("not a forest file");
  if (text::to_int<int>(head[1]) != kForestFormatVersion) throw fail("unsupported format version");
  RandomForestModel m;
  m.feature_layout_version = std::string(field("layout"));
  m.n_features = number("n_features");
  m.params.n_trees = number("n_trees");
  m.params.mtry = number("mtry");
  m.params.min_leaf = number("min_leaf");
  m.params.max_depth = number("max_depth");
  m.params.bootstrap = number("bootstrap") != 0;
  m.seed = number("seed");

  m.trees.resize(m.params.n_trees);
  for (std::size_t t = 0; t < m.params.n_trees; ++t) {
    auto tok = next();
    if (tok.size() != 3 || tok[0] != "tree" || text::to_int<std::size_t>(tok[1]) != t) throw fail("expected tree header");
    auto count = text::to_int<std::size_t>(tok[2]);
    if (!count || *count == 0) throw fail("bad node count");
    auto& nodes = m.trees[t].nodes;
    nodes.resize(*count);
    std::size_t cursor = 0;
    // recursive descent over the pre-order listing
    auto parse_node = [&](auto& self) -> std::int32_t {
      if (cursor >= nodes.size()) throw fail("tree " + std::to_string(t) + " is truncated");
      auto idx = cursor++;
      auto nt = next();
      auto& nd = nodes[idx];
      if (nt.size() == 2 && nt[0] == "L") {
        auto v = text::to_double(nt[1]);
        if (!v) throw fail("bad leaf value");
        nd.value = *v;
      } else if (nt.size() == 3 && nt[0] == "S") {
        auto f = text::to_int<std::int32_t>(nt[1]);
        auto thr = text::to_double(nt[2]);
        if (!f || !thr || *f < 0 || static_cast<std::size_t>(*f) >= m.n_features) throw fail("bad split node");
        nd.feature = *f;
        nd.threshold = *thr;
        std::int32_t l = self(self);
        std::int32_t r = self(self);
        nodes[idx].left = l;
        nodes[idx].right = r;
      } else {
        throw fail("bad node record");
      }
      return static_cast<std::int32_t>(idx);
    };
    parse_node(parse_node);
    if (cursor != nodes.size()) throw fail("tree " + std::to_string(t) + " node count mismatch");
  }
  auto tail = next();
  if (tail.size() != 1 || tail[0] != "end") throw fail("expected 'end'");
  return m;
}

// ---------------------------------------------------------------------------
// Class-balanced subsampling

inline constexpr int kQualityClasses = 5;

/// Half-open quality bins [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1].
inline int quality_class(double q) {
  if (q < 0.2) return 0;
  if (q < 0.4) return 1;
  if (q < 0.6) return 2;
  if (q < 0.8) return 3;
  return 4;
}

struct BalancedSample {
  std::vector<LabeledSample> samples;
  std::array<std::size_t, kQualityClasses> per_class_counts{};
  std::vector<std::string> diagnostics;
};

/// Draws up to `per_class` samples uniformly without replacement from each
/// quality class; the combined selection is shuffled.
inline BalancedSample balanced_sample(std::span<const LabeledSample> dataset, std::size_t per_class,
                                      std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kQualityClasses> members;
  for (std::size_t i = 0; i < dataset.size(); ++i) members[static_cast<std::size_t>(quality_class(dataset[i].true_quality))].push_back(i);

  BalancedSample out;
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& idx = members[c];
    if (idx.size() < per_class)
      out.diagnostics.push_back("class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                                " samples, fewer than the requested " + std::to_string(per_class));
    std::size_t take = std::min(per_class, idx.size());
    Rng rng(derive_seed(seed, {0xC1A55ULL, c}));
    for (std::size_t i = 0; i < take; ++i) {
      auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    out.per_class_counts[c] = take;
  }
  Rng rng(derive_seed(seed, {0x5AFFULL}));
  rng.shuffle(chosen);
  out.samples.reserve(chosen.size());
  for (auto i : chosen) out.samples.push_back(dataset[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Repeated k-fold cross-validation

struct FoldResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::size_t size = 0;
  double mae = 0;
  double mse = 0;
};

struct CvReport {
  std::vector<FoldResult> folds;
  double mean_mae = 0, mean_mse = 0;  // over all folds
  double sd_mae = 0, sd_mse = 0;      // of the per-repeat means
};

/// Sizes of k near-equal folds: the first n mod k folds get one extra.
inline std::vector<std::size_t> fold_sizes(std::size_t n, std::size_t k) {
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
  return sizes;
}

/// Errors are measured on the quality (S-score) scale.
inline CvReport k_fold_cv(const TrainingSet& data, std::size_t k, const ForestParams& params, std::uint64_t seed,
                          std::size_t repeats = 10, unsigned threads = 1) {
  if (k < 2 || data.size() < k)
    throw Error(ErrorCode::validation, "cross-validation needs 2 <= k <= sample count (k=" + std::to_string(k) +
                                           ", n=" + std::to_string(data.size()) + ")");
  if (repeats == 0) throw Error(ErrorCode::validation, "cross-validation needs at least one repeat");
  CvReport report;
  std::vector<double> repeat_mae, repeat_mse;
  const auto sizes = fold_sizes(data.size(), k);
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {0xF01DULL, rep}));
    rng.shuffle(order);

    double rep_abs = 0, rep_sq = 0;
    std::size_t offset = 0;
    for (std::size_t f = 0; f < k; ++f) {
      TrainingSet train{data.n_features, {}, {}};
      std::vector<std::size_t> held(order.begin() + static_cast<std::ptrdiff_t>(offset),
                                    order.begin() + static_cast<std::ptrdiff_t>(offset + sizes[f]));
      for (std::size_t i = 0; i < order.size(); ++i)
        if (i < offset || i >= offset + sizes[f]) train.add(data.row(order[i]), data.y[order[i]]);
      offset += sizes[f];

      ForestParams fp = params;
      fp.mtry = params.resolved_mtry(data.n_features);
      auto model = train_forest(train, fp, derive_seed(seed, {rep, f}), threads);
      double abs_sum = 0, sq_sum = 0;
      for (auto i : held) {
        double e = model.predict(data.row(i)) - data.y[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
      }
      FoldResult fr{rep, f, held.size(), abs_sum / static_cast<double>(held.size()),
                    sq_sum / static_cast<double>(held.size())};
      report.folds.push_back(fr);
      rep_abs += abs_sum;
      rep_sq += sq_sum;
    }
    repeat_mae.push_back(rep_abs / static_cast<double>(data.size()));
    repeat_mse.push_back(rep_sq / static_cast<double>(data.size()));
  }
  for (const auto& f : report.folds) {
    report.mean_mae += f.mae;
    report.mean_mse += f.mse;
  }
  report.mean_mae /= static_cast<double>(report.folds.size());
  report.mean_mse /= static_cast<double>(report.folds.size());
  auto sd = [](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  report.sd_mae = sd(repeat_mae);
  report.sd_mse = sd(repeat_mse);
  return report;
}

inline std::string write_cv_report(const CvReport& r) {
  std::string out = "repeat\tfold\tsize\tmae\tmse\n";
  for (const auto& f : r.folds)
    out += std::to_string(f.repeat) + "\t" + std::to_string(f.fold) + "\t" + std::to_string(f.size) + "\t" +
           text::fixed(f.mae, 6) + "\t" + text::fixed(f.mse, 6) + "\n";
  out += "mean\t-\t-\t" + text::fixed(r.mean_mae, 6) + "\t" + text::fixed(r.mean_mse, 6) + "\n";
  out += "sd\t-\t-\t" + text::fixed(r.sd_mae, 6) + "\t" + text::fixed(r.sd_mse, 6) + "\n";
  return out;
}

}  // namespace rfqa
