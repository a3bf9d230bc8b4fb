#pragma once

// Rigid superposition and superposition-based similarity measures.

#include "rfqa/error.hpp"
#include "rfqa/structure.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace rfqa {

struct Superposition {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();
  double rmsd = 0.0;

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

inline double rmsd_under(std::span<const Vec3> a, std::span<const Vec3> b, const Eigen::Matrix3d& rot,
                         const Vec3& t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (rot * a[i] + t - b[i]).squaredNorm();
  return a.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(a.size()));
}

/// Least-squares rigid fit of `a` onto `b` (Kabsch). A reflection in the
/// optimal orthogonal map is undone by flipping the weakest singular direction.
inline Superposition kabsch(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::length_mismatch, "kabsch: point sets differ in size");
  if (a.size() < 3) throw Error(ErrorCode::insufficient_overlap, "kabsch: need at least 3 points");

  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
  }
  ca /= static_cast<double>(a.size());
  cb /= static_cast<double>(b.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) cov += (a[i] - ca) * (b[i] - cb).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  Superposition s;
  s.rotation = v * d * u.transpose();
  s.translation = cb - s.rotation * ca;
  s.rmsd = rmsd_under(a, b, s.rotation, s.translation);
  return s;
}

struct GdtResult {
  double p1 = 0, p2 = 0, p4 = 0, p8 = 0;
  double gdt_ts = 0;
};

inline double gdt_mean(double p1, double p2, double p4, double p8) { return ((p1 + p2) + (p4 + p8)) / 4.0; }

/// CA coordinates of residues present in both structures, matched by seq_index.
struct CommonCa {
  std::vector<int> seq;
  std::vector<Vec3> model;
  std::vector<Vec3> reference;
};

inline CommonCa common_ca(const StructureModel& model, const StructureModel& reference) {
  CommonCa out;
  std::size_t i = 0, j = 0;
  while (i < model.residues.size() && j < reference.residues.size()) {
    int si = model.residues[i].seq_index, sj = reference.residues[j].seq_index;
    if (si == sj) {
      out.seq.push_back(si);
      out.model.push_back(model.residues[i].ca);
      out.reference.push_back(reference.residues[j].ca);
      ++i;
      ++j;
    } else if (si < sj) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

inline constexpr std::array<double, 4> kGdtCutoffs{1.0, 2.0, 4.0, 8.0};
inline constexpr std::array<std::size_t, 3> kGdtSeedLengths{3, 5, 7};
inline constexpr std::size_t kGdtSeedStep = 4;
inline constexpr int kGdtMaxIterations = 20;

/// GDT-TS of `model` against `reference` by seed-and-extend superposition
/// search. Every contiguous fragment of length 3, 5, 7 and the full common
/// length (start positions stepped by 4) seeds a fit that is refined on the
/// residues within each cutoff until membership stops changing or 20 fits.
/// Each visited superposition updates the best count at all four cutoffs,
/// which keeps p1 <= p2 <= p4 <= p8.
///
/// `norm_length` defaults to the reference residue count.
inline GdtResult gdt_ts(const StructureModel& model, const StructureModel& reference,
                        std::optional<std::size_t> norm_length = std::nullopt) {
  const CommonCa common = common_ca(model, reference);
  const std::size_t n = common.seq.size();
  if (n < 3)
    throw Error(ErrorCode::insufficient_overlap,
                "gdt_ts: only " + std::to_string(n) + " common residues between " + model.model_id + " and " +
                    reference.model_id);
  const std::size_t length = norm_length.value_or(reference.size());

  std::array<std::size_t, 4> best{0, 0, 0, 0};
  std::vector<double> dist(n);
  std::vector<Vec3> sub_a, sub_b;
  std::vector<std::size_t> members, next;

  auto fit_and_score = [&](const std::vector<std::size_t>& idx) {
    sub_a.clear();
    sub_b.clear();
    for (auto k : idx) {
      sub_a.push_back(common.model[k]);
      sub_b.push_back(common.reference[k]);
    }
    Superposition s = kabsch(sub_a, sub_b);
    std::array<std::size_t, 4> count{0, 0, 0, 0};
    for (std::size_t k = 0; k < n; ++k) {
      dist[k] = (s.apply(common.model[k]) - common.reference[k]).norm();
      for (std::size_t c = 0; c < 4; ++c)
        if (dist[k] <= kGdtCutoffs[c]) ++count[c];
    }
    for (std::size_t c = 0; c < 4; ++c) best[c] = std::max(best[c], count[c]);
  };

  std::vector<std::size_t> seed_lengths;
  for (auto len : kGdtSeedLengths)
    if (len < n) seed_lengths.push_back(len);
  seed_lengths.push_back(n);

  for (auto len : seed_lengths) {
    for (std::size_t start = 0; start + len <= n; start += kGdtSeedStep) {
      for (double cutoff : kGdtCutoffs) {
        members.clear();
        for (std::size_t k = start; k < start + len; ++k) members.push_back(k);
        for (int iter = 0; iter < kGdtMaxIterations; ++iter) {
          fit_and_score(members);
          next.clear();
          for (std::size_t k = 0; k < n; ++k)
            if (dist[k] <= cutoff) next.push_back(k);
          if (next.size() < 3 || next == members) break;
          members.swap(next);
        }
      }
    }
  }

  const double len = static_cast<double>(length);
  GdtResult r;
  r.p1 = static_cast<double>(best[0]) / len;
  r.p2 = static_cast<double>(best[1]) / len;
  r.p4 = static_cast<double>(best[2]) / len;
  r.p8 = static_cast<double>(best[3]) / len;
  r.gdt_ts = gdt_mean(r.p1, r.p2, r.p4, r.p8);
  return r;
}

struct ResidueDistance {
  int seq_index = 0;
  double distance = 0.0;
};

/// CA-CA deviations after one least-squares fit of the model onto the native
/// over all shared residues.
inline std::vector<ResidueDistance> per_residue_distances(const StructureModel& model,
                                                          const StructureModel& native) {
  const CommonCa common = common_ca(model, native);
  if (common.seq.size() < 3)
    throw Error(ErrorCode::insufficient_overlap, "per_residue_distances: fewer than 3 common residues");
  Superposition s = kabsch(common.model, common.reference);
  std::vector<ResidueDistance> out(common.seq.size());
  for (std::size_t k = 0; k < common.seq.size(); ++k)
    out[k] = {common.seq[k], (s.apply(common.model[k]) - common.reference[k]).norm()};
  return out;
}

/// Body-fixed frame of a point cloud: rows of `axes` are principal axes
/// (largest spread first, signs fixed by the third moment, right-handed).
/// Coordinates `axes * (p - origin)` are invariant under rigid motions.
struct Frame {
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  Vec3 origin = Vec3::Zero();

  Vec3 to_local(const Vec3& p) const { return axes * (p - origin); }
};

inline Frame principal_frame(std::span<const Vec3> points) {
  Frame f;
  if (points.empty()) return f;
  for (const auto& p : points) f.origin += p;
  f.origin /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) cov += (p - f.origin) * (p - f.origin).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // eigenvalues ascend; take the two largest
  Vec3 e1 = eig.eigenvectors().col(2);
  Vec3 e2 = eig.eigenvectors().col(1);
  auto orient = [&](Vec3& e) {
    double skew = 0.0;
    for (const auto& p : points) {
      double x = e.dot(p - f.origin);
      skew += x * x * x;
    }
    if (skew < 0.0) e = -e;
  };
  orient(e1);
  orient(e2);
  Vec3 e3 = e1.cross(e2);
  f.axes.row(0) = e1.transpose();
  f.axes.row(1) = e2.transpose();
  f.axes.row(2) = e3.transpose();
  return f;
}

}  // namespace rfqa
