#pragma once

// Synthetic backbones for tests and desk-scale experiments: ideal-geometry
// chains built from backbone torsions, random self-avoiding natives, and
// decoys with Gaussian coordinate noise.

#include "rfqa/amino_acids.hpp"
#include "rfqa/features.hpp"
#include "rfqa/random.hpp"
#include "rfqa/structure.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace rfqa::synthetic {

inline constexpr double kBondNCa = 1.458;
inline constexpr double kBondCaC = 1.525;
inline constexpr double kBondCN = 1.329;
inline constexpr double kBondCO = 1.231;
inline constexpr double kAngleNCaC = 111.2;
inline constexpr double kAngleCaCN = 116.2;
inline constexpr double kAngleCNCa = 121.7;
inline constexpr double kAngleCaCO = 120.5;

inline double radians(double deg) { return deg * std::numbers::pi / 180.0; }

/// Places D so that |CD| = length, angle BCD = angle_deg and dihedral
/// ABCD = torsion_deg (natural extension of reference frame).
inline Vec3 place(const Vec3& a, const Vec3& b, const Vec3& c, double length, double angle_deg, double torsion_deg) {
  Vec3 bc = (c - b).normalized();
  Vec3 n = (b - a).cross(bc).normalized();
  Vec3 m = n.cross(bc);
  double th = radians(angle_deg), ph = radians(torsion_deg);
  Vec3 d2(-length * std::cos(th), length * std::sin(th) * std::cos(ph), length * std::sin(th) * std::sin(ph));
  return c + bc * d2.x() + m * d2.y() + n * d2.z();
}

/// Backbone (N, CA, C, O) for `sequence` with the given phi/psi (degrees)
/// and trans peptide bonds. Residues are numbered from 1.
inline StructureModel build_backbone(std::string_view sequence, std::span<const double> phi,
                                     std::span<const double> psi, std::string model_id = "model",
                                     std::string target_id = "target") {
  StructureModel m;
  m.model_id = std::move(model_id);
  m.target_id = std::move(target_id);
  const std::size_t n = sequence.size();
  m.residues.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = m.residues[i];
    r.seq_index = static_cast<int>(i + 1);
    r.aa = sequence[i];
    Vec3 nn, ca, c;
    if (i == 0) {
      nn = Vec3(0, 0, 0);
      ca = Vec3(kBondNCa, 0, 0);
      double th = radians(180.0 - kAngleNCaC);
      c = ca + kBondCaC * Vec3(std::cos(th), std::sin(th), 0);
    } else {
      const auto& p = m.residues[i - 1];
      nn = place(*p.n, p.ca, *p.c, kBondCN, kAngleCaCN, psi[i - 1]);
      ca = place(p.ca, *p.c, nn, kBondNCa, kAngleCNCa, 180.0);
      c = place(*p.c, nn, ca, kBondCaC, kAngleNCaC, phi[i]);
    }
    r.n = nn;
    r.ca = ca;
    r.c = c;
    r.o = place(nn, ca, c, kBondCO, kAngleCaCO, psi[i] + 180.0);
  }
  return m;
}

inline StructureModel ideal_helix(std::string_view sequence) {
  std::vector<double> phi(sequence.size(), -57.0), psi(sequence.size(), -47.0);
  return build_backbone(sequence, phi, psi, "helix");
}

/// CA-only chain along +x with 3.8 Å spacing; residue i at (3.8 i, 0, 0).
inline StructureModel extended_ca_chain(std::string_view sequence) {
  StructureModel m;
  m.model_id = "extended";
  m.target_id = "target";
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    Residue r;
    r.seq_index = static_cast<int>(i + 1);
    r.aa = sequence[i];
    r.ca = Vec3(kDefaultD0 * r.seq_index, 0, 0);
    m.residues.push_back(r);
  }
  return m;
}

inline std::string random_sequence(std::size_t n, Rng& rng) {
  std::string s(n, 'A');
  for (auto& ch : s) ch = aa::kOrder[static_cast<std::size_t>(rng.below(aa::kCount))];
  return s;
}

inline bool self_avoiding(const StructureModel& m, double min_ca = 4.0) {
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 3; j < m.size(); ++j)
      if ((m.residues[i].ca - m.residues[j].ca).norm() < min_ca) return false;
  return true;
}

/// Random native-like backbone of helix, strand and loop segments, redrawn
/// until no two CA atoms three or more residues apart come within 4 Å.
inline StructureModel random_native(std::size_t length, std::uint64_t seed, std::string target_id = "T0001") {
  Rng rng(derive_seed(seed, {0x9A71ULL}));
  const std::string seq = random_sequence(length, rng);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<double> phi, psi;
    while (phi.size() < length) {
      auto kind = rng.below(3);
      std::size_t seg = kind == 0 ? 6 + rng.below(8) : kind == 1 ? 4 + rng.below(4) : 2 + rng.below(4);
      for (std::size_t k = 0; k < seg && phi.size() < length; ++k) {
        if (kind == 0) {
          phi.push_back(-57.0 + rng.uniform(-5, 5));
          psi.push_back(-47.0 + rng.uniform(-5, 5));
        } else if (kind == 1) {
          phi.push_back(-120.0 + rng.uniform(-10, 10));
          psi.push_back(130.0 + rng.uniform(-10, 10));
        } else {
          phi.push_back(rng.uniform(-160, -60));
          psi.push_back(rng.uniform(-60, 160));
        }
      }
    }
    auto m = build_backbone(seq, phi, psi, target_id, target_id);
    if (self_avoiding(m)) return m;
  }
  throw Error(ErrorCode::validation, "random_native: could not build a self-avoiding chain");
}

/// Copy of `native` with independent N(0, sigma²) noise on every coordinate.
inline StructureModel noisy_decoy(const StructureModel& native, double sigma, std::uint64_t seed, std::string model_id) {
  Rng rng(seed);
  StructureModel m = native;
  m.model_id = std::move(model_id);
  auto jitter = [&](Vec3& v) { v += sigma * Vec3(rng.normal(), rng.normal(), rng.normal()); };
  for (auto& r : m.residues) {
    if (r.n) jitter(*r.n);
    jitter(r.ca);
    if (r.c) jitter(*r.c);
    if (r.o) jitter(*r.o);
    for (auto& a : r.side_chain) jitter(a.pos);
  }
  return m;
}

/// Uniformly random rotation (normalised Gaussian quaternion).
inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

/// Annotations taken from a structure itself (an ideal sequence predictor).
inline PredictedAnnotations annotations_of(const StructureModel& m, std::size_t target_length) {
  PredictedAnnotations ann;
  ann.ss.assign(target_length, 'C');
  ann.sa.assign(target_length, 0.5);
  auto mine = annotate(m);
  for (std::size_t k = 0; k < m.size(); ++k) {
    auto idx = static_cast<std::size_t>(m.residues[k].seq_index - 1);
    ann.ss[idx] = mine.ss[k];
    ann.sa[idx] = mine.rsa[k];
  }
  return ann;
}

inline std::string sequence_of(const StructureModel& m) {
  std::string s;
  for (const auto& r : m.residues) s.push_back(r.aa);
  return s;
}

}  // namespace rfqa::synthetic
