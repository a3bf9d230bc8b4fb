#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace rfqa {

using Vec3 = Eigen::Vector3d;

struct Atom {
  std::string name;
  std::string element;
  Vec3 pos = Vec3::Zero();
};

struct Residue {
  int seq_index = 0;  // 1-based position in the target sequence
  char aa = 'A';
  Vec3 ca = Vec3::Zero();
  std::optional<Vec3> n;
  std::optional<Vec3> c;
  std::optional<Vec3> o;
  std::vector<Atom> side_chain;

  bool has_backbone() const { return n && c && o; }
};

struct StructureModel {
  std::string model_id;
  std::string target_id;
  std::vector<Residue> residues;  // strictly increasing seq_index

  std::size_t size() const { return residues.size(); }

  const Residue* find(int seq_index) const {
    auto it = std::lower_bound(residues.begin(), residues.end(), seq_index,
                               [](const Residue& r, int s) { return r.seq_index < s; });
    if (it == residues.end() || it->seq_index != seq_index) return nullptr;
    return &*it;
  }

  std::optional<std::size_t> position_of(int seq_index) const {
    const Residue* r = find(seq_index);
    if (!r) return std::nullopt;
    return static_cast<std::size_t>(r - residues.data());
  }
};

struct ModelPool {
  std::string target_id;
  std::vector<StructureModel> models;
  std::string sequence;
};

/// Sequence-derived per-position predictions, indexed by seq_index - 1.
struct PredictedAnnotations {
  std::string ss;          // 'H', 'E' or 'C'
  std::vector<double> sa;  // relative accessibility in [0,1]

  std::size_t size() const { return ss.size(); }
};

/// Applies x -> R x + t to every coordinate of the model.
inline StructureModel transformed(StructureModel m, const Eigen::Matrix3d& rot, const Vec3& t) {
  auto apply = [&](Vec3& v) { v = rot * v + t; };
  for (auto& r : m.residues) {
    apply(r.ca);
    if (r.n) apply(*r.n);
    if (r.c) apply(*r.c);
    if (r.o) apply(*r.o);
    for (auto& a : r.side_chain) apply(a.pos);
  }
  return m;
}

}  // namespace rfqa
