#pragma once

// PDB reading/writing, annotation files, and the QA prediction table.

#include "rfqa/amino_acids.hpp"
#include "rfqa/error.hpp"
#include "rfqa/structure.hpp"
#include "rfqa/text.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rfqa {

struct AtomRecord {
  std::string atom_name;
  std::string residue_name;
  int residue_seq = 0;
  char chain_id = ' ';
  char alt_loc = ' ';
  char insertion_code = ' ';
  double x = 0, y = 0, z = 0;
  std::string element;
};

namespace detail {

inline std::string_view column(std::string_view line, std::size_t first, std::size_t last) {
  // 1-based inclusive PDB columns, tolerant of short lines
  if (line.size() < first) return {};
  return line.substr(first - 1, std::min(last, line.size()) - (first - 1));
}

inline std::string err_at(std::size_t line_no, std::string_view msg) {
  return "line " + std::to_string(line_no) + ": " + std::string(msg);
}

inline AtomRecord parse_atom_line(std::string_view line, std::size_t line_no) {
  AtomRecord rec;
  rec.atom_name = std::string(text::trim(column(line, 13, 16)));
  if (rec.atom_name.empty()) throw Error(ErrorCode::parse, err_at(line_no, "empty atom name"));
  rec.alt_loc = line.size() >= 17 ? line[16] : ' ';
  rec.residue_name = std::string(text::trim(column(line, 18, 20)));
  rec.chain_id = line.size() >= 22 ? line[21] : ' ';
  rec.insertion_code = line.size() >= 27 ? line[26] : ' ';
  auto seq = text::to_int<int>(column(line, 23, 26));
  if (!seq) throw Error(ErrorCode::parse, err_at(line_no, "bad residue number"));
  rec.residue_seq = *seq;
  auto x = text::to_double(column(line, 31, 38));
  auto y = text::to_double(column(line, 39, 46));
  auto z = text::to_double(column(line, 47, 54));
  if (!x || !y || !z || !std::isfinite(*x) || !std::isfinite(*y) || !std::isfinite(*z))
    throw Error(ErrorCode::parse, err_at(line_no, "malformed coordinate field: " + std::string(line)));
  rec.x = *x;
  rec.y = *y;
  rec.z = *z;
  rec.element = std::string(text::trim(column(line, 77, 78)));
  if (rec.element.empty()) {
    for (char ch : rec.atom_name)
      if (std::isalpha(static_cast<unsigned char>(ch))) {
        rec.element = std::string(1, ch);
        break;
      }
  }
  return rec;
}

}  // namespace detail

/// Parses the first chain of the first MODEL block. One residue is produced
/// per residue number carrying a CA atom; residues without CA are dropped.
/// Hydrogens, insertion codes and alternate locations other than ' '/'A'
/// are skipped. HETATM records are read only for MSE and SEC.
inline StructureModel parse_pdb(std::string_view content, std::string model_id = {},
                                std::string target_id = {}) {
  StructureModel model;
  model.model_id = std::move(model_id);
  model.target_id = std::move(target_id);

  std::optional<char> chain;
  std::optional<int> current_seq;
  Residue pending;
  bool pending_has_ca = false;

  auto flush = [&](std::size_t line_no) {
    if (current_seq && pending_has_ca) {
      if (!model.residues.empty() && model.residues.back().seq_index >= pending.seq_index)
        throw Error(ErrorCode::parse, detail::err_at(line_no, "residue numbers not increasing"));
      model.residues.push_back(std::move(pending));
    }
    pending = Residue{};
    pending_has_ca = false;
  };

  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    auto tag = detail::column(line, 1, 6);
    if (tag.starts_with("ENDMDL") || text::trim(tag) == "END") break;
    bool atom = tag == "ATOM  " || tag == "ATOM";
    bool hetatm = tag == "HETATM";
    if (!atom && !hetatm) continue;

    auto rec = detail::parse_atom_line(line, line_no);
    if (hetatm && rec.residue_name != "MSE" && rec.residue_name != "SEC") continue;
    if (rec.alt_loc != ' ' && rec.alt_loc != 'A') continue;
    if (rec.insertion_code != ' ') continue;
    if (rec.element == "H" || rec.element == "D") continue;
    if (!chain) chain = rec.chain_id;
    if (rec.chain_id != *chain) continue;

    auto code = aa::from_three_letter(rec.residue_name);
    if (!code)
      throw Error(ErrorCode::parse,
                  detail::err_at(line_no, "unsupported residue name '" + rec.residue_name + "'"));
    if (rec.residue_seq < 1)
      throw Error(ErrorCode::parse, detail::err_at(line_no, "residue number must be >= 1"));

    if (!current_seq || *current_seq != rec.residue_seq) {
      flush(line_no);
      current_seq = rec.residue_seq;
      pending.seq_index = rec.residue_seq;
      pending.aa = *code;
    }
    Vec3 pos(rec.x, rec.y, rec.z);
    if (rec.atom_name == "CA") {
      if (pending_has_ca) continue;  // duplicate after altloc filtering
      pending.ca = pos;
      pending_has_ca = true;
    } else if (rec.atom_name == "N") {
      if (!pending.n) pending.n = pos;
    } else if (rec.atom_name == "C") {
      if (!pending.c) pending.c = pos;
    } else if (rec.atom_name == "O") {
      if (!pending.o) pending.o = pos;
    } else if (rec.atom_name != "OXT") {
      pending.side_chain.push_back({rec.atom_name, rec.element, pos});
    }
  }
  flush(line_no);

  if (model.residues.empty()) throw Error(ErrorCode::empty_model, "no residues with a CA atom");
  return model;
}

/// Renders ATOM records (3 decimals), backbone first then side-chain atoms.
inline std::string write_pdb(const StructureModel& model, char chain_id = 'A') {
  std::string out;
  int serial = 1;
  char buf[96];
  auto emit = [&](const std::string& name, const Residue& r, const Vec3& p, const std::string& el) {
    // 4-char names start in column 13; shorter names are padded into column 14
    std::string field = name.size() >= 4 ? name.substr(0, 4) : " " + name;
    std::snprintf(buf, sizeof buf, "ATOM  %5d %-4s %3s %c%4d    %8.3f%8.3f%8.3f  1.00  0.00          %2s\n",
                  serial++ % 100000, field.c_str(), std::string(aa::to_three_letter(r.aa)).c_str(),
                  chain_id, r.seq_index, p.x(), p.y(), p.z(), el.c_str());
    out += buf;
  };
  for (const auto& r : model.residues) {
    if (r.n) emit("N", r, *r.n, "N");
    emit("CA", r, r.ca, "C");
    if (r.c) emit("C", r, *r.c, "C");
    if (r.o) emit("O", r, *r.o, "O");
    for (const auto& a : r.side_chain) emit(a.name, r, a.pos, a.element);
  }
  out += "END\n";
  return out;
}

/// Returns the first mismatch between a model and the target sequence, if any.
inline std::optional<std::string> sequence_mismatch(const StructureModel& model, std::string_view sequence) {
  for (const auto& r : model.residues) {
    if (r.seq_index < 1 || static_cast<std::size_t>(r.seq_index) > sequence.size())
      return "position " + std::to_string(r.seq_index) + " outside target length " +
             std::to_string(sequence.size());
    char expected = sequence[static_cast<std::size_t>(r.seq_index - 1)];
    if (expected != r.aa)
      return "position " + std::to_string(r.seq_index) + " has " + std::string(1, r.aa) +
             ", sequence has " + std::string(1, expected);
  }
  return std::nullopt;
}

struct PoolLoad {
  ModelPool pool;
  std::vector<std::string> diagnostics;
};

/// Reads each file as one model (model_id = file stem) and keeps those
/// consistent with the target sequence. Input order is preserved.
inline PoolLoad load_pool(const std::vector<std::filesystem::path>& paths, const std::string& target_id,
                          const std::string& sequence) {
  if (sequence.empty()) throw Error(ErrorCode::validation, "empty target sequence for " + target_id);
  PoolLoad result;
  result.pool.target_id = target_id;
  result.pool.sequence = sequence;
  for (const auto& path : paths) {
    auto id = path.stem().string();
    try {
      auto model = parse_pdb(text::read_file(path), id, target_id);
      if (model.size() < 3) {
        result.diagnostics.push_back(path.string() + ": fewer than 3 residues");
        continue;
      }
      if (auto bad = sequence_mismatch(model, sequence)) {
        result.diagnostics.push_back(path.string() + ": sequence mismatch at " + *bad);
        continue;
      }
      result.pool.models.push_back(std::move(model));
    } catch (const Error& e) {
      result.diagnostics.push_back(path.string() + ": " + e.what());
    }
  }
  if (result.pool.models.empty())
    throw Error(ErrorCode::empty_pool, "no valid models for target " + target_id);
  return result;
}

/// Lists `*.pdb` files of a directory in lexicographic order.
inline std::vector<std::filesystem::path> list_pdb_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pdb") out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// QA table

struct QaRecord {
  std::string model_id;
  double global_score = 0.0;
  std::vector<std::optional<double>> distances;  // nullopt = not predicted
};

struct QaFile {
  std::string target_id;
  std::vector<QaRecord> records;
};

inline constexpr double kMinEmittedDistance = 0.1;

/// Renders the QA table: `TARGET`, `MODE 2`, then one line per model with a
/// 2-decimal global score and 1-decimal distances (`X` when not predicted).
/// Distances are floored at 0.1 on output.
inline std::string write_qa_output(const std::string& target_id, const std::vector<QaRecord>& records,
                                   double distance_cap = 15.0) {
  std::string out = "TARGET " + target_id + "\nMODE 2\n";
  for (const auto& rec : records) {
    if (!(rec.global_score >= 0.0 && rec.global_score <= 1.0))
      throw Error(ErrorCode::validation,
                  "global score " + text::exact(rec.global_score) + " for " + rec.model_id + " outside [0,1]");
    out += rec.model_id;
    out += ' ';
    out += text::fixed(rec.global_score, 2);
    for (const auto& d : rec.distances) {
      out += ' ';
      if (!d) {
        out += 'X';
        continue;
      }
      if (!(*d >= 0.0 && *d <= distance_cap))
        throw Error(ErrorCode::validation,
                    "distance " + text::exact(*d) + " for " + rec.model_id + " outside [0," +
                        text::exact(distance_cap) + "]");
      out += text::fixed(std::max(*d, kMinEmittedDistance), 1);
    }
    out += '\n';
  }
  return out;
}

inline QaFile parse_qa_output(std::string_view content) {
  QaFile file;
  std::size_t line_no = 0;
  bool saw_target = false;
  for (auto raw : text::lines(content)) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty()) continue;
    auto tok = text::split_ws(line);
    if (tok[0] == "TARGET") {
      if (tok.size() != 2) throw Error(ErrorCode::parse, detail::err_at(line_no, "bad TARGET line"));
      file.target_id = std::string(tok[1]);
      saw_target = true;
      continue;
    }
    if (tok[0] == "MODE" || tok[0] == "END" || tok[0] == "PFRMAT" || tok[0] == "AUTHOR" ||
        tok[0] == "METHOD" || tok[0] == "REMARK")
      continue;
    if (!saw_target) throw Error(ErrorCode::parse, detail::err_at(line_no, "record before TARGET line"));
    if (tok.size() < 2) throw Error(ErrorCode::parse, detail::err_at(line_no, "missing global score"));
    QaRecord rec;
    rec.model_id = std::string(tok[0]);
    auto g = text::to_double(tok[1]);
    if (!g) throw Error(ErrorCode::parse, detail::err_at(line_no, "bad global score"));
    rec.global_score = *g;
    for (std::size_t i = 2; i < tok.size(); ++i) {
      if (tok[i] == "X") {
        rec.distances.emplace_back();
        continue;
      }
      auto d = text::to_double(tok[i]);
      if (!d) throw Error(ErrorCode::parse, detail::err_at(line_no, "bad distance '" + std::string(tok[i]) + "'"));
      rec.distances.emplace_back(*d);
    }
    file.records.push_back(std::move(rec));
  }
  if (!saw_target) throw Error(ErrorCode::parse, "missing TARGET line");
  return file;
}

// ---------------------------------------------------------------------------
// Annotations

/// 8-state DSSP letters reduce to 3 states: H,G,I -> H; E,B -> E; else C.
inline char reduce_ss(char code) {
  switch (code) {
    case 'H': case 'G': case 'I': return 'H';
    case 'E': case 'B': return 'E';
    default: return 'C';
  }
}

inline PredictedAnnotations parse_annotations(std::string_view sequence, std::string_view ss_text,
                                              std::string_view sa_text) {
  auto ss = text::trim(ss_text);
  if (ss.size() != sequence.size())
    throw Error(ErrorCode::length_mismatch, "secondary structure length " + std::to_string(ss.size()) +
                                                " differs from sequence length " + std::to_string(sequence.size()));
  PredictedAnnotations ann;
  ann.ss.reserve(ss.size());
  for (char ch : ss) ann.ss.push_back(reduce_ss(ch));
  for (auto tok : text::split_ws(sa_text)) {
    auto v = text::to_double(tok);
    if (!v) throw Error(ErrorCode::parse, "bad accessibility value '" + std::string(tok) + "'");
    if (!(*v >= 0.0 && *v <= 1.0))
      throw Error(ErrorCode::validation, "accessibility value " + std::string(tok) + " outside [0,1]");
    ann.sa.push_back(*v);
  }
  if (ann.sa.size() != sequence.size())
    throw Error(ErrorCode::length_mismatch, "accessibility length " + std::to_string(ann.sa.size()) +
                                                " differs from sequence length " + std::to_string(sequence.size()));
  return ann;
}

struct AnnotationFile {
  std::string sequence;
  PredictedAnnotations annotations;
};

/// Three lines: sequence, SS string (3- or 8-state), whitespace-separated SA values.
inline AnnotationFile parse_annotation_file(std::string_view content) {
  std::vector<std::string_view> rows;
  for (auto l : text::lines(content))
    if (!text::trim(l).empty()) rows.push_back(text::trim(l));
  if (rows.size() < 3) throw Error(ErrorCode::parse, "annotation file needs 3 non-empty lines");
  AnnotationFile f;
  f.sequence = std::string(rows[0]);
  for (char ch : f.sequence)
    if (!aa::is_standard(ch))
      throw Error(ErrorCode::parse, "non-standard residue '" + std::string(1, ch) + "' in sequence");
  f.annotations = parse_annotations(f.sequence, rows[1], rows[2]);
  return f;
}

inline std::string write_annotation_file(std::string_view sequence, const PredictedAnnotations& ann) {
  std::string out(sequence);
  out += '\n';
  out += ann.ss;
  out += '\n';
  for (std::size_t i = 0; i < ann.sa.size(); ++i) {
    if (i) out += ' ';
    out += text::fixed(ann.sa[i], 3);
  }
  out += '\n';
  return out;
}

}  // namespace rfqa
