#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace rfqa::aa {

/// Canonical ordering of the 20 standard residues; index = one-hot digit.
inline constexpr std::string_view kOrder = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr int kCount = 20;

inline std::optional<int> index_of(char code) {
  auto pos = kOrder.find(code);
  if (pos == std::string_view::npos) return std::nullopt;
  return static_cast<int>(pos);
}

inline bool is_standard(char code) { return index_of(code).has_value(); }

/// Three-letter residue name to one-letter code. MSE and SEC are folded onto
/// their standard parents; anything else outside the 20 yields nullopt.
inline std::optional<char> from_three_letter(std::string_view name) {
  struct Entry {
    std::string_view three;
    char one;
  };
  static constexpr std::array<Entry, 22> table{{
      {"ALA", 'A'}, {"ARG", 'R'}, {"ASN", 'N'}, {"ASP", 'D'}, {"CYS", 'C'}, {"GLN", 'Q'},
      {"GLU", 'E'}, {"GLY", 'G'}, {"HIS", 'H'}, {"ILE", 'I'}, {"LEU", 'L'}, {"LYS", 'K'},
      {"MET", 'M'}, {"PHE", 'F'}, {"PRO", 'P'}, {"SER", 'S'}, {"THR", 'T'}, {"TRP", 'W'},
      {"TYR", 'Y'}, {"VAL", 'V'}, {"MSE", 'M'}, {"SEC", 'C'},
  }};
  for (const auto& e : table)
    if (e.three == name) return e.one;
  return std::nullopt;
}

inline std::string_view to_three_letter(char code) {
  switch (code) {
    case 'A': return "ALA"; case 'R': return "ARG"; case 'N': return "ASN";
    case 'D': return "ASP"; case 'C': return "CYS"; case 'Q': return "GLN";
    case 'E': return "GLU"; case 'G': return "GLY"; case 'H': return "HIS";
    case 'I': return "ILE"; case 'L': return "LEU"; case 'K': return "LYS";
    case 'M': return "MET"; case 'F': return "PHE"; case 'P': return "PRO";
    case 'S': return "SER"; case 'T': return "THR"; case 'W': return "TRP";
    case 'Y': return "TYR"; case 'V': return "VAL";
    default: return "UNK";
  }
}

// Theoretical maximum accessible surface area (Å²), Tien et al. 2013.
inline double max_area(char code) {
  switch (code) {
    case 'A': return 129.0; case 'R': return 274.0; case 'N': return 195.0;
    case 'D': return 193.0; case 'C': return 167.0; case 'E': return 223.0;
    case 'Q': return 225.0; case 'G': return 104.0; case 'H': return 224.0;
    case 'I': return 197.0; case 'L': return 201.0; case 'K': return 236.0;
    case 'M': return 224.0; case 'F': return 240.0; case 'P': return 159.0;
    case 'S': return 155.0; case 'T': return 172.0; case 'W': return 285.0;
    case 'Y': return 263.0; case 'V': return 174.0;
    default: return 0.0;
  }
}

inline double kyte_doolittle(char code) {
  switch (code) {
    case 'I': return 4.5;  case 'V': return 4.2;  case 'L': return 3.8;
    case 'F': return 2.8;  case 'C': return 2.5;  case 'M': return 1.9;
    case 'A': return 1.8;  case 'G': return -0.4; case 'T': return -0.7;
    case 'S': return -0.8; case 'W': return -0.9; case 'Y': return -1.3;
    case 'P': return -1.6; case 'H': return -3.2; case 'E': return -3.5;
    case 'Q': return -3.5; case 'D': return -3.5; case 'N': return -3.5;
    case 'K': return -3.9; case 'R': return -4.5;
    default: return 0.0;
  }
}

/// Kyte-Doolittle hydropathy rescaled so that R maps to 0 and I to 1.
inline double hydrophobicity_weight(char code) { return (kyte_doolittle(code) + 4.5) / 9.0; }

inline bool is_nonpolar(char code) {
  return std::string_view("AVLIPFMWGC").find(code) != std::string_view::npos;
}

}  // namespace rfqa::aa
