#pragma once

#include "rfqa/structure.hpp"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>

namespace rfqa::fixtures {

/// One ATOM record in fixed PDB columns.
inline std::string atom_line(int serial, std::string_view name, std::string_view res, char chain, int seq, double x,
                             double y, double z, char alt = ' ') {
  char buf[96];
  std::string field = name.size() >= 4 ? std::string(name) : " " + std::string(name);
  std::snprintf(buf, sizeof buf, "ATOM  %5d %-4s%c%3s %c%4d    %8.3f%8.3f%8.3f  1.00  0.00           %c\n", serial,
                field.c_str(), alt, std::string(res).c_str(), chain, seq, x, y, z, name[0]);
  return buf;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag) {
    path_ = std::filesystem::temp_directory_path() /
            (std::string("rfqa_") + std::string(tag) + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

}  // namespace rfqa::fixtures
