#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag)
      : path(std::filesystem::temp_directory_path() /
             ("mcrood_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace testing_support
