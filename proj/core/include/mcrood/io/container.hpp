#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <string_view>

namespace mcrood::io {

/// Output file written to a temporary sibling and renamed over the target on
/// commit(). Dropping it uncommitted removes the temporary.
class AtomicFile {
 public:
  explicit AtomicFile(std::filesystem::path path);
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile();

  std::ofstream& stream() noexcept { return out_; }
  const std::filesystem::path& path() const noexcept { return path_; }
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

void put_u32(std::ostream& out, std::uint32_t v);
void put_bytes(std::ostream& out, std::string_view bytes);
/// Reads a little-endian u32; throws IoError naming `path` on short reads.
std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path);
std::string get_bytes(std::istream& in, std::size_t n, const std::filesystem::path& path);

void write_text_atomic(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes) noexcept;

}  // namespace mcrood::io
