#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "mcrood/io/container.hpp"

namespace mcrood::io {

// Layout: "MCRD", u32 version, u32 rank, rank x u32 dims, u32 dtype tag,
// then row-major little-endian float32 payload.
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;

using Dims = std::vector<std::size_t>;

/// Streams rows into a dataset file whose full shape is known up front.
/// dims[0] is the row count; a row holds the product of the remaining dims.
class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, Dims dims);

  void append(std::span<const float> rows);
  void append(std::span<const double> rows);
  std::size_t rows_written() const noexcept { return written_ / row_size_; }
  /// Checks the row count and atomically publishes the file.
  void finish();

 private:
  AtomicFile file_;
  Dims dims_;
  std::size_t row_size_;
  std::size_t written_ = 0;
  std::vector<float> scratch_;
};

/// Read-only memory-mapped view of a dataset file.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);
  ~DatasetReader();
  DatasetReader(const DatasetReader&) = delete;
  DatasetReader& operator=(const DatasetReader&) = delete;

  const Dims& dims() const noexcept { return dims_; }
  std::size_t rows() const noexcept { return dims_.empty() ? 0 : dims_[0]; }
  std::size_t row_size() const noexcept { return row_size_; }
  std::span<const float> row(std::size_t i) const { return rows(i, 1); }
  std::span<const float> rows(std::size_t first, std::size_t count) const;
  std::span<const float> all() const noexcept { return {data_, rows() * row_size_}; }

 private:
  std::filesystem::path path_;
  Dims dims_;
  std::size_t row_size_ = 0;
  void* map_ = nullptr;
  std::size_t map_len_ = 0;
  const float* data_ = nullptr;
};

void write_dataset(const std::filesystem::path& path, const Dims& dims,
                   std::span<const float> data);

}  // namespace mcrood::io
