#include "mcrood/io/dataset.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

#include "mcrood/error.hpp"

namespace mcrood::io {

namespace fs = std::filesystem;

static_assert(sizeof(float) == 4, "float32 payload");

namespace {

constexpr char kMagic[4] = {'M', 'C', 'R', 'D'};

std::size_t product_tail(const Dims& dims) {
  return std::accumulate(dims.begin() + 1, dims.end(), std::size_t{1}, std::multiplies<>{});
}

}  // namespace

DatasetWriter::DatasetWriter(const fs::path& path, Dims dims)
    : file_(path), dims_(std::move(dims)) {
  if (dims_.empty()) throw ArgumentError("dataset: rank must be >= 1");
  row_size_ = product_tail(dims_);
  if (row_size_ == 0) throw ArgumentError("dataset: zero-sized rows");
  auto& out = file_.stream();
  out.write(kMagic, 4);
  put_u32(out, kDatasetVersion);
  put_u32(out, static_cast<std::uint32_t>(dims_.size()));
  for (std::size_t d : dims_) put_u32(out, static_cast<std::uint32_t>(d));
  put_u32(out, kDtypeFloat32);
}

void DatasetWriter::append(std::span<const float> rows) {
  if (rows.size() % row_size_ != 0) throw ShapeError("dataset: partial row appended");
  if (written_ + rows.size() > dims_[0] * row_size_) {
    throw ArgumentError("dataset: more rows than declared (" + std::to_string(dims_[0]) + ")");
  }
  file_.stream().write(reinterpret_cast<const char*>(rows.data()),
                       static_cast<std::streamsize>(rows.size() * sizeof(float)));
  written_ += rows.size();
}

void DatasetWriter::append(std::span<const double> rows) {
  scratch_.assign(rows.begin(), rows.end());
  append(std::span<const float>(scratch_));
}

void DatasetWriter::finish() {
  if (written_ != dims_[0] * row_size_) {
    throw ArgumentError("dataset: wrote " + std::to_string(written_ / row_size_) + " of " +
                        std::to_string(dims_[0]) + " declared rows");
  }
  file_.commit();
}

DatasetReader::DatasetReader(const fs::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  const std::string magic = get_bytes(in, 4, path);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw IoError(path.string(), "bad magic, not a dataset file");
  const std::uint32_t version = get_u32(in, path);
  if (version != kDatasetVersion) {
    throw IoError(path.string(), "unsupported dataset version " + std::to_string(version));
  }
  const std::uint32_t rank = get_u32(in, path);
  if (rank == 0 || rank > 16) throw IoError(path.string(), "invalid rank");
  for (std::uint32_t i = 0; i < rank; ++i) dims_.push_back(get_u32(in, path));
  if (get_u32(in, path) != kDtypeFloat32) throw IoError(path.string(), "unsupported dtype");
  const std::size_t header = 4 * (4 + rank);
  row_size_ = product_tail(dims_);
  const std::size_t payload = dims_[0] * row_size_ * sizeof(float);

  const std::size_t file_size = fs::file_size(path);
  if (file_size != header + payload) {
    throw IoError(path.string(), "payload is " + std::to_string(file_size - header) +
                                     " bytes, header implies " + std::to_string(payload));
  }
  if (payload == 0) return;

  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw IoError(path.string(), "cannot open for mapping");
  map_len_ = file_size;
  map_ = ::mmap(nullptr, map_len_, PROT_READ, MAP_PRIVATE, fd, 0);
  ::close(fd);
  if (map_ == MAP_FAILED) {
    map_ = nullptr;
    throw IoError(path.string(), "mmap failed");
  }
  data_ = reinterpret_cast<const float*>(static_cast<const char*>(map_) + header);
}

DatasetReader::~DatasetReader() {
  if (map_) ::munmap(map_, map_len_);
}

std::span<const float> DatasetReader::rows(std::size_t first, std::size_t count) const {
  if (first + count > rows()) {
    throw ArgumentError(path_.string() + ": rows [" + std::to_string(first) + ", " +
                        std::to_string(first + count) + ") out of range");
  }
  return {data_ + first * row_size_, count * row_size_};
}

void write_dataset(const fs::path& path, const Dims& dims, std::span<const float> data) {
  DatasetWriter w(path, dims);
  w.append(data);
  w.finish();
}

}  // namespace mcrood::io
