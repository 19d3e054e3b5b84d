#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "mcrood/error.hpp"
#include "mcrood/io/checkpoint.hpp"
#include "mcrood/io/container.hpp"
#include "mcrood/io/dataset.hpp"
#include "temp_dir.hpp"

using namespace mcrood;
using namespace mcrood::io;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spill(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

}  // namespace

TEST_CASE("dataset round trip is bit exact") {
  TempDir dir("io_ds");
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n;
  std::vector<float> data(5 * 3 * 4);
  for (float& v : data) v = n(rng);
  data[7] = -0.0f;
  data[8] = 1e-42f;  // subnormal
  const auto path = dir.path / "x.mcrd";
  write_dataset(path, {5, 3, 4}, data);

  const DatasetReader r(path);
  CHECK(r.dims() == Dims{5, 3, 4});
  CHECK(r.rows() == 5);
  CHECK(r.row_size() == 12);
  const auto all = r.all();
  REQUIRE(all.size() == data.size());
  CHECK(std::memcmp(all.data(), data.data(), data.size() * sizeof(float)) == 0);
  const auto two = r.rows(2, 2);
  CHECK(two[0] == data[24]);
  CHECK(r.row(4)[11] == data.back());
  CHECK_THROWS(r.rows(4, 2));
  CHECK(slurp(path).substr(0, 4) == "MCRD");
}

TEST_CASE("dataset writer streams rows") {
  TempDir dir("io_stream");
  const auto path = dir.path / "s.mcrd";
  {
    DatasetWriter w(path, {3, 2});
    const std::vector<double> a{1.0, 2.0}, b{3.0, 4.0}, c{5.0, 6.0};
    w.append(std::span<const double>(a));
    w.append(std::span<const double>(b));
    CHECK_FALSE(fs::exists(path));
    w.append(std::span<const double>(c));
    w.finish();
  }
  const DatasetReader r(path);
  CHECK(std::vector<float>(r.all().begin(), r.all().end()) == std::vector<float>{1, 2, 3, 4, 5, 6});

  DatasetWriter short_writer(dir.path / "short.mcrd", {3, 2});
  const std::vector<float> one{1.0f, 2.0f};
  short_writer.append(std::span<const float>(one));
  CHECK_THROWS_AS(short_writer.finish(), ArgumentError);
  CHECK_THROWS_AS(short_writer.append(std::span<const float>(std::vector<float>{1.0f})), ShapeError);
}

TEST_CASE("corrupt datasets are rejected") {
  TempDir dir("io_bad");
  const auto path = dir.path / "x.mcrd";
  write_dataset(path, {4, 4}, std::vector<float>(16, 1.0f));
  const std::string good = slurp(path);

  spill(path, "XXXX" + good.substr(4));
  CHECK_THROWS_AS(DatasetReader{path}, IoError);
  spill(path, good.substr(0, good.size() - 3));
  CHECK_THROWS_AS(DatasetReader{path}, IoError);
  spill(path, good.substr(0, 10));
  CHECK_THROWS_AS(DatasetReader{path}, IoError);
  CHECK_THROWS_AS(DatasetReader{dir.path / "missing.mcrd"}, IoError);
}

TEST_CASE("atomic files only appear on commit") {
  TempDir dir("io_atomic");
  const auto path = dir.path / "a.txt";
  {
    AtomicFile f(path);
    f.stream() << "partial";
  }
  CHECK_FALSE(fs::exists(path));
  CHECK(std::distance(fs::directory_iterator(dir.path), fs::directory_iterator{}) == 0);

  write_text_atomic(path, "first");
  {
    AtomicFile f(path);
    f.stream() << "second";
    CHECK(read_text(path) == "first");
    f.commit();
  }
  CHECK(read_text(path) == "second");
  CHECK_THROWS_AS(read_text(dir.path / "nope"), IoError);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("io_ckpt");
  ModelConfig cfg;
  cfg.input_size = 16;
  cfg.filters = {4, 8};
  cfg.latent_dim = 6;
  cfg.classes = {"sit", "walk"};
  Checkpoint ck{MultiDecoderModel<float>(cfg, 3), std::nullopt, R"({"note":"x"})"};
  ck.model.log().epochs_completed = 2;
  ck.model.log().initial_loss = 0.5;
  ck.model.log().epoch_loss = {0.4, 0.3};
  for (auto& b : ck.model.buffers()) b.value->fill(0.25f);
  Thresholds t;
  t.classes = cfg.classes;
  t.values = {0.01, 0.02};
  t.calibration_sizes = {10, 12};
  ck.thresholds = t;

  const auto path = dir.path / "m.ckpt";
  save_checkpoint(path, ck);
  CHECK(slurp(path).substr(0, 4) == "MCRK");
  Checkpoint back = load_checkpoint(path);

  CHECK(back.model.classes() == cfg.classes);
  CHECK(back.model.config().latent_dim == 6);
  auto p1 = ck.model.params(), p2 = back.model.params();
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].name == p2[i].name);
    CHECK(*p1[i].value == *p2[i].value);
  }
  for (auto& b : back.model.buffers()) {
    for (float v : b.value->data()) CHECK(v == 0.25f);
  }
  CHECK(back.model.log().epoch_loss == std::vector<double>{0.4, 0.3});
  CHECK(back.model.log().initial_loss == 0.5);
  REQUIRE(back.thresholds.has_value());
  CHECK(back.thresholds->values == t.values);
  CHECK(back.thresholds->calibration_sizes == t.calibration_sizes);
  CHECK(back.metadata.find("note") != std::string::npos);

  std::mt19937_64 rng(2);
  nn::Tensor<float> x({2, 1, 16, 16});
  for (auto& v : x.data()) v = std::uniform_real_distribution<float>(0, 1)(rng);
  CHECK(ck.model.reconstruction_errors_batch(x) == back.model.reconstruction_errors_batch(x));

  const std::string good = slurp(path);
  spill(path, good.substr(0, good.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  spill(path, "MCRX" + good.substr(4));
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
}
