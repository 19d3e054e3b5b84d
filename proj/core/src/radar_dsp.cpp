#include "mcrood/radar_dsp.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

#include "mcrood/error.hpp"

namespace mcrood::dsp {
namespace {

// The FFTW planner is not re-entrant; plans are created once under a lock and
// executed concurrently through the new-array interface.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  // `howmany` real rows of length n, contiguous, into rows of n/2+1 bins.
  fftw_plan real_rows(int n, int howmany) {
    return get({0, n, howmany, 0}, [&] {
      std::vector<double> in(static_cast<std::size_t>(n * howmany));
      std::vector<fftw_complex> out(static_cast<std::size_t>((n / 2 + 1) * howmany));
      return fftw_plan_many_dft_r2c(1, &n, howmany, in.data(), nullptr, 1, n, out.data(), nullptr,
                                    1, n / 2 + 1, FFTW_ESTIMATE | FFTW_UNALIGNED);
    });
  }

  // `howmany` interleaved complex columns of length n with element stride `howmany`.
  fftw_plan complex_columns(int n, int howmany) {
    return get({1, n, howmany, 0}, [&] {
      std::vector<fftw_complex> in(static_cast<std::size_t>(n * howmany));
      std::vector<fftw_complex> out(in.size());
      return fftw_plan_many_dft(1, &n, howmany, in.data(), nullptr, howmany, 1, out.data(),
                                nullptr, howmany, 1, FFTW_FORWARD,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    });
  }

 private:
  using Key = std::tuple<int, int, int, int>;

  PlanCache() = default;

  template <typename Make>
  fftw_plan get(const Key& key, Make&& make) {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    fftw_plan plan = make();
    if (plan == nullptr) throw ConfigError("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

std::vector<double> fast_time_window(std::size_t n, FastTimeWindow kind) {
  std::vector<double> w(n, 1.0);
  if (kind == FastTimeWindow::hann) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                   static_cast<double>(n)));
    }
  }
  return w;
}

const std::vector<double>& cached_window(std::size_t n, FastTimeWindow kind) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, FastTimeWindow>, std::vector<double>> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(n, kind);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, fast_time_window(n, kind)).first;
  return it->second;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(std::span<const Complex> v) {
  for (const Complex& x : v) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
  }
  return true;
}

}  // namespace

void RadarConfig::validate() const {
  if (n_tx < 1 || n_rx < 1 || n_chirps < 1 || n_samples < 1) {
    throw ConfigError("radar config: all antenna and sample counts must be >= 1");
  }
  if (!(frame_period > 0.0) || !(chirp_time > 0.0) || !(bandwidth > 0.0) ||
      !(carrier_freq > 0.0)) {
    throw ConfigError("radar config: times, bandwidth and carrier must be > 0");
  }
  if (!std::has_single_bit(n_chirps) || !std::has_single_bit(n_samples) || n_samples < 2) {
    throw ConfigError("radar config: n_chirps and n_samples must be powers of two (got " +
                      std::to_string(n_chirps) + ", " + std::to_string(n_samples) + ")");
  }
  if (static_cast<double>(n_chirps) * chirp_time > frame_period) {
    throw ConfigError("radar config: chirp burst longer than the frame period");
  }
}

RawFrameCube RawFrameCube::zeros(const RadarConfig& cfg, std::uint64_t frame_index) {
  RawFrameCube cube;
  cube.n_rx = cfg.n_rx;
  cube.n_chirps = cfg.n_chirps;
  cube.n_samples = cfg.n_samples;
  cube.data.assign(cfg.n_rx * cfg.n_chirps * cfg.n_samples, 0.0);
  cube.frame_index = frame_index;
  return cube;
}

RangeDopplerImage RangeDopplerImage::zeros(std::size_t n_doppler, std::size_t n_range,
                                           std::uint64_t frame_index) {
  RangeDopplerImage img;
  img.n_doppler_bins = n_doppler;
  img.n_range_bins = n_range;
  img.data.assign(n_doppler * n_range, 0.0);
  img.frame_index = frame_index;
  return img;
}

std::size_t shifted_doppler_bin(long m, std::size_t n_doppler_bins) noexcept {
  const long n = static_cast<long>(n_doppler_bins);
  return static_cast<std::size_t>((((n / 2 + m) % n) + n) % n);
}

RangeProfileFrame range_fft(const RawFrameCube& frame, const RadarConfig& cfg) {
  if (frame.n_rx != cfg.n_rx || frame.n_chirps != cfg.n_chirps ||
      frame.n_samples != cfg.n_samples ||
      frame.data.size() != cfg.n_rx * cfg.n_chirps * cfg.n_samples) {
    throw ConfigError("range_fft: frame dims do not match radar config");
  }
  if (!all_finite(frame.data)) throw DataError("range_fft: non-finite ADC sample");

  const std::size_t n = cfg.n_samples;
  const std::size_t rows = cfg.n_rx * cfg.n_chirps;
  const std::size_t half = n / 2 + 1;
  const auto& window = cached_window(n, cfg.window);

  std::vector<double> windowed(frame.data.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = frame.data.data() + r * n;
    double* dst = windowed.data() + r * n;
    for (std::size_t s = 0; s < n; ++s) dst[s] = src[s] * window[s];
  }

  std::vector<Complex> spectrum(rows * half);
  fftw_plan plan = PlanCache::instance().real_rows(static_cast<int>(n), static_cast<int>(rows));
  fftw_execute_dft_r2c(plan, windowed.data(), reinterpret_cast<fftw_complex*>(spectrum.data()));

  RangeProfileFrame out;
  out.n_rx = cfg.n_rx;
  out.n_chirps = cfg.n_chirps;
  out.n_range_bins = cfg.n_range_bins();
  out.frame_index = frame.frame_index;
  out.data.resize(rows * out.n_range_bins);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(spectrum.begin() + static_cast<std::ptrdiff_t>(r * half), out.n_range_bins,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * out.n_range_bins));
  }
  return out;
}

void mti_filter_inplace(RangeProfileFrame& profile) {
  if (profile.n_chirps == 0) return;
  const double inv = 1.0 / static_cast<double>(profile.n_chirps);
  std::vector<Complex> mean(profile.n_range_bins);
  for (std::size_t rx = 0; rx < profile.n_rx; ++rx) {
    std::fill(mean.begin(), mean.end(), Complex{});
    for (std::size_t c = 0; c < profile.n_chirps; ++c) {
      for (std::size_t b = 0; b < profile.n_range_bins; ++b) mean[b] += profile.at(rx, c, b);
    }
    for (auto& m : mean) m *= inv;
    for (std::size_t c = 0; c < profile.n_chirps; ++c) {
      for (std::size_t b = 0; b < profile.n_range_bins; ++b) profile.at(rx, c, b) -= mean[b];
    }
  }
}

std::vector<RangeProfileFrame> mti_filter(std::span<const RangeProfileFrame> profiles) {
  if (profiles.empty()) throw ArgumentError("mti_filter: empty profile sequence");
  for (const auto& p : profiles) {
    if (!p.same_shape(profiles.front())) {
      throw ShapeError("mti_filter: profile shapes differ within the sequence");
    }
  }
  std::vector<RangeProfileFrame> out(profiles.begin(), profiles.end());
  for (auto& p : out) mti_filter_inplace(p);
  return out;
}

DopplerCube doppler_fft(const RangeProfileFrame& profile) {
  if (profile.data.size() != profile.n_rx * profile.n_chirps * profile.n_range_bins) {
    throw ShapeError("doppler_fft: profile data size does not match its dims");
  }
  if (!all_finite(profile.data)) throw DataError("doppler_fft: non-finite range profile");

  const std::size_t nc = profile.n_chirps;
  const std::size_t nr = profile.n_range_bins;
  DopplerCube out;
  out.n_rx = profile.n_rx;
  out.n_doppler_bins = nc;
  out.n_range_bins = nr;
  out.data.resize(profile.data.size());
  if (out.data.empty()) return out;

  fftw_plan plan =
      PlanCache::instance().complex_columns(static_cast<int>(nc), static_cast<int>(nr));
  std::vector<Complex> in(nc * nr);
  std::vector<Complex> spec(nc * nr);
  for (std::size_t rx = 0; rx < profile.n_rx; ++rx) {
    const std::size_t base = rx * nc * nr;
    std::copy_n(profile.data.begin() + static_cast<std::ptrdiff_t>(base), nc * nr, in.begin());
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(spec.data()));
    for (std::size_t k = 0; k < nc; ++k) {
      const std::size_t row = (k + nc / 2) % nc;
      std::copy_n(spec.begin() + static_cast<std::ptrdiff_t>(k * nr), nr,
                  out.data.begin() + static_cast<std::ptrdiff_t>(base + row * nr));
    }
  }
  return out;
}

RangeDopplerImage make_rdi(const RawFrameCube& frame, MtiState& state, const RadarConfig& cfg) {
  RangeProfileFrame profile = range_fft(frame, cfg);
  mti_filter_inplace(profile);
  const DopplerCube cube = doppler_fft(profile);

  RangeDopplerImage img =
      RangeDopplerImage::zeros(cube.n_doppler_bins, cube.n_range_bins, frame.frame_index);
  const std::size_t plane = cube.n_doppler_bins * cube.n_range_bins;
  for (std::size_t rx = 0; rx < cube.n_rx; ++rx) {
    const Complex* src = cube.data.data() + rx * plane;
    for (std::size_t i = 0; i < plane; ++i) img.data[i] += std::abs(src[i]);
  }
  const double inv_rx = 1.0 / static_cast<double>(cube.n_rx);
  for (double& v : img.data) v *= inv_rx;
  ++state.frames_seen;
  return img;
}

}  // namespace mcrood::dsp
