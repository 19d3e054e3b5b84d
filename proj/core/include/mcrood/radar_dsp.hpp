#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mcrood::dsp {

inline constexpr double kSpeedOfLight = 299792458.0;

using Complex = std::complex<double>;

enum class FastTimeWindow { hann, rectangular };

/// FMCW front-end parameters. Defaults are the 60 GHz short-range sensor
/// configuration (1 Tx, 3 Rx, 64 chirps x 128 samples, 50 ms frames).
struct RadarConfig {
  std::size_t n_tx = 1;
  std::size_t n_rx = 3;
  std::size_t n_chirps = 64;
  std::size_t n_samples = 128;
  double frame_period = 0.050;    // s
  double chirp_time = 391.55e-6;  // s, chirp-to-chirp
  double bandwidth = 1e9;         // Hz
  double carrier_freq = 60e9;     // Hz
  FastTimeWindow window = FastTimeWindow::hann;

  std::size_t n_range_bins() const noexcept { return n_samples / 2; }
  std::size_t n_doppler_bins() const noexcept { return n_chirps; }

  double wavelength() const noexcept { return kSpeedOfLight / carrier_freq; }
  /// Metres per range bin, c / 2B.
  double range_resolution() const noexcept { return kSpeedOfLight / (2.0 * bandwidth); }
  /// Metres per second per doppler bin, lambda / (2 N_c T_c).
  double velocity_resolution() const noexcept {
    return wavelength() / (2.0 * static_cast<double>(n_chirps) * chirp_time);
  }
  double max_range() const noexcept {
    return range_resolution() * static_cast<double>(n_range_bins());
  }

  /// Throws ConfigError when a count is zero, a time is non-positive, or an
  /// FFT size is not a power of two.
  void validate() const;
};

/// One frame of real ADC samples laid out [rx][chirp][sample].
struct RawFrameCube {
  std::size_t n_rx = 0;
  std::size_t n_chirps = 0;
  std::size_t n_samples = 0;
  std::vector<double> data;
  std::uint64_t frame_index = 0;

  static RawFrameCube zeros(const RadarConfig& cfg, std::uint64_t frame_index = 0);

  double& at(std::size_t rx, std::size_t chirp, std::size_t s) {
    return data[(rx * n_chirps + chirp) * n_samples + s];
  }
  double at(std::size_t rx, std::size_t chirp, std::size_t s) const {
    return data[(rx * n_chirps + chirp) * n_samples + s];
  }
};

/// Positive-frequency range spectra, [rx][chirp][range_bin].
struct RangeProfileFrame {
  std::size_t n_rx = 0;
  std::size_t n_chirps = 0;
  std::size_t n_range_bins = 0;
  std::vector<Complex> data;
  std::uint64_t frame_index = 0;

  Complex& at(std::size_t rx, std::size_t chirp, std::size_t bin) {
    return data[(rx * n_chirps + chirp) * n_range_bins + bin];
  }
  Complex at(std::size_t rx, std::size_t chirp, std::size_t bin) const {
    return data[(rx * n_chirps + chirp) * n_range_bins + bin];
  }
  bool same_shape(const RangeProfileFrame& o) const noexcept {
    return n_rx == o.n_rx && n_chirps == o.n_chirps && n_range_bins == o.n_range_bins;
  }
};

/// Complex range-doppler maps per receiver, [rx][doppler_bin][range_bin],
/// zero doppler at row n_doppler_bins / 2.
struct DopplerCube {
  std::size_t n_rx = 0;
  std::size_t n_doppler_bins = 0;
  std::size_t n_range_bins = 0;
  std::vector<Complex> data;

  Complex at(std::size_t rx, std::size_t doppler, std::size_t bin) const {
    return data[(rx * n_doppler_bins + doppler) * n_range_bins + bin];
  }
};

/// Non-negative magnitude image, row-major [doppler_bin][range_bin].
struct RangeDopplerImage {
  std::size_t n_doppler_bins = 0;
  std::size_t n_range_bins = 0;
  std::vector<double> data;
  std::uint64_t frame_index = 0;

  static RangeDopplerImage zeros(std::size_t n_doppler, std::size_t n_range,
                                 std::uint64_t frame_index = 0);

  double& at(std::size_t doppler, std::size_t bin) { return data[doppler * n_range_bins + bin]; }
  double at(std::size_t doppler, std::size_t bin) const {
    return data[doppler * n_range_bins + bin];
  }
  std::size_t size() const noexcept { return data.size(); }
  bool same_shape(const RangeDopplerImage& o) const noexcept {
    return n_doppler_bins == o.n_doppler_bins && n_range_bins == o.n_range_bins;
  }
};

/// Per-stream MTI bookkeeping. The slow-time mean-subtraction filter is
/// stateless; the counter is kept so stateful (inter-frame) filters can slot in.
struct MtiState {
  std::uint64_t frames_seen = 0;
};

RangeProfileFrame range_fft(const RawFrameCube& frame, const RadarConfig& cfg);

/// Removes the slow-time mean from every (rx, range_bin) column in place.
void mti_filter_inplace(RangeProfileFrame& profile);
std::vector<RangeProfileFrame> mti_filter(std::span<const RangeProfileFrame> profiles);

DopplerCube doppler_fft(const RangeProfileFrame& profile);

/// range_fft -> MTI -> doppler_fft -> |.| averaged over receivers.
RangeDopplerImage make_rdi(const RawFrameCube& frame, MtiState& state, const RadarConfig& cfg);

/// Maps a signed doppler index m (cycles per frame) to its row after fftshift.
std::size_t shifted_doppler_bin(long m, std::size_t n_doppler_bins) noexcept;

}  // namespace mcrood::dsp
