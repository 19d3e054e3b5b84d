#include "mcrood/respd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcrood/error.hpp"

namespace mcrood::respd {
namespace {

// Running sums are rebuilt from scratch this often to bound accumulated drift.
constexpr std::size_t kRecomputeInterval = 4096;

void add_into(std::vector<double>& acc, const std::vector<double>& x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

void sub_from(std::vector<double>& acc, const std::vector<double>& x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] -= x[i];
}

}  // namespace

void FrameWindowConfig::validate() const {
  if (window_size < 1) throw ConfigError("respd: window_size must be >= 1");
  if (stride < 1) throw ConfigError("respd: stride must be >= 1");
}

std::vector<RangeDopplerImage> respd_transform(std::span<const RangeDopplerImage> seq,
                                               const FrameWindowConfig& cfg) {
  cfg.validate();
  const std::size_t w = cfg.window_size;
  if (seq.size() < w) {
    throw ArgumentError("respd_transform: sequence of " + std::to_string(seq.size()) +
                        " frames is shorter than the window; need at least " + std::to_string(w));
  }
  const RangeDopplerImage& first = seq.front();
  for (const auto& f : seq) {
    if (!f.same_shape(first) || f.data.size() != first.data.size()) {
      throw ShapeError("respd_transform: frames differ in shape");
    }
  }

  const std::size_t n_windows = seq.size() - w + 1;
  std::vector<RangeDopplerImage> out;
  out.reserve((n_windows + cfg.stride - 1) / cfg.stride);

  std::vector<double> sum(first.data.size(), 0.0);
  auto rebuild = [&](std::size_t start) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t k = start; k < start + w; ++k) add_into(sum, seq[k].data);
  };

  rebuild(0);
  std::size_t since_rebuild = 0;
  for (std::size_t i = 0; i < n_windows; ++i) {
    if (i > 0) {
      if (++since_rebuild >= kRecomputeInterval) {
        rebuild(i);
        since_rebuild = 0;
      } else {
        sub_from(sum, seq[i - 1].data);
        add_into(sum, seq[i + w - 1].data);
      }
    }
    if (i % cfg.stride == 0) {
      RangeDopplerImage img;
      img.n_doppler_bins = first.n_doppler_bins;
      img.n_range_bins = first.n_range_bins;
      img.frame_index = seq[i].frame_index;
      img.data = sum;
      out.push_back(std::move(img));
    }
  }
  return out;
}

RangeDopplerImage normalize_unit(RangeDopplerImage img) {
  double peak = 0.0;
  for (double v : img.data) peak = std::max(peak, v);
  if (peak > 0.0) {
    const double inv = 1.0 / peak;
    for (double& v : img.data) v = std::min(1.0, std::max(0.0, v * inv));
  } else {
    std::fill(img.data.begin(), img.data.end(), 0.0);
  }
  return img;
}

RespdStream::RespdStream(std::size_t window_size) : window_(window_size) {
  if (window_size < 1) throw ConfigError("respd: window_size must be >= 1");
}

void RespdStream::reset() {
  frames_.clear();
  sum_.clear();
  steps_since_recompute_ = 0;
}

void RespdStream::recompute() {
  std::fill(sum_.begin(), sum_.end(), 0.0);
  for (const auto& f : frames_) add_into(sum_, f.data);
  steps_since_recompute_ = 0;
}

std::optional<RangeDopplerImage> RespdStream::push(RangeDopplerImage frame) {
  if (!frames_.empty() && !frame.same_shape(frames_.front())) {
    throw ShapeError("RespdStream: frame shape changed mid-stream");
  }
  if (sum_.empty()) sum_.assign(frame.data.size(), 0.0);

  add_into(sum_, frame.data);
  frames_.push_back(std::move(frame));
  if (frames_.size() > window_) {
    sub_from(sum_, frames_.front().data);
    frames_.pop_front();
    if (++steps_since_recompute_ >= kRecomputeInterval) recompute();
  }
  if (frames_.size() < window_) return std::nullopt;

  RangeDopplerImage out;
  out.n_doppler_bins = frames_.front().n_doppler_bins;
  out.n_range_bins = frames_.front().n_range_bins;
  out.frame_index = frames_.front().frame_index;
  out.data = sum_;
  return out;
}

}  // namespace mcrood::respd
