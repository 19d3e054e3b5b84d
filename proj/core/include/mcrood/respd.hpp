#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "mcrood/radar_dsp.hpp"

namespace mcrood::respd {

using dsp::RangeDopplerImage;

struct FrameWindowConfig {
  std::size_t window_size = 50;
  std::size_t stride = 1;

  void validate() const;
};

/// Sliding-window sum over consecutive RDIs. Output i holds the elementwise
/// sum of frames [i*stride, i*stride + window_size) and carries the frame
/// index of the first frame in its window. Sequences shorter than the window
/// are rejected.
std::vector<RangeDopplerImage> respd_transform(std::span<const RangeDopplerImage> seq,
                                               const FrameWindowConfig& cfg);

/// Scales by the image maximum into [0, 1]; an all-zero image stays zero.
RangeDopplerImage normalize_unit(RangeDopplerImage img);

/// Streaming form of respd_transform with stride 1, for live frames.
class RespdStream {
 public:
  explicit RespdStream(std::size_t window_size);

  /// Returns the window sum once `window_size` frames have been pushed.
  std::optional<RangeDopplerImage> push(RangeDopplerImage frame);

  std::size_t window_size() const noexcept { return window_; }
  void reset();

 private:
  void recompute();

  std::size_t window_;
  std::size_t steps_since_recompute_ = 0;
  std::deque<RangeDopplerImage> frames_;
  std::vector<double> sum_;
};

}  // namespace mcrood::respd
