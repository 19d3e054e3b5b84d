#pragma once

// JSON conversions shared by the persistence code. Not installed.

#include <nlohmann/json.hpp>

#include "mcrood/error.hpp"
#include "mcrood/radar_dsp.hpp"

namespace mcrood::detail {

using json = nlohmann::json;

inline json radar_to_json(const dsp::RadarConfig& c) {
  return {{"n_tx", c.n_tx},
          {"n_rx", c.n_rx},
          {"n_chirps", c.n_chirps},
          {"n_samples", c.n_samples},
          {"frame_period", c.frame_period},
          {"chirp_time", c.chirp_time},
          {"bandwidth", c.bandwidth},
          {"carrier_freq", c.carrier_freq},
          {"window", c.window == dsp::FastTimeWindow::hann ? "hann" : "rectangular"}};
}

inline dsp::RadarConfig radar_from_json(const json& j) {
  dsp::RadarConfig c;
  c.n_tx = j.value("n_tx", c.n_tx);
  c.n_rx = j.value("n_rx", c.n_rx);
  c.n_chirps = j.value("n_chirps", c.n_chirps);
  c.n_samples = j.value("n_samples", c.n_samples);
  c.frame_period = j.value("frame_period", c.frame_period);
  c.chirp_time = j.value("chirp_time", c.chirp_time);
  c.bandwidth = j.value("bandwidth", c.bandwidth);
  c.carrier_freq = j.value("carrier_freq", c.carrier_freq);
  const std::string w = j.value("window", std::string("hann"));
  if (w != "hann" && w != "rectangular") throw ConfigError("unknown fast-time window '" + w + "'");
  c.window = w == "hann" ? dsp::FastTimeWindow::hann : dsp::FastTimeWindow::rectangular;
  c.validate();
  return c;
}

}  // namespace mcrood::detail
