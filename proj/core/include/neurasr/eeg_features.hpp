#pragma once

#include <span>
#include <string>
#include <vector>

#include "neurasr/feature_sequence.hpp"
#include "neurasr/signal_io.hpp"

namespace neurasr::features {

struct WindowStats {
  double rms = 0.0;
  double zcr = 0.0;
  double moving_avg = 0.0;
  double kurtosis = 0.0;          // excess, population moments
  double spectral_entropy = 0.0;  // normalized to [0, 1]
};

inline constexpr int kStatsPerChannel = 5;
inline constexpr int kEegWindowSamples = 100;  // 100 ms at 1 kHz
inline constexpr int kEegHopSamples = 10;      // 10 ms -> 100 Hz frames

/// Requires at least 8 samples.
WindowStats window_stats(std::span<const double> window);

struct ChannelSelection {
  std::vector<std::size_t> indices;  // ascending, in channel-map order
  std::vector<std::string> names;

  std::size_t size() const { return indices.size(); }
};

ChannelSelection select_channels(const io::ChannelMap& map, const std::vector<std::string>& names);
ChannelSelection all_channels(const io::ChannelMap& map = io::ChannelMap::standard());

/// Number of 100 ms / 10 ms frames in `samples` EEG samples.
Eigen::Index eeg_frame_count(Eigen::Index samples);

FeatureSequence extract_eeg_features(const io::RecordingSession& session,
                                     const ChannelSelection& selection);

}  // namespace neurasr::features
