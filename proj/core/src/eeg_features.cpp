#include "neurasr/eeg_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "neurasr/error.hpp"
#include "neurasr/fft.hpp"
#include "neurasr/log.hpp"

namespace neurasr::features {

namespace {

constexpr const char* kStatNames[kStatsPerChannel] = {"rms", "zcr", "moving_avg", "kurtosis",
                                                      "spectral_entropy"};

WindowStats compute_stats(std::span<const double> x, dsp::RealFft& fft, std::vector<double>& power) {
  const auto n = static_cast<double>(x.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  int crossings = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    sum_sq += x[i] * x[i];
    if (i > 0 && ((x[i - 1] < 0.0) != (x[i] < 0.0))) ++crossings;
  }
  WindowStats s;
  s.rms = std::sqrt(sum_sq / n);
  s.zcr = static_cast<double>(crossings) / (n - 1.0);
  s.moving_avg = sum / n;

  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    const double d = v - s.moving_avg;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (m2 <= eps * eps * (sum_sq / n) || m2 == 0.0) {
    log::debug("constant window: kurtosis set to 0");
    s.kurtosis = 0.0;
  } else {
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }

  // Strictly positive frequency bins 1..floor(N/2).
  fft.power_spectrum(x, power);
  const std::size_t n_bins = power.size() - 1;
  double total = 0.0;
  for (std::size_t k = 1; k < power.size(); ++k) total += power[k];
  if (total <= 0.0 || n_bins < 2) {
    log::debug("window without spectral power: spectral entropy set to 0");
    s.spectral_entropy = 0.0;
  } else {
    double h = 0.0;
    for (std::size_t k = 1; k < power.size(); ++k) {
      const double p = power[k] / total;
      if (p > 0.0) h -= p * std::log(p);
    }
    s.spectral_entropy = std::clamp(h / std::log(static_cast<double>(n_bins)), 0.0, 1.0);
  }
  return s;
}

}  // namespace

WindowStats window_stats(std::span<const double> window) {
  if (window.size() < 8) throw ArgumentError("window_stats needs at least 8 samples");
  dsp::RealFft fft(window.size());
  std::vector<double> power(fft.bins());
  return compute_stats(window, fft, power);
}

ChannelSelection select_channels(const io::ChannelMap& map, const std::vector<std::string>& names) {
  std::vector<std::string> unknown;
  std::vector<std::size_t> indices;
  for (const auto& name : names) {
    if (auto idx = map.find(name)) {
      indices.push_back(*idx);
    } else {
      unknown.push_back(name);
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown channel name(s):";
    for (const auto& u : unknown) msg += " " + u;
    throw ArgumentError(msg);
  }
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  ChannelSelection sel;
  sel.indices = indices;
  for (auto i : indices) sel.names.push_back(map.name(i));
  return sel;
}

ChannelSelection all_channels(const io::ChannelMap& map) { return select_channels(map, map.names()); }

Eigen::Index eeg_frame_count(Eigen::Index samples) {
  if (samples < kEegWindowSamples) return 0;
  return (samples - kEegWindowSamples) / kEegHopSamples + 1;
}

FeatureSequence extract_eeg_features(const io::RecordingSession& session,
                                     const ChannelSelection& selection) {
  if (selection.indices.empty()) throw ArgumentError("channel selection is empty");
  const Eigen::Index frames = eeg_frame_count(session.eeg.cols());
  if (frames < 1) throw InputError("recording shorter than one 100 ms window");

  FeatureSequence seq;
  seq.source = FeatureSource::kEeg;
  seq.frames.resize(frames, static_cast<Eigen::Index>(selection.size() * kStatsPerChannel));
  for (const auto& name : selection.names) {
    for (const char* stat : kStatNames) seq.dim_labels.push_back(name + "." + stat);
  }

  dsp::RealFft fft(kEegWindowSamples);
  std::vector<double> power(fft.bins());
  for (std::size_t ci = 0; ci < selection.size(); ++ci) {
    const auto channel = session.channel(selection.indices[ci]);
    const auto col = static_cast<Eigen::Index>(ci * kStatsPerChannel);
    for (Eigen::Index t = 0; t < frames; ++t) {
      const auto window = channel.subspan(static_cast<std::size_t>(t * kEegHopSamples), kEegWindowSamples);
      const WindowStats s = compute_stats(window, fft, power);
      seq.frames(t, col + 0) = s.rms;
      seq.frames(t, col + 1) = s.zcr;
      seq.frames(t, col + 2) = s.moving_avg;
      seq.frames(t, col + 3) = s.kurtosis;
      seq.frames(t, col + 4) = s.spectral_entropy;
    }
  }
  return seq;
}

}  // namespace neurasr::features
