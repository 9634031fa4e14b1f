#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "neurasr/feature_sequence.hpp"

namespace neurasr::features {

struct MfccConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  int n_mels = 26;
  int n_ceps = 13;
  double preemphasis = 0.97;
  double low_hz = 0.0;
  double high_hz = 8000.0;
  double sample_rate_hz = 16000.0;
  int n_fft = 512;
  double log_floor = 1e-10;

  int frame_samples() const;
  int hop_samples() const;
  void validate() const;
};

/// Number of MFCC frames for `samples` audio samples (0 if shorter than one frame).
Eigen::Index mfcc_frame_count(Eigen::Index samples, const MfccConfig& cfg = {});

/// Triangular mel filterbank, n_mels x (n_fft/2 + 1).
Eigen::MatrixXd mel_filterbank(const MfccConfig& cfg);

FeatureSequence mfcc(std::span<const double> audio, const MfccConfig& cfg = {});
FeatureSequence mfcc(std::span<const std::int16_t> audio, const MfccConfig& cfg = {});

/// Regression deltas (half window 2) with edge replication; output [static, d, dd].
FeatureSequence add_deltas(const FeatureSequence& seq);

/// Truncates both sequences to the shorter length.
std::pair<FeatureSequence, FeatureSequence> align_lengths(const FeatureSequence& a,
                                                          const FeatureSequence& b);

/// Frame-wise concatenation of two aligned sequences; result source is FUSED.
FeatureSequence fuse(const FeatureSequence& a, const FeatureSequence& b);

}  // namespace neurasr::features
