#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "neurasr/signal_io.hpp"

namespace neurasr::dsp {

enum class FilterKind { kBandpass, kNotch };

struct FilterSpec {
  FilterKind kind = FilterKind::kBandpass;
  // Butterworth prototype order; a bandpass of order N has N second-order sections.
  int order = 4;
  double low_hz = 0.1;
  double high_hz = 70.0;
  double center_hz = 60.0;
  double q = 30.0;
  double sample_rate_hz = 1000.0;

  static FilterSpec bandpass(int order, double low_hz, double high_hz, double sample_rate_hz);
  static FilterSpec notch(double center_hz, double q, double sample_rate_hz);

  /// Throws ArgumentError when the spec is outside its valid domain.
  void validate() const;
};

// a0 is normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(double omega) const;
  /// Largest pole magnitude.
  double pole_radius() const;
};

using SosCascade = std::vector<Biquad>;

SosCascade design_filter(const FilterSpec& spec);

/// Complex response of the cascade at `freq_hz`.
std::complex<double> frequency_response(const SosCascade& sos, double freq_hz, double sample_rate_hz);
double magnitude_db(const SosCascade& sos, double freq_hz, double sample_rate_hz);

/// Causal single pass, transposed direct form II per section, zero initial state.
std::vector<double> apply_filter(const SosCascade& sos, std::span<const double> signal);

using ArtifactCleaner = std::function<io::RecordingSession(const io::RecordingSession&)>;

/// Default cleaner: returns the session unchanged.
io::RecordingSession clean_artifacts(const io::RecordingSession& session);
io::RecordingSession clean_artifacts(const io::RecordingSession& session, const ArtifactCleaner& cleaner);

/// Alternative cleaner that removes each channel's mean.
io::RecordingSession subtract_channel_means(const io::RecordingSession& session);

struct PreprocessConfig {
  FilterSpec bandpass = FilterSpec::bandpass(4, 0.1, 70.0, io::kEegRateHz);
  FilterSpec notch = FilterSpec::notch(60.0, 30.0, io::kEegRateHz);
  ArtifactCleaner cleaner;  // empty means the identity default
};

/// Artifact hook, then band-pass and notch on every EEG channel. Audio is untouched.
io::RecordingSession preprocess_session(const io::RecordingSession& session,
                                        const PreprocessConfig& config = {});

}  // namespace neurasr::dsp
