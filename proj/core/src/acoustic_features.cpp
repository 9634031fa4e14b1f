#include "neurasr/acoustic_features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "neurasr/error.hpp"
#include "neurasr/fft.hpp"

namespace neurasr::features {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

int MfccConfig::frame_samples() const {
  return static_cast<int>(std::lround(frame_ms * sample_rate_hz / 1000.0));
}

int MfccConfig::hop_samples() const {
  return static_cast<int>(std::lround(hop_ms * sample_rate_hz / 1000.0));
}

void MfccConfig::validate() const {
  if (hop_ms != 10.0) throw ArgumentError("MFCC hop must be 10 ms to match the 100 Hz EEG frames");
  if (n_ceps < 1 || n_ceps > n_mels) throw ArgumentError("need 1 <= n_ceps <= n_mels");
  if (frame_samples() < 2 || frame_samples() > n_fft) throw ArgumentError("frame does not fit n_fft");
  if (!(low_hz >= 0.0 && low_hz < high_hz && high_hz <= sample_rate_hz / 2.0)) {
    throw ArgumentError("invalid mel band edges");
  }
}

Eigen::Index mfcc_frame_count(Eigen::Index samples, const MfccConfig& cfg) {
  const int frame = cfg.frame_samples();
  if (samples < frame) return 0;
  return (samples - frame) / cfg.hop_samples() + 1;
}

Eigen::MatrixXd mel_filterbank(const MfccConfig& cfg) {
  const int n_bins = cfg.n_fft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, n_bins);
  const double mel_lo = hz_to_mel(cfg.low_hz);
  const double mel_hi = hz_to_mel(cfg.high_hz);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(cfg.n_mels + 1));
  }
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m) + 1];
    const double right = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * cfg.sample_rate_hz / cfg.n_fft;
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

FeatureSequence mfcc(std::span<const double> audio, const MfccConfig& cfg) {
  cfg.validate();
  const Eigen::Index frames = mfcc_frame_count(static_cast<Eigen::Index>(audio.size()), cfg);
  if (frames < 1) throw InputError("audio shorter than one MFCC frame");
  for (double a : audio) {
    if (!std::isfinite(a)) throw InputError("audio contains non-finite samples");
  }

  const int frame_len = cfg.frame_samples();
  const int hop = cfg.hop_samples();
  std::vector<double> window(static_cast<std::size_t>(frame_len));
  for (int n = 0; n < frame_len; ++n) {
    window[static_cast<std::size_t>(n)] =
        0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (frame_len - 1));
  }
  const Eigen::MatrixXd fb = mel_filterbank(cfg);

  // Orthonormal DCT-II rows for the retained coefficients.
  Eigen::MatrixXd dct(cfg.n_ceps, cfg.n_mels);
  for (int k = 0; k < cfg.n_ceps; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / cfg.n_mels);
    for (int m = 0; m < cfg.n_mels; ++m) {
      dct(k, m) = scale * std::cos(std::numbers::pi * k * (2.0 * m + 1.0) / (2.0 * cfg.n_mels));
    }
  }

  dsp::RealFft fft(static_cast<std::size_t>(cfg.n_fft));
  std::vector<double> frame(static_cast<std::size_t>(frame_len));
  Eigen::VectorXd power(fft.bins());
  FeatureSequence seq;
  seq.source = FeatureSource::kMfcc;
  seq.frames.resize(frames, cfg.n_ceps);
  for (int k = 0; k < cfg.n_ceps; ++k) seq.dim_labels.push_back("mfcc" + std::to_string(k));

  for (Eigen::Index t = 0; t < frames; ++t) {
    const auto start = static_cast<std::size_t>(t * hop);
    for (int n = frame_len - 1; n >= 1; --n) {
      const auto i = static_cast<std::size_t>(n);
      frame[i] = (audio[start + i] - cfg.preemphasis * audio[start + i - 1]) * window[i];
    }
    frame[0] = audio[start] * window[0];
    fft.power_spectrum(frame, {power.data(), static_cast<std::size_t>(power.size())});
    power /= static_cast<double>(cfg.n_fft);
    Eigen::VectorXd mel = fb * power;
    for (Eigen::Index m = 0; m < mel.size(); ++m) mel(m) = std::log(std::max(mel(m), cfg.log_floor));
    seq.frames.row(t) = (dct * mel).transpose();
  }
  return seq;
}

FeatureSequence mfcc(std::span<const std::int16_t> audio, const MfccConfig& cfg) {
  std::vector<double> samples(audio.begin(), audio.end());
  return mfcc(std::span<const double>(samples), cfg);
}

namespace {

Eigen::MatrixXd regression_delta(const Eigen::MatrixXd& x) {
  constexpr int kHalf = 2;
  const double denom = 2.0 * (1.0 * 1.0 + 2.0 * 2.0);
  const Eigen::Index t_max = x.rows() - 1;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    for (int n = 1; n <= kHalf; ++n) {
      const Eigen::Index ahead = std::min<Eigen::Index>(t + n, t_max);
      const Eigen::Index behind = std::max<Eigen::Index>(t - n, 0);
      d.row(t) += n * (x.row(ahead) - x.row(behind));
    }
  }
  return d / denom;
}

}  // namespace

FeatureSequence add_deltas(const FeatureSequence& seq) {
  const Eigen::MatrixXd d1 = regression_delta(seq.frames);
  const Eigen::MatrixXd d2 = regression_delta(d1);
  const Eigen::Index dims = seq.frames.cols();
  FeatureSequence out;
  out.source = seq.source;
  out.frame_rate_hz = seq.frame_rate_hz;
  out.frames.resize(seq.frames.rows(), 3 * dims);
  out.frames.leftCols(dims) = seq.frames;
  out.frames.middleCols(dims, dims) = d1;
  out.frames.rightCols(dims) = d2;
  out.dim_labels = seq.dim_labels;
  for (const auto& l : seq.dim_labels) out.dim_labels.push_back(l + ".d");
  for (const auto& l : seq.dim_labels) out.dim_labels.push_back(l + ".dd");
  return out;
}

std::pair<FeatureSequence, FeatureSequence> align_lengths(const FeatureSequence& a,
                                                          const FeatureSequence& b) {
  if (a.frame_rate_hz != b.frame_rate_hz) throw InputError("frame rates differ");
  const Eigen::Index t = std::min(a.length(), b.length());
  if (t < 1) throw InputError("cannot align: one sequence is empty");
  FeatureSequence ta = a;
  FeatureSequence tb = b;
  ta.frames = a.frames.topRows(t);
  tb.frames = b.frames.topRows(t);
  return {std::move(ta), std::move(tb)};
}

FeatureSequence fuse(const FeatureSequence& a, const FeatureSequence& b) {
  if (a.length() != b.length()) throw InputError("fuse requires aligned sequences");
  FeatureSequence out;
  out.source = FeatureSource::kFused;
  out.frame_rate_hz = a.frame_rate_hz;
  out.frames.resize(a.length(), a.dims() + b.dims());
  out.frames.leftCols(a.dims()) = a.frames;
  out.frames.rightCols(b.dims()) = b.frames;
  out.dim_labels = a.dim_labels;
  out.dim_labels.insert(out.dim_labels.end(), b.dim_labels.begin(), b.dim_labels.end());
  return out;
}

}  // namespace neurasr::features
