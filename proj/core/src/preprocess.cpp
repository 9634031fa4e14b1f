#include "neurasr/preprocess.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "neurasr/error.hpp"

namespace neurasr::dsp {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Section with zeros at z = +1 and z = -1 and the given pole pair.
Biquad bandpass_section(cplx p1, cplx p2, double omega_center) {
  Biquad s;
  s.b0 = 1.0;
  s.b1 = 0.0;
  s.b2 = -1.0;
  s.a1 = -(p1 + p2).real();
  s.a2 = (p1 * p2).real();
  const double gain = 1.0 / std::abs(s.response(omega_center));
  s.b0 *= gain;
  s.b2 *= gain;
  return s;
}

void check_stable(const SosCascade& sos) {
  for (const auto& s : sos) {
    const bool finite = std::isfinite(s.b0) && std::isfinite(s.b1) && std::isfinite(s.b2) &&
                        std::isfinite(s.a1) && std::isfinite(s.a2);
    if (!finite || !(std::abs(s.a2) < 1.0) || !(std::abs(s.a1) < 1.0 + s.a2) ||
        !(s.pole_radius() < 1.0)) {
      throw DesignError("filter design is not stable at double precision");
    }
  }
}

}  // namespace

FilterSpec FilterSpec::bandpass(int order, double low_hz, double high_hz, double sample_rate_hz) {
  FilterSpec s;
  s.kind = FilterKind::kBandpass;
  s.order = order;
  s.low_hz = low_hz;
  s.high_hz = high_hz;
  s.sample_rate_hz = sample_rate_hz;
  return s;
}

FilterSpec FilterSpec::notch(double center_hz, double q, double sample_rate_hz) {
  FilterSpec s;
  s.kind = FilterKind::kNotch;
  s.order = 2;
  s.center_hz = center_hz;
  s.q = q;
  s.sample_rate_hz = sample_rate_hz;
  return s;
}

void FilterSpec::validate() const {
  if (!(sample_rate_hz > 0.0)) throw ArgumentError("sample rate must be positive");
  const double nyquist = sample_rate_hz / 2.0;
  if (kind == FilterKind::kBandpass) {
    if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist)) {
      throw ArgumentError("bandpass requires 0 < low < high < nyquist");
    }
    if (order < 2 || order % 2 != 0) throw ArgumentError("bandpass order must be even and >= 2");
  } else {
    if (!(center_hz > 0.0 && center_hz < nyquist)) {
      throw ArgumentError("notch center must lie in (0, nyquist)");
    }
    if (!(q > 0.0)) throw ArgumentError("notch q must be positive");
  }
}

cplx Biquad::response(double omega) const {
  const cplx z1 = std::polar(1.0, -omega);
  const cplx z2 = z1 * z1;
  return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

double Biquad::pole_radius() const {
  // roots of z^2 + a1 z + a2
  const cplx disc = std::sqrt(cplx(a1 * a1 - 4.0 * a2, 0.0));
  const cplx r1 = (-a1 + disc) / 2.0;
  const cplx r2 = (-a1 - disc) / 2.0;
  return std::max(std::abs(r1), std::abs(r2));
}

SosCascade design_filter(const FilterSpec& spec) {
  spec.validate();
  const double fs = spec.sample_rate_hz;
  SosCascade sos;

  if (spec.kind == FilterKind::kNotch) {
    const double w0 = 2.0 * kPi * spec.center_hz / fs;
    const double beta = std::tan(w0 / spec.q / 2.0);
    const double gain = 1.0 / (1.0 + beta);
    Biquad s;
    s.b0 = gain;
    s.b1 = -2.0 * gain * std::cos(w0);
    s.b2 = gain;
    s.a1 = -2.0 * gain * std::cos(w0);
    s.a2 = 2.0 * gain - 1.0;
    sos.push_back(s);
    check_stable(sos);
    return sos;
  }

  // Prewarped analog edges for the bilinear map s = (z - 1) / (z + 1).
  const double wl = std::tan(kPi * spec.low_hz / fs);
  const double wh = std::tan(kPi * spec.high_hz / fs);
  const double bw = wh - wl;
  const double w0_sq = wl * wh;
  const double omega_center = 2.0 * std::atan(std::sqrt(w0_sq));
  if (!(bw > 0.0) || !(w0_sq > 0.0)) throw DesignError("degenerate band edges");

  const int n = spec.order;
  auto to_z = [](cplx s) { return (1.0 + s) / (1.0 - s); };
  for (int k = 0; k < n; ++k) {
    const cplx proto = std::polar(1.0, kPi * (2.0 * k + n + 1) / (2.0 * n));
    if (proto.imag() < -1e-12) continue;  // handled through its conjugate
    // Lowpass -> bandpass: s^2 - proto*bw*s + w0^2 = 0.
    const cplx b = -proto * bw;
    const cplx disc = std::sqrt(b * b - 4.0 * w0_sq);
    const cplx s1 = (-b + disc) / 2.0;
    const cplx s2 = (-b - disc) / 2.0;
    if (std::abs(proto.imag()) <= 1e-12) {
      sos.push_back(bandpass_section(to_z(s1), to_z(s2), omega_center));
    } else {
      sos.push_back(bandpass_section(to_z(s1), std::conj(to_z(s1)), omega_center));
      sos.push_back(bandpass_section(to_z(s2), std::conj(to_z(s2)), omega_center));
    }
  }
  check_stable(sos);
  return sos;
}

std::complex<double> frequency_response(const SosCascade& sos, double freq_hz, double sample_rate_hz) {
  const double omega = 2.0 * kPi * freq_hz / sample_rate_hz;
  cplx h(1.0, 0.0);
  for (const auto& s : sos) h *= s.response(omega);
  return h;
}

double magnitude_db(const SosCascade& sos, double freq_hz, double sample_rate_hz) {
  return 20.0 * std::log10(std::abs(frequency_response(sos, freq_hz, sample_rate_hz)));
}

std::vector<double> apply_filter(const SosCascade& sos, std::span<const double> signal) {
  for (double x : signal) {
    if (!std::isfinite(x)) throw InputError("signal contains non-finite samples");
  }
  std::vector<double> y(signal.begin(), signal.end());
  for (const auto& s : sos) {
    double z1 = 0.0;
    double z2 = 0.0;
    for (double& v : y) {
      const double x = v;
      const double out = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * out + z2;
      z2 = s.b2 * x - s.a2 * out;
      v = out;
    }
  }
  return y;
}

io::RecordingSession clean_artifacts(const io::RecordingSession& session) { return session; }

io::RecordingSession clean_artifacts(const io::RecordingSession& session, const ArtifactCleaner& cleaner) {
  return cleaner ? cleaner(session) : clean_artifacts(session);
}

io::RecordingSession subtract_channel_means(const io::RecordingSession& session) {
  io::RecordingSession out = session;
  for (Eigen::Index c = 0; c < out.eeg.rows(); ++c) {
    out.eeg.row(c).array() -= out.eeg.row(c).mean();
  }
  return out;
}

io::RecordingSession preprocess_session(const io::RecordingSession& session,
                                        const PreprocessConfig& config) {
  io::RecordingSession out = clean_artifacts(session, config.cleaner);
  const SosCascade bandpass = design_filter(config.bandpass);
  const SosCascade notch = design_filter(config.notch);
  for (Eigen::Index c = 0; c < out.eeg.rows(); ++c) {
    auto filtered = apply_filter(bandpass, out.channel(static_cast<std::size_t>(c)));
    filtered = apply_filter(notch, filtered);
    out.eeg.row(c) = Eigen::Map<const Eigen::RowVectorXd>(filtered.data(),
                                                          static_cast<Eigen::Index>(filtered.size()));
  }
  return out;
}

}  // namespace neurasr::dsp
