#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "neurasr/error.hpp"
#include "neurasr/preprocess.hpp"
#include "oracles.hpp"

using namespace neurasr;
using namespace neurasr::dsp;

namespace {

std::vector<std::array<double, 5>> sections(const SosCascade& sos) {
  std::vector<std::array<double, 5>> out;
  for (const auto& s : sos) out.push_back({s.b0, s.b1, s.b2, s.a1, s.a2});
  return out;
}

const FilterSpec kBand = FilterSpec::bandpass(4, 0.1, 70.0, 1000.0);
const FilterSpec kNotch = FilterSpec::notch(60.0, 30.0, 1000.0);

}  // namespace

TEST_CASE("bandpass magnitude") {
  const auto sos = design_filter(kBand);
  CHECK(sos.size() == 4);
  const double at10 = oracle::cascade_gain_db(sections(sos), 10.0, 1000.0);
  CHECK(at10 >= -3.0);
  CHECK(at10 <= 0.1);
  CHECK(oracle::cascade_gain_db(sections(sos), 200.0, 1000.0) <= -30.0);
  CHECK(magnitude_db(sos, 10.0, 1000.0) == doctest::Approx(at10).epsilon(1e-9));
  // geometric mean of the band edges
  CHECK(magnitude_db(sos, std::sqrt(0.1 * 70.0), 1000.0) >= -3.0);
}

TEST_CASE("notch magnitude") {
  const auto sos = design_filter(kNotch);
  CHECK(oracle::cascade_gain_db(sections(sos), 60.0, 1000.0) <= -20.0);
  CHECK(oracle::cascade_gain_db(sections(sos), 50.0, 1000.0) >= -1.0);
}

TEST_CASE("measured gains follow the transfer function") {
  const auto band = design_filter(kBand);
  const auto notch = design_filter(kNotch);
  struct Case {
    const SosCascade* sos;
    double freq;
  };
  for (const Case c : {Case{&band, 10.0}, Case{&band, 200.0}, Case{&notch, 60.0}, Case{&notch, 50.0}}) {
    const auto x = oracle::sine(c.freq, 1000.0, 20000);
    const auto y = apply_filter(*c.sos, x);
    // -120 dB floor on both sides
    const double measured = std::max(-120.0, 20.0 * std::log10(oracle::fitted_amplitude(y, c.freq, 1000.0, 10000)));
    const double analytic = std::max(-120.0, oracle::cascade_gain_db(sections(*c.sos), c.freq, 1000.0));
    INFO(c.freq, " Hz: measured ", measured, " analytic ", analytic);
    CHECK(std::abs(measured - analytic) < 1.0);
  }
}

TEST_CASE("notch on a 60 Hz unit sine") {
  const auto y = apply_filter(design_filter(kNotch), oracle::sine(60.0, 1000.0, 4000));
  double peak = 0.0;
  for (std::size_t n = y.size() / 2; n < y.size(); ++n) peak = std::max(peak, std::abs(y[n]));
  CHECK(peak <= 0.1);
}

TEST_CASE("apply_filter basics") {
  const auto sos = design_filter(kBand);
  const std::vector<double> zeros(1000, 0.0);
  const auto out = apply_filter(sos, zeros);
  CHECK(out.size() == 1000);
  for (double v : out) CHECK(v == 0.0);

  std::vector<double> bad(10, 1.0);
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(apply_filter(sos, bad), InputError);
  bad[3] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(apply_filter(sos, bad), InputError);
}

TEST_CASE("property: linearity") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto sos = design_filter(kBand);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(500), y(500), mix(500);
    const double a = n(rng), b = n(rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = n(rng);
      y[i] = n(rng);
      mix[i] = a * x[i] + b * y[i];
    }
    const auto fx = apply_filter(sos, x);
    const auto fy = apply_filter(sos, y);
    const auto fm = apply_filter(sos, mix);
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      scale = std::max(scale, std::abs(fm[i]));
      err = std::max(err, std::abs(fm[i] - (a * fx[i] + b * fy[i])));
    }
    CHECK(err <= 1e-9 * std::max(scale, 1.0));
  }
}

TEST_CASE("property: designs are stable") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double rate = 250.0 + 3750.0 * u(rng);
    const double nyq = rate / 2.0;
    const int order = 2 * (1 + static_cast<int>(rng() % 4));
    const double low = 0.05 + u(rng) * 0.2 * nyq;
    const double high = low + (0.95 * nyq - low) * (0.05 + 0.9 * u(rng));
    const auto sos = design_filter(FilterSpec::bandpass(order, low, high, rate));
    for (const auto& s : sos) CHECK(s.pole_radius() < 1.0);
    const auto notch = design_filter(FilterSpec::notch(0.05 * nyq + 0.9 * nyq * u(rng), 5.0 + 50.0 * u(rng), rate));
    for (const auto& s : notch) CHECK(s.pole_radius() < 1.0);
  }
}

TEST_CASE("filter validation") {
  CHECK_THROWS_AS(FilterSpec::bandpass(3, 0.1, 70.0, 1000.0).validate(), ArgumentError);
  CHECK_THROWS_AS(FilterSpec::bandpass(4, 70.0, 0.1, 1000.0).validate(), ArgumentError);
  CHECK_THROWS_AS(FilterSpec::bandpass(4, 0.1, 600.0, 1000.0).validate(), ArgumentError);
  CHECK_THROWS_AS(FilterSpec::notch(600.0, 30.0, 1000.0).validate(), ArgumentError);
}

TEST_CASE("artifact hook") {
  io::RecordingSession s = io::synthesize_session(io::SynthOptions{}, 1, 0, 0);
  const auto same = clean_artifacts(s);
  CHECK((same.eeg.array() == s.eeg.array()).all());
  CHECK(same.audio == s.audio);
  CHECK((clean_artifacts(clean_artifacts(s)).eeg.array() == same.eeg.array()).all());

  const auto centered = clean_artifacts(s, subtract_channel_means);
  for (Eigen::Index c = 0; c < centered.eeg.rows(); ++c) CHECK(std::abs(centered.eeg.row(c).mean()) < 1e-9);
}

TEST_CASE("preprocess_session removes line noise") {
  const io::RecordingSession s = io::synthesize_session(io::SynthOptions{}, 1, 0, 0);
  const auto clean = preprocess_session(s);
  CHECK(clean.eeg.rows() == s.eeg.rows());
  CHECK(clean.eeg.cols() == s.eeg.cols());
  std::vector<double> raw(s.channel(0).begin(), s.channel(0).end());
  std::vector<double> out(clean.channel(0).begin(), clean.channel(0).end());
  const std::size_t from = raw.size() / 2;
  CHECK(oracle::fitted_amplitude(out, 60.0, 1000.0, from) < 0.2 * oracle::fitted_amplitude(raw, 60.0, 1000.0, from));
}
