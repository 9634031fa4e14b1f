#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "neurasr/acoustic_features.hpp"
#include "neurasr/error.hpp"
#include "oracles.hpp"

using namespace neurasr;
using namespace neurasr::features;

namespace {

FeatureSequence sequence(const Eigen::MatrixXd& frames, FeatureSource source = FeatureSource::kEeg,
                         const std::string& prefix = "x") {
  FeatureSequence s;
  s.frames = frames;
  s.source = source;
  for (Eigen::Index d = 0; d < frames.cols(); ++d) s.dim_labels.push_back(prefix + std::to_string(d));
  return s;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1000.0);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

}  // namespace

TEST_CASE("mfcc of silence is constant") {
  const std::vector<double> silence(16000, 0.0);
  const auto seq = mfcc(silence);
  CHECK(seq.dims() == 13);
  for (Eigen::Index t = 1; t < seq.length(); ++t) CHECK((seq.frames.row(t).array() == seq.frames.row(0).array()).all());
}

TEST_CASE("mfcc matches the reference implementation on a 1 kHz tone") {
  std::vector<double> tone(8000);
  for (std::size_t n = 0; n < tone.size(); ++n) tone[n] = 8000.0 * std::sin(2.0 * std::numbers::pi * 1000.0 * n / 16000.0);
  const auto seq = mfcc(tone);
  const Eigen::MatrixXd ref = oracle::mfcc(tone);
  REQUIRE(seq.length() == ref.rows());
  for (Eigen::Index t = 2; t < seq.length() - 2; ++t) {
    for (Eigen::Index q = 0; q < 13; ++q) CHECK(std::abs(seq.frames(t, q) - ref(t, q)) < 1e-6);
  }
}

TEST_CASE("mfcc frame counts") {
  CHECK(mfcc(std::vector<double>(16000, 0.0)).length() == 98);
  CHECK(mfcc_frame_count(16000) == 98);
  CHECK(mfcc_frame_count(399) == 0);
  CHECK_THROWS_AS(mfcc(std::vector<double>(399, 0.0)), InputError);
  MfccConfig bad;
  bad.hop_ms = 20.0;
  CHECK_THROWS_AS(mfcc(std::vector<double>(16000, 0.0), bad), ArgumentError);
  MfccConfig many;
  many.n_ceps = 27;
  CHECK_THROWS_AS(many.validate(), ArgumentError);
}

TEST_CASE("property: amplitude scaling only shifts c0") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = noise(4000, rng());
    const double c = u(rng);
    std::vector<double> y(x);
    for (auto& v : y) v *= c;
    const auto a = mfcc(x);
    const auto b = mfcc(y);
    const double shift = 2.0 * std::log(c) * std::sqrt(26.0);
    for (Eigen::Index t = 0; t < a.length(); ++t) {
      CHECK(std::abs(b.frames(t, 0) - a.frames(t, 0) - shift) < 1e-6);
      for (Eigen::Index q = 1; q < 13; ++q) CHECK(std::abs(b.frames(t, q) - a.frames(t, q)) < 1e-6);
    }
  }
}

TEST_CASE("add_deltas") {
  SUBCASE("constant") {
    const auto d = add_deltas(sequence(Eigen::MatrixXd::Constant(10, 3, 4.0)));
    CHECK(d.dims() == 9);
    CHECK(d.frames.rightCols(6).isZero(0.0));
  }
  SUBCASE("single frame") {
    const auto d = add_deltas(sequence(Eigen::MatrixXd::Constant(1, 2, -3.0)));
    CHECK(d.frames.rightCols(4).isZero(0.0));
  }
  SUBCASE("ramp") {
    Eigen::MatrixXd ramp(20, 1);
    for (int t = 0; t < 20; ++t) ramp(t, 0) = t;
    const auto d = add_deltas(sequence(ramp));
    for (int t = 2; t < 18; ++t) CHECK(d.frames(t, 1) == 1.0);
    for (int t = 4; t < 16; ++t) CHECK(d.frames(t, 2) == 0.0);
  }
  SUBCASE("labels") {
    const auto d = add_deltas(sequence(Eigen::MatrixXd::Zero(3, 2)));
    REQUIRE(d.dim_labels.size() == 6);
    CHECK(d.dim_labels[0] == "x0");
    CHECK(d.dim_labels[2] != d.dim_labels[0]);
  }
}

TEST_CASE("property: deltas keep the static block") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index t = 1 + static_cast<Eigen::Index>(rng() % 30);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 6);
    Eigen::MatrixXd x(t, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    const auto out = add_deltas(sequence(x));
    CHECK(out.dims() == 3 * d);
    CHECK(out.length() == t);
    CHECK((out.frames.leftCols(d).array() == x.array()).all());
  }
}

TEST_CASE("align and fuse") {
  const auto a = sequence(Eigen::MatrixXd::Random(191, 3), FeatureSource::kEeg, "e");
  const auto b = sequence(Eigen::MatrixXd::Random(198, 2), FeatureSource::kMfcc, "m");
  const auto [x, y] = align_lengths(a, b);
  CHECK(x.length() == 191);
  CHECK(y.length() == 191);
  CHECK((y.frames.array() == b.frames.topRows(191).array()).all());

  const auto [p, q] = align_lengths(a, a);
  CHECK((p.frames.array() == a.frames.array()).all());
  CHECK(q.length() == a.length());

  const auto f = fuse(x, y);
  CHECK(f.dims() == 5);
  CHECK(f.source == FeatureSource::kFused);
  CHECK(f.dim_labels == std::vector<std::string>{"e0", "e1", "e2", "m0", "m1"});

  CHECK_THROWS_AS(align_lengths(a, sequence(Eigen::MatrixXd(0, 2))), InputError);
}
