#include <doctest.h>

#include <cmath>
#include <random>

#include "neurasr/dimred.hpp"
#include "neurasr/error.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace neurasr;
using namespace neurasr::kpca;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

KpcaOptions linear(int components) {
  KpcaOptions o;
  o.n_components = components;
  o.kernel = KernelParams{1, 1.0, 0.0};
  return o;
}

}  // namespace

TEST_CASE("linear kernel reproduces covariance PCA") {
  Eigen::MatrixXd x = gaussian(50, 6, 1);
  x.col(0) *= 5.0;
  x.col(3) *= 2.0;
  x.rowwise() -= x.colwise().mean();
  const auto model = kpca_fit(x, linear(4));
  const auto ref = oracle::covariance_pca(x, 4);
  for (int c = 0; c < 4; ++c) {
    const double sign = model.training_embedding.col(c).dot(ref.scores.col(c)) < 0.0 ? -1.0 : 1.0;
    CHECK((model.training_embedding.col(c) - sign * ref.scores.col(c)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(model.eigenvalues(c) == doctest::Approx(ref.variances(c)).epsilon(1e-9));
  }
}

TEST_CASE("explained variance") {
  const auto model = kpca_fit(gaussian(60, 8, 2), 10);
  CHECK(std::abs(model.explained_variance_ratio.sum() - 1.0) < 1e-9);
  for (Eigen::Index i = 0; i < model.explained_variance_ratio.size(); ++i) {
    CHECK(model.explained_variance_ratio(i) >= 0.0);
    CHECK(model.explained_variance_ratio(i) <= 1.0);
    if (i > 0) CHECK(model.explained_variance_ratio(i) <= model.explained_variance_ratio(i - 1));
  }
  CHECK(model.kernel.gamma == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("planted 3-dim subspace") {
  const Eigen::MatrixXd basis = gaussian(3, 20, 3);
  Eigen::MatrixXd x = gaussian(40, 3, 4) * basis + gaussian(40, 20, 5, 1e-3);
  x.rowwise() -= x.colwise().mean();
  const auto model = kpca_fit(x, linear(5));
  CHECK(model.explained_variance_ratio.head(3).sum() >= 0.99);
}

TEST_CASE("transform self-consistency") {
  const Eigen::MatrixXd x = gaussian(45, 7, 6);
  KpcaOptions opt;
  opt.n_components = 5;
  for (bool standardize : {false, true}) {
    opt.standardize = standardize;
    const auto model = kpca_fit(x, opt);
    const Eigen::MatrixXd again = kpca_transform(model, x);
    CHECK((again - model.training_embedding).cwiseAbs().maxCoeff() < 1e-8);

    Eigen::MatrixXd dup(1, 7);
    dup.row(0) = x.row(11);
    CHECK((kpca_transform(model, dup).row(0) - model.training_embedding.row(11)).cwiseAbs().maxCoeff() < 1e-8);

    const Eigen::MatrixXd none = kpca_transform(model, Eigen::MatrixXd(0, 7));
    CHECK(none.rows() == 0);
    CHECK(none.cols() == 5);
    CHECK_THROWS_AS(kpca_transform(model, Eigen::MatrixXd::Zero(2, 6)), ArgumentError);
  }
}

TEST_CASE("fit errors") {
  CHECK_THROWS_AS(kpca_fit(gaussian(5, 3, 7), 6), ArgumentError);
  Eigen::MatrixXd bad = gaussian(10, 3, 7);
  bad(2, 1) = std::nan("");
  CHECK_THROWS_AS(kpca_fit(bad, 2), InputError);
}

TEST_CASE("eigen residual and determinism") {
  const Eigen::MatrixXd x = gaussian(70, 12, 8);
  const auto model = kpca_fit(x, 6);
  const Eigen::MatrixXd kc = center_kernel(kernel_matrix(model.training_frames, model.training_frames, model.kernel));
  for (int c = 0; c < 6; ++c) {
    const Eigen::VectorXd a = model.eigenvectors.col(c);
    CHECK((kc * a - model.eigenvalues(c) * a).norm() <= 1e-6 * kc.norm());
    CHECK(model.eigenvalues(c) * a.squaredNorm() == doctest::Approx(1.0).epsilon(1e-9));
    Eigen::Index arg = 0;
    a.cwiseAbs().maxCoeff(&arg);
    CHECK(a(arg) > 0.0);
  }
  const auto again = kpca_fit(x, 6);
  CHECK((again.training_embedding.array() == model.training_embedding.array()).all());
}

TEST_CASE("subsampling") {
  const Eigen::MatrixXd x = gaussian(100, 2, 9);
  const Eigen::MatrixXd s = subsample_rows(x, 30, 1);
  CHECK(s.rows() == 30);
  CHECK((subsample_rows(x, 30, 1).array() == s.array()).all());
  CHECK((subsample_rows(x, 200, 1).array() == x.array()).all());
  KpcaOptions opt;
  opt.n_components = 3;
  opt.max_frames = 40;
  opt.subsample_seed = 5;
  const auto model = kpca_fit(x, opt);
  CHECK(model.training_frames.rows() == 40);
  CHECK(model.subsample_seed == 5);
}

TEST_CASE("final EEG features") {
  FeatureSequence seq;
  seq.frames = gaussian(25, 155, 10);
  for (int i = 0; i < 155; ++i) seq.dim_labels.push_back("d" + std::to_string(i));
  const auto model = kpca_fit(gaussian(80, 155, 11), 30);
  const auto out = build_final_eeg_features(seq, model);
  CHECK(out.dims() == 90);
  CHECK(out.length() == 25);
  CHECK(out.dim_labels.front() == "kpc1");
  CHECK(out.dim_labels.size() == 90);

  FeatureSequence flat = seq;
  flat.frames = seq.frames.row(0).replicate(12, 1);
  const auto f = build_final_eeg_features(flat, model);
  CHECK(f.frames.rightCols(60).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model persistence") {
  testing::TempDir tmp("kpca");
  const Eigen::MatrixXd x = gaussian(30, 5, 12);
  KpcaOptions opt;
  opt.n_components = 4;
  opt.standardize = true;
  const auto model = kpca_fit(x, opt);
  save_model(model, tmp / "m.json");
  const auto back = load_model(tmp / "m.json");
  CHECK((kpca_transform(back, x) - kpca_transform(model, x)).cwiseAbs().maxCoeff() < 1e-12);
  write_variance_csv(model, tmp / "v.csv");
  CHECK(std::filesystem::exists(tmp / "v.csv"));
}
