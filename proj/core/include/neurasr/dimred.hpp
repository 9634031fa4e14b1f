#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "neurasr/feature_sequence.hpp"

namespace neurasr::kpca {

struct KernelParams {
  int degree = 3;
  double gamma = 0.0;  // <= 0 resolves to 1 / input_dim at fit time
  double coef0 = 1.0;
};

struct KpcaOptions {
  int n_components = 30;
  KernelParams kernel;
  // z-score each input column with training statistics before the kernel
  bool standardize = false;
  Eigen::Index max_frames = 2000;
  std::uint64_t subsample_seed = 0;
};

struct KpcaModel {
  KernelParams kernel;  // gamma resolved
  int n_components = 0;
  std::uint64_t subsample_seed = 0;
  bool standardize = false;
  Eigen::RowVectorXd input_mean;
  Eigen::RowVectorXd input_scale;

  Eigen::MatrixXd training_frames;    // N x D, after standardization
  Eigen::VectorXd eigenvalues;        // all N, descending, >= 0
  Eigen::MatrixXd eigenvectors;       // N x n_components, lambda * a.a = 1
  Eigen::VectorXd explained_variance_ratio;  // one per eigenvalue, sums to 1
  Eigen::VectorXd kernel_row_means;   // N
  double kernel_mean = 0.0;
  Eigen::MatrixXd training_embedding; // N x n_components

  Eigen::Index input_dim() const { return training_frames.cols(); }
};

/// Kernel matrix between the rows of a and b.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const KernelParams& kernel);

/// Double-centered kernel: K - 1K - K1 + 1K1.
Eigen::MatrixXd center_kernel(const Eigen::MatrixXd& k);

/// Uniform subsample of at most `max_rows` rows, original order kept.
Eigen::MatrixXd subsample_rows(const Eigen::MatrixXd& frames, Eigen::Index max_rows, std::uint64_t seed);

KpcaModel kpca_fit(const Eigen::MatrixXd& frames, const KpcaOptions& options);
KpcaModel kpca_fit(const Eigen::MatrixXd& frames, int n_components);

Eigen::MatrixXd kpca_transform(const KpcaModel& model, const Eigen::MatrixXd& frames);

/// 155-dim EEG frames -> n_components -> add_deltas (90 dims for 30 components).
FeatureSequence build_final_eeg_features(const FeatureSequence& seq, const KpcaModel& model);

void save_model(const KpcaModel& model, const std::filesystem::path& path);
KpcaModel load_model(const std::filesystem::path& path);

/// component,ratio,cumulative
void write_variance_csv(const KpcaModel& model, const std::filesystem::path& path);

}  // namespace neurasr::kpca
