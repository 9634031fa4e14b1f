#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neurasr/ctc.hpp"
#include "neurasr/nn.hpp"

namespace neurasr::ctc {

struct CtcModelConfig {
  int input_dim = 0;
  int hidden = 128;
  double lr = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
};

/// One GRU layer followed by a per-frame softmax over the character set.
class CtcModel {
 public:
  explicit CtcModel(const CtcModelConfig& config);

  const CtcModelConfig& config() const { return config_; }
  std::vector<ad::Parameter*> parameters();

  /// Records the loss for `frames` (T x D) on `tape`.
  ad::Var loss(ad::Tape& tape, const Eigen::MatrixXd& frames, const std::vector<int>& labels);

  /// Forward, backward, clip and one Adam update. Returns the loss before the update.
  double train_step(const Eigen::MatrixXd& frames, const std::vector<int>& labels);

  StepDistribution infer(const Eigen::MatrixXd& frames);
  Decoded decode(const Eigen::MatrixXd& frames, int beam_width);

  void save(const std::filesystem::path& stem);
  void load(const std::filesystem::path& stem);

 private:
  ad::Var logits(ad::Tape& tape, const Eigen::MatrixXd& frames);

  CtcModelConfig config_;
  nn::GruParameters gru_;
  nn::DenseParameters out_;
  nn::AdamState adam_;
};

}  // namespace neurasr::ctc
