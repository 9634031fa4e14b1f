#include "neurasr/ctc_model.hpp"

#include "neurasr/error.hpp"

namespace neurasr::ctc {

CtcModel::CtcModel(const CtcModelConfig& config) : config_(config) {
  if (config.input_dim < 1 || config.hidden < 1) throw ArgumentError("CTC model dimensions must be positive");
  Rng rng(config.seed);
  gru_ = nn::GruParameters::create(config.input_dim, config.hidden, rng, "encoder");
  out_ = nn::DenseParameters::create(config.hidden, TokenSet::characters().size(), rng, "output");
  adam_.lr = config.lr;
  adam_.init(parameters());
}

std::vector<ad::Parameter*> CtcModel::parameters() {
  auto params = gru_.parameters();
  for (auto* p : out_.parameters()) params.push_back(p);
  return params;
}

ad::Var CtcModel::logits(ad::Tape& tape, const Eigen::MatrixXd& frames) {
  if (frames.cols() != config_.input_dim) {
    throw ArgumentError("CTC model expects " + std::to_string(config_.input_dim) + "-dim frames, got " +
                        std::to_string(frames.cols()));
  }
  if (frames.rows() < 1) throw ArgumentError("empty feature sequence");
  const nn::GruVars g = nn::bind(tape, gru_);
  const ad::Var inputs = tape.constant(frames.transpose());
  const ad::Var h0 = tape.constant(Eigen::MatrixXd::Zero(config_.hidden, 1));
  const ad::Var states = ad::hstack(nn::gru_sequence(g, inputs, h0));
  return ad::add_colwise(ad::matmul(tape.param(out_.w), states), tape.param(out_.b));
}

ad::Var CtcModel::loss(ad::Tape& tape, const Eigen::MatrixXd& frames, const std::vector<int>& labels) {
  return ctc_loss(logits(tape, frames), labels);
}

double CtcModel::train_step(const Eigen::MatrixXd& frames, const std::vector<int>& labels) {
  auto params = parameters();
  nn::zero_grads(params);
  ad::Tape tape;
  const ad::Var l = loss(tape, frames, labels);
  tape.backward(l);
  nn::clip_grad_norm(params, config_.clip_norm);
  nn::adam_step(adam_, params);
  return l.scalar();
}

StepDistribution CtcModel::infer(const Eigen::MatrixXd& frames) {
  ad::Tape tape(false);
  return StepDistribution::from_logits(logits(tape, frames).value().transpose());
}

Decoded CtcModel::decode(const Eigen::MatrixXd& frames, int beam_width) {
  return ctc_beam_decode(infer(frames), beam_width);
}

void CtcModel::save(const std::filesystem::path& stem) {
  nn::save_checkpoint(stem, parameters(), adam_, config_.seed,
                      {{"model", "ctc"}, {"input_dim", config_.input_dim}, {"hidden", config_.hidden},
                       {"clip_norm", config_.clip_norm}});
}

void CtcModel::load(const std::filesystem::path& stem) { nn::load_checkpoint(stem, parameters(), &adam_); }

}  // namespace neurasr::ctc
