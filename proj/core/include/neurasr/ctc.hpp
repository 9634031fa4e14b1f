#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "neurasr/autodiff.hpp"

namespace neurasr::ctc {

inline constexpr int kBlank = 0;

/// Blank at index 0, then 'a'..'z', then space.
class TokenSet {
 public:
  static const TokenSet& characters();

  int size() const { return static_cast<int>(symbols_.size()) + 1; }
  int blank() const { return kBlank; }
  char symbol(int index) const;
  int index(char c) const;

  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> labels) const;

 private:
  TokenSet();
  std::string symbols_;
};

/// Per-step probability rows: probs(t, k) = z_t[k].
struct StepDistribution {
  Eigen::MatrixXd probs;  // T x V

  Eigen::Index steps() const { return probs.rows(); }
  Eigen::Index vocab() const { return probs.cols(); }
  void validate() const;

  /// Row-wise softmax of a T x V logit matrix.
  static StepDistribution from_logits(const Eigen::MatrixXd& logits);
};

/// Merge adjacent repeats, then drop blanks.
std::vector<int> collapse(std::span<const int> path, int blank = kBlank);

/// Minimum path length for y: |y| plus one blank per adjacent repeat.
int min_path_length(std::span<const int> labels);

/// Every length-T path whose collapse equals y, in lexicographic order.
/// Exponential; intended for small T.
std::vector<std::vector<int>> enumerate_extensions(std::span<const int> labels, int steps,
                                                   int blank = kBlank);

struct CtcResult {
  bool feasible = false;
  double loss = 0.0;      // -ln Pr(y|x); +inf when infeasible
  double log_prob = 0.0;  // ln Pr(y|x)
};

/// Log-space forward recursion over the blank-interleaved label sequence.
CtcResult ctc_loss(const StepDistribution& dist, std::span<const int> labels, int blank = kBlank);

/// Loss and gradient with respect to logits (T x V) through a row-wise softmax.
CtcResult ctc_loss_with_grad(const Eigen::MatrixXd& logits, std::span<const int> labels,
                             Eigen::MatrixXd& grad, int blank = kBlank);

/// Tape op over column-major logits (V x T). Throws InputError when infeasible.
ad::Var ctc_loss(const ad::Var& logits_vt, std::span<const int> labels, int blank = kBlank);

struct Decoded {
  std::vector<int> labels;
  double log_score = 0.0;  // ln of the merged prefix probability
};

/// Collapse of the per-step argmax path.
Decoded greedy_decode(const StepDistribution& dist, int blank = kBlank);

/// Prefix beam search; prefixes are merged by collapsed label sequence and
/// track blank / non-blank ending mass. Final candidates (plus the greedy
/// collapse) are rescored with the exact forward probability. The result is
/// the best over all widths up to `width`, so the score is monotone in width.
Decoded ctc_beam_decode(const StepDistribution& dist, int width, int blank = kBlank);

/// Debug table: t,rank,token,prob for the top-k tokens of every step.
void write_topk_csv(const StepDistribution& dist, int k, const std::filesystem::path& path);

}  // namespace neurasr::ctc
