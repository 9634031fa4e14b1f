#include "neurasr/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "neurasr/csv.hpp"
#include "neurasr/error.hpp"
#include "neurasr/files.hpp"

namespace neurasr::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// l'_s of the blank-interleaved sequence.
int extended_label(std::span<const int> labels, int s, int blank) {
  return (s % 2 == 0) ? blank : labels[static_cast<std::size_t>(s / 2)];
}

bool can_skip(std::span<const int> labels, int s, int blank) {
  if (s < 2) return false;
  const int cur = extended_label(labels, s, blank);
  return cur != blank && cur != extended_label(labels, s - 2, blank);
}

// alpha(t, s) in log space; lp is T x V log-probabilities.
Eigen::MatrixXd forward_log(const Eigen::MatrixXd& lp, std::span<const int> labels, int blank) {
  const auto steps = static_cast<int>(lp.rows());
  const int S = 2 * static_cast<int>(labels.size()) + 1;
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Constant(steps, S, kNegInf);
  alpha(0, 0) = lp(0, blank);
  if (S > 1) alpha(0, 1) = lp(0, extended_label(labels, 1, blank));
  for (int t = 1; t < steps; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(labels, s, blank)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + lp(t, extended_label(labels, s, blank));
    }
  }
  return alpha;
}

double total_log_prob(const Eigen::MatrixXd& alpha) {
  const auto last = alpha.rows() - 1;
  const auto S = alpha.cols();
  return S > 1 ? log_add(alpha(last, S - 1), alpha(last, S - 2)) : alpha(last, 0);
}

void check_labels(std::span<const int> labels, Eigen::Index vocab, int blank) {
  for (int l : labels) {
    if (l < 0 || l >= vocab || l == blank) throw ArgumentError("label index out of range or blank");
  }
}

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    const double lse = m + std::log((logits.row(t).array() - m).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

}  // namespace

TokenSet::TokenSet() : symbols_("abcdefghijklmnopqrstuvwxyz ") {}

const TokenSet& TokenSet::characters() {
  static const TokenSet set;
  return set;
}

char TokenSet::symbol(int index) const {
  if (index <= 0 || index > static_cast<int>(symbols_.size())) throw ArgumentError("token index out of range");
  return symbols_[static_cast<std::size_t>(index - 1)];
}

int TokenSet::index(char c) const {
  const auto pos = symbols_.find(c);
  if (pos == std::string::npos) throw ArgumentError(std::string("character '") + c + "' not in token set");
  return static_cast<int>(pos) + 1;
}

std::vector<int> TokenSet::encode(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(index(c));
  return out;
}

std::string TokenSet::decode(std::span<const int> labels) const {
  std::string out;
  for (int l : labels) {
    if (l != kBlank) out += symbol(l);
  }
  return out;
}

void StepDistribution::validate() const {
  if (probs.rows() < 1 || probs.cols() < 1) throw ArgumentError("empty step distribution");
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    if ((probs.row(t).array() < 0.0).any() || std::abs(probs.row(t).sum() - 1.0) > 1e-9) {
      throw ArgumentError("step " + std::to_string(t) + " is not a probability distribution");
    }
  }
}

StepDistribution StepDistribution::from_logits(const Eigen::MatrixXd& logits) {
  return {log_softmax_rows(logits).array().exp().matrix()};
}

std::vector<int> collapse(std::span<const int> path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int token : path) {
    if (token != prev && token != blank) out.push_back(token);
    prev = token;
  }
  return out;
}

int min_path_length(std::span<const int> labels) {
  int n = static_cast<int>(labels.size());
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

std::vector<std::vector<int>> enumerate_extensions(std::span<const int> labels, int steps, int blank) {
  std::vector<std::vector<int>> out;
  if (steps < 0) return out;
  const auto L = labels.size();
  std::vector<int> path;
  path.reserve(static_cast<std::size_t>(steps));

  // emitted: labels consumed so far; prev: previous path token.
  auto recurse = [&](auto&& self, std::size_t emitted, int prev) -> void {
    const auto t = path.size();
    if (t == static_cast<std::size_t>(steps)) {
      if (emitted == L) out.push_back(path);
      return;
    }
    if (L - emitted > static_cast<std::size_t>(steps) - t) return;
    std::set<int> options{blank};
    if (prev != blank && prev >= 0) options.insert(prev);
    if (emitted < L && labels[emitted] != prev) options.insert(labels[emitted]);
    for (int token : options) {
      const bool advances = token != blank && token != prev;
      path.push_back(token);
      self(self, emitted + (advances ? 1 : 0), token);
      path.pop_back();
    }
  };
  recurse(recurse, 0, -1);
  return out;
}

CtcResult ctc_loss(const StepDistribution& dist, std::span<const int> labels, int blank) {
  if (dist.steps() < 1) throw ArgumentError("ctc_loss needs at least one step");
  check_labels(labels, dist.vocab(), blank);
  CtcResult r;
  if (dist.steps() < min_path_length(labels)) {
    r.feasible = false;
    r.loss = std::numeric_limits<double>::infinity();
    r.log_prob = kNegInf;
    return r;
  }
  const Eigen::MatrixXd lp = dist.probs.array().log().matrix();
  const Eigen::MatrixXd alpha = forward_log(lp, labels, blank);
  r.feasible = true;
  r.log_prob = total_log_prob(alpha);
  r.loss = -r.log_prob;
  return r;
}

CtcResult ctc_loss_with_grad(const Eigen::MatrixXd& logits, std::span<const int> labels,
                             Eigen::MatrixXd& grad, int blank) {
  check_labels(labels, logits.cols(), blank);
  const auto steps = static_cast<int>(logits.rows());
  CtcResult r;
  grad.setZero(logits.rows(), logits.cols());
  if (steps < 1 || steps < min_path_length(labels)) {
    r.loss = std::numeric_limits<double>::infinity();
    r.log_prob = kNegInf;
    return r;
  }
  const Eigen::MatrixXd lp = log_softmax_rows(logits);
  const Eigen::MatrixXd alpha = forward_log(lp, labels, blank);
  const double log_p = total_log_prob(alpha);
  r.feasible = true;
  r.log_prob = log_p;
  r.loss = -log_p;
  if (log_p == kNegInf) return r;

  // beta(t, s): log mass of completing from state s at t, excluding step t's emission.
  const int S = 2 * static_cast<int>(labels.size()) + 1;
  Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(steps, S, kNegInf);
  beta(steps - 1, S - 1) = 0.0;
  if (S > 1) beta(steps - 1, S - 2) = 0.0;
  for (int t = steps - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double b = beta(t + 1, s) + lp(t + 1, extended_label(labels, s, blank));
      if (s + 1 < S) b = log_add(b, beta(t + 1, s + 1) + lp(t + 1, extended_label(labels, s + 1, blank)));
      if (s + 2 < S && can_skip(labels, s + 2, blank)) {
        b = log_add(b, beta(t + 1, s + 2) + lp(t + 1, extended_label(labels, s + 2, blank)));
      }
      beta(t, s) = b;
    }
  }

  grad = lp.array().exp().matrix();
  for (int t = 0; t < steps; ++t) {
    for (int s = 0; s < S; ++s) {
      const double occ = alpha(t, s) + beta(t, s) - log_p;
      if (occ > kNegInf) grad(t, extended_label(labels, s, blank)) -= std::exp(occ);
    }
  }
  return r;
}

ad::Var ctc_loss(const ad::Var& logits_vt, std::span<const int> labels, int blank) {
  ad::Tape& tape = *logits_vt.tape();
  Eigen::MatrixXd grad;
  const CtcResult r = ctc_loss_with_grad(logits_vt.value().transpose(), labels, grad, blank);
  if (!r.feasible || !std::isfinite(r.loss)) {
    throw InputError("CTC target of length " + std::to_string(labels.size()) + " is infeasible for " +
                     std::to_string(logits_vt.cols()) + " steps");
  }
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = r.loss;
  const std::size_t id = logits_vt.id();
  return tape.push(std::move(out), tape.requires_grad(id),
                   [id, g = Eigen::MatrixXd(grad.transpose())](ad::Tape& t, std::size_t self) {
                     t.grad_of(id) += t.grad_of(self)(0, 0) * g;
                   });
}

Decoded greedy_decode(const StepDistribution& dist, int blank) {
  std::vector<int> path(static_cast<std::size_t>(dist.steps()));
  for (Eigen::Index t = 0; t < dist.steps(); ++t) {
    Eigen::Index arg = 0;
    dist.probs.row(t).maxCoeff(&arg);
    path[static_cast<std::size_t>(t)] = static_cast<int>(arg);
  }
  Decoded d;
  d.labels = collapse(path, blank);
  d.log_score = ctc_loss(dist, d.labels, blank).log_prob;
  return d;
}

namespace {

/// One prefix beam search pass at a fixed width. `pruned` reports whether any
/// prefix was ever dropped; if not, the result is the exact best labeling.
Decoded beam_pass(const StepDistribution& dist, const Eigen::MatrixXd& lp, int width, int blank, bool& pruned) {
  const auto vocab = static_cast<int>(dist.vocab());

  struct Mass {
    double blank = kNegInf;
    double non_blank = kNegInf;
    double total() const { return log_add(blank, non_blank); }
  };
  using Beam = std::map<std::vector<int>, Mass>;

  auto prune = [width, &pruned](const Beam& candidates) {
    if (candidates.size() <= static_cast<std::size_t>(width)) return candidates;
    pruned = true;
    std::vector<std::pair<const std::vector<int>*, const Mass*>> ranked;
    for (const auto& [prefix, mass] : candidates) ranked.emplace_back(&prefix, &mass);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second->total() > b.second->total(); });
    Beam kept;
    for (std::size_t i = 0; i < static_cast<std::size_t>(width); ++i) kept.emplace(*ranked[i].first, *ranked[i].second);
    return kept;
  };

  Beam beam;
  beam[{}].blank = 0.0;
  for (Eigen::Index t = 0; t < dist.steps(); ++t) {
    Beam next;
    for (const auto& [prefix, mass] : beam) {
      const double total = mass.total();
      Mass& same = next[prefix];
      same.blank = log_add(same.blank, total + lp(t, blank));
      for (int c = 0; c < vocab; ++c) {
        if (c == blank || lp(t, c) == kNegInf) continue;
        if (!prefix.empty() && prefix.back() == c) {
          // repeat collapses into the same prefix; a new copy needs a blank first
          Mass& rep = next[prefix];
          rep.non_blank = log_add(rep.non_blank, mass.non_blank + lp(t, c));
          std::vector<int> extended = prefix;
          extended.push_back(c);
          Mass& ext = next[extended];
          ext.non_blank = log_add(ext.non_blank, mass.blank + lp(t, c));
        } else {
          std::vector<int> extended = prefix;
          extended.push_back(c);
          Mass& ext = next[extended];
          ext.non_blank = log_add(ext.non_blank, total + lp(t, c));
        }
      }
    }
    beam = prune(next);
  }

  std::vector<std::vector<int>> candidates;
  for (const auto& [prefix, mass] : beam) candidates.push_back(prefix);
  candidates.push_back(greedy_decode(dist, blank).labels);

  Decoded best;
  best.log_score = kNegInf;
  bool have = false;
  for (const auto& c : candidates) {
    const double lp_exact = ctc_loss(dist, c, blank).log_prob;
    if (!have || lp_exact > best.log_score) {
      best.labels = c;
      best.log_score = lp_exact;
      have = true;
    }
  }
  return best;
}

}  // namespace

Decoded ctc_beam_decode(const StepDistribution& dist, int width, int blank) {
  if (width < 1) throw ArgumentError("beam width must be >= 1");
  if (dist.steps() < 1) return {};
  const Eigen::MatrixXd lp = dist.probs.array().log().matrix();

  // Best over widths width, width-1, ..., 1; a pass without pruning is exact
  // and ends the sweep.
  Decoded best;
  for (int w = width; w >= 1; --w) {
    bool pruned = false;
    Decoded d = beam_pass(dist, lp, w, blank, pruned);
    if (w == width || d.log_score > best.log_score) best = std::move(d);
    if (!pruned) break;
  }
  return best;
}

void write_topk_csv(const StepDistribution& dist, int k, const std::filesystem::path& path) {
  const auto& tokens = TokenSet::characters();
  std::string out = "t,rank,token,prob\n";
  for (Eigen::Index t = 0; t < dist.steps(); ++t) {
    std::vector<int> order(static_cast<std::size_t>(dist.vocab()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dist.probs(t, a) > dist.probs(t, b); });
    for (int r = 0; r < k && r < static_cast<int>(order.size()); ++r) {
      const int tok = order[static_cast<std::size_t>(r)];
      std::string name = tok == kBlank ? "<blank>" : (tokens.symbol(tok) == ' ' ? "<space>" : std::string(1, tokens.symbol(tok)));
      out += std::to_string(t) + "," + std::to_string(r + 1) + "," + name + "," +
             csv::format_number(dist.probs(t, tok)) + "\n";
    }
  }
  write_text_file(path, out);
}

}  // namespace neurasr::ctc
