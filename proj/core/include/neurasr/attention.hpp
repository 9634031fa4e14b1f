#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "neurasr/nn.hpp"

namespace neurasr::seq2seq {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

/// Reserved SOS/EOS/UNK followed by training words in first-appearance order.
class WordVocabulary {
 public:
  static constexpr int kSos = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;

  WordVocabulary() = default;
  explicit WordVocabulary(std::vector<std::string> words);
  static WordVocabulary build(const std::vector<std::string>& transcripts);

  int size() const { return static_cast<int>(words_.size()) + 3; }
  const std::vector<std::string>& words() const { return words_; }
  bool contains(std::string_view word) const;
  /// UNK for unknown words.
  int index(std::string_view word) const;
  std::string word(int index) const;

  std::vector<int> encode(std::string_view transcript) const;
  /// Joins word tokens with spaces; reserved tokens are skipped.
  std::string decode(const std::vector<int>& tokens) const;

 private:
  std::vector<std::string> words_;
};

struct AttentionParams {
  Parameter w1;  // A x H
  Parameter w2;  // A x H
  Parameter v;   // 1 x A

  static AttentionParams create(int attention_dim, int hidden, Rng& rng, const std::string& prefix = "attention");
  std::vector<Parameter*> parameters();
};

struct AttentionVars {
  Var w1, w2, v;
};

AttentionVars bind(Tape& tape, AttentionParams& p);

/// V . tanh(W1 h_t + W2 s_prev)
Var attention_score(const AttentionVars& p, const Var& h_t, const Var& s_prev);

struct AttentionStep {
  Var alpha;    // 1 x T
  Var context;  // H x 1
};

/// alpha = softmax_t(score), context = sum_t alpha_t h_t. `states` is H x T.
AttentionStep attention_weights(const AttentionVars& p, const Var& states, const Var& s_prev);
/// Same, with W1 * states already computed.
AttentionStep attention_weights(const AttentionVars& p, const Var& states, const Var& projected,
                                const Var& s_prev);

struct Seq2SeqConfig {
  int input_dim = 0;
  int hidden = 128;
  int attention_dim = 64;
  int embed_dim = 64;
  double lr = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
};

struct Hypothesis {
  std::vector<int> tokens;  // word tokens, EOS excluded
  bool finished = false;    // ended with EOS
  double log_prob = 0.0;
  double score = 0.0;       // log_prob / emitted steps (EOS counted)
  Matrix attention;         // one row per emitted step, T columns
};

class Seq2SeqModel {
 public:
  Seq2SeqModel(const Seq2SeqConfig& config, WordVocabulary vocabulary);

  const Seq2SeqConfig& config() const { return config_; }
  const WordVocabulary& vocabulary() const { return vocab_; }
  std::vector<Parameter*> parameters();

  /// Teacher-forced mean cross entropy over the words of `targets` plus EOS.
  Var loss(Tape& tape, const Matrix& frames, const std::vector<int>& targets);
  /// Returns the loss before the update.
  double train_step(const Matrix& frames, const std::vector<int>& targets);

  Hypothesis greedy_decode(const Matrix& frames, int max_len = 20);
  /// Length-normalized beam search; stops at EOS or max_len.
  Hypothesis beam_decode(const Matrix& frames, int width, int max_len = 20);

  /// Largest |sum(alpha row) - 1| seen since construction, training and decoding.
  double alpha_row_error() const { return alpha_row_error_; }
  std::size_t alpha_rows_seen() const { return alpha_rows_seen_; }

  void save(const std::filesystem::path& stem);
  void load(const std::filesystem::path& stem);

 private:
  struct Encoded {
    Var states;     // H x T
    Var projected;  // A x T
    Var final_state;
  };
  struct Bound {
    nn::GruVars encoder;
    nn::GruVars decoder;
    AttentionVars attention;
    Var embedding;
    Var out_w;
    Var out_b;
  };
  struct StepOut {
    Var state;
    Var probs;
    Var alpha;
  };

  Bound bind_all(Tape& tape);
  Encoded encode(Tape& tape, const Bound& b, const Matrix& frames);
  StepOut step(const Bound& b, const Encoded& enc, int prev_token, const Var& s_prev);
  void track_alpha(const Matrix& alpha);

  Seq2SeqConfig config_;
  WordVocabulary vocab_;
  nn::GruParameters encoder_;
  nn::GruParameters decoder_;
  AttentionParams attention_;
  Parameter embedding_;  // embed_dim x V
  nn::DenseParameters out_;
  nn::AdamState adam_;
  double alpha_row_error_ = 0.0;
  std::size_t alpha_rows_seen_ = 0;
};

/// Grid of attention weights: header f0..f{T-1}, one row per word step.
void export_attention(const Hypothesis& hyp, const std::filesystem::path& path);

}  // namespace neurasr::seq2seq
