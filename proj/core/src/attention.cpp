#include "neurasr/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neurasr/csv.hpp"
#include "neurasr/error.hpp"
#include "neurasr/files.hpp"
#include "neurasr/signal_io.hpp"

namespace neurasr::seq2seq {

WordVocabulary::WordVocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) throw ArgumentError("empty vocabulary word");
    if (std::find(words_.begin(), words_.begin() + static_cast<std::ptrdiff_t>(i), words_[i]) !=
        words_.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw ArgumentError("duplicate vocabulary word '" + words_[i] + "'");
    }
  }
}

WordVocabulary WordVocabulary::build(const std::vector<std::string>& transcripts) {
  std::vector<std::string> words;
  for (const auto& t : transcripts) {
    for (auto& w : io::split_words(t)) {
      if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(std::move(w));
    }
  }
  return WordVocabulary(std::move(words));
}

bool WordVocabulary::contains(std::string_view word) const {
  return std::find(words_.begin(), words_.end(), word) != words_.end();
}

int WordVocabulary::index(std::string_view word) const {
  const auto it = std::find(words_.begin(), words_.end(), word);
  return it == words_.end() ? kUnk : static_cast<int>(it - words_.begin()) + 3;
}

std::string WordVocabulary::word(int index) const {
  switch (index) {
    case kSos: return "<sos>";
    case kEos: return "<eos>";
    case kUnk: return "<unk>";
    default: break;
  }
  if (index < 0 || index >= size()) throw ArgumentError("word index out of range");
  return words_[static_cast<std::size_t>(index - 3)];
}

std::vector<int> WordVocabulary::encode(std::string_view transcript) const {
  std::vector<int> out;
  for (const auto& w : io::split_words(transcript)) out.push_back(index(w));
  return out;
}

std::string WordVocabulary::decode(const std::vector<int>& tokens) const {
  std::string out;
  for (int t : tokens) {
    if (t == kSos || t == kEos) continue;
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

AttentionParams AttentionParams::create(int attention_dim, int hidden, Rng& rng, const std::string& prefix) {
  if (attention_dim < 1 || hidden < 1) throw ArgumentError("attention dimensions must be positive");
  AttentionParams p;
  p.w1 = Parameter(prefix + ".w1", nn::init_uniform(attention_dim, hidden, hidden, rng));
  p.w2 = Parameter(prefix + ".w2", nn::init_uniform(attention_dim, hidden, hidden, rng));
  p.v = Parameter(prefix + ".v", nn::init_uniform(1, attention_dim, attention_dim, rng));
  return p;
}

std::vector<Parameter*> AttentionParams::parameters() { return {&w1, &w2, &v}; }

AttentionVars bind(Tape& tape, AttentionParams& p) {
  return {tape.param(p.w1), tape.param(p.w2), tape.param(p.v)};
}

Var attention_score(const AttentionVars& p, const Var& h_t, const Var& s_prev) {
  if (h_t.cols() != 1 || s_prev.cols() != 1 || p.w1.cols() != h_t.rows() || p.w2.cols() != s_prev.rows() ||
      p.w1.rows() != p.w2.rows() || p.v.rows() != 1 || p.v.cols() != p.w1.rows()) {
    throw ArgumentError("attention_score: shape mismatch");
  }
  return ad::matmul(p.v, ad::tanh(ad::matmul(p.w1, h_t) + ad::matmul(p.w2, s_prev)));
}

AttentionStep attention_weights(const AttentionVars& p, const Var& states, const Var& s_prev) {
  if (p.w1.cols() != states.rows()) throw ArgumentError("attention_weights: state dimension mismatch");
  return attention_weights(p, states, ad::matmul(p.w1, states), s_prev);
}

AttentionStep attention_weights(const AttentionVars& p, const Var& states, const Var& projected,
                                const Var& s_prev) {
  if (states.cols() < 1) throw ArgumentError("attention over an empty sequence");
  if (projected.cols() != states.cols() || projected.rows() != p.w2.rows() || s_prev.cols() != 1 ||
      s_prev.rows() != p.w2.cols() || p.v.cols() != p.w2.rows()) {
    throw ArgumentError("attention_weights: shape mismatch");
  }
  const Var energy = ad::tanh(ad::add_colwise(projected, ad::matmul(p.w2, s_prev)));
  const Var alpha = ad::softmax(ad::matmul(p.v, energy));
  const Var context = ad::matmul(states, ad::reshape(alpha, states.cols(), 1));
  return {alpha, context};
}

Seq2SeqModel::Seq2SeqModel(const Seq2SeqConfig& config, WordVocabulary vocabulary)
    : config_(config), vocab_(std::move(vocabulary)) {
  if (config.input_dim < 1) throw ArgumentError("seq2seq input_dim must be positive");
  Rng rng(config.seed);
  encoder_ = nn::GruParameters::create(config.input_dim, config.hidden, rng, "encoder");
  decoder_ = nn::GruParameters::create(config.embed_dim + config.hidden, config.hidden, rng, "decoder");
  attention_ = AttentionParams::create(config.attention_dim, config.hidden, rng);
  embedding_ = Parameter("embedding", nn::init_uniform(config.embed_dim, vocab_.size(), config.embed_dim, rng));
  out_ = nn::DenseParameters::create(config.hidden, vocab_.size(), rng, "output");
  adam_.lr = config.lr;
  adam_.init(parameters());
}

std::vector<Parameter*> Seq2SeqModel::parameters() {
  std::vector<Parameter*> params = encoder_.parameters();
  for (auto* p : decoder_.parameters()) params.push_back(p);
  for (auto* p : attention_.parameters()) params.push_back(p);
  params.push_back(&embedding_);
  for (auto* p : out_.parameters()) params.push_back(p);
  return params;
}

Seq2SeqModel::Bound Seq2SeqModel::bind_all(Tape& tape) {
  Bound b;
  b.encoder = nn::bind(tape, encoder_);
  b.decoder = nn::bind(tape, decoder_);
  b.attention = bind(tape, attention_);
  b.embedding = tape.param(embedding_);
  b.out_w = tape.param(out_.w);
  b.out_b = tape.param(out_.b);
  return b;
}

Seq2SeqModel::Encoded Seq2SeqModel::encode(Tape& tape, const Bound& b, const Matrix& frames) {
  if (frames.cols() != config_.input_dim) {
    throw ArgumentError("seq2seq model expects " + std::to_string(config_.input_dim) + "-dim frames, got " +
                        std::to_string(frames.cols()));
  }
  if (frames.rows() < 1) throw ArgumentError("empty feature sequence");
  const Var inputs = tape.constant(frames.transpose());
  const Var h0 = tape.constant(Matrix::Zero(config_.hidden, 1));
  const auto states = nn::gru_sequence(b.encoder, inputs, h0);
  Encoded enc;
  enc.states = ad::hstack(states);
  enc.projected = ad::matmul(b.attention.w1, enc.states);
  enc.final_state = states.back();
  return enc;
}

Seq2SeqModel::StepOut Seq2SeqModel::step(const Bound& b, const Encoded& enc, int prev_token, const Var& s_prev) {
  const AttentionStep att = attention_weights(b.attention, enc.states, enc.projected, s_prev);
  track_alpha(att.alpha.value());
  const Var input = ad::concat_rows({ad::column(b.embedding, prev_token), att.context});
  const Var state = nn::gru_step(b.decoder, input, s_prev);
  return {state, nn::dense_softmax(b.out_w, b.out_b, state), att.alpha};
}

void Seq2SeqModel::track_alpha(const Matrix& alpha) {
  alpha_row_error_ = std::max(alpha_row_error_, std::abs(alpha.sum() - 1.0));
  if ((alpha.array() < 0.0).any()) alpha_row_error_ = std::max(alpha_row_error_, 1.0);
  ++alpha_rows_seen_;
}

Var Seq2SeqModel::loss(Tape& tape, const Matrix& frames, const std::vector<int>& targets) {
  if (targets.empty()) throw ArgumentError("empty transcript");
  for (int t : targets) {
    if (t <= WordVocabulary::kUnk || t >= vocab_.size()) throw ArgumentError("target word outside the vocabulary");
  }
  const Bound b = bind_all(tape);
  const Encoded enc = encode(tape, b, frames);
  std::vector<Var> terms;
  Var s = enc.final_state;
  int prev = WordVocabulary::kSos;
  for (std::size_t k = 0; k <= targets.size(); ++k) {
    const int gold = k < targets.size() ? targets[k] : WordVocabulary::kEos;
    const StepOut out = step(b, enc, prev, s);
    terms.push_back(ad::cross_entropy(out.probs, gold));
    s = out.state;
    prev = gold;
  }
  return ad::scale(ad::add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

double Seq2SeqModel::train_step(const Matrix& frames, const std::vector<int>& targets) {
  auto params = parameters();
  nn::zero_grads(params);
  Tape tape;
  const Var l = loss(tape, frames, targets);
  tape.backward(l);
  nn::clip_grad_norm(params, config_.clip_norm);
  nn::adam_step(adam_, params);
  return l.scalar();
}

Hypothesis Seq2SeqModel::greedy_decode(const Matrix& frames, int max_len) {
  return beam_decode(frames, 1, max_len);
}

Hypothesis Seq2SeqModel::beam_decode(const Matrix& frames, int width, int max_len) {
  if (width < 1) throw ArgumentError("beam width must be >= 1");
  if (max_len < 1) throw ArgumentError("max_len must be >= 1");
  Tape tape(false);
  const Bound b = bind_all(tape);
  const Encoded enc = encode(tape, b, frames);

  struct Beam {
    std::vector<int> tokens;
    Var state;
    double log_prob = 0.0;
    std::vector<Eigen::RowVectorXd> alphas;
  };
  auto finish = [&](const Beam& beam, bool finished) {
    Hypothesis h;
    h.tokens = beam.tokens;
    h.finished = finished;
    if (finished) h.tokens.pop_back();
    h.log_prob = beam.log_prob;
    h.score = beam.log_prob / static_cast<double>(std::max<std::size_t>(1, beam.alphas.size()));
    h.attention.resize(static_cast<Eigen::Index>(beam.alphas.size()), enc.states.cols());
    for (std::size_t i = 0; i < beam.alphas.size(); ++i) h.attention.row(static_cast<Eigen::Index>(i)) = beam.alphas[i];
    return h;
  };

  std::vector<Beam> live{{{}, enc.final_state, 0.0, {}}};
  std::vector<Hypothesis> done;
  for (int len = 0; len < max_len && !live.empty() && static_cast<int>(done.size()) < width; ++len) {
    std::vector<Beam> candidates;
    for (const Beam& beam : live) {
      const int prev = beam.tokens.empty() ? WordVocabulary::kSos : beam.tokens.back();
      const StepOut out = step(b, enc, prev, beam.state);
      const Matrix& p = out.probs.value();
      std::vector<int> order(static_cast<std::size_t>(p.rows()));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return p(x, 0) > p(y, 0); });
      int taken = 0;
      for (int tok : order) {
        if (taken == width) break;
        if (tok == WordVocabulary::kSos) continue;
        Beam next = beam;
        next.tokens.push_back(tok);
        next.state = out.state;
        next.log_prob += std::log(std::max(p(tok, 0), 1e-300));
        next.alphas.push_back(out.alpha.value().row(0));
        candidates.push_back(std::move(next));
        ++taken;
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Beam& x, const Beam& y) { return x.log_prob > y.log_prob; });
    live.clear();
    for (std::size_t i = 0; i < candidates.size() && i < static_cast<std::size_t>(width); ++i) {
      if (candidates[i].tokens.back() == WordVocabulary::kEos) {
        done.push_back(finish(candidates[i], true));
      } else {
        live.push_back(std::move(candidates[i]));
      }
    }
  }
  for (const Beam& beam : live) done.push_back(finish(beam, false));
  if (width > 1) done.push_back(greedy_decode(frames, max_len));

  std::stable_sort(done.begin(), done.end(),
                   [](const Hypothesis& x, const Hypothesis& y) { return x.score > y.score; });
  return done.front();
}

void Seq2SeqModel::save(const std::filesystem::path& stem) {
  nlohmann::json extra = {{"model", "attention"},
                          {"input_dim", config_.input_dim},
                          {"hidden", config_.hidden},
                          {"attention_dim", config_.attention_dim},
                          {"embed_dim", config_.embed_dim},
                          {"clip_norm", config_.clip_norm},
                          {"vocabulary", vocab_.words()}};
  nn::save_checkpoint(stem, parameters(), adam_, config_.seed, extra);
}

void Seq2SeqModel::load(const std::filesystem::path& stem) {
  nn::load_checkpoint(stem, parameters(), &adam_);
}

void export_attention(const Hypothesis& hyp, const std::filesystem::path& path) {
  const auto rows = static_cast<Eigen::Index>(hyp.tokens.size());
  if (rows < 1 || hyp.attention.rows() < rows) throw ArgumentError("hypothesis has no word steps to export");
  std::string out;
  for (Eigen::Index t = 0; t < hyp.attention.cols(); ++t) {
    if (t > 0) out += ',';
    out += 'f' + std::to_string(t);
  }
  out += '\n';
  for (Eigen::Index k = 0; k < rows; ++k) {
    for (Eigen::Index t = 0; t < hyp.attention.cols(); ++t) {
      if (t > 0) out += ',';
      csv::append_number(out, hyp.attention(k, t));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace neurasr::seq2seq
