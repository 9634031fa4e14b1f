#include <doctest.h>

#include <cmath>
#include <random>

#include "neurasr/attention.hpp"
#include "neurasr/error.hpp"
#include "neurasr/files.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace neurasr;
using namespace neurasr::seq2seq;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

const WordVocabulary& vocab() {
  static const WordVocabulary v = WordVocabulary::build({"the cat sat on the mat", "a dog ran"});
  return v;
}

}  // namespace

TEST_CASE("word vocabulary") {
  const auto& v = vocab();
  CHECK(v.size() == 8 + 3);
  CHECK(v.index("the") == 3);
  CHECK(v.index("zebra") == WordVocabulary::kUnk);
  CHECK(v.word(WordVocabulary::kEos) == "<eos>");
  CHECK(v.decode({WordVocabulary::kSos, v.index("a"), v.index("dog"), WordVocabulary::kEos}) == "a dog");
  CHECK(v.encode("a cat") == std::vector<int>{v.index("a"), v.index("cat")});
}

TEST_CASE("attention_score zero cases") {
  Rng rng(1);
  auto p = AttentionParams::create(4, 3, rng);
  std::mt19937_64 gen(1);
  Tape tape;
  {
    auto zero = p;
    zero.w1.value.setZero();
    zero.w2.value.setZero();
    const auto b = bind(tape, zero);
    CHECK(attention_score(b, tape.constant(random_matrix(gen, 3, 1)), tape.constant(random_matrix(gen, 3, 1))).scalar() ==
          0.0);
  }
  {
    auto zero = p;
    zero.v.value.setZero();
    const auto b = bind(tape, zero);
    CHECK(attention_score(b, tape.constant(random_matrix(gen, 3, 1)), tape.constant(random_matrix(gen, 3, 1))).scalar() ==
          0.0);
  }
  const auto b = bind(tape, p);
  CHECK_THROWS_AS(attention_score(b, tape.constant(Matrix::Zero(2, 1)), tape.constant(Matrix::Zero(3, 1))),
                  ArgumentError);
}

TEST_CASE("attention_weights examples") {
  Rng rng(2);
  std::mt19937_64 gen(2);
  auto p = AttentionParams::create(4, 3, rng);
  const Matrix states = random_matrix(gen, 3, 5);
  {
    auto zero = p;
    zero.w1.value.setZero();
    zero.w2.value.setZero();
    Tape tape;
    const auto step = attention_weights(bind(tape, zero), tape.constant(states), tape.constant(random_matrix(gen, 3, 1)));
    for (Eigen::Index t = 0; t < 5; ++t) CHECK(step.alpha.value()(0, t) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK((step.context.value() - states.rowwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
  }
  {
    Tape tape;
    const Matrix one = states.leftCols(1);
    const auto step = attention_weights(bind(tape, p), tape.constant(one), tape.constant(random_matrix(gen, 3, 1)));
    CHECK(step.alpha.value()(0, 0) == 1.0);
    CHECK((step.context.value() - one).cwiseAbs().maxCoeff() < 1e-15);
  }
  {
    // score_t = 2 tanh(h_t) with h = [atanh(ln3 / 2), 0]
    Rng r(3);
    auto q = AttentionParams::create(1, 1, r);
    q.w1.value.setConstant(1.0);
    q.w2.value.setConstant(0.0);
    q.v.value.setConstant(2.0);
    Matrix h(1, 2);
    h << std::atanh(std::log(3.0) / 2.0), 0.0;
    Tape tape;
    const auto step = attention_weights(bind(tape, q), tape.constant(h), tape.constant(Matrix::Zero(1, 1)));
    CHECK(step.alpha.value()(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(step.alpha.value()(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("property: attention gradients and row sums") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 30; ++trial) {
    Rng rng(gen());
    const int h = 2 + static_cast<int>(gen() % 3);
    const int a = 2 + static_cast<int>(gen() % 3);
    const Eigen::Index t = 1 + static_cast<Eigen::Index>(gen() % 5);
    auto p = AttentionParams::create(a, h, rng);
    Matrix states = random_matrix(gen, h, t);
    Matrix s_prev = random_matrix(gen, h, 1);
    const Matrix w = random_matrix(gen, h, 1);
    auto loss_of = [&](Tape& tape, Var& sv, Var& hv) {
      sv = tape.variable(states);
      hv = tape.variable(s_prev);
      const auto step = attention_weights(bind(tape, p), sv, hv);
      CHECK(std::abs(step.alpha.value().sum() - 1.0) <= 1e-9);
      CHECK((step.alpha.value().array() >= 0.0).all());
      return ad::sum(ad::mul(step.context, tape.constant(w)));
    };
    for (auto* q : p.parameters()) q->zero_grad();
    Tape tape;
    Var sv, hv;
    tape.backward(loss_of(tape, sv, hv));
    auto value = [&] {
      Tape t2(false);
      Var a1, a2;
      return loss_of(t2, a1, a2).scalar();
    };
    CHECK(oracle::max_relative_error(sv.grad(), oracle::numeric_gradient(value, states)) < 1e-4);
    CHECK(oracle::max_relative_error(hv.grad(), oracle::numeric_gradient(value, s_prev)) < 1e-4);
    for (auto* q : p.parameters()) {
      const Matrix analytic = q->grad;
      CHECK(oracle::max_relative_error(analytic, oracle::numeric_gradient(value, q->value)) < 1e-4);
    }
  }
}

TEST_CASE("tiny full model gradient check") {
  WordVocabulary v({"yes", "no"});
  Seq2SeqConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden = 4;
  cfg.attention_dim = 3;
  cfg.embed_dim = 3;
  cfg.seed = 5;
  Seq2SeqModel model(cfg, v);
  std::mt19937_64 gen(5);
  const Matrix frames = random_matrix(gen, 3, 2);
  const std::vector<int> targets = {v.index("no"), v.index("yes")};
  auto params = model.parameters();
  nn::zero_grads(params);
  {
    Tape tape;
    tape.backward(model.loss(tape, frames, targets));
  }
  for (auto* p : params) {
    const Matrix analytic = p->grad;
    const Matrix numeric = oracle::numeric_gradient(
        [&] {
          Tape t(false);
          return model.loss(t, frames, targets).scalar();
        },
        p->value);
    INFO(p->name);
    CHECK(oracle::max_relative_error(analytic, numeric) < 1e-3);
  }
}

TEST_CASE("initial loss is close to ln V") {
  Seq2SeqConfig cfg;
  cfg.input_dim = 6;
  cfg.seed = 6;
  Seq2SeqModel model(cfg, vocab());
  std::mt19937_64 gen(6);
  const Matrix frames = random_matrix(gen, 30, 6);
  Tape tape(false);
  const double loss = model.loss(tape, frames, vocab().encode("the cat sat on the mat")).scalar();
  const double ln_v = std::log(static_cast<double>(vocab().size()));
  CHECK(std::abs(loss - ln_v) <= 0.1 * ln_v);
}

TEST_CASE("training target checks") {
  Seq2SeqConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden = 4;
  Seq2SeqModel model(cfg, vocab());
  Tape tape;
  const Matrix frames = Matrix::Zero(4, 2);
  CHECK_THROWS_AS(model.loss(tape, frames, {}), ArgumentError);
  CHECK_THROWS_AS(model.loss(tape, frames, {WordVocabulary::kUnk}), ArgumentError);
  CHECK_THROWS_AS(model.loss(tape, Matrix::Zero(4, 3), {3}), ArgumentError);
}

TEST_CASE("lr 0 leaves parameters unchanged") {
  Seq2SeqConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = 8;
  cfg.lr = 0.0;
  Seq2SeqModel model(cfg, vocab());
  std::vector<Matrix> before;
  for (auto* p : model.parameters()) before.push_back(p->value);
  std::mt19937_64 gen(7);
  const double loss = model.train_step(random_matrix(gen, 10, 3), vocab().encode("a dog ran"));
  CHECK(std::isfinite(loss));
  std::size_t i = 0;
  for (auto* p : model.parameters()) CHECK((p->value.array() == before[i++].array()).all());
}

TEST_CASE("memorizes one example") {
  Seq2SeqConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden = 32;
  cfg.attention_dim = 16;
  cfg.embed_dim = 16;
  cfg.lr = 1e-2;
  cfg.seed = 8;
  Seq2SeqModel model(cfg, vocab());
  std::mt19937_64 gen(8);
  const Matrix frames = random_matrix(gen, 25, 5);
  const auto targets = vocab().encode("the cat sat on the mat");
  for (int i = 0; i < 200; ++i) model.train_step(frames, targets);
  Tape tape(false);
  CHECK(model.loss(tape, frames, targets).scalar() < 0.01);

  const auto hyp = model.beam_decode(frames, 4);
  CHECK(hyp.finished);
  CHECK(vocab().decode(hyp.tokens) == "the cat sat on the mat");
  CHECK(hyp.attention.rows() == 7);
  CHECK(hyp.attention.cols() == 25);
  CHECK(model.alpha_row_error() <= 1e-9);
  CHECK(model.alpha_rows_seen() > 0);
}

TEST_CASE("decoding") {
  Seq2SeqConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden = 16;
  cfg.attention_dim = 8;
  cfg.embed_dim = 8;
  cfg.seed = 9;
  Seq2SeqModel model(cfg, vocab());
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix frames = random_matrix(gen, 12, 4);
    const auto g = model.greedy_decode(frames, 6);
    const auto w1 = model.beam_decode(frames, 1, 6);
    CHECK(g.tokens == w1.tokens);
    CHECK(g.score == w1.score);
    CHECK(static_cast<int>(w1.tokens.size()) <= 6);
    const auto w4 = model.beam_decode(frames, 4, 6);
    CHECK(w4.score >= w1.score);
    for (Eigen::Index k = 0; k < w4.attention.rows(); ++k) CHECK(std::abs(w4.attention.row(k).sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("uniform attention export") {
  Seq2SeqConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = 8;
  cfg.attention_dim = 4;
  cfg.embed_dim = 4;
  Seq2SeqModel model(cfg, vocab());
  for (auto* p : model.parameters()) {
    if (p->name.find("attention") != std::string::npos) p->value.setZero();
  }
  std::mt19937_64 gen(10);
  const auto hyp = model.beam_decode(random_matrix(gen, 40, 3), 2, 5);
  for (Eigen::Index k = 0; k < hyp.attention.rows(); ++k) {
    for (Eigen::Index t = 0; t < 40; ++t) CHECK(hyp.attention(k, t) == doctest::Approx(1.0 / 40.0).epsilon(1e-12));
  }
}

TEST_CASE("export_attention shape and determinism") {
  testing::TempDir tmp("att");
  Hypothesis hyp;
  hyp.tokens = {3, 4, 5};
  hyp.finished = true;
  hyp.attention = Matrix::Constant(4, 50, 1.0 / 50.0);
  export_attention(hyp, tmp / "a.csv");
  const auto text = read_text_file(tmp / "a.csv");
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 4);
  CHECK(text.rfind("f0,f1,", 0) == 0);
  CHECK(text.find("f49\n") != std::string::npos);
  export_attention(hyp, tmp / "b.csv");
  CHECK(read_text_file(tmp / "b.csv") == text);

  Hypothesis empty;
  CHECK_THROWS_AS(export_attention(empty, tmp / "c.csv"), ArgumentError);
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir tmp("s2s");
  Seq2SeqConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = 6;
  cfg.seed = 11;
  Seq2SeqModel a(cfg, vocab());
  std::mt19937_64 gen(11);
  const Matrix frames = random_matrix(gen, 8, 3);
  a.train_step(frames, vocab().encode("a dog ran"));
  a.save(tmp / "m");
  cfg.seed = 12;
  Seq2SeqModel b(cfg, vocab());
  b.load(tmp / "m");
  CHECK(a.beam_decode(frames, 3).tokens == b.beam_decode(frames, 3).tokens);
  auto pa = a.parameters();
  auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK((pa[i]->value.array() == pb[i]->value.array()).all());
}
