#include <benchmark/benchmark.h>

#include <random>

#include "neurasr/acoustic_features.hpp"
#include "neurasr/ctc.hpp"
#include "neurasr/dimred.hpp"
#include "neurasr/nn.hpp"

using namespace neurasr;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

void BM_CtcLoss(benchmark::State& state) {
  const auto steps = state.range(0);
  const Eigen::MatrixXd logits = gaussian(steps, 28, 1);
  const auto labels = ctc::TokenSet::characters().encode("the quick brown fox jumps");
  Eigen::MatrixXd grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ctc::ctc_loss_with_grad(logits, labels, grad));
  }
}
BENCHMARK(BM_CtcLoss)->Arg(100)->Arg(400);

void BM_GruSequence(benchmark::State& state) {
  Rng rng(2);
  auto params = nn::GruParameters::create(90, static_cast<int>(state.range(0)), rng);
  const Eigen::MatrixXd inputs = gaussian(90, 200, 2);
  for (auto _ : state) {
    ad::Tape tape;
    const auto g = nn::bind(tape, params);
    const auto states =
        nn::gru_sequence(g, tape.constant(inputs), tape.constant(Eigen::MatrixXd::Zero(state.range(0), 1)));
    tape.backward(ad::sum(states.back()));
  }
}
BENCHMARK(BM_GruSequence)->Arg(32)->Arg(128);

void BM_KpcaFit(benchmark::State& state) {
  const Eigen::MatrixXd frames = gaussian(state.range(0), 155, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kpca::kpca_fit(frames, 30));
  }
}
BENCHMARK(BM_KpcaFit)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Mfcc(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1000.0);
  std::vector<double> audio(16000);
  for (auto& v : audio) v = g(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(features::mfcc(audio));
  }
}
BENCHMARK(BM_Mfcc);

}  // namespace
BENCHMARK_MAIN();
