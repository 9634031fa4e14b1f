#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "neurasr/error.hpp"
#include "neurasr/random.hpp"
#include "neurasr/signal_io.hpp"

namespace neurasr::io {

namespace {

// Signal model constants. Noise is scaled so the per-channel word signal and
// the AR(1) background have roughly equal power (about 0 dB SNR).
constexpr double kEnvelopeHz = 8.0;
constexpr double kSignalAmplitudeUv = 10.0;
constexpr double kArRho = 0.9;
constexpr double kNoiseStdUv = 5.0;  // stationary std of the AR(1) process
constexpr double kLineNoiseUv = 3.0;
constexpr double kToneAmplitude = 2500.0;
constexpr double kAudioNoiseStd = 1200.0;
constexpr int kTonesPerWord = 3;

struct WordPattern {
  std::vector<double> mixing;  // one weight per channel
  double tones_hz[kTonesPerWord];
};

WordPattern word_pattern(std::uint64_t seed, std::size_t word_index) {
  Rng rng(Rng::mix(seed, 0x5EED0000ULL + word_index));
  WordPattern p;
  p.mixing.resize(kEegChannels);
  for (double& m : p.mixing) m = rng.normal();
  for (double& f : p.tones_hz) f = std::round(rng.uniform(250.0, 3500.0));
  return p;
}

std::string subject_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "sub%02d", index + 1);
  return buf;
}

}  // namespace

const std::vector<std::string>& builtin_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> out;
    for (const auto& sentence : builtin_sentences()) {
      for (auto& w : split_words(sentence)) {
        if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
      }
    }
    return out;
  }();
  return words;
}

// Cumulative unique-word counts after sentences 3/5/7/10/15/20 are
// 19/29/42/59/84/106; sentences 21..30 reuse earlier words only.
const std::vector<std::string>& builtin_sentences() {
  static const std::vector<std::string> sentences = {
      "the of and to a in is",
      "you that it he was for",
      "on are as with his they",
      "i at as be this have",
      "from or at one had by",
      "word but not what all were we",
      "when your can said there use",
      "an each which she do how",
      "their if will up other about",
      "out many she then them these",
      "so some will her would make",
      "like him many into time has",
      "look two some more write go",
      "see number him no way could",
      "people my two than first water",
      "been call number who oil its",
      "now find my long down day",
      "did get its call come made",
      "may part day find over new",
      "sound take may get only little",
      "the you are be by we",
      "was they or what said do",
      "this word when each will them",
      "all there how out her has",
      "which up these him write people",
      "many would look no water find",
      "into go my oil did new",
      "way been long may little is",
      "its get sound to he his",
      "part the you are be by",
  };
  return sentences;
}

RecordingSession synthesize_session(const SynthOptions& options, int sentence_id,
                                    int subject_index, int repeat) {
  const auto& sentences = builtin_sentences();
  if (sentence_id < 1 || sentence_id > static_cast<int>(sentences.size())) {
    throw ArgumentError("sentence id out of range");
  }
  const auto& vocab = builtin_words();
  const std::string& transcript = sentences[static_cast<std::size_t>(sentence_id - 1)];
  const auto words = split_words(transcript);

  Rng rng(Rng::mix(options.seed, (static_cast<std::uint64_t>(sentence_id) << 32) ^
                                     (static_cast<std::uint64_t>(subject_index) << 16) ^
                                     static_cast<std::uint64_t>(repeat)));
  Rng subject_rng(Rng::mix(options.seed, 0xA5A5000000ULL + static_cast<std::uint64_t>(subject_index)));
  const double subject_gain = subject_rng.uniform(0.8, 1.2);

  // Word boundaries in seconds, with +-10% speaking-rate jitter per word.
  std::vector<double> starts;
  std::vector<double> durations;
  double t = options.lead_seconds;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const double d = options.word_seconds * rng.uniform(0.9, 1.1);
    starts.push_back(t);
    durations.push_back(d);
    t += d;
  }
  const double total_seconds = t + options.lead_seconds;
  const auto n_eeg = static_cast<Eigen::Index>(std::llround(total_seconds * kEegRateHz));
  const auto n_audio = static_cast<std::size_t>(std::llround(total_seconds * kAudioRateHz));

  std::vector<WordPattern> patterns;
  for (const auto& w : words) {
    const auto idx = static_cast<std::size_t>(std::find(vocab.begin(), vocab.end(), w) - vocab.begin());
    patterns.push_back(word_pattern(options.seed, idx));
  }

  RecordingSession s;
  char id[64];
  std::snprintf(id, sizeof(id), "s%02d_%s_r%d", sentence_id, subject_name(subject_index).c_str(),
                repeat + 1);
  s.session_id = id;
  s.subject_id = subject_name(subject_index);
  s.sentence_id = sentence_id;
  s.transcript = transcript;

  s.eeg = EegMatrix::Zero(kEegChannels, n_eeg);
  const double innovation = kNoiseStdUv * std::sqrt(1.0 - kArRho * kArRho);
  for (int c = 0; c < kEegChannels; ++c) {
    double ar = rng.normal(0.0, kNoiseStdUv);
    const double line_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (Eigen::Index n = 0; n < n_eeg; ++n) {
      ar = kArRho * ar + innovation * rng.normal();
      const double tn = static_cast<double>(n) / kEegRateHz;
      s.eeg(c, n) = ar + kLineNoiseUv * std::sin(2.0 * std::numbers::pi * 60.0 * tn + line_phase);
    }
  }
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto first = static_cast<Eigen::Index>(std::llround(starts[w] * kEegRateHz));
    const auto last = std::min<Eigen::Index>(
        n_eeg, static_cast<Eigen::Index>(std::llround((starts[w] + durations[w]) * kEegRateHz)));
    for (Eigen::Index n = first; n < last; ++n) {
      const double tau = static_cast<double>(n - first) / kEegRateHz;
      const double envelope = std::sin(2.0 * std::numbers::pi * kEnvelopeHz * tau) *
                              std::sin(std::numbers::pi * tau / durations[w]);
      for (int c = 0; c < kEegChannels; ++c) {
        s.eeg(c, n) += subject_gain * kSignalAmplitudeUv * patterns[w].mixing[static_cast<std::size_t>(c)] * envelope;
      }
    }
  }
  // Quantize to nanovolts; keeps the CSV compact.
  s.eeg = (s.eeg.array() * 1000.0).round() / 1000.0;

  std::vector<double> audio(n_audio);
  for (double& a : audio) a = rng.normal(0.0, kAudioNoiseStd);
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto first = static_cast<std::size_t>(std::llround(starts[w] * kAudioRateHz));
    const auto last = std::min(n_audio, static_cast<std::size_t>(
                                            std::llround((starts[w] + durations[w]) * kAudioRateHz)));
    for (std::size_t n = first; n < last; ++n) {
      const double tau = static_cast<double>(n - first) / kAudioRateHz;
      const double env = std::sin(std::numbers::pi * tau / durations[w]);
      double v = 0.0;
      for (double f : patterns[w].tones_hz) v += std::sin(2.0 * std::numbers::pi * f * tau);
      audio[n] += kToneAmplitude * env * v;
    }
  }
  s.audio.resize(n_audio);
  for (std::size_t n = 0; n < n_audio; ++n) {
    s.audio[n] = static_cast<std::int16_t>(std::clamp(std::round(audio[n]), -32768.0, 32767.0));
  }
  return s;
}

CorpusManifest synthesize_corpus(const std::filesystem::path& root, const SynthOptions& options) {
  const int max_sentences = static_cast<int>(builtin_sentences().size());
  if (options.n_sentences < 1 || options.n_sentences > max_sentences) {
    throw ArgumentError("n_sentences must be in [1, " + std::to_string(max_sentences) + "], got " +
                        std::to_string(options.n_sentences));
  }
  if (options.n_subjects < 3) throw ArgumentError("n_subjects must be at least 3");
  if (options.repeats < 1) throw ArgumentError("repeats must be at least 1");
  if (options.word_seconds <= 0.0 || options.lead_seconds < 0.0) {
    throw ArgumentError("word and lead durations must be positive");
  }

  CorpusManifest manifest;
  manifest.root = root;
  manifest.seed = options.seed;
  std::filesystem::create_directories(root / "sessions");
  for (int sentence = 1; sentence <= options.n_sentences; ++sentence) {
    for (int subject = 0; subject < options.n_subjects; ++subject) {
      for (int rep = 0; rep < options.repeats; ++rep) {
        const RecordingSession s = synthesize_session(options, sentence, subject, rep);
        const std::filesystem::path rel = std::filesystem::path("sessions") / s.session_id;
        save_session(s, root / rel);
        manifest.entries.push_back({rel, s.subject_id, s.sentence_id, s.transcript});
      }
    }
  }
  write_manifest(manifest);
  return manifest;
}

}  // namespace neurasr::io
