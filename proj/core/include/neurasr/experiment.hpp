#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "neurasr/feature_sequence.hpp"
#include "neurasr/metrics.hpp"
#include "neurasr/signal_io.hpp"

namespace neurasr::experiment {

enum class ModelKind { kCtc, kAttention };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

inline constexpr int kConfigSchemaVersion = 1;

/// Sentence counts of the vocabulary ladder and the unique words they cover.
inline constexpr int kSentenceLadder[] = {3, 5, 7, 10, 15, 20};
inline constexpr int kLadderUniqueWords[] = {19, 29, 42, 59, 84, 106};

struct ExperimentConfig {
  FeatureSource feature_source = FeatureSource::kEeg;
  ModelKind model = ModelKind::kAttention;
  int n_sentences = 3;
  std::vector<std::string> channel_subset;  // empty: all channels
  std::uint64_t seed = 7;
  int epochs = 0;  // 0: 500 for CTC, 100 for attention
  double lr = 1e-3;
  int beam_width = 4;
  int max_len = 20;
  int hidden = 128;
  int n_train_subjects = 2;
  io::SplitRole eval_split = io::SplitRole::kTest;
  int kpca_components = 30;
  int kpca_max_frames = 2000;
  bool save_checkpoint = false;
  std::filesystem::path corpus;
  std::filesystem::path results_root = "results";

  int resolved_epochs() const;
  /// NEURASR_RESULTS, when set, wins over results_root.
  std::filesystem::path resolved_results_root() const;

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys take defaults; unknown keys and a wrong schema_version throw ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// 16 hex digits of FNV-1a over the canonical JSON, paths excluded.
  std::string hash() const;
};

struct FeatureDims {
  int raw_eeg = 0;      // 5 per channel
  int reduced_eeg = 0;  // after KPCA (0 when skipped)
  int final_eeg = 0;    // after deltas
  int mfcc = 0;         // with deltas
  int input = 0;        // network input
};

/// Input dimension the pipeline must produce for `cfg`.
FeatureDims expected_dims(const ExperimentConfig& cfg);

struct Transcription {
  std::string session_id;
  std::string reference;
  std::string hypothesis;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string hash;
  std::filesystem::path directory;
  FeatureDims dims;
  int n_unique_words = 0;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  std::size_t kpca_fit_frames = 0;
  std::size_t train_frames = 0;
  std::vector<double> epoch_losses;
  metrics::Metric metric = metrics::Metric::kWer;
  metrics::ErrorReport report;
  std::vector<Transcription> transcriptions;
  double alpha_row_error = 0.0;  // attention model only
  std::size_t alpha_rows = 0;
  nlohmann::json metrics_json;
};

/// Preprocess, extract features, fit KPCA on the training split, train,
/// decode the evaluation split and score it. Artifacts go to
/// <results root>/<hash>/.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Re-decodes the evaluation split from a directory written by a run with
/// save_checkpoint set. Writes ref.txt and hyp.txt there.
ExperimentResult decode_experiment(const ExperimentConfig& cfg, const std::filesystem::path& directory);

struct GridSpec {
  ExperimentConfig base;
  std::vector<FeatureSource> feature_sources;
  std::vector<ModelKind> models;
  std::vector<int> n_sentences;
  std::vector<std::vector<std::string>> channel_subsets;

  /// {"schema_version":1,"base":{...},"axes":{"feature_source":[...],...}}
  static GridSpec from_json(const nlohmann::json& j);
  static GridSpec load(const std::filesystem::path& path);
  std::vector<ExperimentConfig> expand() const;
};

struct GridResult {
  std::vector<ExperimentResult> cells;
  std::vector<std::filesystem::path> tables;
};

/// Runs every cell and writes one table per (model, channel subset):
/// n_sentences, n_unique_words, then one metric column per feature source.
GridResult run_grid(const GridSpec& grid);

/// Unique words among the transcripts of sentences 1..n_sentences.
int count_unique_words(const io::CorpusManifest& manifest, int n_sentences);

/// Collects loss curves and tables from result directories under `results`
/// into `out`. Returns the files written.
std::vector<std::filesystem::path> export_plots(const std::filesystem::path& results, const std::filesystem::path& out);

}  // namespace neurasr::experiment
