#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace neurasr::io {

inline constexpr int kEegChannels = 31;
inline constexpr double kEegRateHz = 1000.0;
inline constexpr double kAudioRateHz = 16000.0;

// Channels are rows so that one channel is a contiguous span.
using EegMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Ordered set of electrode labels (10-20 layout, Cz used as reference).
class ChannelMap {
 public:
  explicit ChannelMap(std::vector<std::string> names);

  static const ChannelMap& standard();

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws ArgumentError for unknown labels.
  std::size_t index_of(std::string_view name) const;

 private:
  std::vector<std::string> names_;
};

struct RecordingSession {
  std::string session_id;
  std::string subject_id;
  int sentence_id = 0;
  std::string transcript;
  EegMatrix eeg;                    // microvolts, 31 x samples @ 1000 Hz
  std::vector<std::int16_t> audio;  // PCM16 @ 16 kHz

  double eeg_seconds() const { return static_cast<double>(eeg.cols()) / kEegRateHz; }
  double audio_seconds() const { return static_cast<double>(audio.size()) / kAudioRateHz; }

  std::span<const double> channel(std::size_t c) const {
    return {eeg.row(static_cast<Eigen::Index>(c)).data(), static_cast<std::size_t>(eeg.cols())};
  }

  /// Throws SchemaError describing the first violated invariant.
  void validate() const;
};

/// True for lowercase words separated by single spaces.
bool is_valid_transcript(std::string_view transcript);
std::vector<std::string> split_words(std::string_view transcript);

enum class SplitRole { kTrain, kValidation, kTest };

std::string_view to_string(SplitRole role);
SplitRole parse_split_role(std::string_view text);

struct ManifestEntry {
  std::filesystem::path path;  // relative to the corpus root
  std::string subject_id;
  int sentence_id = 0;
  std::string transcript;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;
  std::map<std::string, SplitRole> split;

  /// Distinct subject ids, sorted.
  std::vector<std::string> subjects() const;
  std::vector<ManifestEntry> entries_for(SplitRole role) const;
  std::filesystem::path session_path(const ManifestEntry& entry) const { return root / entry.path; }

  void validate() const;
};

// Session directory: eeg.csv + audio.wav + meta.json.
RecordingSession load_session(const std::filesystem::path& dir);
void save_session(const RecordingSession& session, const std::filesystem::path& dir);

CorpusManifest read_manifest(const std::filesystem::path& root);
void write_manifest(const CorpusManifest& manifest);

// RIFF PCM16 mono.
std::vector<std::int16_t> read_wav(const std::filesystem::path& path, int expected_rate_hz = 16000);
void write_wav(const std::filesystem::path& path, std::span<const std::int16_t> samples,
               int rate_hz = 16000);

struct SynthOptions {
  std::uint64_t seed = 7;
  int n_sentences = 3;
  int n_subjects = 4;
  int repeats = 3;
  double word_seconds = 0.5;
  double lead_seconds = 0.25;
};

/// Fixed 106-word vocabulary in first-use order of the sentence bank.
const std::vector<std::string>& builtin_words();
/// Thirty fixed sentences built from builtin_words().
const std::vector<std::string>& builtin_sentences();

/// Builds a synthetic corpus under `root` and writes manifest.json there.
CorpusManifest synthesize_corpus(const std::filesystem::path& root, const SynthOptions& options);

/// Generates one session in memory; synthesize_corpus is a loop over this.
RecordingSession synthesize_session(const SynthOptions& options, int sentence_id,
                                    int subject_index, int repeat);

CorpusManifest split_by_subject(const CorpusManifest& manifest, int n_train);

}  // namespace neurasr::io
