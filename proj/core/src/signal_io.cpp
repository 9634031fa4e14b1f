#include "neurasr/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "neurasr/csv.hpp"
#include "neurasr/error.hpp"
#include "neurasr/files.hpp"

namespace neurasr::io {

namespace fs = std::filesystem;
using nlohmann::json;

ChannelMap::ChannelMap(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() != static_cast<std::size_t>(kEegChannels)) {
    throw ArgumentError("channel map needs " + std::to_string(kEegChannels) + " labels, got " +
                        std::to_string(names_.size()));
  }
  std::set<std::string> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) throw ArgumentError("channel map labels are not unique");
  if (!unique.contains("T7") || !unique.contains("T8")) {
    throw ArgumentError("channel map must contain T7 and T8");
  }
}

const ChannelMap& ChannelMap::standard() {
  static const ChannelMap map({"Fp1", "Fp2", "F7",  "F3",  "Fz",  "F4",  "F8",  "FT9",
                               "FC5", "FC1", "FC2", "FC6", "FT10", "T7",  "C3",  "C4",
                               "T8",  "TP9", "CP5", "CP1", "CP2", "CP6", "TP10", "P7",
                               "P3",  "Pz",  "P4",  "P8",  "O1",  "Oz",  "O2"});
  return map;
}

std::optional<std::size_t> ChannelMap::find(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t ChannelMap::index_of(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  throw ArgumentError("unknown channel '" + std::string(name) + "'");
}

bool is_valid_transcript(std::string_view transcript) {
  if (transcript.empty() || transcript.front() == ' ' || transcript.back() == ' ') return false;
  char prev = 0;
  for (char c : transcript) {
    if (c == ' ') {
      if (prev == ' ') return false;
    } else if (c < 'a' || c > 'z') {
      return false;
    }
    prev = c;
  }
  return true;
}

std::vector<std::string> split_words(std::string_view transcript) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < transcript.size()) {
    const std::size_t end = std::min(transcript.find(' ', start), transcript.size());
    if (end > start) words.emplace_back(transcript.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

void RecordingSession::validate() const {
  if (eeg.rows() != kEegChannels) {
    throw SchemaError("session " + session_id + ": eeg has " + std::to_string(eeg.rows()) +
                      " channels, expected " + std::to_string(kEegChannels));
  }
  if (eeg.cols() < static_cast<Eigen::Index>(kEegRateHz)) {
    throw SchemaError("session " + session_id + ": eeg shorter than 1 s");
  }
  if (!is_valid_transcript(transcript)) {
    throw SchemaError("session " + session_id + ": transcript '" + transcript +
                      "' must be lowercase a-z words separated by single spaces");
  }
  const double ratio = audio_seconds() / eeg_seconds();
  if (ratio < 0.8 || ratio > 1.2) {
    throw SchemaError("session " + session_id + ": audio duration deviates more than 20% from eeg");
  }
}

std::string_view to_string(SplitRole role) {
  switch (role) {
    case SplitRole::kTrain:
      return "train";
    case SplitRole::kValidation:
      return "validation";
    case SplitRole::kTest:
      return "test";
  }
  return "train";
}

SplitRole parse_split_role(std::string_view text) {
  if (text == "train") return SplitRole::kTrain;
  if (text == "validation") return SplitRole::kValidation;
  if (text == "test") return SplitRole::kTest;
  throw ArgumentError("unknown split role '" + std::string(text) + "'");
}

std::vector<std::string> CorpusManifest::subjects() const {
  std::set<std::string> ids;
  for (const auto& e : entries) ids.insert(e.subject_id);
  return {ids.begin(), ids.end()};
}

std::vector<ManifestEntry> CorpusManifest::entries_for(SplitRole role) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    const auto it = split.find(e.subject_id);
    if (it != split.end() && it->second == role) out.push_back(e);
  }
  return out;
}

void CorpusManifest::validate() const {
  for (const auto& e : entries) {
    const fs::path dir = session_path(e);
    for (const char* name : {"eeg.csv", "audio.wav", "meta.json"}) {
      if (!fs::exists(dir / name)) throw CorpusError("missing " + (dir / name).string());
    }
  }
  if (split.empty()) return;
  int n_val = 0;
  int n_test = 0;
  for (const auto& [subject, role] : split) {
    if (role == SplitRole::kValidation) ++n_val;
    if (role == SplitRole::kTest) ++n_test;
  }
  if (n_val != 1 || n_test != 1) {
    throw SchemaError("split must assign exactly one validation and one test subject");
  }
}

namespace {

EegMatrix read_eeg_csv(const fs::path& path) {
  if (!fs::exists(path)) throw CorpusError("missing " + path.string());
  const std::string text = read_text_file(path);
  std::size_t pos = text.find('\n');
  const std::string_view header(text.data(), pos == std::string::npos ? text.size() : pos);
  const auto names = csv::split_line(header);
  if (names.size() != static_cast<std::size_t>(kEegChannels)) {
    throw SchemaError(path.string() + ": expected " + std::to_string(kEegChannels) +
                      " columns, found " + std::to_string(names.size()));
  }
  const auto& standard = ChannelMap::standard();
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c] != standard.name(c)) {
      throw SchemaError(path.string() + ": column " + std::to_string(c) + " is '" +
                        std::string(names[c]) + "', expected '" + standard.name(c) + "'");
    }
  }

  std::vector<double> values;
  values.reserve(text.size() / 6);
  std::size_t rows = 0;
  std::size_t start = pos == std::string::npos ? text.size() : pos + 1;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      const auto fields = csv::split_line(line);
      if (fields.size() != names.size()) {
        throw SchemaError(path.string() + ": row " + std::to_string(rows + 1) + " has " +
                          std::to_string(fields.size()) + " columns");
      }
      for (auto f : fields) values.push_back(csv::parse_number(f, path.string()));
      ++rows;
    }
    start = end + 1;
  }
  EegMatrix eeg(kEegChannels, static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    for (int c = 0; c < kEegChannels; ++c) {
      eeg(c, static_cast<Eigen::Index>(r)) = values[r * kEegChannels + static_cast<std::size_t>(c)];
    }
  }
  return eeg;
}

void write_eeg_csv(const fs::path& path, const EegMatrix& eeg) {
  std::string out;
  out.reserve(static_cast<std::size_t>(eeg.size()) * 9 + 256);
  const auto& names = ChannelMap::standard().names();
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c) out += ',';
    out += names[c];
  }
  out += '\n';
  for (Eigen::Index s = 0; s < eeg.cols(); ++s) {
    for (Eigen::Index c = 0; c < eeg.rows(); ++c) {
      if (c) out += ',';
      csv::append_number(out, eeg(c, s));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace

RecordingSession load_session(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw CorpusError("session directory not found: " + dir.string());
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw CorpusError("missing " + meta_path.string());

  RecordingSession s;
  try {
    const json meta = json::parse(read_text_file(meta_path));
    s.session_id = meta.at("session_id").get<std::string>();
    s.subject_id = meta.at("subject_id").get<std::string>();
    s.sentence_id = meta.at("sentence_id").get<int>();
    s.transcript = meta.at("transcript").get<std::string>();
  } catch (const json::exception& e) {
    throw SchemaError(meta_path.string() + ": " + e.what());
  }
  if (!is_valid_transcript(s.transcript)) {
    throw SchemaError(meta_path.string() + ": illegal transcript '" + s.transcript + "'");
  }
  s.eeg = read_eeg_csv(dir / "eeg.csv");
  const fs::path wav_path = dir / "audio.wav";
  if (!fs::exists(wav_path)) throw CorpusError("missing " + wav_path.string());
  s.audio = read_wav(wav_path);
  s.validate();
  return s;
}

void save_session(const RecordingSession& session, const fs::path& dir) {
  session.validate();
  fs::create_directories(dir);
  write_eeg_csv(dir / "eeg.csv", session.eeg);
  write_wav(dir / "audio.wav", session.audio);
  json meta;
  meta["session_id"] = session.session_id;
  meta["subject_id"] = session.subject_id;
  meta["sentence_id"] = session.sentence_id;
  meta["transcript"] = session.transcript;
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

CorpusManifest read_manifest(const fs::path& root) {
  const fs::path path = root / "manifest.json";
  if (!fs::exists(path)) throw CorpusError("missing " + path.string());
  CorpusManifest m;
  m.root = root;
  try {
    const json j = json::parse(read_text_file(path));
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.path = e.at("path").get<std::string>();
      entry.subject_id = e.at("subject_id").get<std::string>();
      entry.sentence_id = e.at("sentence_id").get<int>();
      entry.transcript = e.at("transcript").get<std::string>();
      m.entries.push_back(std::move(entry));
    }
    if (j.contains("split")) {
      for (const auto& [subject, role] : j.at("split").items()) {
        m.split[subject] = parse_split_role(role.get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const CorpusManifest& manifest) {
  json j;
  j["schema_version"] = 1;
  j["seed"] = manifest.seed;
  j["entries"] = json::array();
  for (const auto& e : manifest.entries) {
    j["entries"].push_back({{"path", e.path.generic_string()},
                            {"subject_id", e.subject_id},
                            {"sentence_id", e.sentence_id},
                            {"transcript", e.transcript}});
  }
  json split = json::object();
  for (const auto& [subject, role] : manifest.split) split[subject] = std::string(to_string(role));
  j["split"] = split;
  write_text_file(manifest.root / "manifest.json", j.dump(2) + "\n");
}

CorpusManifest split_by_subject(const CorpusManifest& manifest, int n_train) {
  const auto subjects = manifest.subjects();
  if (n_train < 1) throw ArgumentError("n_train must be at least 1");
  if (subjects.size() < static_cast<std::size_t>(n_train) + 2) {
    throw ArgumentError("split needs " + std::to_string(n_train + 2) + " subjects, corpus has " +
                        std::to_string(subjects.size()));
  }
  CorpusManifest out = manifest;
  out.split.clear();
  for (int i = 0; i < n_train; ++i) out.split[subjects[static_cast<std::size_t>(i)]] = SplitRole::kTrain;
  out.split[subjects[static_cast<std::size_t>(n_train)]] = SplitRole::kValidation;
  out.split[subjects[static_cast<std::size_t>(n_train) + 1]] = SplitRole::kTest;
  return out;
}

}  // namespace neurasr::io
