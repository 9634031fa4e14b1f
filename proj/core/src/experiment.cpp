#include "neurasr/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>

#include "neurasr/acoustic_features.hpp"
#include "neurasr/attention.hpp"
#include "neurasr/csv.hpp"
#include "neurasr/ctc_model.hpp"
#include "neurasr/dimred.hpp"
#include "neurasr/eeg_features.hpp"
#include "neurasr/error.hpp"
#include "neurasr/files.hpp"
#include "neurasr/log.hpp"
#include "neurasr/preprocess.hpp"
#include "neurasr/random.hpp"

namespace neurasr::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(ModelKind kind) { return kind == ModelKind::kCtc ? "CTC" : "ATTENTION"; }

ModelKind parse_model_kind(std::string_view text) {
  std::string upper(text);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "CTC") return ModelKind::kCtc;
  if (upper == "ATTENTION") return ModelKind::kAttention;
  throw ConfigError("unknown model '" + std::string(text) + "' (expected CTC or ATTENTION)");
}

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return out;
}

bool uses_eeg(const ExperimentConfig& cfg) { return cfg.feature_source != FeatureSource::kMfcc; }
bool uses_audio(const ExperimentConfig& cfg) { return cfg.feature_source != FeatureSource::kEeg; }
bool uses_kpca(const ExperimentConfig& cfg) { return uses_eeg(cfg) && cfg.channel_subset.empty(); }

std::string subset_label(const std::vector<std::string>& subset) {
  if (subset.empty()) return "all";
  std::string out;
  for (const auto& s : subset) out += (out.empty() ? "" : "-") + s;
  return out;
}

}  // namespace

int ExperimentConfig::resolved_epochs() const {
  if (epochs > 0) return epochs;
  return model == ModelKind::kCtc ? 500 : 100;
}

fs::path ExperimentConfig::resolved_results_root() const {
  if (const char* env = std::getenv("NEURASR_RESULTS"); env && *env) return fs::path(env);
  return results_root;
}

void ExperimentConfig::validate() const {
  if (std::find(std::begin(kSentenceLadder), std::end(kSentenceLadder), n_sentences) == std::end(kSentenceLadder)) {
    throw ConfigError("n_sentences must be one of 3, 5, 7, 10, 15, 20 (got " + std::to_string(n_sentences) + ")");
  }
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (n_train_subjects < 1) throw ConfigError("n_train_subjects must be >= 1");
  if (kpca_components < 1) throw ConfigError("kpca_components must be >= 1");
  if (kpca_max_frames < kpca_components) throw ConfigError("kpca_max_frames must be >= kpca_components");
  if (!channel_subset.empty()) {
    if (feature_source == FeatureSource::kMfcc) throw ConfigError("channel_subset needs an EEG-based feature source");
    try {
      features::select_channels(io::ChannelMap::standard(), channel_subset);
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
  }
  if (corpus.empty()) throw ConfigError("corpus path is required");
}

json ExperimentConfig::to_json() const {
  return {{"schema_version", kConfigSchemaVersion},
          {"feature_source", std::string(neurasr::to_string(feature_source))},
          {"model", std::string(experiment::to_string(model))},
          {"n_sentences", n_sentences},
          {"channel_subset", channel_subset},
          {"seed", seed},
          {"epochs", epochs},
          {"lr", lr},
          {"beam_width", beam_width},
          {"max_len", max_len},
          {"hidden", hidden},
          {"n_train_subjects", n_train_subjects},
          {"eval_split", std::string(io::to_string(eval_split))},
          {"kpca_components", kpca_components},
          {"kpca_max_frames", kpca_max_frames},
          {"save_checkpoint", save_checkpoint},
          {"corpus", corpus.generic_string()},
          {"results_root", results_root.generic_string()}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  static const std::set<std::string> known = {
      "schema_version", "feature_source", "model", "n_sentences", "channel_subset", "seed", "epochs", "lr",
      "beam_width", "max_len", "hidden", "n_train_subjects", "eval_split", "kpca_components", "kpca_max_frames",
      "save_checkpoint", "corpus", "results_root"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    const int version = j.value("schema_version", kConfigSchemaVersion);
    if (version != kConfigSchemaVersion) {
      throw ConfigError("unsupported schema_version " + std::to_string(version));
    }
    if (j.contains("feature_source")) {
      try {
        c.feature_source = parse_feature_source(j.at("feature_source").get<std::string>());
      } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
      }
    }
    if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
    c.n_sentences = j.value("n_sentences", c.n_sentences);
    c.channel_subset = j.value("channel_subset", c.channel_subset);
    c.seed = j.value("seed", c.seed);
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.beam_width = j.value("beam_width", c.beam_width);
    c.max_len = j.value("max_len", c.max_len);
    c.hidden = j.value("hidden", c.hidden);
    c.n_train_subjects = j.value("n_train_subjects", c.n_train_subjects);
    if (j.contains("eval_split")) {
      try {
        c.eval_split = io::parse_split_role(j.at("eval_split").get<std::string>());
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    }
    c.kpca_components = j.value("kpca_components", c.kpca_components);
    c.kpca_max_frames = j.value("kpca_max_frames", c.kpca_max_frames);
    c.save_checkpoint = j.value("save_checkpoint", c.save_checkpoint);
    c.corpus = j.value("corpus", std::string());
    c.results_root = j.value("results_root", c.results_root.string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig c = from_json(j);
  // relative corpus paths resolve against the config file
  if (!c.corpus.empty() && c.corpus.is_relative()) c.corpus = path.parent_path() / c.corpus;
  return c;
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("corpus");
  j.erase("results_root");
  j.erase("save_checkpoint");
  return hex16(fnv1a(j.dump()));
}

FeatureDims expected_dims(const ExperimentConfig& cfg) {
  FeatureDims d;
  if (uses_eeg(cfg)) {
    const int channels = cfg.channel_subset.empty()
                             ? io::kEegChannels
                             : static_cast<int>(features::select_channels(io::ChannelMap::standard(),
                                                                          cfg.channel_subset).size());
    d.raw_eeg = features::kStatsPerChannel * channels;
    d.reduced_eeg = uses_kpca(cfg) ? cfg.kpca_components : 0;
    d.final_eeg = 3 * (uses_kpca(cfg) ? cfg.kpca_components : d.raw_eeg);
  }
  if (uses_audio(cfg)) d.mfcc = 3 * features::MfccConfig{}.n_ceps;
  d.input = d.final_eeg + d.mfcc;
  return d;
}

int count_unique_words(const io::CorpusManifest& manifest, int n_sentences) {
  std::set<std::string> words;
  for (const auto& e : manifest.entries) {
    if (e.sentence_id > n_sentences) continue;
    for (auto& w : io::split_words(e.transcript)) words.insert(std::move(w));
  }
  return static_cast<int>(words.size());
}

namespace {

struct Normalizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  void fit(const std::vector<Eigen::MatrixXd>& frames) {
    const Eigen::Index d = frames.front().cols();
    Eigen::Index n = 0;
    mean = Eigen::RowVectorXd::Zero(d);
    for (const auto& f : frames) {
      mean += f.colwise().sum();
      n += f.rows();
    }
    mean /= static_cast<double>(n);
    Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(d);
    for (const auto& f : frames) sq += (f.rowwise() - mean).array().square().colwise().sum().matrix();
    scale = (sq / static_cast<double>(n)).array().sqrt();
    for (Eigen::Index i = 0; i < d; ++i) {
      if (scale(i) < 1e-12) scale(i) = 1.0;
    }
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& f) const {
    return ((f.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  }

  json to_json() const {
    return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
            {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
  }

  static Normalizer from_json(const json& j) {
    Normalizer n;
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto s = j.at("scale").get<std::vector<double>>();
    if (m.size() != s.size()) throw SchemaError("normalizer mean/scale size mismatch");
    n.mean = Eigen::Map<const Eigen::RowVectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    n.scale = Eigen::Map<const Eigen::RowVectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    return n;
  }
};

struct Utterance {
  std::string session_id;
  std::string transcript;
  FeatureSequence eeg_raw;
  FeatureSequence mfcc;
  Eigen::MatrixXd input;
};

struct Corpus {
  io::CorpusManifest manifest;
  std::vector<io::ManifestEntry> train;
  std::vector<io::ManifestEntry> eval;
};

std::vector<io::ManifestEntry> select_sentences(std::vector<io::ManifestEntry> entries, int n_sentences) {
  std::erase_if(entries, [n_sentences](const io::ManifestEntry& e) { return e.sentence_id > n_sentences; });
  return entries;
}

Corpus open_corpus(const ExperimentConfig& cfg) {
  if (!fs::exists(cfg.corpus / "manifest.json")) {
    throw ConfigError("no corpus manifest at " + (cfg.corpus / "manifest.json").string());
  }
  Corpus c;
  try {
    c.manifest = io::split_by_subject(io::read_manifest(cfg.corpus), cfg.n_train_subjects);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  int max_sentence = 0;
  for (const auto& e : c.manifest.entries) max_sentence = std::max(max_sentence, e.sentence_id);
  if (max_sentence < cfg.n_sentences) {
    throw ConfigError("corpus has " + std::to_string(max_sentence) + " sentences, config asks for " +
                      std::to_string(cfg.n_sentences));
  }
  c.train = select_sentences(c.manifest.entries_for(io::SplitRole::kTrain), cfg.n_sentences);
  c.eval = select_sentences(c.manifest.entries_for(cfg.eval_split), cfg.n_sentences);
  if (c.train.empty()) throw ConfigError("training split is empty");
  if (c.eval.empty()) throw ConfigError(std::string(io::to_string(cfg.eval_split)) + " split is empty");
  return c;
}

Utterance load_utterance(const ExperimentConfig& cfg, const io::CorpusManifest& manifest,
                         const io::ManifestEntry& entry) {
  const io::RecordingSession session = io::load_session(manifest.session_path(entry));
  Utterance u;
  u.session_id = session.session_id;
  u.transcript = session.transcript;
  if (uses_eeg(cfg)) {
    const auto selection = cfg.channel_subset.empty()
                               ? features::all_channels()
                               : features::select_channels(io::ChannelMap::standard(), cfg.channel_subset);
    u.eeg_raw = features::extract_eeg_features(dsp::preprocess_session(session), selection);
  }
  if (uses_audio(cfg)) u.mfcc = features::add_deltas(features::mfcc(std::span<const std::int16_t>(session.audio)));
  return u;
}

FeatureSequence final_features(const ExperimentConfig& cfg, const Utterance& u, const kpca::KpcaModel* model) {
  FeatureSequence eeg;
  if (uses_eeg(cfg)) eeg = model ? kpca::build_final_eeg_features(u.eeg_raw, *model) : features::add_deltas(u.eeg_raw);
  switch (cfg.feature_source) {
    case FeatureSource::kEeg:
      return eeg;
    case FeatureSource::kMfcc:
      return u.mfcc;
    case FeatureSource::kFused: {
      const auto [a, b] = features::align_lengths(eeg, u.mfcc);
      return features::fuse(a, b);
    }
  }
  return eeg;
}

void check_dims(const FeatureDims& want, const FeatureDims& got, const std::string& where) {
  auto fail = [&](const char* what, int w, int g) {
    throw StateError("dimension contract violated (" + where + "): " + what + " is " + std::to_string(g) +
                     ", expected " + std::to_string(w));
  };
  if (got.raw_eeg != want.raw_eeg) fail("raw EEG dimension", want.raw_eeg, got.raw_eeg);
  if (got.reduced_eeg != want.reduced_eeg) fail("KPCA dimension", want.reduced_eeg, got.reduced_eeg);
  if (got.final_eeg != want.final_eeg) fail("final EEG dimension", want.final_eeg, got.final_eeg);
  if (got.mfcc != want.mfcc) fail("MFCC dimension", want.mfcc, got.mfcc);
  if (got.input != want.input) fail("input dimension", want.input, got.input);
}

struct Prepared {
  Corpus corpus;
  std::vector<Utterance> train;
  std::vector<Utterance> eval;
  std::optional<kpca::KpcaModel> kpca;
  Normalizer norm;
  FeatureDims dims;
  std::size_t train_frames = 0;
};

// Builds network inputs. With `fitted` set, its KPCA model and normalizer are
// reused instead of being fitted on the training split.
Prepared prepare(const ExperimentConfig& cfg, const Prepared* fitted, bool need_train) {
  Prepared p;
  p.corpus = open_corpus(cfg);
  const FeatureDims want = expected_dims(cfg);
  if (need_train) {
    for (const auto& e : p.corpus.train) p.train.push_back(load_utterance(cfg, p.corpus.manifest, e));
  }
  for (const auto& e : p.corpus.eval) p.eval.push_back(load_utterance(cfg, p.corpus.manifest, e));
  const Utterance& probe = need_train ? p.train.front() : p.eval.front();
  p.dims.raw_eeg = uses_eeg(cfg) ? static_cast<int>(probe.eeg_raw.dims()) : 0;
  p.dims.mfcc = uses_audio(cfg) ? static_cast<int>(probe.mfcc.dims()) : 0;

  if (fitted) {
    p.kpca = fitted->kpca;
  } else if (uses_kpca(cfg)) {
    Eigen::Index rows = 0;
    for (const auto& u : p.train) rows += u.eeg_raw.length();
    Eigen::MatrixXd stacked(rows, p.dims.raw_eeg);
    Eigen::Index at = 0;
    for (const auto& u : p.train) {
      stacked.middleRows(at, u.eeg_raw.length()) = u.eeg_raw.frames;
      at += u.eeg_raw.length();
    }
    kpca::KpcaOptions options;
    options.n_components = cfg.kpca_components;
    options.standardize = true;
    options.max_frames = cfg.kpca_max_frames;
    options.subsample_seed = Rng::mix(cfg.seed, 0x6b706361);
    log::info("fitting KPCA on ", std::min<Eigen::Index>(rows, cfg.kpca_max_frames), " of ", rows,
              " training frames");
    p.kpca = kpca::kpca_fit(stacked, options);
  }
  if (p.kpca) p.dims.reduced_eeg = p.kpca->n_components;

  std::vector<FeatureSequence> train_final;
  for (const auto& u : p.train) train_final.push_back(final_features(cfg, u, p.kpca ? &*p.kpca : nullptr));
  std::vector<FeatureSequence> eval_final;
  for (const auto& u : p.eval) eval_final.push_back(final_features(cfg, u, p.kpca ? &*p.kpca : nullptr));
  const FeatureSequence& probe_final = need_train ? train_final.front() : eval_final.front();
  p.dims.input = static_cast<int>(probe_final.dims());
  p.dims.final_eeg = uses_eeg(cfg) ? p.dims.input - p.dims.mfcc : 0;
  check_dims(want, p.dims, std::string(neurasr::to_string(cfg.feature_source)));

  if (fitted) {
    p.norm = fitted->norm;
  } else {
    std::vector<Eigen::MatrixXd> frames;
    for (const auto& f : train_final) frames.push_back(f.frames);
    p.norm.fit(frames);
  }
  if (p.norm.mean.size() != p.dims.input) throw StateError("input normalizer does not match the feature dimension");
  for (std::size_t i = 0; i < p.train.size(); ++i) {
    p.train[i].input = p.norm.apply(train_final[i].frames);
    p.train_frames += static_cast<std::size_t>(train_final[i].length());
  }
  for (std::size_t i = 0; i < p.eval.size(); ++i) p.eval[i].input = p.norm.apply(eval_final[i].frames);
  return p;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

template <class Model>
std::vector<double> train_model(Model& model, const std::vector<Utterance>& train,
                                const std::vector<std::vector<int>>& targets, int epochs, std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0x73687566));
  std::vector<double> losses;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t i : shuffled(train.size(), rng)) total += model.train_step(train[i].input, targets[i]);
    losses.push_back(total / static_cast<double>(train.size()));
    if (epoch == 1 || epoch % 10 == 0 || epoch == epochs) log::info("epoch ", epoch, " loss ", losses.back());
  }
  return losses;
}

std::string loss_csv(const std::vector<double>& losses) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out += std::to_string(i + 1) + ",";
    csv::append_number(out, losses[i]);
    out += '\n';
  }
  return out;
}

json build_metrics_json(const ExperimentResult& r) {
  const auto& c = r.config;
  json j;
  j["schema_version"] = 1;
  j["hash"] = r.hash;
  j["feature_source"] = std::string(neurasr::to_string(c.feature_source));
  j["model"] = std::string(to_string(c.model));
  j["n_sentences"] = c.n_sentences;
  j["n_unique_words"] = r.n_unique_words;
  for (std::size_t i = 0; i < std::size(kSentenceLadder); ++i) {
    if (kSentenceLadder[i] == c.n_sentences) j["ladder_unique_words"] = kLadderUniqueWords[i];
  }
  j["channel_subset"] = c.channel_subset;
  j["seed"] = c.seed;
  j["epochs"] = c.resolved_epochs();
  j["eval_split"] = std::string(io::to_string(c.eval_split));
  j["dims"] = {{"raw_eeg", r.dims.raw_eeg}, {"reduced_eeg", r.dims.reduced_eeg}, {"final_eeg", r.dims.final_eeg},
               {"mfcc", r.dims.mfcc}, {"input", r.dims.input}};
  j["n_train"] = r.n_train;
  j["n_eval"] = r.n_eval;
  j["train_frames"] = r.train_frames;
  j["kpca_fit_frames"] = r.kpca_fit_frames;
  j["metric"] = std::string(metrics::to_string(r.metric));
  j["rate"] = r.report.rate;
  j["report"] = r.report.to_json();
  j["final_loss"] = r.epoch_losses.empty() ? json(nullptr) : json(r.epoch_losses.back());
  if (c.model == ModelKind::kAttention) {
    j["attention_rows"] = r.alpha_rows;
    j["attention_row_max_error"] = r.alpha_row_error;
  }
  j["transcriptions"] = json::array();
  for (const auto& t : r.transcriptions) {
    j["transcriptions"].push_back({{"session", t.session_id}, {"reference", t.reference}, {"hypothesis", t.hypothesis}});
  }
  return j;
}

void score(ExperimentResult& r) {
  std::vector<std::string> refs, hyps;
  for (const auto& t : r.transcriptions) {
    refs.push_back(t.reference);
    hyps.push_back(t.hypothesis);
  }
  r.metric = r.config.model == ModelKind::kCtc ? metrics::Metric::kCer : metrics::Metric::kWer;
  r.report = metrics::evaluate(r.metric, refs, hyps);
}

std::vector<std::vector<int>> ctc_targets(const std::vector<Utterance>& utts) {
  std::vector<std::vector<int>> out;
  for (const auto& u : utts) {
    auto labels = ctc::TokenSet::characters().encode(u.transcript);
    if (u.input.rows() < ctc::min_path_length(labels)) {
      throw ConfigError("session " + u.session_id + " has " + std::to_string(u.input.rows()) +
                        " frames, too few for its transcript under CTC");
    }
    out.push_back(std::move(labels));
  }
  return out;
}

std::vector<std::string> transcripts_of(const std::vector<Utterance>& utts) {
  std::vector<std::string> out;
  for (const auto& u : utts) out.push_back(u.transcript);
  return out;
}

struct Decoding {
  std::vector<Transcription> transcriptions;
  std::optional<seq2seq::Hypothesis> attention_example;
};

Decoding decode_ctc(ctc::CtcModel& model, const std::vector<Utterance>& eval, int width) {
  Decoding d;
  for (const auto& u : eval) {
    const auto best = model.decode(u.input, width);
    d.transcriptions.push_back({u.session_id, u.transcript, ctc::TokenSet::characters().decode(best.labels)});
  }
  return d;
}

Decoding decode_attention(seq2seq::Seq2SeqModel& model, const std::vector<Utterance>& eval, int width, int max_len) {
  Decoding d;
  for (const auto& u : eval) {
    auto hyp = model.beam_decode(u.input, width, max_len);
    d.transcriptions.push_back({u.session_id, u.transcript, model.vocabulary().decode(hyp.tokens)});
    if (!d.attention_example && !hyp.tokens.empty()) d.attention_example = std::move(hyp);
  }
  return d;
}

ExperimentResult start_result(const ExperimentConfig& cfg, const Prepared& p) {
  ExperimentResult r;
  r.config = cfg;
  r.hash = cfg.hash();
  r.dims = p.dims;
  r.n_unique_words = count_unique_words(p.corpus.manifest, cfg.n_sentences);
  r.n_train = p.train.size();
  r.n_eval = p.eval.size();
  r.train_frames = p.train_frames;
  r.kpca_fit_frames = p.kpca ? static_cast<std::size_t>(p.kpca->training_frames.rows()) : 0;
  return r;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Prepared p = prepare(cfg, nullptr, true);
  ExperimentResult r = start_result(cfg, p);
  if (p.kpca && r.kpca_fit_frames > p.train_frames) throw StateError("KPCA saw more frames than the training split has");
  r.directory = cfg.resolved_results_root() / r.hash;
  fs::create_directories(r.directory);
  log::info("experiment ", r.hash, ": ", neurasr::to_string(cfg.feature_source), "/", to_string(cfg.model),
            " input dim ", p.dims.input, ", ", p.train.size(), " training utterances");

  const int epochs = cfg.resolved_epochs();
  Decoding decoded;
  if (cfg.model == ModelKind::kCtc) {
    const auto targets = ctc_targets(p.train);
    ctc::CtcModel model({p.dims.input, cfg.hidden, cfg.lr, 5.0, cfg.seed});
    r.epoch_losses = train_model(model, p.train, targets, epochs, cfg.seed);
    decoded = decode_ctc(model, p.eval, cfg.beam_width);
    if (cfg.save_checkpoint) model.save(r.directory / "model");
  } else {
    seq2seq::Seq2SeqConfig mc;
    mc.input_dim = p.dims.input;
    mc.hidden = cfg.hidden;
    mc.lr = cfg.lr;
    mc.seed = cfg.seed;
    seq2seq::Seq2SeqModel model(mc, seq2seq::WordVocabulary::build(transcripts_of(p.train)));
    std::vector<std::vector<int>> targets;
    for (const auto& u : p.train) targets.push_back(model.vocabulary().encode(u.transcript));
    r.epoch_losses = train_model(model, p.train, targets, epochs, cfg.seed);
    decoded = decode_attention(model, p.eval, cfg.beam_width, cfg.max_len);
    r.alpha_row_error = model.alpha_row_error();
    r.alpha_rows = model.alpha_rows_seen();
    if (r.alpha_row_error > 1e-9) throw StateError("attention weights do not sum to one");
    if (cfg.save_checkpoint) model.save(r.directory / "model");
  }
  r.transcriptions = std::move(decoded.transcriptions);
  score(r);
  r.metrics_json = build_metrics_json(r);

  write_text_file(r.directory / "config.json", cfg.to_json().dump(2) + "\n");
  write_text_file(r.directory / "loss.csv", loss_csv(r.epoch_losses));
  write_text_file(r.directory / "metrics.json", r.metrics_json.dump(2) + "\n");
  if (decoded.attention_example) seq2seq::export_attention(*decoded.attention_example, r.directory / "attention.csv");
  if (p.kpca) kpca::write_variance_csv(*p.kpca, r.directory / "variance.csv");
  if (cfg.save_checkpoint) {
    if (p.kpca) kpca::save_model(*p.kpca, r.directory / "kpca.json");
    write_text_file(r.directory / "input_norm.json", p.norm.to_json().dump() + "\n");
  }
  log::info("experiment ", r.hash, ": ", metrics::to_string(r.metric), " ", csv::format_fixed(r.report.rate, 2));
  return r;
}

ExperimentResult decode_experiment(const ExperimentConfig& cfg, const fs::path& directory) {
  cfg.validate();
  if (!fs::exists(directory / "model.json")) {
    throw ConfigError("no checkpoint in " + directory.string() + " (run train with save_checkpoint)");
  }
  Prepared fitted;
  if (uses_kpca(cfg)) fitted.kpca = kpca::load_model(directory / "kpca.json");
  try {
    fitted.norm = Normalizer::from_json(json::parse(read_text_file(directory / "input_norm.json")));
  } catch (const json::exception& e) {
    throw SchemaError((directory / "input_norm.json").string() + ": " + e.what());
  }
  const Prepared p = prepare(cfg, &fitted, false);
  ExperimentResult r = start_result(cfg, p);
  r.directory = directory;

  Decoding decoded;
  if (cfg.model == ModelKind::kCtc) {
    ctc::CtcModel model({p.dims.input, cfg.hidden, cfg.lr, 5.0, cfg.seed});
    model.load(directory / "model");
    decoded = decode_ctc(model, p.eval, cfg.beam_width);
  } else {
    json header;
    try {
      header = json::parse(read_text_file(directory / "model.json"));
    } catch (const json::exception& e) {
      throw SchemaError((directory / "model.json").string() + ": " + e.what());
    }
    seq2seq::Seq2SeqConfig mc;
    mc.input_dim = p.dims.input;
    mc.hidden = cfg.hidden;
    mc.seed = cfg.seed;
    seq2seq::Seq2SeqModel model(
        mc, seq2seq::WordVocabulary(header.at("extra").at("vocabulary").get<std::vector<std::string>>()));
    model.load(directory / "model");
    decoded = decode_attention(model, p.eval, cfg.beam_width, cfg.max_len);
  }
  r.transcriptions = std::move(decoded.transcriptions);
  score(r);
  std::string refs, hyps;
  for (const auto& t : r.transcriptions) {
    refs += t.reference + "\n";
    hyps += t.hypothesis + "\n";
  }
  write_text_file(directory / "ref.txt", refs);
  write_text_file(directory / "hyp.txt", hyps);
  return r;
}

GridSpec GridSpec::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("grid config must be a JSON object");
  if (j.value("schema_version", kConfigSchemaVersion) != kConfigSchemaVersion) {
    throw ConfigError("unsupported grid schema_version");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "schema_version" && key != "base" && key != "axes") throw ConfigError("unknown grid key '" + key + "'");
  }
  GridSpec g;
  g.base = ExperimentConfig::from_json(j.value("base", json::object()));
  const json axes = j.value("axes", json::object());
  try {
    for (const auto& [key, value] : axes.items()) {
      if (key == "feature_source") {
        for (const auto& v : value) g.feature_sources.push_back(parse_feature_source(v.get<std::string>()));
      } else if (key == "model") {
        for (const auto& v : value) g.models.push_back(parse_model_kind(v.get<std::string>()));
      } else if (key == "n_sentences") {
        g.n_sentences = value.get<std::vector<int>>();
      } else if (key == "channel_subset") {
        g.channel_subsets = value.get<std::vector<std::vector<std::string>>>();
      } else {
        throw ConfigError("unknown grid axis '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad grid axis: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  if (g.feature_sources.empty()) g.feature_sources.push_back(g.base.feature_source);
  if (g.models.empty()) g.models.push_back(g.base.model);
  if (g.n_sentences.empty()) g.n_sentences.push_back(g.base.n_sentences);
  if (g.channel_subsets.empty()) g.channel_subsets.push_back(g.base.channel_subset);
  return g;
}

GridSpec GridSpec::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  GridSpec g = from_json(j);
  if (!g.base.corpus.empty() && g.base.corpus.is_relative()) g.base.corpus = path.parent_path() / g.base.corpus;
  return g;
}

std::vector<ExperimentConfig> GridSpec::expand() const {
  std::vector<ExperimentConfig> out;
  for (ModelKind model : models) {
    for (const auto& subset : channel_subsets) {
      for (int n : n_sentences) {
        for (FeatureSource source : feature_sources) {
          if (!subset.empty() && source == FeatureSource::kMfcc) continue;
          ExperimentConfig c = base;
          c.model = model;
          c.channel_subset = subset;
          c.n_sentences = n;
          c.feature_source = source;
          out.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

GridResult run_grid(const GridSpec& grid) {
  const auto cells = grid.expand();
  for (const auto& c : cells) c.validate();  // fail before any training
  GridResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    log::info("grid cell ", i + 1, "/", cells.size());
    result.cells.push_back(run_experiment(cells[i]));
  }

  // (model, subset) -> n_sentences -> source -> rate
  std::map<std::pair<std::string, std::string>, std::map<int, std::map<FeatureSource, const ExperimentResult*>>> tables;
  for (const auto& r : result.cells) {
    tables[{std::string(to_string(r.config.model)), subset_label(r.config.channel_subset)}][r.config.n_sentences]
          [r.config.feature_source] = &r;
  }
  const fs::path root = grid.base.resolved_results_root();
  for (const auto& [key, rows] : tables) {
    std::vector<FeatureSource> sources;
    for (FeatureSource s : grid.feature_sources) {
      if (key.second != "all" && s == FeatureSource::kMfcc) continue;
      sources.push_back(s);
    }
    std::string out = "n_sentences,n_unique_words";
    for (FeatureSource s : sources) out += "," + std::string(neurasr::to_string(s));
    out += '\n';
    for (const auto& [n, by_source] : rows) {
      out += std::to_string(n) + "," + std::to_string(by_source.begin()->second->n_unique_words);
      for (FeatureSource s : sources) {
        const auto it = by_source.find(s);
        out += "," + (it == by_source.end() ? std::string() : csv::format_fixed(it->second->report.rate, 2));
      }
      out += '\n';
    }
    const fs::path path = root / ("table_" + key.first + "_" + key.second + ".csv");
    write_text_file(path, out);
    result.tables.push_back(path);
  }
  return result;
}

std::vector<fs::path> export_plots(const fs::path& results, const fs::path& out) {
  if (!fs::is_directory(results)) throw IoError("results directory not found: " + results.string());
  std::vector<fs::path> runs;
  for (const auto& entry : fs::directory_iterator(results)) {
    if (entry.is_directory() && fs::exists(entry.path() / "metrics.json")) runs.push_back(entry.path());
  }
  std::sort(runs.begin(), runs.end());
  std::vector<fs::path> written;
  std::string curves = "run,epoch,loss\n";
  std::string summary = "run,feature_source,model,channel_subset,n_sentences,n_unique_words,metric,rate\n";
  for (const auto& dir : runs) {
    const std::string run = dir.filename().string();
    json m;
    try {
      m = json::parse(read_text_file(dir / "metrics.json"));
    } catch (const json::exception& e) {
      throw SchemaError((dir / "metrics.json").string() + ": " + e.what());
    }
    summary += run + "," + m.value("feature_source", "") + "," + m.value("model", "") + "," +
               subset_label(m.value("channel_subset", std::vector<std::string>{})) + "," +
               std::to_string(m.value("n_sentences", 0)) + "," + std::to_string(m.value("n_unique_words", 0)) + "," +
               m.value("metric", "") + "," + csv::format_fixed(m.value("rate", 0.0), 2) + "\n";
    if (fs::exists(dir / "loss.csv")) {
      const std::string text = read_text_file(dir / "loss.csv");
      std::size_t pos = text.find('\n');
      while (pos != std::string::npos && pos + 1 < text.size()) {
        const std::size_t next = text.find('\n', pos + 1);
        curves += run + "," + text.substr(pos + 1, next - pos - 1) + "\n";
        pos = next;
      }
    }
    for (const char* name : {"attention.csv", "variance.csv"}) {
      if (!fs::exists(dir / name)) continue;
      const fs::path target = out / (run + "_" + name);
      write_text_file(target, read_text_file(dir / name));
      written.push_back(target);
    }
  }
  write_text_file(out / "loss_curves.csv", curves);
  write_text_file(out / "summary.csv", summary);
  written.insert(written.begin(), {out / "loss_curves.csv", out / "summary.csv"});
  return written;
}

}  // namespace neurasr::experiment
