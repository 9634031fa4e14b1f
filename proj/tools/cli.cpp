#include "cli.hpp"

#include <CLI11.hpp>

#include <optional>
#include <ostream>
#include <sstream>

#include "neurasr/acoustic_features.hpp"
#include "neurasr/csv.hpp"
#include "neurasr/dimred.hpp"
#include "neurasr/eeg_features.hpp"
#include "neurasr/error.hpp"
#include "neurasr/experiment.hpp"
#include "neurasr/files.hpp"
#include "neurasr/metrics.hpp"
#include "neurasr/preprocess.hpp"
#include "neurasr/random.hpp"
#include "neurasr/signal_io.hpp"

namespace neurasr::cli {

namespace fs = std::filesystem;

namespace {

struct SynthArgs {
  std::string out = "corpus";
  io::SynthOptions options;
  int train_subjects = 2;
};

struct PreprocessArgs {
  std::string session;
  std::string out;
};

struct FeatureArgs {
  std::string session;
  std::string source = "EEG";
  std::string out;
  std::vector<std::string> channels;
  std::string kpca;
};

struct KpcaArgs {
  std::string corpus;
  std::string out;
  std::string variance;
  int components = 30;
  int max_frames = 2000;
  int sentences = 3;
  int train_subjects = 2;
  std::uint64_t seed = 7;
};

struct RunArgs {
  std::string config;
  std::string run_dir;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::string ref;
  std::string hyp;
  std::string metric = "wer";
  bool json = false;
};

struct PlotArgs {
  std::string results = "results";
  std::string out = "plots";
};

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

FeatureSequence session_features(const FeatureArgs& a) {
  const FeatureSource source = parse_feature_source(a.source);
  const io::RecordingSession session = io::load_session(a.session);
  FeatureSequence eeg;
  FeatureSequence audio;
  if (source != FeatureSource::kMfcc) {
    const auto selection = a.channels.empty() ? features::all_channels()
                                              : features::select_channels(io::ChannelMap::standard(), a.channels);
    eeg = features::extract_eeg_features(dsp::preprocess_session(session), selection);
    if (!a.kpca.empty()) eeg = kpca::build_final_eeg_features(eeg, kpca::load_model(a.kpca));
  }
  if (source != FeatureSource::kEeg) {
    audio = features::add_deltas(features::mfcc(std::span<const std::int16_t>(session.audio)));
  }
  if (source == FeatureSource::kEeg) return eeg;
  if (source == FeatureSource::kMfcc) return audio;
  const auto [x, y] = features::align_lengths(eeg, audio);
  return features::fuse(x, y);
}

kpca::KpcaModel fit_corpus_kpca(const KpcaArgs& a) {
  const auto manifest = io::split_by_subject(io::read_manifest(a.corpus), a.train_subjects);
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index rows = 0;
  for (const auto& e : manifest.entries_for(io::SplitRole::kTrain)) {
    if (e.sentence_id > a.sentences) continue;
    const auto session = dsp::preprocess_session(io::load_session(manifest.session_path(e)));
    parts.push_back(features::extract_eeg_features(session, features::all_channels()).frames);
    rows += parts.back().rows();
  }
  if (parts.empty()) throw ConfigError("no training sessions selected");
  Eigen::MatrixXd stacked(rows, parts.front().cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    stacked.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  kpca::KpcaOptions options;
  options.n_components = a.components;
  options.standardize = true;
  options.max_frames = a.max_frames;
  options.subsample_seed = Rng::mix(a.seed, 0x6b706361);
  return kpca::kpca_fit(stacked, options);
}

void print_result(std::ostream& out, const experiment::ExperimentResult& r) {
  out << r.directory.generic_string() << "\n"
      << metrics::to_string(r.metric) << " " << csv::format_fixed(r.report.rate, 2) << "\n";
}

std::string read_table(const fs::path& path) { return read_text_file(path); }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"EEG and audio speech recognition experiments", "neurasr"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Write a synthetic EEG + audio corpus");
  synth_cmd->add_option("--out", synth.out, "Corpus directory")->capture_default_str();
  synth_cmd->add_option("--seed", synth.options.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--sentences", synth.options.n_sentences, "Number of sentences (1-30)")->capture_default_str();
  synth_cmd->add_option("--subjects", synth.options.n_subjects, "Number of subjects")->capture_default_str();
  synth_cmd->add_option("--repeats", synth.options.repeats, "Repetitions per sentence and subject")
      ->capture_default_str();
  synth_cmd->add_option("--train-subjects", synth.train_subjects, "Subjects assigned to the training split")
      ->capture_default_str();

  PreprocessArgs pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "Filter one session's EEG (band-pass + notch)");
  pre_cmd->add_option("--session", pre.session, "Session directory")->required();
  pre_cmd->add_option("--out", pre.out, "Output session directory")->required();

  FeatureArgs feat;
  auto* feat_cmd = app.add_subcommand("features", "Extract a feature CSV from one session");
  feat_cmd->add_option("--session", feat.session, "Session directory")->required();
  feat_cmd->add_option("--source", feat.source, "EEG, MFCC or FUSED")->capture_default_str();
  feat_cmd->add_option("--out", feat.out, "Output CSV")->required();
  feat_cmd->add_option("--channels", feat.channels, "EEG channel subset")->delimiter(',');
  feat_cmd->add_option("--kpca", feat.kpca, "KPCA model JSON; reduces EEG features and appends deltas");

  KpcaArgs kp;
  auto* kpca_cmd = app.add_subcommand("kpca", "Fit kernel PCA on the training split of a corpus");
  kpca_cmd->add_option("--corpus", kp.corpus, "Corpus directory")->required();
  kpca_cmd->add_option("--out", kp.out, "Model JSON")->required();
  kpca_cmd->add_option("--variance", kp.variance, "Explained-variance CSV");
  kpca_cmd->add_option("--components", kp.components, "Components kept")->capture_default_str();
  kpca_cmd->add_option("--max-frames", kp.max_frames, "Frames subsampled for the fit")->capture_default_str();
  kpca_cmd->add_option("--sentences", kp.sentences, "Use sentences 1..N")->capture_default_str();
  kpca_cmd->add_option("--train-subjects", kp.train_subjects, "Subjects in the training split")
      ->capture_default_str();
  kpca_cmd->add_option("--seed", kp.seed, "Subsampling seed")->capture_default_str();

  RunArgs train;
  auto* train_cmd = app.add_subcommand("train", "Run one experiment and keep its checkpoint");
  train_cmd->add_option("--config", train.config, "Experiment config JSON")->required();
  train_cmd->add_option("--seed", train.seed, "Override the config seed");

  RunArgs dec;
  auto* decode_cmd = app.add_subcommand("decode", "Decode the evaluation split with a trained run");
  decode_cmd->add_option("--config", dec.config, "Experiment config JSON")->required();
  decode_cmd->add_option("--run", dec.run_dir, "Result directory written by train")->required();
  decode_cmd->add_option("--seed", dec.seed, "Override the config seed");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score hypothesis lines against reference lines");
  eval_cmd->add_option("--ref", ev.ref, "Reference file, one sentence per line")->required();
  eval_cmd->add_option("--hyp", ev.hyp, "Hypothesis file, one sentence per line")->required();
  eval_cmd->add_option("--metric", ev.metric, "wer or cer")->capture_default_str();
  eval_cmd->add_flag("--json", ev.json, "Print the full report as JSON");

  RunArgs grid;
  auto* grid_cmd = app.add_subcommand("run-grid", "Run every cell of an experiment grid");
  grid_cmd->add_option("--config", grid.config, "Grid config JSON")->required();
  grid_cmd->add_option("--seed", grid.seed, "Override the base seed");

  PlotArgs plots;
  auto* plots_cmd = app.add_subcommand("export-plots", "Collect loss curves and tables from result directories");
  plots_cmd->add_option("--results", plots.results, "Results root")->capture_default_str();
  plots_cmd->add_option("--out", plots.out, "Output directory")->capture_default_str();

  std::vector<char*> argv;
  std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"neurasr"} : args;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*synth_cmd) {
      auto manifest = io::synthesize_corpus(synth.out, synth.options);
      manifest = io::split_by_subject(manifest, synth.train_subjects);
      io::write_manifest(manifest);
      out << "wrote " << manifest.entries.size() << " sessions to " << fs::path(synth.out).generic_string() << "\n";
    } else if (*pre_cmd) {
      io::save_session(dsp::preprocess_session(io::load_session(pre.session)), pre.out);
    } else if (*feat_cmd) {
      const FeatureSequence seq = session_features(feat);
      write_feature_csv(seq, feat.out);
      out << seq.length() << " frames x " << seq.dims() << " dims\n";
    } else if (*kpca_cmd) {
      const auto model = fit_corpus_kpca(kp);
      kpca::save_model(model, kp.out);
      if (!kp.variance.empty()) kpca::write_variance_csv(model, kp.variance);
      out << "fitted on " << model.training_frames.rows() << " frames\n";
    } else if (*train_cmd) {
      auto cfg = experiment::ExperimentConfig::load(train.config);
      if (train.seed) cfg.seed = *train.seed;
      cfg.save_checkpoint = true;
      print_result(out, experiment::run_experiment(cfg));
    } else if (*decode_cmd) {
      auto cfg = experiment::ExperimentConfig::load(dec.config);
      if (dec.seed) cfg.seed = *dec.seed;
      print_result(out, experiment::decode_experiment(cfg, dec.run_dir));
    } else if (*eval_cmd) {
      const auto report =
          metrics::evaluate(metrics::parse_metric(ev.metric), read_lines(ev.ref), read_lines(ev.hyp));
      if (ev.json) {
        out << report.to_json().dump(2) << "\n";
      } else {
        out << csv::format_fixed(report.rate, 2) << "\n";
      }
    } else if (*grid_cmd) {
      auto spec = experiment::GridSpec::load(grid.config);
      if (grid.seed) spec.base.seed = *grid.seed;
      const auto result = experiment::run_grid(spec);
      for (const auto& cell : result.cells) {
        out << cell.hash << " " << to_string(cell.config.feature_source) << " "
            << experiment::to_string(cell.config.model) << " n=" << cell.config.n_sentences << " "
            << metrics::to_string(cell.metric) << " " << csv::format_fixed(cell.report.rate, 2) << "\n";
      }
      for (const auto& table : result.tables) out << "\n" << table.generic_string() << "\n" << read_table(table);
    } else if (*plots_cmd) {
      for (const auto& path : experiment::export_plots(plots.results, plots.out)) out << path.generic_string() << "\n";
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace neurasr::cli
