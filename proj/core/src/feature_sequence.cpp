#include "neurasr/feature_sequence.hpp"

#include <cctype>

#include "neurasr/csv.hpp"
#include "neurasr/error.hpp"
#include "neurasr/files.hpp"

namespace neurasr {

std::string_view to_string(FeatureSource source) {
  switch (source) {
    case FeatureSource::kEeg:
      return "EEG";
    case FeatureSource::kMfcc:
      return "MFCC";
    case FeatureSource::kFused:
      return "FUSED";
  }
  return "EEG";
}

FeatureSource parse_feature_source(std::string_view text) {
  std::string upper(text);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "EEG") return FeatureSource::kEeg;
  if (upper == "MFCC") return FeatureSource::kMfcc;
  if (upper == "FUSED") return FeatureSource::kFused;
  throw ArgumentError("unknown feature source '" + std::string(text) + "'");
}

void FeatureSequence::validate() const {
  if (frames.rows() < 1) throw InputError("feature sequence has no frames");
  if (static_cast<Eigen::Index>(dim_labels.size()) != frames.cols()) {
    throw InputError("feature sequence has " + std::to_string(frames.cols()) + " dims but " +
                     std::to_string(dim_labels.size()) + " labels");
  }
  if (!frames.allFinite()) throw InputError("feature sequence contains non-finite values");
}

void write_feature_csv(const FeatureSequence& seq, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t i = 0; i < seq.dim_labels.size(); ++i) {
    if (i) out += ',';
    out += seq.dim_labels[i];
  }
  out += '\n';
  for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
    for (Eigen::Index d = 0; d < seq.frames.cols(); ++d) {
      if (d) out += ',';
      csv::append_number(out, seq.frames(t, d));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

FeatureSequence read_feature_csv(const std::filesystem::path& path, FeatureSource source) {
  const std::string text = read_text_file(path);
  FeatureSequence seq;
  seq.source = source;
  std::vector<std::vector<double>> rows;
  std::size_t start = 0;
  bool header = true;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto fields = csv::split_line(line);
    if (header) {
      for (auto f : fields) seq.dim_labels.emplace_back(f);
      header = false;
      continue;
    }
    if (fields.size() != seq.dim_labels.size()) throw SchemaError(path.string() + ": ragged row");
    std::vector<double>& row = rows.emplace_back();
    for (auto f : fields) row.push_back(csv::parse_number(f, path.string()));
  }
  seq.frames.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(seq.dim_labels.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t d = 0; d < rows[t].size(); ++d) {
      seq.frames(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = rows[t][d];
    }
  }
  return seq;
}

}  // namespace neurasr
