#include "neurasr/metrics.hpp"

#include <cstdio>

#include "neurasr/csv.hpp"
#include "neurasr/error.hpp"
#include "neurasr/signal_io.hpp"

namespace neurasr::metrics {

nlohmann::json ErrorReport::to_json() const {
  return {{"substitutions", substitutions}, {"insertions", insertions}, {"deletions", deletions},
          {"reference_length", reference_length}, {"rate", rate}};
}

namespace {

void check_corpus(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
  if (refs.size() != hyps.size()) {
    throw ArgumentError("reference and hypothesis counts differ (" + std::to_string(refs.size()) + " vs " +
                        std::to_string(hyps.size()) + ")");
  }
  if (refs.empty()) throw ArgumentError("empty reference corpus");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].empty()) throw ArgumentError("empty reference at line " + std::to_string(i + 1));
  }
}

void accumulate(ErrorReport& report, const EditResult& e, std::size_t ref_len) {
  report.substitutions += e.substitutions;
  report.insertions += e.insertions;
  report.deletions += e.deletions;
  report.reference_length += static_cast<long>(ref_len);
}

void finish(ErrorReport& report) {
  if (report.reference_length == 0) throw ArgumentError("empty reference corpus");
  report.rate = 100.0 * static_cast<double>(report.errors()) / static_cast<double>(report.reference_length);
}

}  // namespace

ErrorReport wer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
  check_corpus(refs, hyps);
  ErrorReport report;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto r = io::split_words(refs[i]);
    const auto h = io::split_words(hyps[i]);
    accumulate(report, edit_distance<std::string>(r, h), r.size());
  }
  finish(report);
  return report;
}

ErrorReport cer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
  check_corpus(refs, hyps);
  ErrorReport report;
  for (std::size_t i = 0; i < refs.size(); ++i) accumulate(report, edit_distance(refs[i], hyps[i]), refs[i].size());
  finish(report);
  return report;
}

std::string_view to_string(Metric metric) { return metric == Metric::kWer ? "wer" : "cer"; }

Metric parse_metric(std::string_view text) {
  if (text == "wer" || text == "WER") return Metric::kWer;
  if (text == "cer" || text == "CER") return Metric::kCer;
  throw ArgumentError("unknown metric '" + std::string(text) + "' (expected wer or cer)");
}

ErrorReport evaluate(Metric metric, const std::vector<std::string>& refs, const std::vector<std::string>& hyps) {
  return metric == Metric::kWer ? wer(refs, hyps) : cer(refs, hyps);
}

std::string format_table(const std::vector<std::pair<std::string, ErrorReport>>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %6s %6s %6s %8s %8s\n", "name", "sub", "ins", "del", "ref_len", "rate");
  out += line;
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof(line), "%-24s %6ld %6ld %6ld %8ld %8s\n", name.c_str(), r.substitutions,
                  r.insertions, r.deletions, r.reference_length, csv::format_fixed(r.rate, 2).c_str());
    out += line;
  }
  return out;
}

}  // namespace neurasr::metrics
