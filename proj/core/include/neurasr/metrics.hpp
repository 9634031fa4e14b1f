#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace neurasr::metrics {

struct EditResult {
  long distance = 0;
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;
};

/// Unit-cost Levenshtein distance. The backtrace prefers substitution (or
/// match), then insertion, then deletion when several moves are optimal.
template <class T>
EditResult edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<long> d((n + 1) * (m + 1));
  auto at = [m, &d](std::size_t i, std::size_t j) -> long& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const long diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i, j - 1) + 1, at(i - 1, j) + 1});
    }
  }
  EditResult r;
  r.distance = at(n, m);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++r.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++r.insertions;
      --j;
    } else {
      ++r.deletions;
      --i;
    }
  }
  return r;
}

inline EditResult edit_distance(std::string_view ref, std::string_view hyp) {
  return edit_distance<char>(std::span<const char>(ref.data(), ref.size()),
                             std::span<const char>(hyp.data(), hyp.size()));
}

struct ErrorReport {
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;
  long reference_length = 0;
  double rate = 0.0;  // percent

  long errors() const { return substitutions + insertions + deletions; }
  nlohmann::json to_json() const;
};

/// Corpus-level word error rate: pooled edits over pooled reference words.
ErrorReport wer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps);
/// Character error rate over the raw strings, spaces included.
ErrorReport cer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps);

enum class Metric { kWer, kCer };
std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);
ErrorReport evaluate(Metric metric, const std::vector<std::string>& refs, const std::vector<std::string>& hyps);

/// Fixed-width text table, one line per named report.
std::string format_table(const std::vector<std::pair<std::string, ErrorReport>>& rows);

}  // namespace neurasr::metrics
