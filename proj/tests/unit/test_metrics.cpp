#include <doctest.h>

#include <random>

#include "neurasr/error.hpp"
#include "neurasr/metrics.hpp"
#include "oracles.hpp"

using namespace neurasr;
using namespace neurasr::metrics;

namespace {

std::vector<int> random_seq(std::mt19937_64& rng, std::size_t max_len, int alphabet) {
  std::vector<int> s(rng() % (max_len + 1));
  for (auto& v : s) v = static_cast<int>(rng() % static_cast<unsigned>(alphabet));
  return s;
}

EditResult ed(const std::vector<int>& a, const std::vector<int>& b) {
  return edit_distance<int>(std::span<const int>(a), std::span<const int>(b));
}

std::string spaced(const std::vector<int>& s) {
  std::string out;
  for (int v : s) {
    if (!out.empty()) out += ' ';
    out += static_cast<char>('a' + v);
  }
  return out;
}

}  // namespace

TEST_CASE("edit distance examples") {
  CHECK(edit_distance("the cat sat", "the cat sat").distance == 0);
  const auto r = ed({0, 1, 2}, {0, 9, 2});
  CHECK(r.distance == 1);
  CHECK(r.substitutions == 1);
  const auto ins = edit_distance("ab", "abc");
  CHECK(ins.insertions == 1);
  CHECK(ins.distance == 1);
  const auto del = edit_distance("abc", "ac");
  CHECK(del.deletions == 1);
  // substitution preferred when it ties with an insertion/deletion pair
  const auto tie = edit_distance("a", "b");
  CHECK(tie.substitutions == 1);
  CHECK(tie.insertions + tie.deletions == 0);
}

TEST_CASE("property: distance equals the recursive oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_seq(rng, 6, 3);
    const auto b = random_seq(rng, 6, 3);
    const auto r = ed(a, b);
    CHECK(r.distance == oracle::recursive_distance(a, b));
    CHECK(r.distance == r.substitutions + r.insertions + r.deletions);
    CHECK(r.distance <= static_cast<long>(std::max(a.size(), b.size())));
    CHECK(r.insertions - r.deletions == static_cast<long>(b.size()) - static_cast<long>(a.size()));
  }
}

TEST_CASE("property: metric axioms") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_seq(rng, 8, 4);
    const auto b = random_seq(rng, 8, 4);
    const auto c = random_seq(rng, 8, 4);
    CHECK(ed(a, b).distance == ed(b, a).distance);
    CHECK(ed(a, c).distance <= ed(a, b).distance + ed(b, c).distance);
    CHECK(ed(a, a).distance == 0);
  }
}

TEST_CASE("wer") {
  const std::vector<std::string> refs = {"the cat sat", "a dog", "on the mat"};
  CHECK(wer(refs, refs).rate == 0.0);
  const auto empty = wer(refs, {"", "", ""});
  CHECK(empty.rate == 100.0);
  CHECK(empty.deletions == 8);
  CHECK(empty.reference_length == 8);
  const auto pooled = wer({"a b c d", "e"}, {"a b c d", "x"});
  CHECK(pooled.rate == doctest::Approx(20.0));
  const auto more = wer({"a"}, {"b c d"});
  CHECK(more.rate > 100.0);
  CHECK_THROWS_AS(wer({"a", ""}, {"a", "b"}), ArgumentError);
  CHECK_THROWS_AS(wer({"a"}, {"a", "b"}), ArgumentError);
}

TEST_CASE("cer") {
  CHECK(cer({"the cat"}, {"the cat"}).rate == 0.0);
  const auto r = cer({"ab"}, {"abc"});
  CHECK(r.rate == doctest::Approx(50.0));
  CHECK(r.insertions == 1);
  CHECK(cer({"a b"}, {"ab"}).deletions == 1);
}

TEST_CASE("property: cer reduces to wer on single-character words") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_seq(rng, 6, 4);
    if (a.empty()) a.push_back(0);
    const auto b = random_seq(rng, 6, 4);
    std::string ra, hb;
    for (int v : a) ra += static_cast<char>('a' + v);
    for (int v : b) hb += static_cast<char>('a' + v);
    const auto w = wer({spaced(a)}, {spaced(b)});
    const auto c = cer({ra}, {hb});
    CHECK(w.errors() == c.errors());
    CHECK(w.rate == doctest::Approx(c.rate));
  }
}

TEST_CASE("reports") {
  CHECK(parse_metric("wer") == Metric::kWer);
  CHECK(parse_metric("CER") == Metric::kCer);
  CHECK_THROWS_AS(parse_metric("bleu"), ArgumentError);
  const auto r = evaluate(Metric::kWer, {"a b"}, {"a c"});
  const auto j = r.to_json();
  CHECK(j.at("substitutions") == 1);
  CHECK(j.at("rate").get<double>() == doctest::Approx(50.0));
  const auto table = format_table({{"run", r}});
  CHECK(table.find("run") != std::string::npos);
  CHECK(table.find("50.00") != std::string::npos);
}
