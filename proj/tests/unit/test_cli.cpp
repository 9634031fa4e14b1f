#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "neurasr/files.hpp"
#include "temp_dir.hpp"

using neurasr::read_text_file;
using neurasr::write_text_file;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "neurasr");
  std::ostringstream out, err;
  const int code = neurasr::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({"eval", "--bogus"}).code == 2);
  CHECK(run({"no-such-command"}).code == 2);
  CHECK(run({"eval"}).code == 2);
}

TEST_CASE("help exits cleanly") {
  const auto r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("synth-data") != std::string::npos);
  CHECK(run({"train", "--help"}).code == 0);
}

TEST_CASE("eval on identical files prints 0.00") {
  testing::TempDir tmp("cli_eval");
  write_text_file(tmp / "r.txt", "the cat sat\na dog\n");
  write_text_file(tmp / "h.txt", "the cat sat\na dog\n");
  const auto r = run({"eval", "--ref", (tmp / "r.txt").string(), "--hyp", (tmp / "h.txt").string(), "--metric", "wer"});
  CHECK(r.code == 0);
  CHECK(r.out == "0.00\n");

  write_text_file(tmp / "h.txt", "the cat\na dog\n");
  const auto j = run({"eval", "--ref", (tmp / "r.txt").string(), "--hyp", (tmp / "h.txt").string(), "--json"});
  CHECK(j.code == 0);
  CHECK(j.out.find("\"deletions\"") != std::string::npos);
  CHECK(j.out.find("20.0") != std::string::npos);
}

TEST_CASE("runtime errors exit with 1") {
  testing::TempDir tmp("cli_err");
  const auto r = run({"eval", "--ref", (tmp / "missing.txt").string(), "--hyp", (tmp / "missing.txt").string()});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("synth-data, preprocess and features") {
  testing::TempDir tmp("cli_synth");
  const auto corpus = tmp / "corpus";
  const auto r = run({"synth-data", "--out", corpus.string(), "--seed", "7", "--sentences", "3", "--subjects", "4",
                      "--repeats", "1"});
  CHECK(r.code == 0);
  CHECK(std::filesystem::exists(corpus / "manifest.json"));
  const std::string manifest = read_text_file(corpus / "manifest.json");
  CHECK(manifest.find("sub04") != std::string::npos);

  const auto session = corpus / "sessions" / "s01_sub01_r1";
  REQUIRE(std::filesystem::exists(session));
  CHECK(run({"preprocess", "--session", session.string(), "--out", (tmp / "clean").string()}).code == 0);
  CHECK(std::filesystem::exists(tmp / "clean" / "eeg.csv"));
  CHECK(run({"features", "--session", (tmp / "clean").string(), "--source", "EEG", "--channels", "T7,T8", "--out",
             (tmp / "f.csv").string()})
            .code == 0);
  const std::string header = read_text_file(tmp / "f.csv").substr(0, 6);
  CHECK(header == "T7.rms");
}
