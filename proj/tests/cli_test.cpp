#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "entpost/cli.hpp"
#include "support.hpp"

using namespace entpost;
using namespace entpost::testing;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool has(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

}  // namespace

TEST(Cli, RunOneZero) {
  TempDir d;
  const auto r = cli({"run", "--n", "64", "--bits", "10", "--seed", "7", "--out", d.file("t.jsonl")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(has(r.out, "seed: 7"));
  EXPECT_TRUE(has(r.out, "result: Bob=1, Sonai=0"));
}

TEST(Cli, RunWithheldTimesOut) {
  TempDir d;
  const auto r = cli({"run", "--n", "64", "--bits", "10", "--seed", "7", "--strategy-sonai", "withhold:0",
                      "--out", d.file("t.jsonl")});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(has(r.out, "reason=timeout"));
}

TEST(Cli, RunIsReproducible) {
  TempDir d;
  for (const char* name : {"a.jsonl", "b.jsonl"})
    ASSERT_EQ(cli({"run", "--bits", "01", "--seed", "123", "--noise", "0.02", "--out", d.file(name),
                   "--events", d.file(std::string(name) + ".log")})
                  .code,
              0);
  EXPECT_EQ(slurp(d.file("a.jsonl")), slurp(d.file("b.jsonl")));
  EXPECT_EQ(slurp(d.file("a.jsonl.log")), slurp(d.file("b.jsonl.log")));
  EXPECT_FALSE(slurp(d.file("a.jsonl.log")).empty());
}

TEST(Cli, SeedFallbacks) {
  TempDir d;
  ::setenv("ENTPOST_SEED", "99", 1);
  auto r = cli({"run", "--out", d.file("t.jsonl")});
  EXPECT_TRUE(has(r.out, "seed: 99\n"));
  ::setenv("ENTPOST_SEED", "nope", 1);
  EXPECT_EQ(cli({"run", "--out", d.file("t.jsonl")}).code, 2);
  ::unsetenv("ENTPOST_SEED");
  r = cli({"run", "--out", d.file("t.jsonl")});
  EXPECT_EQ(r.out.rfind("seed: ", 0), 0u);
}

TEST(Cli, UsageErrors) {
  TempDir d;
  const std::string out = d.file("t.jsonl");
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"run", "--bogus"}).code, 2);
  EXPECT_EQ(cli({"run", "--bits", "12", "--out", out}).code, 2);
  EXPECT_EQ(cli({"run", "--strategy-bob", "sneaky", "--out", out}).code, 2);
  EXPECT_EQ(cli({"run", "--noise", "0.7", "--out", out}).code, 2);
  EXPECT_EQ(cli({"run", "--delta", "0.3", "--out", out}).code, 2);
  EXPECT_EQ(cli({"run", "--policy-one-ahead", "0", "--out", out}).code, 2);
  EXPECT_EQ(cli({"run", "--n", "abc"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, IoErrors) {
  EXPECT_EQ(cli({"run", "--seed", "1", "--out", "/nonexistent-dir/t.jsonl"}).code, 3);
  EXPECT_EQ(cli({"replay", "/nonexistent-dir/t.jsonl"}).code, 3);
  EXPECT_EQ(cli({"codebook", "validate", "/nonexistent-dir/c.json"}).code, 3);
}

TEST(Cli, MessageMode) {
  TempDir d;
  const auto r = cli({"run", "--bob-msg", "1011", "--sonai-msg", "0110", "--seed", "3", "--out", d.file("m.jsonl")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(has(r.out, "result: Bob=1011, Sonai=0110"));
  const auto rep = cli({"replay", d.file("m.jsonl")});
  EXPECT_EQ(rep.code, 0);
  EXPECT_TRUE(has(rep.out, "block 3"));
  EXPECT_FALSE(has(rep.out, "MISMATCH"));
}

TEST(Cli, CodebookGenThenValidate) {
  TempDir d;
  EXPECT_EQ(cli({"codebook", "gen", "--n", "64", "--lambda", "16", "--seed", "1", "--out", d.file("cb.json")}).code, 0);
  const auto v = cli({"codebook", "validate", d.file("cb.json")});
  EXPECT_EQ(v.code, 0);
  EXPECT_TRUE(has(v.out, "ok"));
  // A generated codebook can be shared by a run.
  EXPECT_EQ(cli({"run", "--codebook", d.file("cb.json"), "--seed", "2", "--out", d.file("t.jsonl")}).code, 0);
}

TEST(Cli, ValidateMisprintedCodebook) {
  TempDir d;
  ASSERT_EQ(cli({"codebook", "gen", "--as-printed", "--out", d.file("bad.json")}).code, 0);
  const auto v = cli({"codebook", "validate", d.file("bad.json")});
  EXPECT_EQ(v.code, 1);
  EXPECT_TRUE(has(v.out, "duplicate {C, E} missing {F, G}"));
  EXPECT_EQ(cli({"run", "--codebook", d.file("bad.json"), "--seed", "1", "--out", d.file("t.jsonl")}).code, 2);
}

TEST(Cli, CodebookCapacity) {
  const auto r = cli({"codebook", "gen", "--n", "2", "--lambda", "4", "--seed", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(has(r.err, "hint:"));
}

TEST(Cli, PaperCodebookOnStdout) {
  const auto r = cli({"codebook", "gen", "--paper"});
  EXPECT_EQ(r.code, 0);
  const auto cb = load_codebook(r.out);
  EXPECT_EQ(cb.n, 8u);
  EXPECT_EQ(cb.lambda, 4u);
}

TEST(Cli, ReplayMatchesRun) {
  TempDir d;
  for (const char* strategy : {"honest", "withhold:5", "lie:0.3", "dump"}) {
    ASSERT_NE(cli({"run", "--seed", "11", "--strategy-sonai", strategy, "--out", d.file("t.jsonl")}).code, 2);
    const auto r = cli({"replay", d.file("t.jsonl")});
    EXPECT_NE(r.code, 3) << r.err;
    EXPECT_FALSE(has(r.out, "MISMATCH")) << strategy << "\n" << r.out;
    EXPECT_TRUE(has(r.out, "bob: ") && has(r.out, "[matches record]"));
  }
}

TEST(Cli, ReplayDuplicateLine) {
  TempDir d;
  ASSERT_EQ(cli({"run", "--seed", "12", "--out", d.file("t.jsonl")}).code, 0);
  std::istringstream in(slurp(d.file("t.jsonl")));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  auto dup = nlohmann::json::parse(lines[1]);
  dup["round"] = 500;
  lines.insert(lines.begin() + 4, dup.dump());
  std::ofstream out(d.file("dup.jsonl"));
  for (const auto& l : lines) out << l << '\n';
  out.close();
  const auto r = cli({"replay", d.file("dup.jsonl")});
  EXPECT_EQ(r.code, 3);
  EXPECT_TRUE(has(r.err, "protocol violation: line 5")) << r.err;
}

TEST(Cli, ReplayTruncated) {
  TempDir d;
  ASSERT_EQ(cli({"run", "--seed", "13", "--out", d.file("t.jsonl")}).code, 0);
  std::istringstream in(slurp(d.file("t.jsonl")));
  std::ofstream out(d.file("cut.jsonl"));
  std::string l;
  for (int i = 0; i < 3 && std::getline(in, l); ++i) out << l << '\n';
  out.close();
  const auto r = cli({"replay", d.file("cut.jsonl")});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(has(r.out, "undecided"));
  EXPECT_TRUE(has(r.out, "[no terminal record]"));
}

TEST(Cli, MonteCarloOutputs) {
  TempDir d;
  for (const char* w : {"1", "3"}) {
    const auto r = cli({"montecarlo", "--trials", "200", "--n", "32", "--lambda", "8", "--seed", "4",
                        "--workers", w, "--out", d.file(std::string("mc") + w)});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(has(r.out, "decode_success_rate: 1"));
  }
  EXPECT_EQ(slurp(d.file("mc1.csv")), slurp(d.file("mc3.csv")));
  EXPECT_EQ(slurp(d.file("mc1.json")), slurp(d.file("mc3.json")));
  const auto j = nlohmann::json::parse(slurp(d.file("mc1.json")));
  EXPECT_EQ(j["config"]["seed"], 4);
  EXPECT_EQ(j["trials"], 200);
}

TEST(Cli, MonteCarloSoundness) {
  TempDir d;
  const auto r = cli({"montecarlo", "--mode", "soundness", "--paper-codebook", "--truth", "00", "--candidate",
                      "11", "--trials", "4000", "--seed", "8", "--out", d.file("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(d.file("s.json")));
  EXPECT_NEAR(j["candidate_survival"]["rate"].get<double>(), 0.0625, 0.012);
  EXPECT_EQ(cli({"montecarlo", "--mode", "soundness", "--truth", "11", "--candidate", "11", "--out", d.file("x")}).code, 2);
  EXPECT_EQ(cli({"montecarlo", "--mode", "bogus", "--out", d.file("x")}).code, 2);
}
