#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace entpost;
using namespace entpost::testing;

namespace {

PreparedBlock prepare(BitPair bits, const Codebook& cb, double eps, std::uint64_t seed) {
  Rng r(seed);
  return alice_prepare(bits, cb, NoiseModel(eps), r);
}

Codebook codebook64(std::uint64_t seed) {
  Rng r(seed);
  return generate_codebook(64, 16, r);
}

}  // namespace

TEST(Config, ToleranceMustSeparate) {
  ProtocolConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.violation_tolerance = 0.25;  // ceiling at e = 0 is exactly 0.25
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.noise = NoiseModel(0.05);
  EXPECT_NO_THROW(cfg.validate());
  cfg.violation_tolerance = 0.3;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.violation_tolerance = -0.1;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.violation_tolerance = 0.0;
  cfg.confidence_target = 1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.confidence_target = 0.5;
  cfg.n = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Prepare, TruePairsAntiCorrelated) {
  const Codebook cb = codebook64(1);
  const auto b = prepare({0, 0}, cb, 0.0, 2);
  EXPECT_EQ(b.entry, 0u);
  for (std::size_t k = 0; k < cb.n; ++k) EXPECT_NE(b.bob[k], b.sonai[b.pairing.map(k)]);
}

TEST(Prepare, OneZeroIsLastEntry) {
  const auto b = prepare({1, 0}, paper_codebook(), 0.0, 3);
  EXPECT_EQ(b.entry, 3u);
  EXPECT_EQ(b.pairing.one_based(), kMap10);
}

TEST(Prepare, NoisyTruePairRate) {
  const Codebook cb = [] {
    Rng r(4);
    return generate_codebook(256, 16, r);
  }();
  std::size_t anti = 0, total = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto b = prepare({1, 1}, cb, 0.05, 100 + s);
    for (std::size_t k = 0; k < cb.n; ++k) anti += b.bob[k] != b.sonai[b.pairing.map(k)];
    total += cb.n;
  }
  EXPECT_NEAR(static_cast<double>(anti) / total, 0.905, 0.01);
}

TEST(Prepare, RejectsInvalidCodebook) {
  Rng r(1);
  EXPECT_THROW(alice_prepare({0, 0}, paper_codebook_as_printed(), NoiseModel(), r), ValidationError);
}

TEST(Measure, VerbatimAndIdempotent) {
  const auto b = prepare({0, 1}, paper_codebook(), 0.0, 5);
  EXPECT_EQ(measure_all(Party::Bob, b), b.bob);
  EXPECT_EQ(measure_all(Party::Bob, b), measure_all(Party::Bob, b));
  const auto bob = measure_all(Party::Bob, b);
  const auto sonai = measure_all(Party::Sonai, b);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NE(bob[k], sonai[b.pairing.map(k)]);
}

TEST(Schedule, FirstRevealAndExhaustion) {
  const auto b = prepare({0, 0}, paper_codebook(), 0.0, 6);
  RevealSchedule s(Party::Bob, b.bob);
  const auto e = s.reveal_next(7);
  ASSERT_TRUE(e);
  EXPECT_EQ(e->party, Party::Bob);
  EXPECT_EQ(e->position, 0u);
  EXPECT_EQ(e->outcome, b.bob[0]);
  EXPECT_EQ(e->round, 7u);
  for (int i = 1; i < 8; ++i) ASSERT_TRUE(s.reveal_next(7 + i));
  EXPECT_TRUE(s.exhausted());
  EXPECT_FALSE(s.reveal_next(99));
}

TEST(Schedule, AlternationBalanced) {
  const auto b = prepare({0, 0}, paper_codebook(), 0.0, 6);
  Transcript t;
  for (const auto& e : full_transcript(b)) {
    t.append(e);
    const auto diff = static_cast<long>(t.count(Party::Bob)) - static_cast<long>(t.count(Party::Sonai));
    EXPECT_LE(std::labs(diff), 1);
  }
}

TEST(Transcript, RejectsDuplicatesAndRewinds) {
  Transcript t;
  t.append({Party::Bob, 0, SpinOutcome::Plus, 1});
  EXPECT_THROW(t.append({Party::Bob, 0, SpinOutcome::Plus, 2}), ProtocolViolation);
  EXPECT_THROW(t.append({Party::Sonai, 0, SpinOutcome::Plus, 1}), ProtocolViolation);
  EXPECT_NO_THROW(t.append({Party::Sonai, 0, SpinOutcome::Plus, 2}));
}

TEST(Candidates, TrueEntryNeverViolated) {
  const Codebook cb = codebook64(7);
  const ProtocolConfig cfg = noiseless_config(64);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto b = prepare({1, 0}, cb, 0.0, s);
    const auto events = full_transcript(b);
    for (Party p : {Party::Bob, Party::Sonai}) {
      ReceiverView v(p, measure_all(p, b), cb, cfg);
      for (const auto& e : events) {
        v.update_candidates(e);
        EXPECT_EQ(v.candidates()[3].violations, 0u);
      }
      EXPECT_EQ(v.candidates()[3].checks_completed, 64u);
    }
  }
}

TEST(Candidates, UnequalMismatchedCheckKills) {
  // Truth 00, candidate 11; Bob position 1 (0-based 0) is mismatched.
  const Codebook cb = paper_codebook();
  const ProtocolConfig cfg = noiseless_config(8);
  for (std::uint64_t mask = 0; mask < 256; ++mask) {
    const auto b = block_from_mask(cb, mask);
    // Sonai checks Bob position 0 against her particle at map_11(0).
    const std::uint32_t sonai_pos = cb.entries[1].pairing.map(0);
    ReceiverView v(Party::Sonai, b.sonai, cb, cfg);
    v.update_candidates({Party::Bob, 0, b.bob[0], 1});
    const bool unequal_pairs = b.sonai[sonai_pos] == b.bob[0];
    EXPECT_EQ(v.candidates()[1].violations, unequal_pairs ? 1u : 0u);
    EXPECT_EQ(v.candidates()[1].alive, !unequal_pairs);
  }
}

TEST(Candidates, OwnRevealsIgnored) {
  const auto b = prepare({0, 0}, paper_codebook(), 0.0, 8);
  ReceiverView v(Party::Bob, b.bob, paper_codebook(), noiseless_config(8));
  v.update_candidates({Party::Bob, 0, b.bob[0], 1});
  EXPECT_EQ(v.events_seen(), 0u);
  EXPECT_EQ(v.candidates()[0].checks_completed, 0u);
}

TEST(Candidates, MalformedRevealsRaise) {
  const auto b = prepare({0, 0}, paper_codebook(), 0.0, 8);
  ReceiverView v(Party::Bob, b.bob, paper_codebook(), noiseless_config(8));
  EXPECT_THROW(v.update_candidates({Party::Sonai, 8, SpinOutcome::Plus, 1}), ProtocolViolation);
  v.update_candidates({Party::Sonai, 2, b.sonai[2], 1});
  EXPECT_THROW(v.update_candidates({Party::Sonai, 2, b.sonai[2], 3}), ProtocolViolation);
}

TEST(Candidates, PaperWrongEntrySurvivesOneInSixteen) {
  EXPECT_EQ(surviving_preparations(paper_codebook()), 16u);
}

TEST(SurvivalLogprob, NoChecksIsZero) {
  const auto b = prepare({0, 0}, paper_codebook(), 0.0, 9);
  ReceiverView v(Party::Bob, b.bob, paper_codebook(), noiseless_config(8));
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(v.survival_logprob(c, 0), 0.0);
}

TEST(SurvivalLogprob, FullTranscriptIsMinusDistance) {
  const Codebook cb = paper_codebook();
  const ProtocolConfig cfg = noiseless_config(8);
  int checked = 0;
  for (std::uint64_t mask = 0; mask < 256; ++mask) {
    const auto b = block_from_mask(cb, mask);
    for (Party p : {Party::Bob, Party::Sonai}) {
      const auto v = replay_view(p, measure_all(p, b), cb, cfg, full_transcript(b));
      if (!v.candidates()[1].alive) {
        EXPECT_TRUE(std::isinf(v.survival_logprob(1, 0)));
        continue;
      }
      EXPECT_EQ(v.survival_logprob(1, 0), -4.0);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 32);
}

TEST(SurvivalLogprob, SingleMismatchedCheck) {
  const Codebook cb = paper_codebook();
  const ProtocolConfig cfg = noiseless_config(8);
  int passes = 0;
  for (std::uint64_t mask = 0; mask < 4; ++mask) {
    // The check pairs Bob's label A with Sonai's label B; only those two vary.
    const auto b = block_from_mask(cb, mask);
    ReceiverView v(Party::Sonai, b.sonai, cb, cfg);
    v.update_candidates({Party::Bob, 0, b.bob[0], 1});
    if (v.candidates()[1].alive) {
      ++passes;
      EXPECT_EQ(v.survival_logprob(1, 0), -1.0);
    }
  }
  EXPECT_EQ(passes, 2);
}

// Oracle: for a prefix of the transcript, the fraction of all 2^8
// preparations that pass exactly the checks completed so far must equal
// 2^survival_logprob for every preparation under which the candidate lives.
TEST(SurvivalLogprob, PartialTranscriptsMatchEnumeration) {
  const Codebook cb = paper_codebook();
  const ProtocolConfig cfg = noiseless_config(8);
  Rng r(10);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t truth = r.below(4);
    std::size_t cand = r.below(4);
    if (cand == truth) cand = (cand + 1) % 4;
    Codebook swapped = cb;
    std::swap(swapped.entries[0], swapped.entries[truth]);
    if (cand == 0) cand = truth;
    const Party who = r.coin() ? Party::Bob : Party::Sonai;
    const std::size_t prefix = r.below(17);

    std::size_t passing = 0;
    std::vector<double> logs;
    for (std::uint64_t mask = 0; mask < 256; ++mask) {
      const auto b = block_from_mask(swapped, mask);
      auto events = full_transcript(b);
      events.resize(prefix);
      const auto v = replay_view(who, measure_all(who, b), swapped, cfg, events);
      if (v.candidates()[cand].alive) {
        ++passing;
        logs.push_back(v.survival_logprob(cand, 0));
      }
    }
    ASSERT_FALSE(logs.empty());
    for (double l : logs) EXPECT_DOUBLE_EQ(l, std::log2(static_cast<double>(passing) / 256.0));
  }
}

TEST(Decode, HonestOneZero) {
  const Codebook cb = paper_codebook();
  const ProtocolConfig cfg = noiseless_config(8);
  // Pick a preparation under which every wrong entry dies.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto b = prepare({1, 0}, cb, 0.0, seed);
    const auto events = full_transcript(b);
    const auto v = replay_view(Party::Bob, b.bob, cb, cfg, events);
    const auto r = v.decode();
    if (r.status != DecodeStatus::Decoded) continue;
    EXPECT_EQ(r.bits, (BitPair{1, 0}));
    EXPECT_EQ(r.confidence, 1.0);
    return;
  }
  FAIL() << "no unambiguous preparation found";
}

TEST(Decode, TamperedTranscriptAborts) {
  const Codebook cb = paper_codebook();
  const auto b = prepare({0, 0}, cb, 0.0, 11);
  auto events = full_transcript(b);
  for (auto& e : events) e.outcome = neg(e.outcome);
  const auto r = replay_view(Party::Bob, b.bob, cb, noiseless_config(8), events).decode();
  EXPECT_EQ(r.status, DecodeStatus::Abort);
  EXPECT_EQ(r.abort_reason, AbortReason::NoConsistentEntry);
}

TEST(Decode, LargeCodebookConfidence) {
  const Codebook cb = codebook64(12);
  ProtocolConfig cfg = noiseless_config(64);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto b = prepare({0, 0}, cb, 0.0, s);
    const auto r = replay_view(Party::Sonai, b.sonai, cb, cfg, full_transcript(b)).decode();
    EXPECT_EQ(r.status, DecodeStatus::Decoded);
    EXPECT_EQ(r.bits, (BitPair{0, 0}));
    EXPECT_GE(r.confidence, 1.0 - 3 * std::exp2(-16.0));
  }
}

TEST(Decode, PrefixIsUndecidedWithPartialConfidence) {
  const Codebook cb = codebook64(13);
  const auto b = prepare({0, 1}, cb, 0.0, 14);
  auto events = full_transcript(b);
  events.resize(6);
  const auto r = replay_view(Party::Bob, b.bob, cb, noiseless_config(64), events).decode();
  EXPECT_EQ(r.status, DecodeStatus::Undecided);
  EXPECT_GT(r.confidence, 0.0);
  EXPECT_LT(r.confidence, 0.99);
}

TEST(Decode, NoisyDecodeIsHeuristic) {
  const Codebook cb = [] {
    Rng r(15);
    return generate_codebook(256, 16, r);
  }();
  ProtocolConfig cfg;
  cfg.n = 256;
  cfg.noise = NoiseModel(0.05);
  cfg.violation_tolerance = 0.25;
  const auto b = prepare({1, 1}, cb, 0.05, 16);
  const auto r = replay_view(Party::Bob, b.bob, cb, cfg, full_transcript(b)).decode();
  EXPECT_TRUE(r.heuristic);
  EXPECT_EQ(r.status, DecodeStatus::Decoded);
  EXPECT_EQ(r.bits, (BitPair{1, 1}));
}

TEST(Candidates, ResetMatchesFreshView) {
  const Codebook cb = codebook64(17);
  const ProtocolConfig cfg = noiseless_config(64);
  const auto first = prepare({0, 0}, cb, 0.0, 18);
  const auto second = prepare({1, 1}, cb, 0.0, 19);
  ReceiverView reused(Party::Sonai, first.sonai, cb, cfg);
  for (const auto& e : full_transcript(first)) reused.update_candidates(e);
  reused.reset(second.sonai);
  EXPECT_EQ(reused.events_seen(), 0u);
  const auto fresh = replay_view(Party::Sonai, second.sonai, cb, cfg, full_transcript(second));
  for (const auto& e : full_transcript(second)) reused.update_candidates(e);
  EXPECT_EQ(reused.candidates(), fresh.candidates());
  EXPECT_TRUE(reused.decode().same_outcome(fresh.decode()));
  EXPECT_THROW(reused.reset(std::vector<SpinOutcome>(3)), ValidationError);
}
