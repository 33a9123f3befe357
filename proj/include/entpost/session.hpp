#pragma once

// End-to-end sessions: fresh codebook, Alice's preparation and one World run
// per bit pair, plus multi-block message framing.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entpost/codebook.hpp"
#include "entpost/netsim.hpp"
#include "entpost/protocol.hpp"
#include "entpost/rng.hpp"

namespace entpost {

// Substreams of a session seed.
inline constexpr std::uint64_t kCodebookStream = 1;
inline constexpr std::uint64_t kPrepareStream = 2;
inline constexpr std::uint64_t kStrategyStream = 3;

struct SessionOptions {
  Strategy bob = Honest{};
  Strategy sonai = Honest{};
  FairnessPolicy policy;
  /// Shared codebook to reuse; a fresh one is generated from the seed if unset.
  std::optional<Codebook> codebook;
  std::size_t link_delay = 1;
};

struct SessionResult {
  Codebook codebook;
  PreparedBlock block;
  Transcript transcript;
  DecodeResult bob;
  DecodeResult sonai;
  std::uint64_t ticks = 0;
  std::vector<LogEntry> log;
  bool fifo_ok = true;
  std::size_t bob_sent = 0;
  std::size_t sonai_sent = 0;
  /// Candidate states of both receivers when the session ended.
  std::vector<CandidateState> bob_candidates;
  std::vector<CandidateState> sonai_candidates;

  const DecodeResult& result(Party p) const { return p == Party::Bob ? bob : sonai; }
  bool both_decoded() const { return bob.decoded() && sonai.decoded(); }
};

/// Upper bound on ticks for any strategy mix: every reveal costs at most two
/// ticks, plus delivery, a full timeout and the closing announcements.
inline std::uint64_t session_tick_budget(std::size_t n, const FairnessPolicy& policy) {
  return 4 * static_cast<std::uint64_t>(n) + policy.timeout_ticks + 8;
}

inline Codebook session_codebook(const ProtocolConfig& cfg, const SessionOptions& options) {
  if (options.codebook) {
    if (options.codebook->n != cfg.n)
      throw ValidationError("codebook length " + std::to_string(options.codebook->n) +
                            " does not match n = " + std::to_string(cfg.n));
    return *options.codebook;
  }
  Rng rng = Rng(cfg.seed).split(kCodebookStream);
  return generate_codebook(cfg.n, cfg.lambda, rng);
}

inline PreparedBlock session_block(const ProtocolConfig& cfg, BitPair bits, const Codebook& cb) {
  Rng rng = Rng(cfg.seed).split(kPrepareStream);
  return alice_prepare(bits, cb, cfg.noise, rng);
}

/// Runs an already prepared block through the network harness.
inline SessionResult run_prepared(const ProtocolConfig& cfg, Codebook cb, PreparedBlock block,
                                  const SessionOptions& options) {
  World world(cfg, cb, block, options.bob, options.sonai, options.policy,
              derive_seed(cfg.seed, kStrategyStream), options.link_delay);
  world.run(session_tick_budget(cfg.n, options.policy) * options.link_delay);

  SessionResult r;
  r.codebook = std::move(cb);
  r.block = std::move(block);
  r.transcript = world.transcript();
  r.bob = world.node(Party::Bob).result;
  r.sonai = world.node(Party::Sonai).result;
  r.transcript.add_terminal({Party::Bob, r.bob});
  r.transcript.add_terminal({Party::Sonai, r.sonai});
  r.ticks = world.tick();
  r.log = world.log();
  r.fifo_ok = world.fifo_ok();
  r.bob_sent = world.node(Party::Bob).sent;
  r.sonai_sent = world.node(Party::Sonai).sent;
  if (const auto& v = world.node(Party::Bob).view) r.bob_candidates = v->candidates();
  if (const auto& v = world.node(Party::Sonai).view) r.sonai_candidates = v->candidates();
  return r;
}

/// prepare -> deliver -> measure -> alternating reveal -> per-party decode.
inline SessionResult run_session(const ProtocolConfig& cfg, BitPair bits,
                                 const SessionOptions& options = {}) {
  cfg.validate();
  Codebook cb = session_codebook(cfg, options);
  PreparedBlock block = session_block(cfg, bits, cb);
  return run_prepared(cfg, std::move(cb), std::move(block), options);
}

/// Recomputes each receiver's DecodeResult from a recorded session: private
/// outcomes are regenerated from the seed, then the first `events_seen`
/// counterpart reveals of the transcript are fed to a fresh decoder.
/// Transport-level abort reasons (timeout, fairness) are not derivable from
/// the reveals and are carried over from the terminal record.
inline DecodeResult replay_receiver(Party who, const ProtocolConfig& cfg, const Codebook& cb,
                                    BitPair bits, const std::vector<RevealEvent>& events,
                                    const std::optional<DecodeResult>& recorded) {
  const PreparedBlock block = session_block(cfg, bits, cb);
  const std::size_t limit =
      recorded ? recorded->events_seen : std::numeric_limits<std::size_t>::max();
  DecodeResult r = replay_view(who, measure_all(who, block), cb, cfg, events, limit).decode();
  if (recorded && recorded->status == DecodeStatus::Abort && recorded->abort_reason &&
      *recorded->abort_reason != AbortReason::NoConsistentEntry) {
    r.status = DecodeStatus::Abort;
    r.abort_reason = recorded->abort_reason;
  }
  return r;
}

struct BlockPlan {
  ProtocolConfig config;  // seed is the block's session seed
  BitPair bits;
  Codebook codebook;
  PreparedBlock block;
};

struct MessageFrame {
  std::vector<std::uint8_t> bob_bits;
  std::vector<std::uint8_t> sonai_bits;
  std::vector<BlockPlan> blocks;
};

inline std::vector<std::uint8_t> parse_bit_string(std::string_view s) {
  std::vector<std::uint8_t> out;
  for (char c : s) {
    if (c != '0' && c != '1') throw ValidationError("message must be a string of 0/1");
    out.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return out;
}

/// Session seed of block b of a message sent under `seed`.
inline std::uint64_t block_seed(std::uint64_t seed, std::size_t block) {
  return derive_seed(seed, 0x10000 + block);
}

/// One session per bit pair; block b encodes (bob_msg[b], sonai_msg[b]).
inline MessageFrame encode_message(std::string_view bob_msg, std::string_view sonai_msg,
                                   const ProtocolConfig& cfg,
                                   const std::optional<Codebook>& shared_codebook = std::nullopt) {
  cfg.validate();
  MessageFrame frame;
  frame.bob_bits = parse_bit_string(bob_msg);
  frame.sonai_bits = parse_bit_string(sonai_msg);
  if (frame.bob_bits.size() != frame.sonai_bits.size())
    throw ValidationError("messages differ in length");
  if (frame.bob_bits.empty()) throw ValidationError("messages are empty");
  SessionOptions codebook_only;
  codebook_only.codebook = shared_codebook;
  for (std::size_t b = 0; b < frame.bob_bits.size(); ++b) {
    BlockPlan plan;
    plan.config = cfg;
    plan.config.seed = block_seed(cfg.seed, b);
    plan.bits = BitPair{frame.bob_bits[b], frame.sonai_bits[b]};
    plan.codebook = session_codebook(plan.config, codebook_only);
    plan.block = session_block(plan.config, plan.bits, plan.codebook);
    frame.blocks.push_back(std::move(plan));
  }
  return frame;
}

inline std::vector<SessionResult> run_message(const MessageFrame& frame, const SessionOptions& options) {
  std::vector<SessionResult> out;
  for (const auto& plan : frame.blocks)
    out.push_back(run_prepared(plan.config, plan.codebook, plan.block, options));
  return out;
}

struct MessageDecode {
  bool ok = false;
  std::string bob_msg;
  std::string sonai_msg;
  std::optional<std::size_t> failed_block;
  std::optional<AbortReason> abort_reason;
};

/// Concatenates per-block decodes. Any block that is not Decoded by both
/// receivers with agreeing bits fails the message.
inline MessageDecode decode_message(std::span<const SessionResult> results) {
  MessageDecode m;
  for (std::size_t b = 0; b < results.size(); ++b) {
    const auto& r = results[b];
    if (!r.both_decoded() || !(r.bob.bits == r.sonai.bits)) {
      m.failed_block = b;
      if (r.bob.abort_reason) m.abort_reason = r.bob.abort_reason;
      else if (r.sonai.abort_reason) m.abort_reason = r.sonai.abort_reason;
      m.bob_msg.clear();
      m.sonai_msg.clear();
      return m;
    }
    m.bob_msg.push_back(static_cast<char>('0' + r.bob.bits.bob));
    m.sonai_msg.push_back(static_cast<char>('0' + r.sonai.bits.sonai));
  }
  m.ok = !results.empty();
  return m;
}

}  // namespace entpost
