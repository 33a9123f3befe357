#pragma once

// Party roles and the recovery procedure: Alice's preparation, receiver
// measurement, alternating disclosure and candidate elimination over all
// four codebook entries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "entpost/codebook.hpp"
#include "entpost/epr.hpp"
#include "entpost/errors.hpp"
#include "entpost/rng.hpp"
#include "entpost/union_find.hpp"

namespace entpost {

enum class Party : std::uint8_t { Bob, Sonai };

constexpr Party counterpart(Party p) noexcept { return p == Party::Bob ? Party::Sonai : Party::Bob; }

constexpr std::string_view party_name(Party p) noexcept { return p == Party::Bob ? "bob" : "sonai"; }

inline Party parse_party(std::string_view s) {
  if (s == "bob") return Party::Bob;
  if (s == "sonai") return Party::Sonai;
  throw ValidationError("unknown party '" + std::string(s) + "'");
}

enum class AbortReason : std::uint8_t { NoConsistentEntry, Timeout, FairnessViolation, ProtocolViolation };

constexpr std::string_view abort_reason_name(AbortReason r) noexcept {
  switch (r) {
    case AbortReason::NoConsistentEntry: return "no_consistent_entry";
    case AbortReason::Timeout: return "timeout";
    case AbortReason::FairnessViolation: return "fairness_violation";
    case AbortReason::ProtocolViolation: return "protocol_violation";
  }
  return "unknown";
}

inline AbortReason parse_abort_reason(std::string_view s) {
  for (auto r : {AbortReason::NoConsistentEntry, AbortReason::Timeout,
                 AbortReason::FairnessViolation, AbortReason::ProtocolViolation})
    if (abort_reason_name(r) == s) return r;
  throw ValidationError("unknown abort reason '" + std::string(s) + "'");
}

struct ProtocolConfig {
  std::size_t n = 64;
  NoiseModel noise;
  std::size_t lambda = 16;
  /// Largest fraction of failed checks a candidate may show and stay alive.
  double violation_tolerance = 0.0;
  double confidence_target = 0.99;
  Party reveal_first = Party::Bob;
  std::uint64_t seed = 0;

  /// Separation threshold: halfway between the true-entry violation rate
  /// 2e(1-e) and the wrong-entry rate 1/2. The tolerance must stay below it.
  double tolerance_ceiling() const noexcept { return 0.5 * (noise.pair_violation_rate() + 0.5); }

  void validate() const {
    if (n == 0) throw ValidationError("n must be at least 1");
    if (lambda == 0) throw ValidationError("lambda must be at least 1");
    if (!(violation_tolerance >= 0.0 && violation_tolerance < 0.5))
      throw ValidationError("violation tolerance must lie in [0, 0.5)");
    if (!(violation_tolerance < tolerance_ceiling()))
      throw ValidationError("violation tolerance " + std::to_string(violation_tolerance) +
                            " does not separate true entries (rate " +
                            std::to_string(noise.pair_violation_rate()) +
                            ") from wrong ones (rate 0.5); must be below " +
                            std::to_string(tolerance_ceiling()));
    if (!(confidence_target > 0.0 && confidence_target < 1.0))
      throw ValidationError("confidence target must lie in (0, 1)");
  }
};

/// What Alice hands out for one bit pair: the predetermined z outcomes at
/// every position of both delivered sequences.
struct PreparedBlock {
  std::size_t entry = 0;
  BitPair bits;
  Pairing pairing;
  std::vector<SpinOutcome> bob;
  std::vector<SpinOutcome> sonai;
};

inline PreparedBlock alice_prepare(BitPair bits, const Codebook& cb, const NoiseModel& noise,
                                   Rng& rng) {
  if (const auto report = validate_codebook(cb); !report.ok())
    throw ValidationError("cannot prepare from an invalid codebook: " + report.defects.front().message);
  const std::size_t index = cb.index_for_bits(bits);
  const CodebookEntry& entry = cb.entries[index];
  const auto pairs = sample_block(cb.n, noise, rng);

  PreparedBlock block;
  block.entry = index;
  block.bits = bits;
  block.pairing = entry.pairing;
  block.bob.resize(cb.n);
  block.sonai.resize(cb.n);
  for (std::size_t k = 0; k < cb.n; ++k) block.bob[k] = pairs[entry.s_i[k] - 1].i_side;
  for (std::size_t p = 0; p < cb.n; ++p) block.sonai[p] = pairs[entry.s_j[p] - 1].j_side;
  return block;
}

/// z measurement of every particle a receiver holds.
inline std::vector<SpinOutcome> measure_all(Party role, const PreparedBlock& block) {
  return role == Party::Bob ? block.bob : block.sonai;
}

struct RevealEvent {
  Party party = Party::Bob;
  std::uint32_t position = 0;  // 0-based
  SpinOutcome outcome = SpinOutcome::Plus;
  std::uint64_t round = 0;     // 1-based transcript sequence number

  friend bool operator==(const RevealEvent&, const RevealEvent&) = default;
};

/// Ascending own-order disclosure schedule for one receiver.
class RevealSchedule {
 public:
  RevealSchedule(Party self, std::vector<SpinOutcome> outcomes)
      : self_(self), outcomes_(std::move(outcomes)) {}

  /// Next unrevealed position, or nullopt once everything is out.
  std::optional<RevealEvent> reveal_next(std::uint64_t round) {
    if (next_ >= outcomes_.size()) return std::nullopt;
    const auto k = next_++;
    return RevealEvent{self_, static_cast<std::uint32_t>(k), outcomes_[k], round};
  }

  Party self() const noexcept { return self_; }
  std::size_t revealed() const noexcept { return next_; }
  std::size_t size() const noexcept { return outcomes_.size(); }
  bool exhausted() const noexcept { return next_ >= outcomes_.size(); }

 private:
  Party self_;
  std::vector<SpinOutcome> outcomes_;
  std::size_t next_ = 0;
};

struct CandidateState {
  std::size_t entry = 0;
  std::size_t checks_completed = 0;
  std::size_t violations = 0;
  bool alive = true;
  double survival_log2 = 0.0;

  friend bool operator==(const CandidateState&, const CandidateState&) = default;
};

enum class DecodeStatus : std::uint8_t { Decoded, Undecided, Abort };

constexpr std::string_view decode_status_name(DecodeStatus s) noexcept {
  switch (s) {
    case DecodeStatus::Decoded: return "decoded";
    case DecodeStatus::Undecided: return "undecided";
    case DecodeStatus::Abort: return "abort";
  }
  return "unknown";
}

inline DecodeStatus parse_decode_status(std::string_view s) {
  for (auto st : {DecodeStatus::Decoded, DecodeStatus::Undecided, DecodeStatus::Abort})
    if (decode_status_name(st) == s) return st;
  throw ValidationError("unknown decode status '" + std::string(s) + "'");
}

struct DecodeResult {
  DecodeStatus status = DecodeStatus::Undecided;
  BitPair bits;  // meaningful when Decoded
  double confidence = 0.0;
  std::optional<AbortReason> abort_reason;
  /// True when confidence is the noisy-mode likelihood heuristic rather
  /// than an exact probability.
  bool heuristic = false;
  std::size_t events_seen = 0;
  std::vector<CandidateState> candidates;

  bool decoded() const noexcept { return status == DecodeStatus::Decoded; }

  /// Equality of the announced outcome (status, bits, confidence, reason).
  bool same_outcome(const DecodeResult& o) const {
    return status == o.status && confidence == o.confidence && abort_reason == o.abort_reason &&
           (status != DecodeStatus::Decoded || bits == o.bits);
  }
};

/// One receiver's decoder: its private outcomes plus everything the
/// counterpart has disclosed so far.
class ReceiverView {
 public:
  ReceiverView(Party self, std::vector<SpinOutcome> own, const Codebook& cb, const ProtocolConfig& cfg)
      : self_(self),
        own_(std::move(own)),
        noise_(cfg.noise),
        tolerance_(cfg.violation_tolerance),
        target_(cfg.confidence_target),
        seen_(cb.n, false) {
    if (own_.size() != cb.n) throw ValidationError("outcome count does not match codebook length");
    for (std::size_t e = 0; e < cb.entries.size(); ++e) {
      pairings_.push_back(cb.entries[e].pairing);
      bits_.push_back(cb.entries[e].bits);
      states_.push_back(CandidateState{e});
      passed_.emplace_back();
    }
  }

  /// Forgets every check and starts over with new private outcomes.
  void reset(std::span<const SpinOutcome> own) {
    if (own.size() != own_.size()) throw ValidationError("outcome count does not match codebook length");
    std::copy(own.begin(), own.end(), own_.begin());
    std::fill(seen_.begin(), seen_.end(), false);
    events_seen_ = 0;
    for (std::size_t c = 0; c < states_.size(); ++c) {
      states_[c] = CandidateState{c};
      passed_[c].clear();
    }
  }

  Party self() const noexcept { return self_; }
  std::size_t size() const noexcept { return own_.size(); }
  std::size_t events_seen() const noexcept { return events_seen_; }
  const std::vector<CandidateState>& candidates() const noexcept { return states_; }
  BitPair bits_of(std::size_t candidate) const { return bits_[candidate]; }

  /// Completes at most one check per candidate. Own reveals carry no new
  /// information and are ignored.
  void update_candidates(const RevealEvent& event) {
    if (event.party == self_) return;
    if (event.position >= own_.size())
      throw ProtocolViolation("reveal position " + std::to_string(event.position + 1) +
                              " out of range");
    if (seen_[event.position])
      throw ProtocolViolation("duplicate reveal of " + std::string(party_name(event.party)) +
                              " position " + std::to_string(event.position + 1));
    seen_[event.position] = true;
    ++events_seen_;

    for (std::size_t c = 0; c < states_.size(); ++c) {
      const Pairing& pairing = pairings_[c];
      std::uint32_t bob_position;
      SpinOutcome mine;
      if (self_ == Party::Bob) {
        bob_position = pairing.inv(event.position);
        mine = own_[bob_position];
      } else {
        bob_position = event.position;
        mine = own_[pairing.map(event.position)];
      }
      auto& st = states_[c];
      ++st.checks_completed;
      if (mine == event.outcome) {
        ++st.violations;
      } else {
        passed_[c].push_back(bob_position);
      }
      st.alive = static_cast<double>(st.violations) <=
                 tolerance_ * static_cast<double>(st.checks_completed);
    }
  }

  /// Rank of the constraint graph built on this party's positions from the
  /// candidate's passed checks, taking `reference` as the true pairing.
  std::size_t constraint_rank(std::size_t candidate, std::size_t reference) const {
    const Pairing& c = pairings_[candidate];
    const Pairing& t = pairings_[reference];
    UnionFind uf(own_.size());
    std::size_t rank = 0;
    for (std::uint32_t k : passed_[candidate]) {
      if (c.map(k) == t.map(k)) continue;
      const bool joined = self_ == Party::Bob ? uf.unite(k, t.inv(c.map(k)))
                                              : uf.unite(t.map(k), c.map(k));
      if (joined) ++rank;
    }
    return rank;
  }

  /// log2 of the probability that `candidate` would have survived the checks
  /// seen so far if `reference` were the true entry. Exact when noiseless;
  /// a likelihood-ratio heuristic under noise. -inf for dead candidates.
  double survival_logprob(std::size_t candidate, std::size_t reference) const {
    if (candidate == reference) return 0.0;
    if (noise_.noiseless()) {
      if (!states_[candidate].alive) return -std::numeric_limits<double>::infinity();
      return -static_cast<double>(constraint_rank(candidate, reference));
    }
    return std::min(0.0, log_likelihood(candidate) - log_likelihood(reference));
  }

  /// Alive candidate with the fewest violations; ties broken by paper order.
  std::optional<std::size_t> leader() const {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < states_.size(); ++c) {
      if (!states_[c].alive) continue;
      if (!best || states_[c].violations < states_[*best].violations ||
          (states_[c].violations == states_[*best].violations &&
           paper_rank(bits_[c]) < paper_rank(bits_[*best])))
        best = c;
    }
    return best;
  }

  DecodeResult decode() const {
    DecodeResult r;
    r.events_seen = events_seen_;
    r.heuristic = !noise_.noiseless();
    r.candidates = states_;
    const auto lead = leader();
    if (!lead) {
      r.status = DecodeStatus::Abort;
      r.abort_reason = AbortReason::NoConsistentEntry;
      for (auto& st : r.candidates) st.survival_log2 = -std::numeric_limits<double>::infinity();
      return r;
    }
    double doubt = 0.0;
    std::size_t alive = 0;
    for (std::size_t c = 0; c < states_.size(); ++c) {
      if (states_[c].alive) ++alive;
      const double s = survival_logprob(c, *lead);
      r.candidates[c].survival_log2 = s;
      if (c == *lead) continue;
      if (noise_.noiseless() && !states_[c].alive) continue;
      doubt += std::exp2(s);
    }
    r.confidence = std::clamp(1.0 - doubt, 0.0, 1.0);
    r.bits = bits_[*lead];
    r.status = (alive == 1 && r.confidence >= target_) ? DecodeStatus::Decoded : DecodeStatus::Undecided;
    return r;
  }

 private:
  double log_likelihood(std::size_t c) const {
    const double q = noise_.pair_violation_rate();
    const auto& st = states_[c];
    return static_cast<double>(st.violations) * std::log2(q) +
           static_cast<double>(st.checks_completed - st.violations) * std::log2(1.0 - q);
  }

  Party self_;
  std::vector<SpinOutcome> own_;
  NoiseModel noise_;
  double tolerance_;
  double target_;
  std::vector<bool> seen_;
  std::size_t events_seen_ = 0;
  std::vector<Pairing> pairings_;
  std::vector<BitPair> bits_;
  std::vector<CandidateState> states_;
  std::vector<std::vector<std::uint32_t>> passed_;  // Bob positions of passed checks
};

struct TerminalRecord {
  Party receiver = Party::Bob;
  DecodeResult result;
};

/// Append-only public record of a session.
class Transcript {
 public:
  std::uint64_t next_round() const noexcept { return last_round_ + 1; }

  void append(const RevealEvent& e) {
    if (e.round <= last_round_)
      throw ProtocolViolation("round " + std::to_string(e.round) + " does not follow round " +
                              std::to_string(last_round_));
    if (!revealed_.insert({e.party, e.position}).second)
      throw ProtocolViolation("duplicate reveal of " + std::string(party_name(e.party)) +
                              " position " + std::to_string(e.position + 1));
    last_round_ = e.round;
    events_.push_back(e);
  }

  void add_terminal(TerminalRecord t) { terminals_.push_back(std::move(t)); }

  const std::vector<RevealEvent>& events() const noexcept { return events_; }
  const std::vector<TerminalRecord>& terminals() const noexcept { return terminals_; }

  std::size_t count(Party p) const {
    return static_cast<std::size_t>(
        std::count_if(events_.begin(), events_.end(), [p](const RevealEvent& e) { return e.party == p; }));
  }

 private:
  std::vector<RevealEvent> events_;
  std::vector<TerminalRecord> terminals_;
  std::set<std::pair<Party, std::uint32_t>> revealed_;
  std::uint64_t last_round_ = 0;
};

/// Rebuilds one receiver's view from its private outcomes and the first
/// `limit` counterpart events of the transcript.
inline ReceiverView replay_view(Party self, std::vector<SpinOutcome> own, const Codebook& cb,
                                const ProtocolConfig& cfg, const std::vector<RevealEvent>& events,
                                std::size_t limit = std::numeric_limits<std::size_t>::max()) {
  ReceiverView view(self, std::move(own), cb, cfg);
  for (const auto& e : events) {
    if (view.events_seen() >= limit) break;
    view.update_candidates(e);
  }
  return view;
}

}  // namespace entpost
