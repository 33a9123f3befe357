#pragma once

// Deterministic in-memory harness for one session: FIFO links between the
// three parties, a tick scheduler, receiver strategies and the one-ahead
// fairness policy.
//
// Each tick first delivers every due message (links in id order, FIFO within
// a link), then lets Alice, Bob and Sonai act in that order.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "entpost/codebook.hpp"
#include "entpost/epr.hpp"
#include "entpost/errors.hpp"
#include "entpost/protocol.hpp"
#include "entpost/rng.hpp"

namespace entpost {

enum class PartyId : std::uint8_t { Alice, Bob, Sonai };

constexpr PartyId party_id(Party p) noexcept { return p == Party::Bob ? PartyId::Bob : PartyId::Sonai; }

constexpr std::string_view party_id_name(PartyId p) noexcept {
  switch (p) {
    case PartyId::Alice: return "alice";
    case PartyId::Bob: return "bob";
    case PartyId::Sonai: return "sonai";
  }
  return "unknown";
}

struct Delivery {
  std::vector<SpinOutcome> particles;  // predetermined z outcomes, by position
};
struct DecodeAnnounce {
  DecodeResult result;
};
struct AbortNotice {
  AbortReason reason;
};

struct WireMessage {
  PartyId sender = PartyId::Alice;
  PartyId receiver = PartyId::Bob;
  std::variant<Delivery, RevealEvent, DecodeAnnounce, AbortNotice> body;
  std::uint64_t seq = 0;  // per-link send order
  std::uint64_t due_tick = 0;
};

inline std::string_view message_kind(const WireMessage& m) {
  switch (m.body.index()) {
    case 0: return "delivery";
    case 1: return "reveal";
    case 2: return "decode";
    default: return "abort";
  }
}

inline std::string payload_summary(const WireMessage& m) {
  std::ostringstream out;
  if (const auto* d = std::get_if<Delivery>(&m.body)) {
    out << "particles=" << d->particles.size();
  } else if (const auto* r = std::get_if<RevealEvent>(&m.body)) {
    out << "round=" << r->round << " position=" << r->position + 1
        << " outcome=" << spin_symbol(r->outcome);
  } else if (const auto* a = std::get_if<DecodeAnnounce>(&m.body)) {
    out << "status=" << decode_status_name(a->result.status);
    if (a->result.decoded()) out << " bits=" << a->result.bits.str();
    out << " confidence=" << a->result.confidence;
  } else {
    out << "reason=" << abort_reason_name(std::get<AbortNotice>(m.body).reason);
  }
  return out.str();
}

/// FIFO queue for one ordered pair of parties. No loss, no duplication.
class Link {
 public:
  Link(std::size_t id, PartyId from, PartyId to, std::size_t delay)
      : id_(id), from_(from), to_(to), delay_(delay) {
    if (delay == 0) throw ValidationError("link delay must be at least one tick");
  }

  void send(WireMessage m, std::uint64_t now) {
    if (m.sender != from_ || m.receiver != to_) throw ValidationError("message sent on the wrong link");
    const bool from_alice = m.sender == PartyId::Alice;
    if (std::holds_alternative<Delivery>(m.body) != from_alice)
      throw ValidationError("deliveries originate only at Alice");
    if (std::holds_alternative<RevealEvent>(m.body) && from_alice)
      throw ValidationError("reveals travel only between the receivers");
    m.seq = sent_++;
    m.due_tick = now + delay_;
    queue_.push_back(std::move(m));
  }

  std::optional<WireMessage> pop_due(std::uint64_t now) {
    if (queue_.empty() || queue_.front().due_tick > now) return std::nullopt;
    WireMessage m = std::move(queue_.front());
    queue_.pop_front();
    if (m.seq != delivered_) fifo_ok_ = false;
    ++delivered_;
    return m;
  }

  std::size_t id() const noexcept { return id_; }
  PartyId from() const noexcept { return from_; }
  PartyId to() const noexcept { return to_; }
  bool empty() const noexcept { return queue_.empty(); }
  std::uint64_t sent() const noexcept { return sent_; }
  std::uint64_t delivered() const noexcept { return delivered_; }
  bool fifo_ok() const noexcept { return fifo_ok_; }

 private:
  std::size_t id_;
  PartyId from_;
  PartyId to_;
  std::size_t delay_;
  std::deque<WireMessage> queue_;
  std::uint64_t sent_ = 0;
  std::uint64_t delivered_ = 0;
  bool fifo_ok_ = true;
};

struct Honest {
  friend bool operator==(const Honest&, const Honest&) = default;
};
/// Stops revealing once k own reveals have been sent.
struct WithholdAfter {
  std::size_t k = 0;
  friend bool operator==(const WithholdAfter&, const WithholdAfter&) = default;
};
/// Discloses every result at the first opportunity.
struct BatchDump {
  friend bool operator==(const BatchDump&, const BatchDump&) = default;
};
/// Follows the schedule but flips each disclosed outcome with probability p.
struct LieWithProb {
  double p = 0.0;
  friend bool operator==(const LieWithProb&, const LieWithProb&) = default;
};

using Strategy = std::variant<Honest, WithholdAfter, BatchDump, LieWithProb>;

inline bool is_honest(const Strategy& s) { return std::holds_alternative<Honest>(s); }

inline std::string strategy_name(const Strategy& s) {
  if (std::holds_alternative<Honest>(s)) return "honest";
  if (const auto* w = std::get_if<WithholdAfter>(&s)) return "withhold:" + std::to_string(w->k);
  if (std::holds_alternative<BatchDump>(s)) return "dump";
  std::ostringstream out;
  out << "lie:" << std::get<LieWithProb>(s).p;
  return out.str();
}

/// "honest", "withhold:K", "dump", "lie:P".
inline Strategy parse_strategy(std::string_view text) {
  const auto colon = text.find(':');
  const std::string head(text.substr(0, colon));
  const std::string arg = colon == std::string_view::npos ? "" : std::string(text.substr(colon + 1));
  try {
    if (head == "honest" && arg.empty()) return Honest{};
    if (head == "dump" && arg.empty()) return BatchDump{};
    if (head == "withhold" && !arg.empty()) {
      std::size_t used = 0;
      const long long k = std::stoll(arg, &used);
      if (used == arg.size() && k >= 0) return WithholdAfter{static_cast<std::size_t>(k)};
    }
    if (head == "lie" && !arg.empty()) {
      std::size_t used = 0;
      const double p = std::stod(arg, &used);
      if (used == arg.size() && p >= 0.0 && p <= 1.0) return LieWithProb{p};
    }
  } catch (const std::logic_error&) {
  }
  throw ValidationError("bad strategy '" + std::string(text) +
                        "' (expected honest, withhold:K, dump or lie:P with P in [0,1])");
}

inline void validate_strategy(const Strategy& s, std::size_t n) {
  if (const auto* w = std::get_if<WithholdAfter>(&s); w && w->k > n)
    throw ValidationError("withhold count exceeds block length");
  if (const auto* l = std::get_if<LieWithProb>(&s); l && !(l->p >= 0.0 && l->p <= 1.0))
    throw ValidationError("lie probability must lie in [0, 1]");
}

struct FairnessPolicy {
  /// How many reveals the first mover may have outstanding before it waits
  /// for the counterpart. The responder gets one less, so a limit of 1 gives
  /// strict alternation.
  std::size_t one_ahead_limit = 1;
  std::size_t timeout_ticks = 16;
  /// Abort with FairnessViolation when the counterpart runs ahead of its own
  /// allowance. Off by default: excess reveals are simply accepted.
  bool reject_excess = false;

  void validate() const {
    if (one_ahead_limit < 1) throw ValidationError("one-ahead limit must be at least 1");
    if (timeout_ticks < 1) throw ValidationError("timeout must be at least 1 tick");
  }
};

/// What the policy looks at for one receiver.
struct PartyProgress {
  std::size_t sent = 0;
  std::size_t received = 0;
  std::size_t idle_ticks = 0;
  bool moves_first = false;
};

enum class FairnessVerdict : std::uint8_t { Proceed, Stall, AbortTimeout, AbortFairnessViolation };

inline FairnessVerdict enforce_fairness(const FairnessPolicy& policy, const PartyProgress& v) {
  const auto lead = static_cast<long long>(v.sent) - static_cast<long long>(v.received);
  const auto own_allowance = static_cast<long long>(policy.one_ahead_limit) - (v.moves_first ? 0 : 1);
  const auto their_allowance = static_cast<long long>(policy.one_ahead_limit) - (v.moves_first ? 1 : 0);
  if (policy.reject_excess && -lead > their_allowance) return FairnessVerdict::AbortFairnessViolation;
  if (v.idle_ticks >= policy.timeout_ticks) return FairnessVerdict::AbortTimeout;
  return lead >= own_allowance ? FairnessVerdict::Stall : FairnessVerdict::Proceed;
}

/// max over transcript prefixes of |#Bob reveals - #Sonai reveals|.
inline std::size_t fairness_gap(const Transcript& t) {
  long long diff = 0;
  std::size_t gap = 0;
  for (const auto& e : t.events()) {
    diff += e.party == Party::Bob ? 1 : -1;
    gap = std::max(gap, static_cast<std::size_t>(diff < 0 ? -diff : diff));
  }
  return gap;
}

struct ReceiverNode {
  Party role = Party::Bob;
  Strategy strategy;
  Rng rng{0};
  std::optional<RevealSchedule> schedule;
  std::optional<ReceiverView> view;
  std::vector<RevealEvent> pending;  // reveals that beat the delivery
  std::size_t sent = 0;
  std::size_t received = 0;
  std::size_t idle = 0;
  std::size_t stalled_ticks = 0;
  bool progressed = false;
  bool finished = false;
  DecodeResult result;
  std::optional<DecodeResult> counterpart_announcement;
  std::optional<AbortReason> counterpart_abort;
};

/// Emits this tick's reveals for `node` under its strategy. `due` says
/// whether the honest schedule and the fairness policy allow a reveal now.
inline std::vector<RevealEvent> apply_strategy(ReceiverNode& node, bool due, Transcript& transcript) {
  std::vector<RevealEvent> out;
  if (!node.schedule) return out;
  auto emit = [&](bool lie) {
    auto e = node.schedule->reveal_next(transcript.next_round());
    if (!e) return false;
    if (lie) e->outcome = neg(e->outcome);
    transcript.append(*e);
    out.push_back(*e);
    return true;
  };
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Honest>) {
          if (due) emit(false);
        } else if constexpr (std::is_same_v<S, WithholdAfter>) {
          if (due && node.sent < s.k) emit(false);
        } else if constexpr (std::is_same_v<S, BatchDump>) {
          while (emit(false)) {
          }
        } else {
          if (due) {
            const bool lie = node.rng.bernoulli(s.p);
            emit(lie);
          }
        }
      },
      node.strategy);
  return out;
}

struct LogEntry {
  std::uint64_t tick = 0;
  std::size_t link = 0;
  std::string kind;
  PartyId sender = PartyId::Alice;
  PartyId receiver = PartyId::Bob;
  std::string payload_summary;
};

inline void write_event_log(std::ostream& out, const std::vector<LogEntry>& log) {
  for (const auto& e : log) {
    nlohmann::ordered_json j;
    j["tick"] = e.tick;
    j["link"] = e.link;
    j["kind"] = e.kind;
    j["sender"] = party_id_name(e.sender);
    j["receiver"] = party_id_name(e.receiver);
    j["payload_summary"] = e.payload_summary;
    out << j.dump() << '\n';
  }
}

class World;
void schedule_step(World& w);

class World {
 public:
  /// Link ids: 0 Alice->Bob, 1 Alice->Sonai, 2 Bob->Sonai, 3 Sonai->Bob.
  World(const ProtocolConfig& cfg, Codebook cb, PreparedBlock block, Strategy bob, Strategy sonai,
        FairnessPolicy policy, std::uint64_t strategy_seed, std::size_t link_delay = 1)
      : cfg_(cfg),
        cb_(std::move(cb)),
        block_(std::move(block)),
        policy_(policy),
        links_{Link(0, PartyId::Alice, PartyId::Bob, link_delay),
               Link(1, PartyId::Alice, PartyId::Sonai, link_delay),
               Link(2, PartyId::Bob, PartyId::Sonai, link_delay),
               Link(3, PartyId::Sonai, PartyId::Bob, link_delay)} {
    policy_.validate();
    validate_strategy(bob, cb_.n);
    validate_strategy(sonai, cb_.n);
    Rng strategies(strategy_seed);
    nodes_[0].role = Party::Bob;
    nodes_[0].strategy = bob;
    nodes_[0].rng = strategies.split(0);
    nodes_[1].role = Party::Sonai;
    nodes_[1].strategy = sonai;
    nodes_[1].rng = strategies.split(1);
  }

  std::uint64_t tick() const noexcept { return tick_; }
  const Transcript& transcript() const noexcept { return transcript_; }
  const std::vector<LogEntry>& log() const noexcept { return log_; }
  const ReceiverNode& node(Party p) const noexcept { return nodes_[p == Party::Bob ? 0 : 1]; }
  const Codebook& codebook() const noexcept { return cb_; }
  const PreparedBlock& block() const noexcept { return block_; }
  const FairnessPolicy& policy() const noexcept { return policy_; }
  const std::array<Link, 4>& links() const noexcept { return links_; }

  bool fifo_ok() const noexcept {
    return std::all_of(links_.begin(), links_.end(), [](const Link& l) { return l.fifo_ok(); });
  }

  bool links_idle() const noexcept {
    return std::all_of(links_.begin(), links_.end(), [](const Link& l) { return l.empty(); });
  }

  /// Both receivers have terminated and nothing is in flight.
  bool finished() const noexcept { return nodes_[0].finished && nodes_[1].finished && links_idle(); }

  /// Steps until finished; throws if `max_ticks` is exceeded.
  void run(std::uint64_t max_ticks) {
    while (!finished()) {
      if (tick_ >= max_ticks) throw std::runtime_error("session did not terminate");
      schedule_step(*this);
    }
  }

  friend void schedule_step(World& w);

 private:
  ReceiverNode& node_mut(Party p) noexcept { return nodes_[p == Party::Bob ? 0 : 1]; }

  Link& link_between(PartyId from, PartyId to) {
    for (auto& l : links_)
      if (l.from() == from && l.to() == to) return l;
    throw std::logic_error("no such link");
  }

  void send(PartyId from, PartyId to, decltype(WireMessage::body) body) {
    link_between(from, to).send(WireMessage{from, to, std::move(body)}, tick_);
  }

  void deliver(const Link& link, WireMessage m) {
    log_.push_back({tick_, link.id(), std::string(message_kind(m)), m.sender, m.receiver, payload_summary(m)});
    ReceiverNode& node = node_mut(m.receiver == PartyId::Bob ? Party::Bob : Party::Sonai);
    if (node.finished) return;
    if (auto* d = std::get_if<Delivery>(&m.body)) {
      node.schedule.emplace(node.role, d->particles);
      node.view.emplace(node.role, std::move(d->particles), cb_, cfg_);
      node.progressed = true;
      for (const auto& e : std::exchange(node.pending, {})) observe(node, e);
    } else if (auto* r = std::get_if<RevealEvent>(&m.body)) {
      if (!node.view) {
        node.pending.push_back(*r);
        return;
      }
      observe(node, *r);
    } else if (auto* a = std::get_if<DecodeAnnounce>(&m.body)) {
      node.counterpart_announcement = a->result;
    } else {
      node.counterpart_abort = std::get<AbortNotice>(m.body).reason;
      // The session is over; keep whatever this receiver managed to learn.
      finish(node, node.view ? node.view->decode() : DecodeResult{}, false);
    }
  }

  void observe(ReceiverNode& node, const RevealEvent& e) {
    try {
      node.view->update_candidates(e);
    } catch (const ProtocolViolation&) {
      abort(node, AbortReason::ProtocolViolation);
      return;
    }
    ++node.received;
    node.progressed = true;
  }

  void finish(ReceiverNode& node, DecodeResult result, bool announce) {
    node.finished = true;
    node.result = std::move(result);
    if (!announce) return;
    const PartyId me = party_id(node.role);
    const PartyId other = party_id(counterpart(node.role));
    if (node.result.status == DecodeStatus::Abort) {
      send(me, other, AbortNotice{*node.result.abort_reason});
    } else {
      send(me, other, DecodeAnnounce{node.result});
    }
  }

  void abort(ReceiverNode& node, AbortReason reason) {
    DecodeResult r = node.view ? node.view->decode() : DecodeResult{};
    r.status = DecodeStatus::Abort;
    r.abort_reason = reason;
    finish(node, std::move(r), true);
  }

  void alice_act() {
    if (alice_sent_) return;
    alice_sent_ = true;
    send(PartyId::Alice, PartyId::Bob, Delivery{measure_all(Party::Bob, block_)});
    send(PartyId::Alice, PartyId::Sonai, Delivery{measure_all(Party::Sonai, block_)});
  }

  void receiver_act(ReceiverNode& node) {
    if (node.finished || !node.schedule) return;
    const PartyProgress progress{node.sent, node.received, node.idle, node.role == cfg_.reveal_first};
    const FairnessVerdict verdict = enforce_fairness(policy_, progress);
    if (verdict == FairnessVerdict::AbortTimeout) return abort(node, AbortReason::Timeout);
    if (verdict == FairnessVerdict::AbortFairnessViolation)
      return abort(node, AbortReason::FairnessViolation);
    if (verdict == FairnessVerdict::Stall && !node.schedule->exhausted()) ++node.stalled_ticks;

    const bool due = verdict == FairnessVerdict::Proceed;
    for (const auto& e : apply_strategy(node, due, transcript_)) {
      send(party_id(node.role), party_id(counterpart(node.role)), e);
      ++node.sent;
      node.progressed = true;
    }

    if (node.sent == cb_.n && node.received == cb_.n) return finish(node, node.view->decode(), true);
    node.idle = node.progressed ? 0 : node.idle + 1;
    node.progressed = false;
  }

  ProtocolConfig cfg_;
  Codebook cb_;
  PreparedBlock block_;
  FairnessPolicy policy_;
  std::array<Link, 4> links_;
  std::array<ReceiverNode, 2> nodes_;
  Transcript transcript_;
  std::vector<LogEntry> log_;
  std::uint64_t tick_ = 0;
  bool alice_sent_ = false;
};

inline void schedule_step(World& w) {
  ++w.tick_;
  for (auto& link : w.links_)
    while (auto m = link.pop_due(w.tick_)) w.deliver(link, std::move(*m));
  w.alice_act();
  w.receiver_act(w.nodes_[0]);
  w.receiver_act(w.nodes_[1]);
}

}  // namespace entpost
