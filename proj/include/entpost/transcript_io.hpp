#pragma once

// JSON-lines transcript format.
//
//   {"header": {...}}                                   one per block
//   {"round":1,"party":"bob","position":1,"outcome":"+"}
//   {"receiver":"bob","status":"decoded","bob_bit":1,"sonai_bit":0,
//    "confidence":1.0,"abort_reason":null,"events_seen":64,"heuristic":false}
//
// Rounds and positions are 1-based. The header carries everything a replay
// needs to rebuild the receivers' private outcomes, including the codebook.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "entpost/codebook_io.hpp"
#include "entpost/errors.hpp"
#include "entpost/netsim.hpp"
#include "entpost/protocol.hpp"

namespace entpost {

inline constexpr int kTranscriptFormatVersion = 1;

struct SessionHeader {
  std::size_t block = 0;
  ProtocolConfig config;
  BitPair bits;
  std::string strategy_bob = "honest";
  std::string strategy_sonai = "honest";
  FairnessPolicy policy;
  Codebook codebook;
};

struct TranscriptBlock {
  SessionHeader header;
  Transcript transcript;
  std::optional<DecodeResult> recorded(Party p) const {
    for (const auto& t : transcript.terminals())
      if (t.receiver == p) return t.result;
    return std::nullopt;
  }
};

inline nlohmann::ordered_json header_to_json(const SessionHeader& h) {
  nlohmann::ordered_json j;
  j["version"] = kTranscriptFormatVersion;
  j["block"] = h.block;
  j["seed"] = h.config.seed;
  j["n"] = h.config.n;
  j["lambda"] = h.config.lambda;
  j["noise"] = h.config.noise.flip_probability();
  j["delta"] = h.config.violation_tolerance;
  j["confidence_target"] = h.config.confidence_target;
  j["reveal_first"] = party_name(h.config.reveal_first);
  j["bits"] = {h.bits.bob, h.bits.sonai};
  j["strategy_bob"] = h.strategy_bob;
  j["strategy_sonai"] = h.strategy_sonai;
  j["policy_one_ahead"] = h.policy.one_ahead_limit;
  j["timeout"] = h.policy.timeout_ticks;
  j["codebook"] = codebook_to_json(h.codebook);
  return j;
}

inline nlohmann::ordered_json event_to_json(const RevealEvent& e) {
  nlohmann::ordered_json j;
  j["round"] = e.round;
  j["party"] = party_name(e.party);
  j["position"] = e.position + 1;
  j["outcome"] = std::string(1, spin_symbol(e.outcome));
  return j;
}

inline nlohmann::ordered_json terminal_to_json(const TerminalRecord& t) {
  const auto& r = t.result;
  nlohmann::ordered_json j;
  j["receiver"] = party_name(t.receiver);
  j["status"] = decode_status_name(r.status);
  if (r.decoded()) {
    j["bob_bit"] = r.bits.bob;
    j["sonai_bit"] = r.bits.sonai;
  } else {
    j["bob_bit"] = nullptr;
    j["sonai_bit"] = nullptr;
  }
  j["confidence"] = r.confidence;
  if (r.abort_reason) {
    j["abort_reason"] = abort_reason_name(*r.abort_reason);
  } else {
    j["abort_reason"] = nullptr;
  }
  j["events_seen"] = r.events_seen;
  j["heuristic"] = r.heuristic;
  return j;
}

inline void write_transcript(std::ostream& out, const SessionHeader& header, const Transcript& t) {
  out << nlohmann::ordered_json{{"header", header_to_json(header)}}.dump() << '\n';
  for (const auto& e : t.events()) out << event_to_json(e).dump() << '\n';
  for (const auto& term : t.terminals()) out << terminal_to_json(term).dump() << '\n';
}

namespace detail {

inline SessionHeader header_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kTranscriptFormatVersion)
    throw ParseError("unsupported transcript version");
  SessionHeader h;
  h.block = j.at("block").get<std::size_t>();
  h.config.seed = j.at("seed").get<std::uint64_t>();
  h.config.n = j.at("n").get<std::size_t>();
  h.config.lambda = j.at("lambda").get<std::size_t>();
  h.config.noise = NoiseModel(j.at("noise").get<double>());
  h.config.violation_tolerance = j.at("delta").get<double>();
  h.config.confidence_target = j.at("confidence_target").get<double>();
  h.config.reveal_first = parse_party(j.at("reveal_first").get<std::string>());
  const auto& bits = j.at("bits");
  h.bits = BitPair{bits.at(0).get<std::uint8_t>(), bits.at(1).get<std::uint8_t>()};
  h.strategy_bob = j.at("strategy_bob").get<std::string>();
  h.strategy_sonai = j.at("strategy_sonai").get<std::string>();
  h.policy.one_ahead_limit = j.at("policy_one_ahead").get<std::size_t>();
  h.policy.timeout_ticks = j.at("timeout").get<std::size_t>();
  h.codebook = codebook_from_json(j.at("codebook"));
  return h;
}

inline SpinOutcome parse_outcome(const std::string& s) {
  if (s == "+") return SpinOutcome::Plus;
  if (s == "-") return SpinOutcome::Minus;
  throw ParseError("outcome must be \"+\" or \"-\"");
}

inline TerminalRecord terminal_from_json(const nlohmann::json& j) {
  TerminalRecord t;
  t.receiver = parse_party(j.at("receiver").get<std::string>());
  auto& r = t.result;
  r.status = parse_decode_status(j.at("status").get<std::string>());
  if (r.decoded())
    r.bits = BitPair{j.at("bob_bit").get<std::uint8_t>(), j.at("sonai_bit").get<std::uint8_t>()};
  r.confidence = j.at("confidence").get<double>();
  if (!j.at("abort_reason").is_null())
    r.abort_reason = parse_abort_reason(j.at("abort_reason").get<std::string>());
  r.events_seen = j.at("events_seen").get<std::size_t>();
  r.heuristic = j.value("heuristic", false);
  return t;
}

}  // namespace detail

/// Parses every block of a transcript file. Malformed lines raise ParseError
/// and rule-breaking reveals raise ProtocolViolation, both with the 1-based
/// line number.
inline std::vector<TranscriptBlock> read_transcript(std::istream& in) {
  std::vector<TranscriptBlock> blocks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("not valid JSON: ") + ex.what(), line_no);
    }
    try {
      if (!j.is_object()) throw ParseError("expected a JSON object");
      if (j.contains("header")) {
        blocks.push_back(TranscriptBlock{detail::header_from_json(j.at("header")), {}});
        continue;
      }
      if (blocks.empty()) throw ParseError("record before any header");
      auto& block = blocks.back();
      if (j.contains("round")) {
        if (!block.transcript.terminals().empty()) throw ParseError("reveal after terminal record");
        const auto position = j.at("position").get<std::uint32_t>();
        if (position == 0 || position > block.header.config.n)
          throw ProtocolViolation("reveal position " + std::to_string(position) + " out of range");
        RevealEvent e{parse_party(j.at("party").get<std::string>()), position - 1,
                      detail::parse_outcome(j.at("outcome").get<std::string>()),
                      j.at("round").get<std::uint64_t>()};
        block.transcript.append(e);
      } else if (j.contains("status")) {
        block.transcript.add_terminal(detail::terminal_from_json(j));
      } else {
        throw ParseError("unrecognized record");
      }
    } catch (const ProtocolViolation& ex) {
      if (ex.line()) throw;
      throw ProtocolViolation(ex.what(), line_no);
    } catch (const ParseError& ex) {
      if (ex.line()) throw;
      throw ParseError(ex.what(), line_no);
    } catch (const ValidationError& ex) {
      throw ParseError(ex.what(), line_no);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(ex.what(), line_no);
    }
  }
  return blocks;
}

}  // namespace entpost
