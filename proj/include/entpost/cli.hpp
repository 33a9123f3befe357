#pragma once

// Command-line front end. run_cli() is the whole program; main() only
// forwards argv and the standard streams, which keeps every command testable.
//
// Exit codes: 0 success, 1 abort or defects, 2 usage, 3 I/O or malformed input.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "entpost/codebook.hpp"
#include "entpost/codebook_io.hpp"
#include "entpost/errors.hpp"
#include "entpost/montecarlo.hpp"
#include "entpost/session.hpp"
#include "entpost/transcript_io.hpp"

namespace entpost {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAbort = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunSpec {
  std::string command;
  std::size_t n = 64;
  std::size_t lambda = 16;
  std::string bits = "00";
  std::string bob_msg;
  std::string sonai_msg;
  double noise = 0.0;
  std::optional<double> delta;
  double confidence_target = 0.99;
  std::optional<std::uint64_t> seed;
  std::string first = "bob";
  std::size_t trials = 1000;
  std::string strategy_bob = "honest";
  std::string strategy_sonai = "honest";
  std::size_t policy_one_ahead = 1;
  std::size_t timeout = 16;
  bool reject_excess = false;
  std::string out;
  std::string codebook_path;
  bool paper_codebook = false;
  bool as_printed = false;
  std::string events_path;
  std::size_t workers = 0;
  std::string mode = "honest";
  std::string truth = "00";
  std::string candidate = "11";
  std::size_t max_rejections = kDefaultRejectionBudget;
  std::string transcript_path;
  std::string mc_bits = "random";
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("ENTPOST_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const std::uint64_t s = std::stoull(env, &used);
      if (used == std::string(env).size()) return s;
    } catch (const std::logic_error&) {
    }
    throw ValidationError("ENTPOST_SEED is not an unsigned integer");
  }
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

inline ProtocolConfig make_config(const RunSpec& spec, std::uint64_t seed) {
  ProtocolConfig cfg;
  cfg.n = spec.n;
  cfg.lambda = spec.lambda;
  cfg.noise = NoiseModel(spec.noise);
  // With noise a true entry fails some checks, so a zero tolerance would
  // reject it; a quarter sits between 2e(1-e) and 1/2 for every e > 0.
  cfg.violation_tolerance = spec.delta.value_or(spec.noise > 0.0 ? 0.25 : 0.0);
  cfg.confidence_target = spec.confidence_target;
  cfg.reveal_first = parse_party(spec.first);
  cfg.seed = seed;
  return cfg;
}

inline SessionOptions make_options(const RunSpec& spec) {
  SessionOptions o;
  o.bob = parse_strategy(spec.strategy_bob);
  o.sonai = parse_strategy(spec.strategy_sonai);
  o.policy.one_ahead_limit = spec.policy_one_ahead;
  o.policy.timeout_ticks = spec.timeout;
  o.policy.reject_excess = spec.reject_excess;
  o.policy.validate();
  return o;
}

/// Shared codebook from --codebook or --paper-codebook; also pins n and lambda.
inline std::optional<Codebook> fixed_codebook(const RunSpec& spec, ProtocolConfig& cfg) {
  std::optional<Codebook> cb;
  if (spec.paper_codebook) cb = paper_codebook();
  if (!spec.codebook_path.empty()) cb = load_codebook(read_file(spec.codebook_path));
  if (cb) {
    cfg.n = cb->n;
    cfg.lambda = cb->lambda;
  }
  return cb;
}

inline std::string describe(const DecodeResult& r) {
  std::ostringstream s;
  s << decode_status_name(r.status);
  if (r.decoded()) s << " bits=" << r.bits.str();
  if (r.abort_reason) s << " reason=" << abort_reason_name(*r.abort_reason);
  s << " confidence=" << exact_double(r.confidence);
  if (r.heuristic) s << " (heuristic)";
  s << " events_seen=" << r.events_seen;
  return s.str();
}

inline int cmd_run(const RunSpec& spec, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(spec.seed);
  out << "seed: " << seed << '\n';
  ProtocolConfig cfg = make_config(spec, seed);
  SessionOptions options = make_options(spec);
  options.codebook = fixed_codebook(spec, cfg);

  const bool message_mode = !spec.bob_msg.empty() || !spec.sonai_msg.empty();
  std::vector<BlockPlan> plans;
  if (message_mode) {
    plans = encode_message(spec.bob_msg, spec.sonai_msg, cfg, options.codebook).blocks;
  } else {
    cfg.validate();
    BlockPlan p;
    p.config = cfg;
    p.bits = parse_bit_pair(spec.bits);
    p.codebook = session_codebook(cfg, options);
    p.block = session_block(cfg, p.bits, p.codebook);
    plans.push_back(std::move(p));
  }

  std::vector<SessionResult> results;
  std::ostringstream transcript;
  std::ostringstream events;
  for (std::size_t b = 0; b < plans.size(); ++b) {
    const auto& plan = plans[b];
    results.push_back(run_prepared(plan.config, plan.codebook, plan.block, options));
    const auto& r = results.back();
    SessionHeader h{b, plan.config, plan.bits, spec.strategy_bob, spec.strategy_sonai, options.policy,
                    r.codebook};
    write_transcript(transcript, h, r.transcript);
    write_event_log(events, r.log);
    out << "block " << b << " bits=" << plan.bits.str() << " ticks=" << r.ticks << '\n';
    out << "  bob:   " << describe(r.bob) << '\n';
    out << "  sonai: " << describe(r.sonai) << '\n';
  }

  write_file(spec.out, transcript.str());
  out << "transcript: " << spec.out << '\n';
  if (!spec.events_path.empty()) {
    write_file(spec.events_path, events.str());
    out << "event log: " << spec.events_path << '\n';
  }

  const MessageDecode m = decode_message(results);
  if (!m.ok) {
    out << "result: failed at block " << m.failed_block.value_or(0);
    if (m.abort_reason) out << " (" << abort_reason_name(*m.abort_reason) << ")";
    out << '\n';
    return kExitAbort;
  }
  if (message_mode) {
    out << "result: Bob=" << m.bob_msg << ", Sonai=" << m.sonai_msg << '\n';
  } else {
    const BitPair bits = results.front().bob.bits;
    out << "result: Bob=" << int(bits.bob) << ", Sonai=" << int(bits.sonai) << '\n';
  }
  return kExitOk;
}

inline int cmd_montecarlo(const RunSpec& spec, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(spec.seed);
  out << "seed: " << seed << '\n';
  MonteCarloSpec mc;
  mc.config = make_config(spec, seed);
  mc.options = make_options(spec);
  mc.options.codebook = fixed_codebook(spec, mc.config);
  mc.trials = spec.trials;
  mc.workers = spec.workers > 0 ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
  if (spec.mode == "honest") {
    mc.mode = McMode::Honest;
    if (spec.mc_bits != "random") mc.bits = parse_bit_pair(spec.mc_bits);
  } else if (spec.mode == "soundness") {
    mc.mode = McMode::Soundness;
    mc.bits = parse_bit_pair(spec.truth);
    mc.candidate = parse_bit_pair(spec.candidate);
  } else {
    throw ValidationError("mode must be honest or soundness");
  }

  const auto records = run_trials(mc);
  const StatsReport report = aggregate(records);
  std::ostringstream csv;
  write_trials_csv(csv, mc, records);
  write_file(spec.out + ".csv", csv.str());
  write_file(spec.out + ".json", report_to_json(mc, report).dump(2) + "\n");

  out << "trials: " << report.trials << '\n';
  for (const auto& [outcome, count] : report.outcome_counts) out << "  " << outcome << ": " << count << '\n';
  out << "decode_success_rate: " << exact_double(report.decode_success_rate) << '\n';
  out << "mean_confidence: " << exact_double(report.mean_confidence) << '\n';
  for (const auto& [d, tally] : report.survival_by_distance)
    out << "wrong candidates at distance " << d << ": " << tally.survived << "/" << tally.trials
        << " survived\n";
  if (report.candidate_survival)
    out << "candidate " << mc.candidate.str() << " survival: " << report.candidate_survival->survived
        << "/" << report.candidate_survival->trials << " = "
        << exact_double(report.candidate_survival_rate()) << '\n';
  out << "wrote " << spec.out << ".csv and " << spec.out << ".json\n";
  return kExitOk;
}

inline int cmd_codebook_gen(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  Codebook cb;
  if (spec.as_printed) {
    cb = paper_codebook_as_printed();
  } else if (spec.paper_codebook) {
    cb = paper_codebook();
  } else {
    const std::uint64_t seed = resolve_seed(spec.seed);
    err << "seed: " << seed << '\n';
    Rng rng = Rng(seed).split(kCodebookStream);
    try {
      cb = generate_codebook(spec.n, spec.lambda, rng, spec.max_rejections);
    } catch (const CapacityError& ex) {
      err << "error: " << ex.what() << '\n'
          << "hint: lambda must be below n; try --lambda " << std::max<std::size_t>(1, spec.n / 4)
          << ", a larger --n, or a larger --max-rejections\n";
      return kExitUsage;
    }
  }
  const std::string text = codebook_to_json(cb).dump(2) + "\n";
  if (spec.out.empty() || spec.out == "-") {
    out << text;
  } else {
    write_file(spec.out, text);
    err << "codebook: " << spec.out << '\n';
  }
  return kExitOk;
}

inline int cmd_codebook_validate(const RunSpec& spec, std::ostream& out) {
  const Codebook cb = parse_codebook(read_file(spec.codebook_path));
  const CodebookReport report = validate_codebook(cb);
  if (report.ok()) {
    out << "ok: n=" << cb.n << " lambda=" << cb.lambda << '\n';
    return kExitOk;
  }
  out << report.defects.size() << " defect(s):\n";
  for (const auto& d : report.defects) out << "  " << d.message << '\n';
  return kExitAbort;
}

inline int cmd_replay(const RunSpec& spec, std::ostream& out) {
  std::istringstream in(read_file(spec.transcript_path));
  auto blocks = read_transcript(in);
  if (blocks.empty()) throw ParseError("transcript has no header");
  std::optional<Codebook> override;
  if (!spec.codebook_path.empty()) override = load_codebook(read_file(spec.codebook_path));

  bool all_match = true;
  bool all_decoded = true;
  for (const auto& block : blocks) {
    const auto& h = block.header;
    const Codebook& cb = override ? *override : h.codebook;
    if (cb.n != h.config.n) throw ValidationError("codebook length does not match the transcript");
    out << "block " << h.block << " seed=" << h.config.seed << '\n';
    for (Party p : {Party::Bob, Party::Sonai}) {
      const auto recorded = block.recorded(p);
      const DecodeResult r =
          replay_receiver(p, h.config, cb, h.bits, block.transcript.events(), recorded);
      out << "  " << party_name(p) << ": " << describe(r);
      if (recorded) {
        const bool match = r.same_outcome(*recorded) && r.events_seen == recorded->events_seen;
        all_match = all_match && match;
        out << (match ? " [matches record]" : " [MISMATCH: recorded " + describe(*recorded) + "]");
      } else {
        out << " [no terminal record]";
      }
      out << '\n';
      all_decoded = all_decoded && r.decoded();
    }
  }
  if (!all_match) return kExitAbort;
  return all_decoded ? kExitOk : kExitAbort;
}

inline void add_protocol_flags(CLI::App& cmd, RunSpec& s) {
  cmd.add_option("--n", s.n, "block length (EPR pairs per bit pair)")->capture_default_str();
  cmd.add_option("--lambda", s.lambda, "minimum effective distance of generated codebooks")
      ->capture_default_str();
  cmd.add_option("--noise", s.noise, "per-particle flip probability in [0, 0.5]")->capture_default_str();
  cmd.add_option("--delta", s.delta, "violation tolerance (default 0, or 0.25 when noise > 0)");
  cmd.add_option("--confidence-target", s.confidence_target, "decode threshold in (0, 1)")
      ->capture_default_str();
  cmd.add_option("--seed", s.seed, "master seed (falls back to ENTPOST_SEED, then entropy)");
  cmd.add_option("--first", s.first, "who reveals first: bob or sonai")->capture_default_str();
  cmd.add_option("--strategy-bob", s.strategy_bob, "honest | withhold:K | dump | lie:P")
      ->capture_default_str();
  cmd.add_option("--strategy-sonai", s.strategy_sonai, "honest | withhold:K | dump | lie:P")
      ->capture_default_str();
  cmd.add_option("--policy-one-ahead", s.policy_one_ahead, "reveals the first mover may run ahead")
      ->capture_default_str();
  cmd.add_option("--timeout", s.timeout, "idle ticks before Abort(Timeout)")->capture_default_str();
  cmd.add_flag("--reject-excess", s.reject_excess, "abort when the counterpart runs ahead of its turn");
  cmd.add_option("--codebook", s.codebook_path, "shared codebook file instead of a fresh one per session");
  cmd.add_flag("--paper-codebook", s.paper_codebook, "use the built-in 8-pair codebook");
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunSpec s;
  CLI::App app{"Three-party entangled double-bit exchange simulator", "entpost"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one session (or one per block of a message)");
  detail::add_protocol_flags(*run, s);
  run->add_option("--bits", s.bits, "bit pair as two characters: Bob's bit then Sonai's")
      ->capture_default_str();
  run->add_option("--bob-msg", s.bob_msg, "Bob's message as a 0/1 string");
  run->add_option("--sonai-msg", s.sonai_msg, "Sonai's message as a 0/1 string");
  run->add_option("--out", s.out, "transcript file (JSON lines, default transcript.jsonl)");
  run->add_option("--events", s.events_path, "network event log file (JSON lines)");

  auto* mc = app.add_subcommand("montecarlo", "run many independent seeded sessions");
  detail::add_protocol_flags(*mc, s);
  mc->add_option("--trials", s.trials, "number of sessions")->capture_default_str();
  mc->add_option("--workers", s.workers, "worker threads (0 = hardware concurrency)")->capture_default_str();
  mc->add_option("--mode", s.mode, "honest or soundness")->capture_default_str();
  mc->add_option("--bits", s.mc_bits, "fixed bit pair, or 'random'")->capture_default_str();
  mc->add_option("--truth", s.truth, "soundness mode: encoded bit pair")->capture_default_str();
  mc->add_option("--candidate", s.candidate, "soundness mode: wrong entry to track")->capture_default_str();
  mc->add_option("--out", s.out, "output prefix for .csv and .json (default montecarlo)");

  auto* cb = app.add_subcommand("codebook", "generate or validate codebooks");
  cb->require_subcommand(1);
  auto* gen = cb->add_subcommand("gen", "generate a codebook");
  gen->add_option("--n", s.n, "block length")->capture_default_str();
  gen->add_option("--lambda", s.lambda, "minimum effective distance")->capture_default_str();
  gen->add_option("--seed", s.seed, "seed (falls back to ENTPOST_SEED, then entropy)");
  gen->add_option("--max-rejections", s.max_rejections, "rejection-sampling budget per entry")
      ->capture_default_str();
  gen->add_flag("--paper", s.paper_codebook, "emit the built-in 8-pair codebook");
  gen->add_flag("--as-printed", s.as_printed, "emit the 8-pair codebook with its misprinted fourth sequence");
  gen->add_option("--out", s.out, "output file (default stdout)");
  auto* val = cb->add_subcommand("validate", "check a codebook file and list its defects");
  val->add_option("file,--codebook", s.codebook_path, "codebook file")->required();

  auto* replay = app.add_subcommand("replay", "recompute decodes from a recorded transcript");
  replay->add_option("transcript,--transcript", s.transcript_path, "transcript file")->required();
  replay->add_option("--codebook", s.codebook_path, "codebook file (default: the one in the transcript)");

  std::vector<const char*> argv{"entpost"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) {
      if (s.out.empty()) s.out = "transcript.jsonl";
      return detail::cmd_run(s, out);
    }
    if (*mc) {
      if (s.out.empty()) s.out = "montecarlo";
      return detail::cmd_montecarlo(s, out);
    }
    if (*gen) return detail::cmd_codebook_gen(s, out, err);
    if (*val) return detail::cmd_codebook_validate(s, out);
    if (*replay) return detail::cmd_replay(s, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ProtocolViolation& e) {
    err << "error: protocol violation: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace entpost
