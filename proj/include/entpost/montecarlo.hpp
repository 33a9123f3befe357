#pragma once

// Independent seeded sessions fanned out over a worker pool, aggregated into
// a StatsReport. Every trial owns its own seed and world, and results are
// stored by trial index, so the report does not depend on the worker count.

#include <array>
#include <atomic>
#include <charconv>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "entpost/codebook_io.hpp"
#include "entpost/session.hpp"

namespace entpost {

enum class McMode : std::uint8_t { Honest, Soundness };

struct MonteCarloSpec {
  ProtocolConfig config;  // config.seed is the master seed
  SessionOptions options;
  McMode mode = McMode::Honest;
  std::size_t trials = 1000;
  std::size_t workers = 1;
  /// Fixed bit pair for every trial; random per trial when unset.
  std::optional<BitPair> bits;
  /// Soundness mode: the wrong entry whose survival is tallied.
  BitPair candidate{1, 1};
};

inline constexpr std::uint64_t kBitsStream = 7;

struct WrongCandidate {
  BitPair bits;
  std::size_t distance = 0;
  bool survived = false;
};

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  BitPair bits;
  std::string outcome;  // correct | wrong | undecided | abort:<reason>
  DecodeStatus bob_status = DecodeStatus::Undecided;
  DecodeStatus sonai_status = DecodeStatus::Undecided;
  std::optional<AbortReason> bob_abort;
  std::optional<AbortReason> sonai_abort;
  double confidence = 0.0;
  std::size_t fairness_gap = 0;
  std::vector<WrongCandidate> wrong;
  std::optional<bool> candidate_survived;
};

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) {
  return derive_seed(master, trial);
}

inline std::string classify(const SessionResult& r, BitPair truth) {
  const DecodeResult* results[] = {&r.bob, &r.sonai};
  for (const auto* d : results)
    if (d->decoded() && !(d->bits == truth)) return "wrong";
  if (r.both_decoded()) return "correct";
  for (const auto* d : results)
    if (d->status == DecodeStatus::Abort) return "abort:" + std::string(abort_reason_name(*d->abort_reason));
  return "undecided";
}

inline TrialRecord run_trial(const MonteCarloSpec& spec, std::size_t trial) {
  ProtocolConfig cfg = spec.config;
  cfg.seed = trial_seed(spec.config.seed, trial);
  BitPair bits;
  if (spec.bits) {
    bits = *spec.bits;
  } else {
    Rng rng = Rng(cfg.seed).split(kBitsStream);
    bits.bob = rng.coin() ? 1 : 0;
    bits.sonai = rng.coin() ? 1 : 0;
  }
  const SessionResult r = run_session(cfg, bits, spec.options);

  TrialRecord t;
  t.trial = trial;
  t.seed = cfg.seed;
  t.bits = bits;
  t.outcome = classify(r, bits);
  t.bob_status = r.bob.status;
  t.sonai_status = r.sonai.status;
  t.bob_abort = r.bob.abort_reason;
  t.sonai_abort = r.sonai.abort_reason;
  t.confidence = std::min(r.bob.confidence, r.sonai.confidence);
  t.fairness_gap = fairness_gap(r.transcript);

  const std::size_t truth = r.codebook.index_for_bits(bits);
  for (BitPair other : kPaperOrder) {
    if (other == bits) continue;
    const std::size_t c = r.codebook.index_for_bits(other);
    WrongCandidate w{other, effective_distance(r.codebook.entries[c].pairing, r.codebook.entries[truth].pairing)};
    w.survived = !r.bob_candidates.empty() && !r.sonai_candidates.empty() &&
                 r.bob_candidates[c].alive && r.sonai_candidates[c].alive;
    t.wrong.push_back(w);
  }

  if (spec.mode == McMode::Soundness) {
    // Re-decode the recorded transcript from Bob's side and ask whether the
    // designated wrong entry is still consistent with everything disclosed.
    const auto view = replay_view(Party::Bob, measure_all(Party::Bob, r.block), r.codebook, cfg,
                                  r.transcript.events());
    t.candidate_survived = view.candidates()[r.codebook.index_for_bits(spec.candidate)].alive;
  }
  return t;
}

inline std::vector<TrialRecord> run_trials(const MonteCarloSpec& spec) {
  spec.config.validate();
  if (spec.trials == 0) throw ValidationError("trials must be at least 1");
  if (spec.mode == McMode::Soundness && (!spec.bits || *spec.bits == spec.candidate))
    throw ValidationError("soundness mode needs a truth bit pair distinct from the candidate");
  std::vector<TrialRecord> records(spec.trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= spec.trials) return;
      try {
        records[i] = run_trial(spec, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = spec.trials;
        return;
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(spec.workers, spec.trials));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

struct SurvivalTally {
  std::size_t trials = 0;
  std::size_t survived = 0;
};

struct StatsReport {
  std::size_t trials = 0;
  std::map<std::string, std::size_t> outcome_counts;
  std::map<std::string, std::size_t> abort_counts;
  double decode_success_rate = 0.0;
  double mean_confidence = 0.0;
  std::map<std::size_t, std::size_t> fairness_gap_histogram;
  std::map<std::size_t, SurvivalTally> survival_by_distance;
  std::optional<SurvivalTally> candidate_survival;

  double rate(const std::string& outcome) const {
    const auto it = outcome_counts.find(outcome);
    return it == outcome_counts.end() ? 0.0
                                      : static_cast<double>(it->second) / static_cast<double>(trials);
  }
  double candidate_survival_rate() const {
    return candidate_survival ? static_cast<double>(candidate_survival->survived) /
                                    static_cast<double>(candidate_survival->trials)
                              : 0.0;
  }
};

inline StatsReport aggregate(const std::vector<TrialRecord>& records) {
  StatsReport s;
  s.trials = records.size();
  double confidence_sum = 0.0;
  for (const auto& t : records) {
    ++s.outcome_counts[t.outcome];
    if (t.outcome.starts_with("abort:")) ++s.abort_counts[t.outcome.substr(6)];
    confidence_sum += t.confidence;
    ++s.fairness_gap_histogram[t.fairness_gap];
    for (const auto& w : t.wrong) {
      auto& tally = s.survival_by_distance[w.distance];
      ++tally.trials;
      if (w.survived) ++tally.survived;
    }
    if (t.candidate_survived) {
      if (!s.candidate_survival) s.candidate_survival.emplace();
      ++s.candidate_survival->trials;
      if (*t.candidate_survived) ++s.candidate_survival->survived;
    }
  }
  if (s.trials > 0) {
    s.decode_success_rate = s.rate("correct");
    s.mean_confidence = confidence_sum / static_cast<double>(s.trials);
  }
  return s;
}

/// Shortest decimal text that parses back to the same double.
inline std::string exact_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline nlohmann::ordered_json spec_to_json(const MonteCarloSpec& spec) {
  nlohmann::ordered_json j;
  j["mode"] = spec.mode == McMode::Honest ? "honest" : "soundness";
  j["seed"] = spec.config.seed;
  j["trials"] = spec.trials;
  j["n"] = spec.config.n;
  j["lambda"] = spec.config.lambda;
  j["noise"] = spec.config.noise.flip_probability();
  j["delta"] = spec.config.violation_tolerance;
  j["confidence_target"] = spec.config.confidence_target;
  j["reveal_first"] = party_name(spec.config.reveal_first);
  j["strategy_bob"] = strategy_name(spec.options.bob);
  j["strategy_sonai"] = strategy_name(spec.options.sonai);
  j["policy_one_ahead"] = spec.options.policy.one_ahead_limit;
  j["timeout"] = spec.options.policy.timeout_ticks;
  j["bits"] = spec.bits ? nlohmann::ordered_json(spec.bits->str()) : nlohmann::ordered_json("random");
  if (spec.mode == McMode::Soundness) j["candidate"] = spec.candidate.str();
  j["codebook"] = spec.options.codebook ? codebook_to_json(*spec.options.codebook)
                                        : nlohmann::ordered_json("fresh-per-session");
  return j;
}

inline nlohmann::ordered_json report_to_json(const MonteCarloSpec& spec, const StatsReport& s) {
  nlohmann::ordered_json j;
  j["config"] = spec_to_json(spec);
  j["trials"] = s.trials;
  j["decode_success_rate"] = s.decode_success_rate;
  j["outcome_counts"] = s.outcome_counts;
  j["abort_counts"] = s.abort_counts;
  j["mean_confidence"] = s.mean_confidence;
  nlohmann::ordered_json gaps = nlohmann::ordered_json::object();
  for (const auto& [gap, count] : s.fairness_gap_histogram) gaps[std::to_string(gap)] = count;
  j["fairness_gap_histogram"] = gaps;
  nlohmann::ordered_json surv = nlohmann::ordered_json::object();
  for (const auto& [d, tally] : s.survival_by_distance) {
    surv[std::to_string(d)] = {{"trials", tally.trials},
                               {"survived", tally.survived},
                               {"rate", static_cast<double>(tally.survived) / static_cast<double>(tally.trials)}};
  }
  j["wrong_candidate_survival_by_distance"] = surv;
  if (s.candidate_survival) {
    j["candidate_survival"] = {{"trials", s.candidate_survival->trials},
                               {"survived", s.candidate_survival->survived},
                               {"rate", s.candidate_survival_rate()}};
  }
  return j;
}

inline void write_trials_csv(std::ostream& out, const MonteCarloSpec& spec,
                             const std::vector<TrialRecord>& records) {
  out << "# " << spec_to_json(spec).dump() << '\n';
  out << "trial,seed,bob_bit,sonai_bit,outcome,bob_status,sonai_status,bob_abort,sonai_abort,"
         "confidence,fairness_gap";
  for (int w = 1; w <= 3; ++w) out << ",wrong" << w << "_bits,wrong" << w << "_distance,wrong" << w << "_survived";
  out << ",candidate_survived\n";
  auto reason = [](const std::optional<AbortReason>& r) {
    return r ? std::string(abort_reason_name(*r)) : std::string();
  };
  for (const auto& t : records) {
    out << t.trial << ',' << t.seed << ',' << int(t.bits.bob) << ',' << int(t.bits.sonai) << ','
        << t.outcome << ',' << decode_status_name(t.bob_status) << ','
        << decode_status_name(t.sonai_status) << ',' << reason(t.bob_abort) << ','
        << reason(t.sonai_abort) << ',' << exact_double(t.confidence) << ',' << t.fairness_gap;
    for (const auto& w : t.wrong) out << ',' << w.bits.str() << ',' << w.distance << ',' << int(w.survived);
    out << ',';
    if (t.candidate_survived) out << int(*t.candidate_survived);
    out << '\n';
  }
}

}  // namespace entpost
