#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "entpost/entpost.hpp"

namespace entpost::testing {

// Bob -> Sonai maps of the eight-pair example, 1-based.
inline const std::vector<std::uint32_t> kMap00{4, 1, 8, 7, 5, 2, 3, 6};
inline const std::vector<std::uint32_t> kMap11{1, 5, 2, 6, 4, 8, 3, 7};
inline const std::vector<std::uint32_t> kMap01{2, 3, 5, 4, 7, 1, 6, 8};
inline const std::vector<std::uint32_t> kMap10{6, 4, 2, 8, 1, 5, 7, 3};

inline Pairing one_based(const std::vector<std::uint32_t>& m) { return Pairing::from_one_based(m); }

/// Cycle count of truth^-1 o candidate over all positions (fixed points included).
inline std::size_t cycle_count(const Pairing& candidate, const Pairing& truth) {
  const std::size_t n = candidate.size();
  std::vector<bool> seen(n, false);
  std::size_t cycles = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++cycles;
    for (std::size_t k = s; !seen[k]; k = truth.inv(candidate.map(k))) seen[k] = true;
  }
  return cycles;
}

inline Codebook two_entry_codebook(const Pairing& truth, const Pairing& candidate) {
  Codebook cb;
  cb.n = truth.size();
  cb.lambda = 1;
  auto entry = [&](BitPair bits, const Pairing& p) {
    SequenceCode s_j(cb.n);
    for (std::size_t k = 0; k < cb.n; ++k) s_j[p.map(k)] = static_cast<Label>(k + 1);
    return make_entry(bits, identity_sequence(cb.n), std::move(s_j));
  };
  cb.entries.push_back(entry(BitPair{0, 0}, truth));
  cb.entries.push_back(entry(BitPair{1, 1}, candidate));
  return cb;
}

/// Noiseless block for entry 0 with singlet i-sides given by the bits of `mask`.
inline PreparedBlock block_from_mask(const Codebook& cb, std::uint64_t mask) {
  const auto& e = cb.entries[0];
  PreparedBlock b;
  b.entry = 0;
  b.bits = e.bits;
  b.pairing = e.pairing;
  b.bob.resize(cb.n);
  b.sonai.resize(cb.n);
  auto i_side = [mask](Label l) { return (mask >> (l - 1)) & 1 ? SpinOutcome::Plus : SpinOutcome::Minus; };
  for (std::size_t k = 0; k < cb.n; ++k) b.bob[k] = i_side(e.s_i[k]);
  for (std::size_t p = 0; p < cb.n; ++p) b.sonai[p] = neg(i_side(e.s_j[p]));
  return b;
}

/// Every reveal of both parties in strict alternation, Bob first.
inline std::vector<RevealEvent> full_transcript(const PreparedBlock& b) {
  std::vector<RevealEvent> events;
  std::uint64_t round = 1;
  for (std::uint32_t k = 0; k < b.bob.size(); ++k) {
    events.push_back({Party::Bob, k, b.bob[k], round++});
    events.push_back({Party::Sonai, k, b.sonai[k], round++});
  }
  return events;
}

inline ProtocolConfig noiseless_config(std::size_t n) {
  ProtocolConfig cfg;
  cfg.n = n;
  cfg.lambda = 1;
  return cfg;
}

/// Number of 2^n noiseless preparations of entry 0 under which entry 1 is
/// still alive for both receivers after the full transcript.
inline std::uint64_t surviving_preparations(const Codebook& cb) {
  const ProtocolConfig cfg = noiseless_config(cb.n);
  const auto& truth = cb.entries[0];
  std::vector<SpinOutcome> bob(cb.n), sonai(cb.n);
  ReceiverView bob_view(Party::Bob, bob, cb, cfg);
  ReceiverView sonai_view(Party::Sonai, sonai, cb, cfg);
  std::uint64_t survivors = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << cb.n); ++mask) {
    auto i_side = [mask](Label l) { return (mask >> (l - 1)) & 1 ? SpinOutcome::Plus : SpinOutcome::Minus; };
    for (std::size_t k = 0; k < cb.n; ++k) bob[k] = i_side(truth.s_i[k]);
    for (std::size_t p = 0; p < cb.n; ++p) sonai[p] = neg(i_side(truth.s_j[p]));
    bob_view.reset(bob);
    sonai_view.reset(sonai);
    for (std::uint32_t k = 0; k < cb.n; ++k) {
      sonai_view.update_candidates({Party::Bob, k, bob[k], 2 * k + 1});
      bob_view.update_candidates({Party::Sonai, k, sonai[k], 2 * k + 2});
    }
    if (bob_view.candidates()[1].alive && sonai_view.candidates()[1].alive) ++survivors;
  }
  return survivors;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("entpost-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace entpost::testing
