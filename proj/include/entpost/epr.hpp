#pragma once

// z-basis statistics of singlet pairs.
//
// Every party measures in the same fixed basis, so a singlet is reproduced
// exactly by an anti-correlated fair coin. Outcomes are sampled when Alice
// prepares a block and handed out as predetermined measurement results.

#include <cstdint>
#include <string>
#include <vector>

#include "entpost/errors.hpp"
#include "entpost/rng.hpp"

namespace entpost {

enum class SpinOutcome : std::uint8_t { Plus, Minus };

constexpr SpinOutcome neg(SpinOutcome s) noexcept {
  return s == SpinOutcome::Plus ? SpinOutcome::Minus : SpinOutcome::Plus;
}

/// +1 for Plus, -1 for Minus.
constexpr int spin_value(SpinOutcome s) noexcept { return s == SpinOutcome::Plus ? 1 : -1; }

constexpr char spin_symbol(SpinOutcome s) noexcept { return s == SpinOutcome::Plus ? '+' : '-'; }

/// Outcomes of one pair: `i_side` travels in Bob's sequence, `j_side` in Sonai's.
struct PairOutcomes {
  SpinOutcome i_side = SpinOutcome::Plus;
  SpinOutcome j_side = SpinOutcome::Minus;

  bool anti_correlated() const noexcept { return i_side != j_side; }
  friend bool operator==(const PairOutcomes&, const PairOutcomes&) = default;
};

/// Independent per-side outcome flips (binary symmetric channel).
class NoiseModel {
 public:
  NoiseModel() = default;
  explicit NoiseModel(double flip_probability) : flip_probability_(flip_probability) {
    if (!(flip_probability >= 0.0 && flip_probability <= 0.5)) {
      throw ValidationError("flip probability must lie in [0, 0.5], got " +
                            std::to_string(flip_probability));
    }
  }

  double flip_probability() const noexcept { return flip_probability_; }
  bool noiseless() const noexcept { return flip_probability_ == 0.0; }

  /// Probability that a true pair shows equal outcomes: 2e(1-e).
  double pair_violation_rate() const noexcept {
    return 2.0 * flip_probability_ * (1.0 - flip_probability_);
  }

 private:
  double flip_probability_ = 0.0;
};

inline PairOutcomes sample_singlet(Rng& rng) {
  return rng.coin() ? PairOutcomes{SpinOutcome::Plus, SpinOutcome::Minus}
                    : PairOutcomes{SpinOutcome::Minus, SpinOutcome::Plus};
}

// Both flip draws are always consumed, so the stream position after a call
// does not depend on the noise rate.
inline PairOutcomes apply_noise(PairOutcomes p, const NoiseModel& noise, Rng& rng) {
  const double eps = noise.flip_probability();
  const bool flip_i = rng.bernoulli(eps);
  const bool flip_j = rng.bernoulli(eps);
  if (flip_i) p.i_side = neg(p.i_side);
  if (flip_j) p.j_side = neg(p.j_side);
  return p;
}

/// n independent noisy pairs; element l-1 belongs to EPR label l.
inline std::vector<PairOutcomes> sample_block(std::size_t n, const NoiseModel& noise, Rng& rng) {
  if (n == 0) throw ValidationError("block must contain at least one pair");
  std::vector<PairOutcomes> block;
  block.reserve(n);
  for (std::size_t l = 0; l < n; ++l) block.push_back(apply_noise(sample_singlet(rng), noise, rng));
  return block;
}

}  // namespace entpost
