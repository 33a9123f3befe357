#pragma once

// Sequence codes, relative pairings and the four-entry codebook.
//
// Labels are 1-based (A = 1, B = 2, ...). Positions inside a sequence and
// inside a Pairing are 0-based; conversion to 1-based positions happens only
// at the I/O boundary.

#include <algorithm>
#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "entpost/errors.hpp"
#include "entpost/rng.hpp"

namespace entpost {

using Label = std::uint32_t;
using SequenceCode = std::vector<Label>;

/// "A".."Z" for the first 26 labels, the decimal id beyond that.
inline std::string label_name(Label l) {
  if (l >= 1 && l <= 26) return std::string(1, static_cast<char>('A' + l - 1));
  return std::to_string(l);
}

/// Parses a string of capital letters ("BFGAEHDC") into labels.
inline SequenceCode sequence_from_letters(std::string_view letters) {
  SequenceCode s;
  s.reserve(letters.size());
  for (char c : letters) {
    if (c < 'A' || c > 'Z') throw ValidationError(std::string("not a label letter: ") + c);
    s.push_back(static_cast<Label>(c - 'A' + 1));
  }
  return s;
}

inline SequenceCode identity_sequence(std::size_t n) {
  SequenceCode s(n);
  for (std::size_t k = 0; k < n; ++k) s[k] = static_cast<Label>(k + 1);
  return s;
}

struct SequenceDefects {
  std::size_t length = 0;
  std::size_t expected = 0;
  std::vector<Label> duplicates;    // each repeated label once, ascending
  std::vector<Label> missing;       // ascending
  std::vector<Label> out_of_range;  // ascending, unique

  bool ok() const noexcept {
    return duplicates.empty() && missing.empty() && out_of_range.empty() && length == expected;
  }

  std::string describe() const {
    std::ostringstream out;
    auto list = [&out](const char* what, const std::vector<Label>& labels) {
      if (labels.empty()) return;
      out << what << " {";
      for (std::size_t i = 0; i < labels.size(); ++i) out << (i ? ", " : "") << label_name(labels[i]);
      out << "} ";
    };
    if (length != expected) out << "length " << length << " != " << expected << " ";
    list("duplicate", duplicates);
    list("missing", missing);
    list("out-of-range", out_of_range);
    std::string s = out.str();
    if (!s.empty()) s.pop_back();
    return s.empty() ? "ok" : s;
  }
};

inline SequenceDefects validate_sequence(std::span<const Label> s, std::size_t n) {
  SequenceDefects d;
  d.length = s.size();
  d.expected = n;
  std::vector<std::size_t> count(n + 1, 0);
  for (Label l : s) {
    if (l == 0 || l > n) {
      d.out_of_range.push_back(l);
    } else if (++count[l] == 2) {
      d.duplicates.push_back(l);
    }
  }
  for (Label l = 1; l <= n; ++l)
    if (count[l] == 0) d.missing.push_back(l);
  std::sort(d.duplicates.begin(), d.duplicates.end());
  std::sort(d.out_of_range.begin(), d.out_of_range.end());
  d.out_of_range.erase(std::unique(d.out_of_range.begin(), d.out_of_range.end()),
                       d.out_of_range.end());
  return d;
}

/// Repairs a length-n sequence by replacing every repeat occurrence (in
/// position order) with the missing labels in ascending order.
inline SequenceCode correct_sequence(const SequenceCode& s, std::size_t n) {
  const SequenceDefects d = validate_sequence(s, n);
  if (s.size() != n || !d.out_of_range.empty())
    throw ValidationError("only duplicate/missing defects can be corrected");
  SequenceCode out = s;
  std::vector<bool> seen(n + 1, false);
  auto next_missing = d.missing.begin();
  for (Label& l : out) {
    if (seen[l]) l = *next_missing++;
    seen[l] = true;
  }
  return out;
}

/// Bijection between Bob positions and Sonai positions:
/// map(k) is the Sonai position holding the partner of Bob's particle k.
class Pairing {
 public:
  Pairing() = default;

  explicit Pairing(std::vector<std::uint32_t> map) : map_(std::move(map)), inv_(map_.size()) {
    std::vector<bool> hit(map_.size(), false);
    for (std::size_t k = 0; k < map_.size(); ++k) {
      const auto p = map_[k];
      if (p >= map_.size() || hit[p]) throw ValidationError("pairing is not a bijection");
      hit[p] = true;
      inv_[p] = static_cast<std::uint32_t>(k);
    }
  }

  static Pairing identity(std::size_t n) {
    std::vector<std::uint32_t> m(n);
    for (std::size_t k = 0; k < n; ++k) m[k] = static_cast<std::uint32_t>(k);
    return Pairing(std::move(m));
  }

  static Pairing from_one_based(std::span<const std::uint32_t> one_based) {
    std::vector<std::uint32_t> m(one_based.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (one_based[k] == 0) throw ValidationError("1-based pairing contains 0");
      m[k] = one_based[k] - 1;
    }
    return Pairing(std::move(m));
  }
  static Pairing from_one_based(std::initializer_list<std::uint32_t> one_based) {
    return from_one_based(std::span<const std::uint32_t>(one_based.begin(), one_based.size()));
  }

  std::vector<std::uint32_t> one_based() const {
    std::vector<std::uint32_t> out(map_.size());
    for (std::size_t k = 0; k < map_.size(); ++k) out[k] = map_[k] + 1;
    return out;
  }

  std::size_t size() const noexcept { return map_.size(); }
  bool empty() const noexcept { return map_.empty(); }
  std::uint32_t map(std::size_t bob_position) const { return map_[bob_position]; }
  std::uint32_t inv(std::size_t sonai_position) const { return inv_[sonai_position]; }
  std::span<const std::uint32_t> forward() const noexcept { return map_; }

  friend bool operator==(const Pairing& a, const Pairing& b) { return a.map_ == b.map_; }

 private:
  std::vector<std::uint32_t> map_;
  std::vector<std::uint32_t> inv_;
};

inline Pairing relative_pairing(const SequenceCode& s_i, const SequenceCode& s_j) {
  if (s_i.size() != s_j.size()) throw ValidationError("sequence codes differ in length");
  const std::size_t n = s_i.size();
  if (!validate_sequence(s_i, n).ok() || !validate_sequence(s_j, n).ok())
    throw ValidationError("sequence code is not a permutation of 1..n");
  std::vector<std::uint32_t> position_in_j(n + 1);
  for (std::size_t p = 0; p < n; ++p) position_in_j[s_j[p]] = static_cast<std::uint32_t>(p);
  std::vector<std::uint32_t> m(n);
  for (std::size_t k = 0; k < n; ++k) m[k] = position_in_j[s_i[k]];
  return Pairing(std::move(m));
}

inline std::vector<std::size_t> mismatch_set(const Pairing& a, const Pairing& b) {
  if (a.size() != b.size()) throw ValidationError("pairings differ in length");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a.map(k) != b.map(k)) out.push_back(k);
  return out;
}

/// |M| minus the number of cycles of sigma = truth^-1 o candidate on the
/// mismatch set M. A wrong candidate passes every noiseless check with
/// probability 2^-distance.
inline std::size_t effective_distance(const Pairing& candidate, const Pairing& truth) {
  const auto mismatched = mismatch_set(candidate, truth);
  std::vector<bool> visited(candidate.size(), false);
  std::size_t cycles = 0;
  for (std::size_t start : mismatched) {
    if (visited[start]) continue;
    ++cycles;
    for (std::size_t k = start; !visited[k]; k = truth.inv(candidate.map(k))) visited[k] = true;
  }
  return mismatched.size() - cycles;
}

struct BitPair {
  std::uint8_t bob = 0;
  std::uint8_t sonai = 0;

  friend bool operator==(const BitPair&, const BitPair&) = default;
  std::string str() const { return std::string{char('0' + bob), char('0' + sonai)}; }
};

/// The order in which the four entries are listed and tried: 00, 11, 01, 10.
inline constexpr std::array<BitPair, 4> kPaperOrder{
    BitPair{0, 0}, BitPair{1, 1}, BitPair{0, 1}, BitPair{1, 0}};

inline std::size_t paper_rank(BitPair b) {
  for (std::size_t i = 0; i < kPaperOrder.size(); ++i)
    if (kPaperOrder[i] == b) return i;
  throw ValidationError("bit pair out of range");
}

inline BitPair parse_bit_pair(std::string_view s) {
  if (s.size() != 2 || (s[0] != '0' && s[0] != '1') || (s[1] != '0' && s[1] != '1'))
    throw ValidationError("bit pair must be two characters of 0/1, got '" + std::string(s) + "'");
  return BitPair{static_cast<std::uint8_t>(s[0] - '0'), static_cast<std::uint8_t>(s[1] - '0')};
}

struct CodebookEntry {
  BitPair bits;
  SequenceCode s_i;
  SequenceCode s_j;
  Pairing pairing;  // empty when s_i/s_j are not valid permutations
};

inline CodebookEntry make_entry(BitPair bits, SequenceCode s_i, SequenceCode s_j) {
  CodebookEntry e{bits, std::move(s_i), std::move(s_j), {}};
  e.pairing = relative_pairing(e.s_i, e.s_j);
  return e;
}

struct Codebook {
  std::size_t n = 0;
  std::size_t lambda = 0;
  std::vector<CodebookEntry> entries;

  std::size_t index_for_bits(BitPair bits) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].bits == bits) return i;
    throw ValidationError("codebook has no entry for bits " + bits.str());
  }
  const CodebookEntry& entry_for_bits(BitPair bits) const { return entries[index_for_bits(bits)]; }
};

inline const CodebookEntry& entry_for_bits(const Codebook& cb, std::uint8_t bob_bit,
                                           std::uint8_t sonai_bit) {
  return cb.entry_for_bits(BitPair{bob_bit, sonai_bit});
}

struct CodebookDefect {
  enum class Kind {
    BadParameters,
    EntryCount,
    InvalidBits,
    DuplicateBits,
    MissingBits,
    InvalidSequence,
    PairingInconsistent,
    BelowSeparation,
  };
  Kind kind;
  std::string message;
  std::optional<SequenceDefects> sequence;
};

struct CodebookReport {
  std::vector<CodebookDefect> defects;

  bool ok() const noexcept { return defects.empty(); }
  bool has(CodebookDefect::Kind k) const {
    return std::any_of(defects.begin(), defects.end(),
                       [k](const CodebookDefect& d) { return d.kind == k; });
  }
};

inline CodebookReport validate_codebook(const Codebook& cb) {
  using Kind = CodebookDefect::Kind;
  CodebookReport r;
  auto add = [&r](Kind k, std::string msg, std::optional<SequenceDefects> seq = std::nullopt) {
    r.defects.push_back({k, std::move(msg), std::move(seq)});
  };

  if (cb.n == 0) add(Kind::BadParameters, "n must be at least 1");
  if (cb.entries.size() != 4)
    add(Kind::EntryCount, "expected 4 entries, found " + std::to_string(cb.entries.size()));

  std::array<int, 4> seen{};
  for (std::size_t e = 0; e < cb.entries.size(); ++e) {
    const auto& entry = cb.entries[e];
    const std::string where = "entry " + std::to_string(e);
    if (entry.bits.bob > 1 || entry.bits.sonai > 1) {
      add(Kind::InvalidBits, where + ": bits out of range");
    } else if (++seen[paper_rank(entry.bits)] == 2) {
      add(Kind::DuplicateBits, where + ": duplicate bit pair " + entry.bits.str());
    }
    bool sequences_ok = true;
    for (const auto* seq : {&entry.s_i, &entry.s_j}) {
      auto d = validate_sequence(*seq, cb.n);
      if (!d.ok()) {
        sequences_ok = false;
        std::string msg = where + (seq == &entry.s_i ? " s_i: " : " s_j: ") + d.describe();
        add(Kind::InvalidSequence, std::move(msg), std::move(d));
      }
    }
    if (sequences_ok && !(entry.pairing == relative_pairing(entry.s_i, entry.s_j)))
      add(Kind::PairingInconsistent, where + ": cached pairing disagrees with its sequences");
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i] == 0 && cb.entries.size() == 4)
      add(Kind::MissingBits, "no entry for bits " + kPaperOrder[i].str());

  for (std::size_t a = 0; a < cb.entries.size(); ++a) {
    for (std::size_t b = a + 1; b < cb.entries.size(); ++b) {
      const auto& pa = cb.entries[a].pairing;
      const auto& pb = cb.entries[b].pairing;
      if (pa.empty() || pb.empty() || pa.size() != pb.size()) continue;
      const auto d = effective_distance(pa, pb);
      if (d < cb.lambda)
        add(Kind::BelowSeparation, "entries " + std::to_string(a) + " and " + std::to_string(b) +
                                       " are at distance " + std::to_string(d) + " < lambda " +
                                       std::to_string(cb.lambda));
    }
  }
  return r;
}

inline constexpr std::size_t kDefaultRejectionBudget = 10'000;

/// Draws four pairwise lambda-separated entries. S_i is the identity for
/// every entry; entries are emitted in paper order.
inline Codebook generate_codebook(std::size_t n, std::size_t lambda, Rng& rng,
                                  std::size_t rejection_budget = kDefaultRejectionBudget) {
  if (n == 0) throw ValidationError("n must be at least 1");
  if (lambda == 0) throw ValidationError("lambda must be at least 1");
  // Distance never exceeds n - 1 (sigma has at least one cycle).
  if (lambda >= n)
    throw CapacityError("no pairings at distance " + std::to_string(lambda) + " exist for n = " +
                        std::to_string(n) + "; use n > lambda");

  Codebook cb;
  cb.n = n;
  cb.lambda = lambda;
  const SequenceCode identity = identity_sequence(n);
  std::size_t rejections = 0;
  for (BitPair bits : kPaperOrder) {
    for (;;) {
      SequenceCode s_j = identity;
      rng.shuffle(std::span<Label>(s_j));
      CodebookEntry entry = make_entry(bits, identity, std::move(s_j));
      const bool separated =
          std::all_of(cb.entries.begin(), cb.entries.end(), [&](const CodebookEntry& other) {
            return effective_distance(entry.pairing, other.pairing) >= lambda;
          });
      if (separated) {
        cb.entries.push_back(std::move(entry));
        break;
      }
      if (++rejections > rejection_budget)
        throw CapacityError("gave up after " + std::to_string(rejection_budget) +
                            " rejections: n = " + std::to_string(n) +
                            " is too small for lambda = " + std::to_string(lambda) +
                            "; increase n or lower lambda");
    }
  }
  return cb;
}

/// The eight-pair example sequences exactly as printed, including the
/// fourth S_j which repeats E and C and omits F and G.
inline std::array<std::pair<BitPair, SequenceCode>, 4> paper_sequences_as_printed() {
  return {{
      {BitPair{0, 0}, sequence_from_letters("BFGAEHDC")},
      {BitPair{1, 1}, sequence_from_letters("ACGEBDHF")},
      {BitPair{0, 1}, sequence_from_letters("FABDCGEH")},
      {BitPair{1, 0}, sequence_from_letters("ECHBEACD")},
  }};
}

/// Raw codebook built from the printed sequences; fails validation.
inline Codebook paper_codebook_as_printed() {
  Codebook cb;
  cb.n = 8;
  cb.lambda = 1;
  for (auto& [bits, s_j] : paper_sequences_as_printed()) {
    CodebookEntry e{bits, identity_sequence(8), s_j, {}};
    if (validate_sequence(s_j, 8).ok()) e.pairing = relative_pairing(e.s_i, e.s_j);
    cb.entries.push_back(std::move(e));
  }
  return cb;
}

/// The eight-pair example with the fourth S_j repaired by correct_sequence
/// (E,C,H,B,F,A,G,D). lambda is the smallest pairwise distance, 4.
inline Codebook paper_codebook() {
  Codebook cb;
  cb.n = 8;
  for (auto& [bits, s_j] : paper_sequences_as_printed())
    cb.entries.push_back(make_entry(bits, identity_sequence(8), correct_sequence(s_j, 8)));
  std::size_t lambda = cb.n;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b)
      lambda = std::min(lambda, effective_distance(cb.entries[a].pairing, cb.entries[b].pairing));
  cb.lambda = lambda;
  return cb;
}

}  // namespace entpost
