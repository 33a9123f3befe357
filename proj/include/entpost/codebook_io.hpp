#pragma once

#include <string>

#include <json.hpp>

#include "entpost/codebook.hpp"
#include "entpost/errors.hpp"

namespace entpost {

inline constexpr int kCodebookFormatVersion = 1;

inline nlohmann::ordered_json codebook_to_json(const Codebook& cb) {
  nlohmann::ordered_json doc;
  doc["version"] = kCodebookFormatVersion;
  doc["n"] = cb.n;
  doc["lambda"] = cb.lambda;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : cb.entries) {
    nlohmann::ordered_json j;
    j["bits"] = {e.bits.bob, e.bits.sonai};
    j["s_j"] = e.s_j;
    entries.push_back(std::move(j));
  }
  doc["entries"] = std::move(entries);
  return doc;
}

/// Reads the document without judging it: invalid sequences are kept so the
/// validator can report them. Schema problems raise ParseError.
inline Codebook codebook_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw ParseError("codebook document must be a JSON object");
    const int version = doc.at("version").get<int>();
    if (version != kCodebookFormatVersion)
      throw ParseError("unsupported codebook version " + std::to_string(version));
    Codebook cb;
    cb.n = doc.at("n").get<std::size_t>();
    cb.lambda = doc.at("lambda").get<std::size_t>();
    for (const auto& j : doc.at("entries")) {
      const auto& bits = j.at("bits");
      if (!bits.is_array() || bits.size() != 2) throw ParseError("bits must be [b_i, b_j]");
      CodebookEntry e;
      e.bits = BitPair{bits[0].get<std::uint8_t>(), bits[1].get<std::uint8_t>()};
      e.s_i = identity_sequence(cb.n);
      e.s_j = j.at("s_j").get<SequenceCode>();
      if (validate_sequence(e.s_j, cb.n).ok()) e.pairing = relative_pairing(e.s_i, e.s_j);
      cb.entries.push_back(std::move(e));
    }
    return cb;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("codebook: ") + ex.what());
  }
}

inline Codebook parse_codebook(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("codebook: ") + ex.what());
  }
  return codebook_from_json(doc);
}

/// Parse and re-validate; throws ValidationError listing every defect.
inline Codebook load_codebook(const std::string& text) {
  Codebook cb = parse_codebook(text);
  const auto report = validate_codebook(cb);
  if (!report.ok()) {
    std::string msg = "invalid codebook:";
    for (const auto& d : report.defects) msg += "\n  " + d.message;
    throw ValidationError(msg);
  }
  return cb;
}

}  // namespace entpost
