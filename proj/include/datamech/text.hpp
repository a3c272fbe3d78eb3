#pragma once

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "datamech/errors.hpp"

namespace datamech {

// NFC normalization followed by root-locale lowercasing. All token counts in
// this project are defined over this normal form.
inline std::string normalize_text(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw NumericError("icu: NFC instance unavailable");
  }
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = nfc->normalize(u, status);
  if (U_FAILURE(status)) {
    throw DataError("icu: normalization failed");
  }
  normalized.toLower(icu::Locale::getRoot());
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

// Whitespace-delimited tokens of the normalized text.
inline std::vector<std::string> tokenize(std::string_view text) {
  const std::string normalized = normalize_text(text);
  const icu::UnicodeString u = icu::UnicodeString::fromUTF8(normalized);

  std::vector<std::string> tokens;
  icu::UnicodeString current;
  for (int32_t i = 0; i < u.length();) {
    const UChar32 cp = u.char32At(i);
    if (u_isUWhiteSpace(cp)) {
      if (!current.isEmpty()) {
        std::string tok;
        current.toUTF8String(tok);
        tokens.push_back(std::move(tok));
        current.remove();
      }
    } else {
      current.append(cp);
    }
    i += U16_LENGTH(cp);
  }
  if (!current.isEmpty()) {
    std::string tok;
    current.toUTF8String(tok);
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

inline std::size_t count_tokens(std::string_view text) { return tokenize(text).size(); }

}  // namespace datamech
