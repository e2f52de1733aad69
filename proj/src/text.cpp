#include "vocada/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/locid.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <stdexcept>

namespace vocada {

namespace {

icu::UnicodeString to_nfc(const icu::UnicodeString& in) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU NFC normalizer unavailable");
  }
  icu::UnicodeString out = nfc->normalize(in, status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU NFC normalization failed");
  }
  return out;
}

}  // namespace

std::string normalize_name(std::string_view s) {
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  text = to_nfc(text);
  text.toLower(icu::Locale::getRoot());
  // Full case mapping can emit decomposed sequences (e.g. U+0130).
  text = to_nfc(text);

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < text.length();) {
    const UChar32 c = text.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) {
      collapsed.append(static_cast<UChar>(u' '));
      pending_space = false;
    }
    collapsed.append(c);
  }

  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

std::size_t count_placeholders(std::string_view tmpl) {
  std::size_t n = 0;
  for (std::size_t pos = tmpl.find("{}"); pos != std::string_view::npos;
       pos = tmpl.find("{}", pos + 2)) {
    ++n;
  }
  return n;
}

std::string apply_template(std::string_view tmpl, std::string_view value) {
  const std::size_t pos = tmpl.find("{}");
  if (pos == std::string_view::npos) {
    return std::string(tmpl);
  }
  std::string out;
  out.reserve(tmpl.size() + value.size());
  out.append(tmpl.substr(0, pos));
  out.append(value);
  out.append(tmpl.substr(pos + 2));
  return out;
}

}  // namespace vocada
