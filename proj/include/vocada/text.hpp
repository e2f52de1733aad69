#pragma once

#include <string>
#include <string_view>

namespace vocada {

/// Canonical form used for every name/synonym/phrase comparison:
/// Unicode NFC, lowercased, whitespace runs collapsed to one ASCII space, trimmed.
/// Idempotent. Invalid UTF-8 sequences are replaced with U+FFFD.
std::string normalize_name(std::string_view s);

/// Substitutes `value` for the single "{}" placeholder in `tmpl`.
std::string apply_template(std::string_view tmpl, std::string_view value);

/// Number of "{}" placeholders in `tmpl`.
std::size_t count_placeholders(std::string_view tmpl);

}  // namespace vocada
