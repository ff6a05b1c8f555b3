#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forumcp::text {

/// Unicode NFC normalization of a UTF-8 string. Invalid UTF-8 sequences are
/// replaced with U+FFFD by the converter.
std::string nfc(std::string_view utf8);

/// Word segments (letters, numbers, ideographs) per Unicode word boundaries,
/// in their original case.
std::vector<std::string> words(std::string_view utf8);

/// Number of word segments; the post-length measure used by behavior metrics.
std::size_t count_words(std::string_view utf8);

/// Keyword terms: words lowercased, shorter than three code points dropped,
/// stop words dropped. Order of occurrence is preserved.
std::vector<std::string> terms(std::string_view utf8);

/// Locale-independent Unicode lowercase.
std::string lower(std::string_view utf8);

bool is_stop_word(std::string_view lowercase_term);

/// The pinned English stop-word list.
std::span<const std::string_view> stop_words();

}  // namespace forumcp::text
