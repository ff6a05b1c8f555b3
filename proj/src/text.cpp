#include "forumcp/text.hpp"

#include <algorithm>
#include <array>
#include <memory>

#include <unicode/brkiter.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "forumcp/error.hpp"

namespace forumcp::text {

namespace {

// Sorted; looked up by binary search.
constexpr auto kStopWords = std::to_array<std::string_view>({
    "a",          "about",    "above",   "after",    "again",   "against",  "ain",      "all",
    "am",         "an",       "and",     "any",      "are",     "aren",     "aren't",   "as",
    "at",         "be",       "because", "been",     "before",  "being",    "below",    "between",
    "both",       "but",      "by",      "can",      "couldn",  "couldn't", "d",        "did",
    "didn",       "didn't",   "do",      "does",     "doesn",   "doesn't",  "doing",    "don",
    "don't",      "down",     "during",  "each",     "few",     "for",      "from",     "further",
    "had",        "hadn",     "hadn't",  "has",      "hasn",    "hasn't",   "have",     "haven",
    "haven't",    "having",   "he",      "her",      "here",    "hers",     "herself",  "him",
    "himself",    "his",      "how",     "i",        "if",      "in",       "into",     "is",
    "isn",        "isn't",    "it",      "it's",     "its",     "itself",   "just",     "ll",
    "m",          "ma",       "me",      "mightn",   "mightn't", "more",    "most",     "mustn",
    "mustn't",    "my",       "myself",  "needn",    "needn't", "no",       "nor",      "not",
    "now",        "o",        "of",      "off",      "on",      "once",     "only",     "or",
    "other",      "our",      "ours",    "ourselves", "out",    "over",     "own",      "re",
    "s",          "same",     "shan",    "shan't",   "she",     "she's",    "should",   "should've",
    "shouldn",    "shouldn't", "so",     "some",     "such",    "t",        "than",     "that",
    "that'll",    "the",      "their",   "theirs",   "them",    "themselves", "then",   "there",
    "these",      "they",     "this",    "those",    "through", "to",       "too",      "under",
    "until",      "up",       "ve",      "very",     "was",     "wasn",     "wasn't",   "we",
    "were",       "weren",    "weren't", "what",     "when",    "where",    "which",    "while",
    "who",        "whom",     "why",     "will",     "with",    "won",      "won't",    "wouldn",
    "wouldn't",   "y",        "you",     "you'd",    "you'll",  "you're",   "you've",   "your",
    "yours",      "yourself", "yourselves"});

icu::BreakIterator& word_iterator() {
  thread_local std::unique_ptr<icu::BreakIterator> it = [] {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> bi(icu::BreakIterator::createWordInstance(icu::Locale::getRoot(), status));
    if (U_FAILURE(status)) throw Error("icu_error", std::string("word break iterator: ") + u_errorName(status));
    return bi;
  }();
  return *it;
}

bool is_word_status(int32_t status) {
  return status >= UBRK_WORD_NUMBER && status < UBRK_WORD_IDEO_LIMIT;
}

template <typename Fn>
void for_each_word(std::string_view utf8, Fn&& fn) {
  const icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::BreakIterator& bi = word_iterator();
  bi.setText(s);
  int32_t start = bi.first();
  for (int32_t end = bi.next(); end != icu::BreakIterator::DONE; start = end, end = bi.next()) {
    if (is_word_status(bi.getRuleStatus())) fn(s.tempSubStringBetween(start, end));
  }
}

}  // namespace

std::string nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("icu_error", std::string("NFC normalizer: ") + u_errorName(status));
  const icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  if (norm->isNormalized(s, status) && U_SUCCESS(status)) {
    std::string out;
    return s.toUTF8String(out);
  }
  status = U_ZERO_ERROR;
  const icu::UnicodeString n = norm->normalize(s, status);
  if (U_FAILURE(status)) throw Error("icu_error", std::string("NFC normalize: ") + u_errorName(status));
  std::string out;
  return n.toUTF8String(out);
}

std::vector<std::string> words(std::string_view utf8) {
  std::vector<std::string> out;
  for_each_word(utf8, [&](const icu::UnicodeString& w) {
    std::string s;
    out.push_back(w.toUTF8String(s));
  });
  return out;
}

std::size_t count_words(std::string_view utf8) {
  std::size_t n = 0;
  for_each_word(utf8, [&](const icu::UnicodeString&) { ++n; });
  return n;
}

std::vector<std::string> terms(std::string_view utf8) {
  std::vector<std::string> out;
  for_each_word(utf8, [&](const icu::UnicodeString& w) {
    if (w.countChar32() < 3) return;
    icu::UnicodeString lower(w);
    lower.toLower(icu::Locale::getRoot());
    std::string s;
    lower.toUTF8String(s);
    if (!is_stop_word(s)) out.push_back(std::move(s));
  });
  return out;
}

std::string lower(std::string_view utf8) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  s.toLower(icu::Locale::getRoot());
  std::string out;
  return s.toUTF8String(out);
}

bool is_stop_word(std::string_view lowercase_term) {
  return std::binary_search(kStopWords.begin(), kStopWords.end(), lowercase_term);
}

std::span<const std::string_view> stop_words() { return kStopWords; }

}  // namespace forumcp::text
