#include "toad/text.hpp"

#include <array>
#include <cctype>

namespace toad::text {

namespace {

// NLTK English list, apostrophes stripped, plus the stripped contractions.
constexpr std::array kStopwords = {
    "i",         "me",       "my",       "myself",   "we",         "our",      "ours",
    "ourselves", "you",      "youre",    "youve",    "youll",      "youd",     "your",
    "yours",     "yourself", "yourselves", "he",     "him",        "his",      "himself",
    "she",       "shes",     "her",      "hers",     "herself",    "it",       "its",
    "itself",    "they",     "them",     "their",    "theirs",     "themselves", "what",
    "which",     "who",      "whom",     "this",     "that",       "thatll",   "these",
    "those",     "am",       "is",       "are",      "was",        "were",     "be",
    "been",      "being",    "have",     "has",      "had",        "having",   "do",
    "does",      "did",      "doing",    "a",        "an",         "the",      "and",
    "but",       "if",       "or",       "because",  "as",         "until",    "while",
    "of",        "at",       "by",       "for",      "with",       "about",    "against",
    "between",   "into",     "through",  "during",   "before",     "after",    "above",
    "below",     "to",       "from",     "up",       "down",       "in",       "out",
    "on",        "off",      "over",     "under",    "again",      "further",  "then",
    "once",      "here",     "there",    "when",     "where",      "why",      "how",
    "all",       "any",      "both",     "each",     "few",        "more",     "most",
    "other",     "some",     "such",     "no",       "nor",        "not",      "only",
    "own",       "same",     "so",       "than",     "too",        "very",     "s",
    "t",         "can",      "will",     "just",     "don",        "dont",     "should",
    "shouldve",  "now",      "d",        "ll",       "m",          "o",        "re",
    "ve",        "y",        "ain",      "aren",     "arent",      "couldn",   "couldnt",
    "didn",      "didnt",    "doesn",    "doesnt",   "hadn",       "hadnt",    "hasn",
    "hasnt",     "haven",    "havent",   "isn",      "isnt",       "ma",       "mightn",
    "mightnt",   "mustn",    "mustnt",   "needn",    "neednt",     "shan",     "shant",
    "shouldn",   "shouldnt", "wasn",     "wasnt",    "weren",      "werent",   "won",
    "wont",      "wouldn",   "wouldnt",
};

bool is_word_byte(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != prefix[i]) return false;
  return true;
}

// URLs, mentions and hashtags, in that order, on the raw bytes.
std::string strip_urls(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    if (starts_with_ci(in, i, "http://") || starts_with_ci(in, i, "https://") ||
        starts_with_ci(in, i, "www.")) {
      while (i < in.size() && !is_ascii_space(in[i])) ++i;
      out += ' ';
      continue;
    }
    out += in[i++];
  }
  return out;
}

std::string strip_mentions(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    if (in[i] == '@' && i + 1 < in.size() && is_word_byte(in[i + 1])) {
      ++i;
      while (i < in.size() && is_word_byte(in[i])) ++i;
      out += ' ';
      continue;
    }
    out += in[i++];
  }
  return out;
}

std::string expand_hashtags(std::string_view in) {
  std::string out;
  out.reserve(in.size() + 8);
  for (std::size_t i = 0; i < in.size();) {
    if (in[i] == '#' && i + 1 < in.size() && is_word_byte(in[i + 1])) {
      const std::size_t start = ++i;
      while (i < in.size() && is_word_byte(in[i])) ++i;
      out += ' ';
      out += join(segment_hashtag(in.substr(start, i - start)));
      out += ' ';
      continue;
    }
    out += in[i++];
  }
  return out;
}

constexpr char32_t kInvalid = 0xFFFD;

// Decodes one UTF-8 sequence starting at s[i]; advances i. Malformed input
// yields U+FFFD and consumes one byte.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kInvalid;
  }
  if (i + static_cast<std::size_t>(len) > s.size()) {
    ++i;
    return kInvalid;
  }
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2018 || cp == 0x2019; }

// Punctuation, symbols and non-ASCII whitespace; all become separators.
bool is_separator(char32_t cp) {
  if (cp < 0x80) return cp < 0x20 || cp == 0x7F || std::ispunct(static_cast<int>(cp)) != 0 || cp == ' ';
  return in(cp, 0x0080, 0x00BF) || cp == 0x00D7 || cp == 0x00F7 || in(cp, 0x2000, 0x206F) ||
         in(cp, 0x2070, 0x20CF) || in(cp, 0x2190, 0x22FF) || in(cp, 0x2500, 0x25FF) ||
         in(cp, 0x3000, 0x303F) || in(cp, 0xFE10, 0xFE1F) || in(cp, 0xFE30, 0xFE6F) ||
         in(cp, 0xFF01, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) || in(cp, 0xFF3B, 0xFF40) ||
         in(cp, 0xFF5B, 0xFF65) || cp == kInvalid;
}

}  // namespace

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> set(kStopwords.begin(), kStopwords.end());
  return set;
}

bool is_emoji(char32_t cp) {
  return in(cp, 0x1F000, 0x1FAFF) || in(cp, 0x2300, 0x23FF) || in(cp, 0x2600, 0x27BF) ||
         in(cp, 0x2B00, 0x2BFF) || in(cp, 0xFE00, 0xFE0F) || cp == 0x200D || cp == 0x20E3 ||
         in(cp, 0xE0020, 0xE007F) || cp == 0x3030 || cp == 0x303D || cp == 0x3297 ||
         cp == 0x3299;
}

std::vector<std::string> segment_hashtag(std::string_view body) {
  enum class Kind { kLower, kUpper, kDigit, kOther };
  auto kind = [](char c) {
    const auto u = static_cast<unsigned char>(c);
    if (std::islower(u)) return Kind::kLower;
    if (std::isupper(u)) return Kind::kUpper;
    if (std::isdigit(u)) return Kind::kDigit;
    return Kind::kOther;
  };
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '_') {
      flush();
      continue;
    }
    if (!cur.empty()) {
      const Kind prev = kind(cur.back());
      const Kind now = kind(c);
      const bool next_lower = i + 1 < body.size() && kind(body[i + 1]) == Kind::kLower;
      const bool boundary =
          (prev == Kind::kLower && now == Kind::kUpper) ||
          ((prev == Kind::kDigit) != (now == Kind::kDigit)) ||
          (prev == Kind::kUpper && now == Kind::kUpper && next_lower);
      if (boundary) flush();
    }
    cur += c;
  }
  flush();
  return words;
}

std::vector<std::string> preprocess_tweet(std::string_view raw) {
  const std::string stage = expand_hashtags(strip_mentions(strip_urls(raw)));

  std::string cleaned;
  cleaned.reserve(stage.size());
  for (std::size_t i = 0; i < stage.size();) {
    const char32_t cp = decode_utf8(stage, i);
    if (is_apostrophe(cp)) continue;
    if (is_emoji(cp) || is_separator(cp)) {
      cleaned += ' ';
    } else if (cp < 0x80) {
      cleaned += static_cast<char>(std::tolower(static_cast<int>(cp)));
    } else {
      encode_utf8(cp, cleaned);
    }
  }

  std::vector<std::string> tokens;
  const auto& stop = stopwords();
  std::size_t pos = 0;
  while (pos < cleaned.size()) {
    while (pos < cleaned.size() && cleaned[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < cleaned.size() && cleaned[end] != ' ') ++end;
    if (end > pos) {
      std::string tok = cleaned.substr(pos, end - pos);
      if (!stop.contains(tok)) tokens.push_back(std::move(tok));
    }
    pos = end;
  }
  return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace toad::text
