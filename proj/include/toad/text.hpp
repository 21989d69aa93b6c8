#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace toad::text {

// Bumped whenever the shipped stopword list changes.
inline constexpr int kStopwordListVersion = 1;

// English stopwords with apostrophes removed ("don't" -> "dont"), matching
// the form tokens take after punctuation removal.
const std::unordered_set<std::string>& stopwords();

// Splits a hashtag body on camel-case boundaries, letter/digit boundaries
// and underscores. "ClimateChange" -> {"Climate", "Change"};
// "NYCMarathon2016" -> {"NYC", "Marathon", "2016"}; "climatechange" stays whole.
std::vector<std::string> segment_hashtag(std::string_view body);

// URLs, @-mentions, hashtag markers (bodies are segmented), emoji and
// punctuation are removed; the rest is lowercased, whitespace-tokenized and
// stopword-filtered. An empty result means the tweet should be rejected.
std::vector<std::string> preprocess_tweet(std::string_view raw);

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

// True for code points treated as emoji (pictographs, dingbats, flags,
// variation selectors, joiners, tag characters).
bool is_emoji(char32_t cp);

}  // namespace toad::text
