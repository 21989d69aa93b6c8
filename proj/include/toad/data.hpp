#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace toad {

// Internal class order; stance_polarity() gives the surfaced label.
enum class Stance : int { kCon = 0, kNeutral = 1, kPro = 2 };
inline constexpr std::size_t kNumStances = 3;

// con -> -1, neutral -> 0, pro -> +1.
int stance_polarity(Stance s);
std::string_view stance_name(Stance s);
// Accepts pro/con/neutral plus the SemEval spellings FAVOR/AGAINST/NONE and
// "neither", case-insensitively. Empty or unknown text yields nullopt.
std::optional<Stance> parse_stance(std::string_view text);

struct Example {
  std::vector<std::string> document_tokens;
  std::vector<std::string> topic_tokens;
  std::optional<Stance> stance;
  int topic_id = 0;
  // Stable identity within a corpus (ingest order); unlabeled tweets
  // attached later get ids past the labeled range.
  std::size_t uid = 0;

  bool is_labeled() const { return stance.has_value(); }
};

struct Corpus {
  std::vector<std::string> topics;  // index == topic_id, sorted by name
  std::vector<std::vector<std::string>> topic_tokens;
  std::vector<Example> examples;
  std::size_t rejected = 0;  // rows whose tweet preprocessed to nothing

  // -1 when the topic is absent.
  int topic_id(std::string_view name) const;
  std::set<std::string> vocabulary() const;
};

// Dataset TSV: a header naming at least the columns tweet, topic, stance
// (any order), one example per line, UTF-8. Empty stance = unlabeled.
// Throws InputError naming the line on malformed rows.
Corpus parse_dataset(std::istream& in, const std::string& source = "<stream>");
Corpus load_dataset(const std::filesystem::path& path);

// One raw tweet per line; blank lines skipped.
std::vector<std::string> load_lines(const std::filesystem::path& path);

// ---- embeddings --------------------------------------------------------------

class EmbeddingTable {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kDefaultDim = 100;

  // Rows for every vocabulary token. Tokens found in `file` (GloVe text
  // format) take those values; the rest, and <unk>, are drawn uniformly
  // from [-0.1, 0.1] in sorted-vocabulary order from `seed`. The padding
  // row is zero. `file` may be null.
  static EmbeddingTable build(const std::set<std::string>& vocabulary, std::istream* file,
                              std::size_t dim, std::uint64_t seed,
                              const std::string& source = "<embeddings>");

  std::size_t index(std::string_view token) const;
  bool contains(std::string_view token) const;
  std::span<const double> row(std::size_t index) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t found_in_file() const { return found_in_file_; }

  // Writes every row except padding in the same text format.
  void save(std::ostream& out) const;

 private:
  std::size_t dim_ = kDefaultDim;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> matrix_;
  std::size_t found_in_file_ = 0;
};

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::set<std::string>& vocabulary, std::size_t dim,
                               std::uint64_t seed);

// ---- splits ------------------------------------------------------------------

struct SplitSpec {
  int zero_shot_topic = 0;
  std::uint64_t seed = 0;
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
  std::vector<Example> unlabeled;
};

inline constexpr double kDevFraction = 0.15;

// Leave-one-topic-out split: every labeled example of the zero-shot topic
// goes to test; the other topics' labeled examples are split 85/15 into
// train/dev, stratified by (topic, stance). Unlabeled dataset rows of the
// zero-shot topic become unlabeled; unlabeled rows of other topics are
// dropped.
SplitSpec make_splits(const Corpus& corpus, int zero_shot_topic, std::uint64_t seed);

// Adds tweets containing any keyword (case-sensitive substring) as
// unlabeled zero-shot examples. Zero survivors logs a warning.
SplitSpec attach_unlabeled(SplitSpec split, std::span<const std::string> tweets,
                           std::span<const std::string> keywords, const Corpus& corpus);

// ---- statistics --------------------------------------------------------------

struct ClassDistribution {
  std::size_t total = 0;
  // Percentages indexed by Stance.
  std::array<double, kNumStances> percent{};
};

// Per-topic stance percentages over the labeled members.
std::map<int, ClassDistribution> class_distribution(std::span<const Example> examples);

// ---- keyword files -----------------------------------------------------------

// "topic<TAB>kw1,kw2" lines.
std::map<std::string, std::vector<std::string>> load_keywords(const std::filesystem::path& path);

}  // namespace toad
