#include "toad/data.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "toad/errors.hpp"
#include "toad/rng.hpp"
#include "toad/text.hpp"

namespace toad {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_on(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    fields.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

}  // namespace

int stance_polarity(Stance s) { return static_cast<int>(s) - 1; }

std::string_view stance_name(Stance s) {
  switch (s) {
    case Stance::kCon:
      return "con";
    case Stance::kNeutral:
      return "neutral";
    case Stance::kPro:
      return "pro";
  }
  return "?";
}

std::optional<Stance> parse_stance(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "pro" || t == "favor" || t == "1" || t == "+1") return Stance::kPro;
  if (t == "con" || t == "against" || t == "-1") return Stance::kCon;
  if (t == "neutral" || t == "none" || t == "neither" || t == "0") return Stance::kNeutral;
  return std::nullopt;
}

int Corpus::topic_id(std::string_view name) const {
  const auto it = std::find(topics.begin(), topics.end(), name);
  return it == topics.end() ? -1 : static_cast<int>(it - topics.begin());
}

std::set<std::string> Corpus::vocabulary() const {
  std::set<std::string> vocab;
  for (const auto& toks : topic_tokens) vocab.insert(toks.begin(), toks.end());
  for (const auto& ex : examples) vocab.insert(ex.document_tokens.begin(), ex.document_tokens.end());
  return vocab;
}

Corpus parse_dataset(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw InputError(source + ": empty dataset file");
  chomp(line);
  const auto header = split_on(line, '\t');
  auto column = [&](std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (lower(trim(header[i])) == name) return static_cast<int>(i);
    throw InputError(source + ":1: header lacks a '" + std::string(name) + "' column");
  };
  const int tweet_col = column("tweet");
  const int topic_col = column("topic");
  const int stance_col = column("stance");

  struct Row {
    std::string tweet, topic, stance;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    auto fields = split_on(line, '\t');
    // A trailing empty stance may be omitted entirely.
    if (fields.size() + 1 == header.size() && stance_col == static_cast<int>(header.size()) - 1)
      fields.emplace_back();
    if (fields.size() != header.size())
      throw InputError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " tab-separated fields, found " +
                       std::to_string(fields.size()));
    Row r{fields[static_cast<std::size_t>(tweet_col)], trim(fields[static_cast<std::size_t>(topic_col)]),
          trim(fields[static_cast<std::size_t>(stance_col)]), line_no};
    if (r.topic.empty())
      throw InputError(source + ":" + std::to_string(line_no) + ": empty topic");
    if (!r.stance.empty() && !parse_stance(r.stance))
      throw InputError(source + ":" + std::to_string(line_no) + ": unknown stance '" + r.stance +
                       "'");
    rows.push_back(std::move(r));
  }

  Corpus corpus;
  std::set<std::string> names;
  for (const auto& r : rows) names.insert(r.topic);
  corpus.topics.assign(names.begin(), names.end());
  for (const auto& t : corpus.topics) {
    auto toks = text::preprocess_tweet(t);
    if (toks.empty()) toks = {lower(t)};  // e.g. a topic made only of stopwords
    corpus.topic_tokens.push_back(std::move(toks));
  }
  for (const auto& r : rows) {
    Example ex;
    ex.document_tokens = text::preprocess_tweet(r.tweet);
    if (ex.document_tokens.empty()) {
      ++corpus.rejected;
      continue;
    }
    ex.topic_id = corpus.topic_id(r.topic);
    ex.topic_tokens = corpus.topic_tokens[static_cast<std::size_t>(ex.topic_id)];
    ex.stance = r.stance.empty() ? std::nullopt : parse_stance(r.stance);
    ex.uid = corpus.examples.size();
    corpus.examples.push_back(std::move(ex));
  }
  if (corpus.rejected > 0)
    spdlog::info("{}: rejected {} rows that were empty after preprocessing", source,
                 corpus.rejected);
  return corpus;
}

Corpus load_dataset(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_dataset(in, path.string());
}

std::vector<std::string> load_lines(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    chomp(line);
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

// ---- embeddings --------------------------------------------------------------

EmbeddingTable EmbeddingTable::build(const std::set<std::string>& vocabulary, std::istream* file,
                                     std::size_t dim, std::uint64_t seed,
                                     const std::string& source) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  EmbeddingTable table;
  table.dim_ = dim;
  table.tokens_ = {"<pad>", "<unk>"};
  for (const auto& tok : vocabulary)
    if (tok != "<pad>" && tok != "<unk>") table.tokens_.push_back(tok);
  for (std::size_t i = 0; i < table.tokens_.size(); ++i) table.index_.emplace(table.tokens_[i], i);

  const std::size_t rows = table.tokens_.size();
  table.matrix_.assign(rows * dim, 0.0);
  std::vector<bool> filled(rows, false);
  filled[kPad] = true;

  if (file != nullptr) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> values;
    values.reserve(dim);
    while (std::getline(*file, line)) {
      ++line_no;
      chomp(line);
      if (trim(line).empty()) continue;
      const auto sp = line.find(' ');
      const std::string token = line.substr(0, sp);
      values.clear();
      const char* p = sp == std::string::npos ? line.data() + line.size() : line.data() + sp;
      const char* end = line.data() + line.size();
      while (p < end) {
        while (p < end && (*p == ' ' || *p == '\t')) ++p;
        if (p == end) break;
        double v = 0.0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t'))
          throw InputError(source + ":" + std::to_string(line_no) + ": unparseable float");
        values.push_back(v);
        p = next;
      }
      if (values.size() != dim) {
        const std::string msg = source + ":" + std::to_string(line_no) + ": expected " +
                                std::to_string(dim) + " values, found " +
                                std::to_string(values.size());
        if (line_no == 1) throw ConfigError(msg + " (embedding dimension mismatch)");
        throw InputError(msg);
      }
      const auto it = table.index_.find(token);
      if (it == table.index_.end() || it->second == kPad) continue;
      std::copy(values.begin(), values.end(), table.matrix_.begin() + static_cast<std::ptrdiff_t>(it->second * dim));
      if (!filled[it->second]) ++table.found_in_file_;
      filled[it->second] = true;
    }
  }

  Rng rng(seed);
  for (std::size_t r = 0; r < rows; ++r) {
    if (filled[r]) continue;
    for (std::size_t c = 0; c < dim; ++c) table.matrix_[r * dim + c] = rng.uniform(-0.1, 0.1);
  }
  return table;
}

std::size_t EmbeddingTable::index(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool EmbeddingTable::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

std::span<const double> EmbeddingTable::row(std::size_t index) const {
  return std::span<const double>(matrix_).subspan(index * dim_, dim_);
}

void EmbeddingTable::save(std::ostream& out) const {
  char buf[32];
  for (std::size_t r = 1; r < tokens_.size(); ++r) {
    out << tokens_[r];
    for (double v : row(r)) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::set<std::string>& vocabulary, std::size_t dim,
                               std::uint64_t seed) {
  auto in = open_or_throw(path);
  return EmbeddingTable::build(vocabulary, &in, dim, seed, path.string());
}

// ---- splits ------------------------------------------------------------------

SplitSpec make_splits(const Corpus& corpus, int zero_shot_topic, std::uint64_t seed) {
  if (corpus.topics.size() < 2)
    throw ConfigError("leave-one-topic-out splits need at least 2 topics, corpus has " +
                      std::to_string(corpus.topics.size()));
  if (zero_shot_topic < 0 || zero_shot_topic >= static_cast<int>(corpus.topics.size()))
    throw ConfigError("zero-shot topic id " + std::to_string(zero_shot_topic) +
                      " is not present in the corpus");

  SplitSpec split;
  split.zero_shot_topic = zero_shot_topic;
  split.seed = seed;

  // (topic, stance) strata over the source topics, in key order.
  std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    const auto& ex = corpus.examples[i];
    if (ex.topic_id == zero_shot_topic) {
      (ex.is_labeled() ? split.test : split.unlabeled).push_back(ex);
      continue;
    }
    if (!ex.is_labeled()) {
      ++dropped;
      continue;
    }
    strata[{ex.topic_id, static_cast<int>(*ex.stance)}].push_back(i);
  }
  if (dropped > 0)
    spdlog::info("make_splits: ignored {} unlabeled rows of source topics", dropped);

  // Largest-remainder allocation of round(0.15 N) dev slots across strata.
  std::size_t total = 0;
  for (const auto& [key, members] : strata) total += members.size();
  const auto dev_total = static_cast<std::size_t>(std::llround(kDevFraction * static_cast<double>(total)));
  std::vector<std::size_t> quota;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  std::size_t s = 0;
  for (const auto& [key, members] : strata) {
    const double exact = kDevFraction * static_cast<double>(members.size());
    const auto q = static_cast<std::size_t>(std::floor(exact));
    quota.push_back(q);
    assigned += q;
    remainders.emplace_back(exact - static_cast<double>(q), s++);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < dev_total && r < remainders.size(); ++r, ++assigned)
    ++quota[remainders[r].second];

  std::vector<bool> in_dev(corpus.examples.size(), false);
  s = 0;
  for (const auto& [key, members] : strata) {
    auto order = members;
    Rng rng(derive_seed(seed, s));
    rng.shuffle(order);
    for (std::size_t j = 0; j < quota[s]; ++j) in_dev[order[j]] = true;
    ++s;
  }
  for (const auto& [key, members] : strata)
    for (std::size_t i : members) (in_dev[i] ? split.dev : split.train).push_back(corpus.examples[i]);
  auto by_uid = [](const Example& a, const Example& b) { return a.uid < b.uid; };
  std::sort(split.train.begin(), split.train.end(), by_uid);
  std::sort(split.dev.begin(), split.dev.end(), by_uid);
  return split;
}

SplitSpec attach_unlabeled(SplitSpec split, std::span<const std::string> tweets,
                           std::span<const std::string> keywords, const Corpus& corpus) {
  if (keywords.empty()) throw ConfigError("attach_unlabeled: keyword list is empty");
  const auto topic = static_cast<std::size_t>(split.zero_shot_topic);
  if (topic >= corpus.topics.size()) throw ConfigError("attach_unlabeled: unknown zero-shot topic");
  std::size_t next_uid = corpus.examples.size();
  for (const auto& ex : split.unlabeled) next_uid = std::max(next_uid, ex.uid + 1);
  std::size_t kept = 0;
  for (const auto& tweet : tweets) {
    const bool match = std::any_of(keywords.begin(), keywords.end(), [&](const std::string& k) {
      return !k.empty() && tweet.find(k) != std::string::npos;
    });
    if (!match) continue;
    Example ex;
    ex.document_tokens = text::preprocess_tweet(tweet);
    if (ex.document_tokens.empty()) continue;
    ex.topic_tokens = corpus.topic_tokens[topic];
    ex.topic_id = split.zero_shot_topic;
    ex.uid = next_uid++;
    split.unlabeled.push_back(std::move(ex));
    ++kept;
  }
  if (kept == 0)
    spdlog::warn("attach_unlabeled: no tweets matched the keywords for '{}'; training proceeds "
                 "without unlabeled zero-shot data",
                 corpus.topics[topic]);
  else
    spdlog::info("attach_unlabeled: {} unlabeled examples for '{}'", kept, corpus.topics[topic]);
  return split;
}

std::map<int, ClassDistribution> class_distribution(std::span<const Example> examples) {
  std::map<int, std::array<std::size_t, kNumStances>> counts;
  for (const auto& ex : examples)
    if (ex.is_labeled()) ++counts[ex.topic_id][static_cast<std::size_t>(*ex.stance)];
  std::map<int, ClassDistribution> out;
  for (const auto& [topic, c] : counts) {
    ClassDistribution d;
    d.total = std::accumulate(c.begin(), c.end(), std::size_t{0});
    for (std::size_t k = 0; k < kNumStances; ++k)
      d.percent[k] = 100.0 * static_cast<double>(c[k]) / static_cast<double>(d.total);
    out[topic] = d;
  }
  return out;
}

std::map<std::string, std::vector<std::string>> load_keywords(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  std::size_t line_no = 0;
  for (const auto& line : load_lines(path)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 'topic<TAB>keyword[,keyword...]'");
    auto& list = out[trim(line.substr(0, tab))];
    for (const auto& kw : split_on(line.substr(tab + 1), ','))
      if (auto k = trim(kw); !k.empty()) list.push_back(k);
  }
  return out;
}

}  // namespace toad
