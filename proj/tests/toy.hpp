#pragma once

// The bundled 60-tweet corpus, split with "space travel" held out.

#include <set>
#include <string>

#include "toad/data.hpp"
#include "toad/rng.hpp"
#include "toad/training.hpp"

namespace toy {

inline constexpr const char* kDir = "data/toy";
inline constexpr const char* kHeldOut = "space travel";

struct Toy {
  toad::Corpus corpus;
  toad::SplitSpec split;
  toad::EmbeddingTable table;
  std::size_t n_topics = 0;
};

inline Toy load(std::size_t dim, std::uint64_t seed = 0) {
  Toy t;
  const std::string dir = kDir;
  t.corpus = toad::load_dataset(dir + "/dataset.tsv");
  int held = 0;
  for (std::size_t i = 0; i < t.corpus.topics.size(); ++i)
    if (t.corpus.topics[i] == kHeldOut) held = static_cast<int>(i);
  t.split = toad::make_splits(t.corpus, held, seed);
  const auto kw = toad::load_keywords(dir + "/keywords.tsv");
  const auto tweets = toad::load_lines(dir + "/unlabeled.txt");
  t.split = toad::attach_unlabeled(std::move(t.split), tweets, kw.at(kHeldOut), t.corpus);
  std::set<std::string> vocab;
  for (const auto& ex : t.corpus.examples) {
    vocab.insert(ex.document_tokens.begin(), ex.document_tokens.end());
    vocab.insert(ex.topic_tokens.begin(), ex.topic_tokens.end());
  }
  for (const auto& ex : t.split.unlabeled) vocab.insert(ex.document_tokens.begin(), ex.document_tokens.end());
  t.table = toad::EmbeddingTable::build(vocab, nullptr, dim, toad::derive_seed(seed, 0xE3B));
  t.n_topics = t.corpus.topics.size();
  return t;
}

// Small, fast configuration for toy runs.
inline toad::training::TrainConfig small_config(std::size_t dim) {
  toad::training::TrainConfig c;
  c.embed_dim = dim;
  c.hidden = 8;
  c.stance_hidden = 16;
  c.disc_hidden = 8;
  c.batch_size = 8;
  c.learning_rate = 0.01;
  return c;
}

}  // namespace toy
