// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "e2e.hpp"
#include "oracles.hpp"
#include "primitives.hpp"
#include "toad/analysis.hpp"
#include "toad/rng.hpp"
#include "toad/training.hpp"
#include "toy.hpp"

using namespace toad;
using namespace toad::training;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// ---- 1 -----------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  const auto prim = primitives::run_all(101, 10);
  const double grl = primitives::check_grad_reverse(102, 10);
  double e2e_worst = 0;
  std::string where;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = e2e::check(1000 + seed, 0.2 + 0.08 * static_cast<double>(seed));
    if (r.max_error > e2e_worst) {
      e2e_worst = r.max_error;
      where = r.worst;
    }
  }
  const double secs = seconds_since(t0);
  const double worst = std::max({prim.max_error, grl, e2e_worst});
  return {worst < 1e-4 && secs < 30.0,
          std::to_string(prim.cases) + " primitives + reversal + end-to-end at 10 points each; max rel err " +
              fmt(worst) + " (" + (prim.max_error >= e2e_worst ? prim.worst : where) + "); " + fmt(secs) + " s"};
}

// ---- 2 -----------------------------------------------------------------------

Outcome schedules() {
  double worst = 0;
  bool warmup_exact = true;
  for (double gamma : {10.0, 14.0})
    for (int e : {1, 25, 50, 51, 75, 100}) {
      const auto got = schedule(e, 100, 0.001, 10, 0.25, gamma);
      const auto want = oracle::schedule(e, 100, 0.001, 10, 0.25, gamma);
      worst = std::max({worst, std::abs(got.lr - want.lr), std::abs(got.rho - want.rho)});
    }
  for (int e = 1; e <= 50; ++e)
    for (double gamma : {10.0, 14.0}) warmup_exact = warmup_exact && schedule(e, 100, 0.001, 10, 0.25, gamma).rho == 0.0;
  return {worst < 1e-9 && warmup_exact, "max abs error " + fmt(worst) + (warmup_exact ? "; rho = 0 through epoch 50" : "; rho nonzero in warmup")};
}

// ---- 3 -----------------------------------------------------------------------

Outcome published_rows() {
  struct Row {
    double pro, con, reported;
  };
  const Row rows[] = {{40.0, 58.9, 49.5}, {35.3, 67.1, 51.2}, {41.5, 66.7, 54.1},
                      {30.6, 61.7, 46.2}, {17.7, 74.5, 46.1}, {45.4, 16.5, 30.9}};
  double worst = 0;
  for (const auto& r : rows) worst = std::max(worst, std::abs(analysis::average_pro_con(r.pro, r.con) - r.reported));
  return {worst <= 0.05 + 1e-9, "6 rows, max deviation from the reported value " + fmt(worst)};
}

// ---- 4 -----------------------------------------------------------------------

Outcome divergences() {
  Rng rng(404);
  double worst = 0;
  bool props = true;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.below(50);
    auto draw = [&] {
      std::vector<double> v(n);
      double s = 0;
      for (auto& x : v) s += (x = (i % 3 == 0 && rng.below(3) == 0) ? 0.0 : rng.uniform());
      if (s == 0) v[0] = s = 1;
      for (auto& x : v) x /= s;
      return v;
    };
    const auto p = draw(), q = draw();
    const double d = analysis::js_divergence(p, q);
    worst = std::max(worst, std::abs(d - oracle::js_divergence(p, q)));
    props = props && d == analysis::js_divergence(q, p) && d >= 0 && d <= std::log(2.0) &&
            analysis::js_divergence(p, p) == 0.0 && (p == q || d > 1e-12);
  }
  const std::vector<double> a{0.5, 0.5, 0, 0}, b{0, 0, 0.25, 0.75};
  const double disjoint = std::abs(analysis::js_divergence(a, b) - std::log(2.0));
  return {worst < 1e-10 && props && disjoint <= 1e-12,
          "1000 pairs, max abs error " + fmt(worst) + (props ? "" : ", property violated") +
              "; disjoint error " + fmt(disjoint)};
}

// ---- 5 -----------------------------------------------------------------------

Outcome clustering_metrics() {
  Rng rng(505);
  double worst = 0;
  for (int s = 0; s < 20; ++s) {
    const std::size_t n = 2 + rng.below(99);
    std::vector<int> c(n), k(n);
    const auto nc = 1 + rng.below(6), nk = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = static_cast<int>(rng.below(nc));
      k[i] = static_cast<int>(rng.below(nk));
    }
    const auto want = oracle::homogeneity_completeness(c, k);
    worst = std::max({worst, std::abs(analysis::homogeneity(c, k) - want.homogeneity),
                      std::abs(analysis::completeness(c, k) - want.completeness)});
  }
  std::vector<int> labels;
  for (int t = 0; t < 6; ++t)
    for (int i = 0; i < 10; ++i) labels.push_back(t);
  const std::vector<int> one(labels.size(), 0);
  const bool limits = analysis::homogeneity(labels, labels) == 1.0 && analysis::completeness(labels, labels) == 1.0 &&
                      analysis::homogeneity(labels, one) == 0.0 && analysis::completeness(labels, one) == 1.0;
  return {worst < 1e-9 && limits, "20 labelings, max error " + fmt(worst) + (limits ? "; limits exact" : "; limits off")};
}

// ---- 6 -----------------------------------------------------------------------

Outcome capacity() {
  const auto t = toy::load(16, 0);
  SplitSpec all;
  all.zero_shot_topic = -1;
  for (const auto& ex : t.corpus.examples)
    if (ex.is_labeled()) all.train.push_back(ex);
  auto cfg = toy::small_config(16);
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.target_train_accuracy = 0.95;
  const double c0 = cpu_seconds();
  const auto t0 = Clock::now();
  const auto rec = train_fresh(cfg, all, t.table, t.n_topics);
  const double cpu = cpu_seconds() - c0, wall = seconds_since(t0);
  double best_acc = 0;
  int reached = 0;
  for (const auto& e : rec.epochs) {
    best_acc = std::max(best_acc, e.train_accuracy);
    if (!reached && e.train_accuracy >= 0.95) reached = e.epoch;
  }
  return {reached > 0 && cpu < 60.0,
          std::to_string(all.train.size()) + " examples; " +
              (reached ? "95% train accuracy at epoch " + std::to_string(reached)
                       : "best accuracy " + fmt(best_acc) + " in 200 epochs") +
              "; " + fmt(cpu) + " s CPU, " + fmt(wall) + " s wall"};
}

// ---- 7 -----------------------------------------------------------------------

// Topic identity lives only in topic-specific nuisance words; stance comes
// from shared marker words, drawn independently of the topic.
Corpus nuisance_corpus(std::uint64_t seed) {
  const std::vector<std::string> topics{"amber", "cobalt", "indigo", "saffron"};
  const std::vector<std::vector<std::string>> nuisance{
      {"quarv", "tindle", "brosk", "palemo", "wexil", "drunet"},
      {"mizzard", "colpet", "frindo", "gaskel", "hulvor", "jontex"},
      {"kerblin", "lorvat", "mudrick", "nivlet", "orsang", "plimbo"},
      {"rasket", "sulmon", "tervid", "unklet", "vorbid", "wistle"}};
  const std::vector<std::vector<std::string>> markers{{"reject", "condemn"}, {"ponder", "observe"}, {"endorse", "applaud"}};
  const std::vector<std::string> filler{"today", "people", "thing", "saying", "really", "world", "street", "group"};
  const char* names[] = {"con", "neutral", "pro"};
  Rng rng(seed);
  std::ostringstream tsv;
  tsv << "tweet\ttopic\tstance\n";
  for (std::size_t t = 0; t < topics.size(); ++t)
    for (int i = 0; i < 45; ++i) {
      std::vector<std::string> words;
      for (int w = 0; w < 6; ++w) words.push_back(nuisance[t][rng.below(6)]);
      for (int w = 0; w < 2; ++w) words.push_back(filler[rng.below(filler.size())]);
      const bool labeled = i < 36 || t != 0;
      const auto stance = rng.below(3);
      words.push_back(markers[stance][rng.below(2)]);
      rng.shuffle(words);
      for (std::size_t w = 0; w < words.size(); ++w) tsv << (w ? " " : "") << words[w];
      tsv << '\t' << topics[t] << '\t' << (labeled ? names[stance] : "") << '\n';
    }
  std::istringstream in(tsv.str());
  return parse_dataset(in, "nuisance");
}

Outcome adversary_effect() {
  const auto t0 = Clock::now();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Corpus corpus = nuisance_corpus(derive_seed(7000, seed));
    const SplitSpec split = make_splits(corpus, 0, seed);
    const auto table = EmbeddingTable::build(corpus.vocabulary(), nullptr, 16, derive_seed(seed, 0xE3B));
    // picked on seeds 100-104; these seeds were not used for the choice
    TrainConfig cfg;
    cfg.embed_dim = 16;
    cfg.hidden = 12;
    cfg.stance_hidden = 24;
    cfg.disc_hidden = 12;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.001;
    cfg.max_epochs = 100;
    cfg.patience = 100;
    cfg.gamma = 10;
    cfg.seed = seed;
    double h[2];
    for (int v = 0; v < 2; ++v) {
      const auto c = apply_variant(cfg, v == 0 ? "full" : "no-adv");
      auto params = model::ModelParams::init(c.model_dims(corpus.topics.size()), c.model_options(), derive_seed(seed, 0));
      train(c, split, table, params);
      const auto reps = analysis::extract_representations(params, table, corpus.examples);
      h[v] = analysis::cluster_probe(reps, corpus.topics.size(), seed).homogeneity;
    }
    if (h[0] < h[1]) ++wins;
    detail += (seed ? ", " : "") + fmt(h[0]) + "/" + fmt(h[1]);
  }
  const double secs = seconds_since(t0);
  return {wins >= 4 && secs < 600.0, "homogeneity TOAD/-adv per seed: " + detail + "; adversary lower in " +
                                          std::to_string(wins) + " of 5; " + fmt(secs) + " s"};
}

// ---- 8 -----------------------------------------------------------------------

Outcome search_protocol() {
  Rng rng(808);
  int agree = 0;
  for (int s = 0; s < 25; ++s) {
    const std::size_t n = 3 + rng.below(18);
    std::vector<oracle::Trial> mocked;
    for (std::size_t i = 0; i < n; ++i) {
      const double stance = static_cast<double>(rng.below(6)) / 10.0;
      const double disc = rng.below(5) == 0 ? 0.001 * static_cast<double>(rng.below(10)) : static_cast<double>(1 + rng.below(5)) / 10.0;
      mocked.push_back({stance, disc});
    }
    if (s == 0) mocked = {{0.60, 0.30}, {0.55, 0.05}, {0.62, 0.50}, {0.99, 0.005}};
    const auto want = oracle::select(mocked);
    const auto got = hyperparameter_search(SearchSpace::standard(), TrainConfig{}, mocked.size(), derive_seed(808, s),
                                           [&](const TrainConfig&, std::size_t i) {
                                             return TrialOutcome{mocked[i].stance, mocked[i].disc};
                                           });
    bool same = got.best == want.best;
    for (std::size_t i = 0; i < mocked.size(); ++i) {
      same = same && got.trials[i].excluded == want.excluded[i];
      if (!want.excluded[i]) same = same && got.trials[i].mean_rank == want.mean_rank[i];
    }
    if (s == 0) same = same && got.best == std::optional<std::size_t>(2);
    agree += same;
  }
  return {agree == 25, std::to_string(agree) + " of 25 scenarios match the rank-average oracle"};
}

// ---- 9 -----------------------------------------------------------------------

Outcome ablations() {
  const auto t = toy::load(8, 0);
  auto cfg = toy::small_config(8);
  cfg.max_epochs = 55;
  cfg.patience = 100;
  auto variants = ablation_table_variants();
  for (const auto& v : variant_ids())
    if (std::find(variants.begin(), variants.end(), v) == variants.end()) variants.push_back(v);
  std::string bad;
  for (const auto& v : variants) {
    const auto c = apply_variant(cfg, v);
    const auto rec = ablate(cfg, v, t.split, t.table, t.n_topics);
    bool ok = rec.variant == v && !rec.epochs.empty();
    for (const auto& e : rec.epochs) {
      const auto& b = e.loss;
      ok = ok && (c.use_adversary ? b.topic > 0.0 : b.topic == 0.0);
      ok = ok && (c.use_topic_rec ? b.topic_rec > 0.0 : b.topic_rec == 0.0);
      ok = ok && (c.use_doc_rec ? b.doc_rec > 0.0 : b.doc_rec == 0.0);
      if (!(c.use_transformation && c.use_transform_penalty)) ok = ok && b.transform == 0.0;
    }
    if (!ok) bad += (bad.empty() ? "" : ", ") + v;
  }
  return {bad.empty(), std::to_string(variants.size()) + " variants trained" + (bad.empty() ? "; disabled terms exactly 0" : "; wrong breakdown: " + bad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"schedule closed forms", schedules},
      {"metric arithmetic", published_rows},
      {"divergence suite", divergences},
      {"clustering metrics", clustering_metrics},
      {"capacity smoke test", capacity},
      {"adversary effect", adversary_effect},
      {"search protocol", search_protocol},
      {"ablation harness", ablations},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
