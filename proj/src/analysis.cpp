#include "toad/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "toad/autodiff.hpp"
#include "toad/errors.hpp"
#include "toad/rng.hpp"

namespace toad::analysis {

double average_pro_con(double f1_pro, double f1_con) { return 0.5 * (f1_pro + f1_con); }

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_of(double precision, double recall) {
  return safe_div(2.0 * precision * recall, precision + recall);
}

}  // namespace

MetricsReport f_avg(std::span<const Stance> predictions, std::span<const Stance> golds) {
  if (predictions.size() != golds.size()) {
    throw InputError("f_avg: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(golds.size()) + " gold labels");
  }
  if (golds.empty()) throw InputError("f_avg: no examples");

  std::array<std::size_t, kNumStances> tp{}, predicted{}, gold{};
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto p = static_cast<std::size_t>(predictions[i]);
    const auto g = static_cast<std::size_t>(golds[i]);
    ++predicted[p];
    ++gold[g];
    if (p == g) ++tp[g];
  }
  MetricsReport report;
  report.count = golds.size();
  for (std::size_t c = 0; c < kNumStances; ++c) {
    auto& s = report.per_class[c];
    s.precision = safe_div(static_cast<double>(tp[c]), static_cast<double>(predicted[c]));
    s.recall = safe_div(static_cast<double>(tp[c]), static_cast<double>(gold[c]));
    s.f1 = f1_of(s.precision, s.recall);
    s.support = gold[c];
  }
  report.f_avg = average_pro_con(report.of(Stance::kPro).f1, report.of(Stance::kCon).f1);
  return report;
}

double macro_f1(std::span<const int> predictions, std::span<const int> golds) {
  if (predictions.size() != golds.size()) {
    throw InputError("macro_f1: prediction/gold length mismatch");
  }
  if (golds.empty()) throw InputError("macro_f1: no examples");
  std::map<int, std::array<std::size_t, 3>> counts;  // tp, predicted, gold
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ++counts[predictions[i]][1];
    ++counts[golds[i]][2];
    if (predictions[i] == golds[i]) ++counts[golds[i]][0];
  }
  double total = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = safe_div(static_cast<double>(c[0]), static_cast<double>(c[1]));
    const double r = safe_div(static_cast<double>(c[0]), static_cast<double>(c[2]));
    total += f1_of(p, r);
  }
  return total / static_cast<double>(counts.size());
}

// ---- divergence ----------------------------------------------------------------

std::vector<double> word_distribution(std::span<const Document> docs,
                                      std::span<const std::string> vocabulary) {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(vocabulary.size());
  for (std::size_t i = 0; i < vocabulary.size(); ++i) index.emplace(vocabulary[i], i);

  std::vector<double> counts(vocabulary.size(), 0.0);
  double total = 0.0;
  for (const auto& doc : docs) {
    for (const auto& token : doc) {
      auto it = index.find(token);
      if (it == index.end()) continue;
      counts[it->second] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw InputError("word_distribution: no in-vocabulary tokens");
  for (auto& c : counts) c /= total;
  return counts;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw InputError("js_divergence: distributions of length " + std::to_string(p.size()) +
                     " and " + std::to_string(q.size()));
  }
  if (p.empty()) throw InputError("js_divergence: empty distributions");
  auto check = [](std::span<const double> d, const char* name) {
    double sum = 0.0;
    for (double x : d) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw InputError(std::string("js_divergence: ") + name + " has a negative or non-finite entry");
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InputError(std::string("js_divergence: ") + name + " does not sum to 1");
    }
  };
  check(p, "P");
  check(q, "Q");
  return kernels::js_divergence_unchecked(p, q);
}

std::string_view convention_name(VocabularyConvention c) {
  return c == VocabularyConvention::kUnionOfPair ? "union-of-pair" : "first-topic";
}

VocabularyConvention parse_convention(std::string_view text) {
  if (text == "union-of-pair" || text == "union") return VocabularyConvention::kUnionOfPair;
  if (text == "first-topic" || text == "first") return VocabularyConvention::kFirstTopic;
  throw ConfigError("unknown vocabulary convention '" + std::string(text) +
                    "' (expected union-of-pair or first-topic)");
}

namespace {

std::set<std::string> vocabulary_of(const std::vector<Document>& docs) {
  std::set<std::string> v;
  for (const auto& d : docs) v.insert(d.begin(), d.end());
  return v;
}

}  // namespace

DivergenceMatrix divergence_matrix(std::span<const std::vector<Document>> corpora,
                                   std::span<const std::string> topic_names,
                                   VocabularyConvention convention, kernels::Exec exec) {
  if (corpora.size() != topic_names.size()) {
    throw ConfigError("divergence_matrix: corpus/topic name count mismatch");
  }
  const std::size_t n = corpora.size();
  if (n < 2) throw InputError("divergence_matrix: need at least two topics");
  std::vector<std::set<std::string>> vocabs;
  vocabs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    vocabs.push_back(vocabulary_of(corpora[i]));
    if (vocabs.back().empty()) {
      throw InputError("divergence_matrix: topic '" + topic_names[i] + "' has no tokens");
    }
  }

  // Build all (P, Q) pairs, then hand them to the batch kernel.
  std::vector<std::vector<double>> ps(n * n), qs(n * n);
  kernels::for_each_index(
      n * n,
      [&](std::size_t idx) {
        const std::size_t i = idx / n, j = idx % n;
        std::vector<std::string> vocab;
        if (convention == VocabularyConvention::kUnionOfPair) {
          std::set_union(vocabs[i].begin(), vocabs[i].end(), vocabs[j].begin(), vocabs[j].end(),
                         std::back_inserter(vocab));
        } else {
          vocab.assign(vocabs[i].begin(), vocabs[i].end());
        }
        ps[idx] = word_distribution(corpora[i], vocab);
        // Under first-topic the second corpus may share no word with V_i.
        try {
          qs[idx] = word_distribution(corpora[j], vocab);
        } catch (const InputError&) {
          throw InputError("divergence_matrix: topic '" + topic_names[j] +
                           "' shares no vocabulary with '" + topic_names[i] + "'");
        }
      },
      exec);

  DivergenceMatrix m;
  m.convention = convention;
  m.topics.assign(topic_names.begin(), topic_names.end());
  m.values.assign(n * n, 0.0);
  kernels::js_batch(ps, qs, m.values, exec);
  return m;
}

// ---- representations -------------------------------------------------------------

Representations extract_representations(const model::ModelParams& params,
                                        const EmbeddingTable& table,
                                        std::span<const Example> examples, kernels::Exec exec) {
  Representations reps;
  reps.dim = 2 * params.dims.hidden;
  reps.vectors.assign(examples.size() * reps.dim, 0.0);
  reps.topics.resize(examples.size());
  kernels::for_each_index(
      examples.size(),
      [&](std::size_t i) {
        ad::NoGradGuard guard;
        const auto encoded = model::encode(examples[i], table);
        const auto out = model::forward(encoded, table, params, 0.0, false);
        const auto v = out.v_tilde.values();
        std::copy(v.begin(), v.end(), reps.vectors.begin() + static_cast<std::ptrdiff_t>(i * reps.dim));
        reps.topics[i] = examples[i].topic_id;
      },
      exec);
  return reps;
}

// ---- k-means ------------------------------------------------------------------------

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

std::vector<double> kmeans_plus_plus(std::span<const double> points, std::size_t n,
                                     std::size_t dim, std::size_t k, Rng& rng) {
  std::vector<double> centroids(k * dim);
  const auto first = static_cast<std::size_t>(rng.below(n));
  std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(first * dim), dim, centroids.begin());
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    const double* prev = centroids.data() + (c - 1) * dim;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], sq_dist(points.data() + i * dim, prev, dim));
      total += closest[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += closest[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));  // all points coincide with centroids
    }
    std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(pick * dim), dim,
                centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
  }
  return centroids;
}

KMeansResult lloyd(std::span<const double> points, std::size_t n, std::size_t dim,
                   std::vector<double> centroids, const KMeansOptions& opt) {
  const std::size_t k = opt.k;
  KMeansResult r;
  r.labels.assign(n, 0);
  std::vector<double> dist2(n, 0.0);
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    kernels::assign_nearest(points, centroids, dim, r.labels, dist2, opt.exec);
    const double inertia = std::accumulate(dist2.begin(), dist2.end(), 0.0);
    r.iterations = it;

    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(r.labels[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += points[i * dim + d];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t d = 0; d < dim; ++d) {
          centroids[c * dim + d] = sums[c * dim + d] / static_cast<double>(counts[c]);
        }
        continue;
      }
      // Empty cluster: move it to the point farthest from its centroid.
      std::size_t far = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist2[i] > best) {
          best = dist2[i];
          far = i;
        }
      }
      taken[far] = true;
      dist2[far] = 0.0;
      std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(far * dim), dim,
                  centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
    }
    const bool converged =
        std::isfinite(previous) && std::abs(previous - inertia) <= opt.tolerance * std::max(previous, 1e-300);
    previous = inertia;
    if (converged) break;
  }
  kernels::assign_nearest(points, centroids, dim, r.labels, dist2, opt.exec);
  r.inertia = std::accumulate(dist2.begin(), dist2.end(), 0.0);
  r.centroids = std::move(centroids);
  return r;
}

}  // namespace

KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansOptions& options) {
  if (dim == 0 || points.size() % dim != 0) {
    throw ConfigError("kmeans: point buffer is not a multiple of dim");
  }
  const std::size_t n = points.size() / dim;
  if (options.k == 0) throw ConfigError("kmeans: k must be positive");
  if (n < options.k) {
    throw ConfigError("kmeans: " + std::to_string(n) + " points for k=" + std::to_string(options.k));
  }
  if (options.restarts < 1 || options.max_iterations < 1) {
    throw ConfigError("kmeans: restarts and max_iterations must be positive");
  }
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < options.restarts; ++restart) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(restart)));
    auto init = kmeans_plus_plus(points, n, dim, options.k, rng);
    auto result = lloyd(points, n, dim, std::move(init), options);
    if (result.inertia < best.inertia) best = std::move(result);
  }
  return best;
}

namespace {

double entropy(const std::map<int, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

// H(A | B) from the joint contingency table.
double conditional_entropy(std::span<const int> a, std::span<const int> b) {
  std::map<std::pair<int, int>, std::size_t> joint;
  std::map<int, std::size_t> marginal_b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++marginal_b[b[i]];
  }
  const double n = static_cast<double>(a.size());
  double h = 0.0;
  for (const auto& [key, c] : joint) {
    const double nb = static_cast<double>(marginal_b[key.second]);
    h -= (static_cast<double>(c) / n) * std::log(static_cast<double>(c) / nb);
  }
  return h;
}

void check_labels(std::span<const int> classes, std::span<const int> clusters, const char* what) {
  if (classes.size() != clusters.size()) {
    throw InputError(std::string(what) + ": label length mismatch");
  }
  if (classes.empty()) throw InputError(std::string(what) + ": no labels");
}

std::map<int, std::size_t> count_labels(std::span<const int> labels) {
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  return counts;
}

}  // namespace

double homogeneity(std::span<const int> classes, std::span<const int> clusters) {
  check_labels(classes, clusters, "homogeneity");
  const double h_c = entropy(count_labels(classes), static_cast<double>(classes.size()));
  if (h_c == 0.0) return 1.0;
  return 1.0 - conditional_entropy(classes, clusters) / h_c;
}

double completeness(std::span<const int> classes, std::span<const int> clusters) {
  check_labels(classes, clusters, "completeness");
  const double h_k = entropy(count_labels(clusters), static_cast<double>(clusters.size()));
  if (h_k == 0.0) return 1.0;
  return 1.0 - conditional_entropy(clusters, classes) / h_k;
}

ClusterReport cluster_probe(const Representations& reps, std::size_t k, std::uint64_t seed,
                            kernels::Exec exec) {
  const std::size_t n = reps.count();
  if (reps.vectors.size() != n * reps.dim) {
    throw ConfigError("cluster_probe: representation buffer does not match count x dim");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0));
  rng.shuffle(order);
  const auto fit_n = static_cast<std::size_t>(std::llround(kProbeFitFraction * static_cast<double>(n)));
  if (fit_n < k || fit_n >= n) {
    throw ConfigError("cluster_probe: " + std::to_string(n) + " representations are too few for k=" +
                     std::to_string(k));
  }

  auto gather = [&](std::size_t from, std::size_t to, std::vector<double>& pts, std::vector<int>& topics) {
    for (std::size_t i = from; i < to; ++i) {
      const auto row = reps.vectors.begin() + static_cast<std::ptrdiff_t>(order[i] * reps.dim);
      pts.insert(pts.end(), row, row + static_cast<std::ptrdiff_t>(reps.dim));
      topics.push_back(reps.topics[order[i]]);
    }
  };
  std::vector<double> fit_pts, eval_pts;
  std::vector<int> fit_topics, eval_topics;
  gather(0, fit_n, fit_pts, fit_topics);
  gather(fit_n, n, eval_pts, eval_topics);

  KMeansOptions opt;
  opt.k = k;
  opt.seed = derive_seed(seed, 1);
  opt.exec = exec;
  const auto km = kmeans(fit_pts, reps.dim, opt);

  std::vector<int> labels(eval_topics.size());
  std::vector<double> dist2(eval_topics.size());
  kernels::assign_nearest(eval_pts, km.centroids, reps.dim, labels, dist2, exec);

  ClusterReport report;
  report.homogeneity = homogeneity(eval_topics, labels);
  report.completeness = completeness(eval_topics, labels);
  report.k = k;
  report.fit_size = fit_n;
  report.eval_size = n - fit_n;
  report.seed = seed;
  return report;
}

}  // namespace toad::analysis
