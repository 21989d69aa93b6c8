#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "toad/data.hpp"
#include "toad/kernels.hpp"
#include "toad/model.hpp"

namespace toad::analysis {

// ---- stance metrics ------------------------------------------------------------

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
};

// Values in [0, 1]; multiply by 100 for reporting.
struct MetricsReport {
  std::array<ClassScores, kNumStances> per_class{};  // indexed by Stance
  double f_avg = 0.0;
  std::size_t count = 0;

  const ClassScores& of(Stance s) const { return per_class[static_cast<std::size_t>(s)]; }
};

// Mean of the pro and con F1 scores; neutral is excluded.
double average_pro_con(double f1_pro, double f1_con);

// Per-class precision/recall/F1 (0/0 := 0) and F_avg.
MetricsReport f_avg(std::span<const Stance> predictions, std::span<const Stance> golds);

// Macro F1 over the labels that occur in either sequence.
double macro_f1(std::span<const int> predictions, std::span<const int> golds);

// ---- topic divergence ------------------------------------------------------------

using Document = std::vector<std::string>;

// Relative frequencies of the vocabulary words over all tokens of `docs`
// that fall in the vocabulary.
std::vector<double> word_distribution(std::span<const Document> docs,
                                      std::span<const std::string> vocabulary);

// Natural-log Jensen-Shannon divergence with M = (P+Q)/2; in [0, ln 2].
double js_divergence(std::span<const double> p, std::span<const double> q);

enum class VocabularyConvention { kUnionOfPair, kFirstTopic };
std::string_view convention_name(VocabularyConvention c);
VocabularyConvention parse_convention(std::string_view text);

struct DivergenceMatrix {
  VocabularyConvention convention = VocabularyConvention::kUnionOfPair;
  std::vector<std::string> topics;
  std::vector<double> values;  // row-major; row = first topic

  std::size_t size() const { return topics.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * topics.size() + col]; }
};

// Entry (i, j) is D_JS(P_i || P_j) over V_i u V_j (union-of-pair) or over
// V_i alone (first-topic).
DivergenceMatrix divergence_matrix(std::span<const std::vector<Document>> corpora,
                                   std::span<const std::string> topic_names,
                                   VocabularyConvention convention,
                                   kernels::Exec exec = kernels::Exec::kParallel);

// ---- clustering probe --------------------------------------------------------------

struct Representations {
  std::size_t dim = 0;
  std::vector<double> vectors;  // row-major, one row per example
  std::vector<int> topics;

  std::size_t count() const { return topics.size(); }
};

// One v~ (transformed document representation) per example, with its topic.
Representations extract_representations(const model::ModelParams& params,
                                        const EmbeddingTable& table,
                                        std::span<const Example> examples,
                                        kernels::Exec exec = kernels::Exec::kParallel);

struct KMeansOptions {
  std::size_t k = 6;
  int restarts = 10;
  int max_iterations = 300;
  double tolerance = 1e-6;  // relative inertia change
  std::uint64_t seed = 0;
  kernels::Exec exec = kernels::Exec::kParallel;
};

struct KMeansResult {
  std::vector<double> centroids;  // k x dim
  std::vector<int> labels;
  double inertia = 0.0;
  int iterations = 0;
};

// k-means++ seeding, Lloyd iterations, best of `restarts` by inertia.
KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansOptions& options);

// Entropy-based scores; 1.0 when the relevant marginal entropy is zero.
double homogeneity(std::span<const int> classes, std::span<const int> clusters);
double completeness(std::span<const int> classes, std::span<const int> clusters);

struct ClusterReport {
  double homogeneity = 0.0;
  double completeness = 0.0;
  std::size_t k = 0;
  std::size_t fit_size = 0;
  std::size_t eval_size = 0;
  std::uint64_t seed = 0;
};

inline constexpr double kProbeFitFraction = 0.8;

// Random fit/evaluate split of the representations; K-means fitted on the
// first part, evaluate-part points assigned to the nearest centroid and
// scored against their topics.
ClusterReport cluster_probe(const Representations& reps, std::size_t k, std::uint64_t seed,
                            kernels::Exec exec = kernels::Exec::kParallel);

}  // namespace toad::analysis
