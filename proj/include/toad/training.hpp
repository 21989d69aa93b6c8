#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "toad/data.hpp"
#include "toad/kernels.hpp"
#include "toad/model.hpp"

namespace toad::training {

// ---- configuration ---------------------------------------------------------------

struct TrainConfig {
  std::size_t embed_dim = EmbeddingTable::kDefaultDim;
  std::size_t hidden = 80;
  std::size_t stance_hidden = 147;
  std::size_t disc_hidden = 85;
  double lambda_rec = 1.0;
  double lambda_tr = 0.1;
  double gamma = 14.0;
  double alpha = 10.0;
  double beta = 0.25;
  double learning_rate = 0.001;
  int max_epochs = 100;
  int patience = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  bool use_transformation = true;
  bool use_transform_penalty = true;
  bool use_topic_rec = true;
  bool use_doc_rec = true;
  bool use_residual_topic = true;
  bool use_unlabeled = true;
  bool use_adversary = true;
  bool use_attention = true;

  // Stop as soon as labeled-train stance accuracy reaches this value; 0 disables.
  double target_train_accuracy = 0.0;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;

  model::ModelOptions model_options() const;
  model::ModelDims model_dims(std::size_t n_topics) const;

  bool operator==(const TrainConfig&) const = default;
};

// Flat "key = value" text; '#' starts a comment. Unknown keys, duplicate
// keys and unparsable values are ConfigErrors naming the line.
TrainConfig parse_config(std::istream& in, const std::string& source = "<config>",
                         TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path);
void write_config(const TrainConfig& config, std::ostream& out);
// Single-line "key=value key=value ..." rendering, used in logs and manifests.
std::string describe(const TrainConfig& config);

// ---- schedule -----------------------------------------------------------------------

inline constexpr int kWarmupEpochs = 50;

struct ScheduleState {
  int epoch = 1;
  int total_epochs = 100;
  double progress = 0.0;
  double lr = 0.0;
  double rho = 0.0;
};

// For e <= 50: lr = l, rho = 0. Otherwise p = (e - 50)/t,
// lr = l / (1 + alpha p)^beta, rho = 2 / (1 + exp(-gamma p)) - 1.
ScheduleState schedule(int epoch, int total_epochs, double base_lr, double alpha, double beta,
                       double gamma);

// ---- loss -----------------------------------------------------------------------------

// Unweighted term values; total is the weighted objective. Disabled terms are 0.
struct LossBreakdown {
  double stance = 0.0;
  double topic = 0.0;
  double topic_rec = 0.0;
  double doc_rec = 0.0;
  double transform = 0.0;
  double total = 0.0;
};

struct BatchLoss {
  ad::Tensor total;  // scalar, differentiable
  LossBreakdown breakdown;
};

// lambda_rec (L_d^rec + L_t^rec) + lambda_tr L^tr + L^s + L^t. The stance
// term averages over labeled members only (0 when there are none); the
// other data terms average over every member. The reversal of L^t for the
// encoder happens inside the gradient reversal layer with strength rho.
BatchLoss batch_loss(std::span<const model::EncodedExample> members, const EmbeddingTable& table,
                     const model::ModelParams& params, const TrainConfig& config, double rho);

// ---- early stopping ------------------------------------------------------------------

class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  // Returns true when `score` strictly improves on the best so far.
  bool update(int epoch, double score);
  bool should_stop(int epoch) const;
  int best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_score_;
};

// ---- training loop ---------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double rho = 0.0;
  LossBreakdown loss;          // means over the epoch's batches
  double dev_f_avg = 0.0;
  double train_disc_f1 = 0.0;  // NaN without an adversary
  double train_accuracy = 0.0;
};

struct RunRecord {
  std::string variant = "full";
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_dev_f_avg = 0.0;
  int stopping_epoch = 0;
  std::string stop_reason;
  std::optional<model::ModelParams> best_params;

  const EpochRecord& best() const;
};

// TSV with one row per epoch; no timestamps so reruns are byte-identical.
void write_run_record(const RunRecord& record, std::ostream& out);

struct TrainHooks {
  // Model-selection score; defaults to dev F_avg (or labeled-train F_avg
  // when the split has no dev examples).
  std::function<double(const model::ModelParams&)> dev_scorer;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Trains `params` in place (they end in their final state); the record
// holds a copy of the best-scoring parameters.
RunRecord train(const TrainConfig& config, const SplitSpec& split, const EmbeddingTable& table,
                model::ModelParams& params, const TrainHooks& hooks = {});

// Builds parameters for `config` and trains them.
RunRecord train_fresh(const TrainConfig& config, const SplitSpec& split,
                      const EmbeddingTable& table, std::size_t n_topics,
                      const TrainHooks& hooks = {});

// ---- inference ------------------------------------------------------------------------

std::vector<Stance> predict(const model::ModelParams& params, const EmbeddingTable& table,
                            std::span<const Example> examples,
                            kernels::Exec exec = kernels::Exec::kParallel);

// Argmax topic of the discriminator; requires an adversary.
std::vector<int> predict_topics(const model::ModelParams& params, const EmbeddingTable& table,
                                std::span<const Example> examples,
                                kernels::Exec exec = kernels::Exec::kParallel);

// F_avg of the labeled members of `examples`.
double evaluate_f_avg(const model::ModelParams& params, const EmbeddingTable& table,
                      std::span<const Example> examples,
                      kernels::Exec exec = kernels::Exec::kParallel);

// ---- hyperparameter search ------------------------------------------------------------

struct IntRange {
  long long lo = 0;
  long long hi = 0;  // inclusive
};

struct SearchSpace {
  IntRange hidden{40, 150};
  IntRange stance_hidden{80, 300};
  IntRange disc_hidden{40, 150};
  std::vector<double> lambda_rec{1.0};
  std::vector<double> lambda_tr{0.1, 1.0, 10.0};
  IntRange gamma{10, 15};
  std::vector<double> alpha{10.0};
  std::vector<double> beta{0.25};
  std::vector<double> learning_rate{0.001};

  static SearchSpace standard() { return {}; }
  bool contains(const TrainConfig& config) const;
};

// Returns a uniform index in [0, n).
using IndexSource = std::function<std::uint64_t(std::uint64_t n)>;

// Draws, in order: hidden, stance_hidden, disc_hidden, lambda_rec,
// lambda_tr, gamma, alpha, beta, learning_rate. Other fields come from base.
TrainConfig sample_config(const SearchSpace& space, const TrainConfig& base,
                          const IndexSource& draw);

struct TrialOutcome {
  double stance_f1 = 0.0;  // dev F_avg
  double disc_f1 = 0.0;    // train discriminator macro F1
};

struct TrialResult {
  std::size_t index = 0;
  TrainConfig config;
  double stance_f1 = 0.0;
  double disc_f1 = 0.0;
  bool excluded = false;
  double mean_rank = 0.0;  // NaN for excluded trials
};

inline constexpr double kMinDiscriminatorF1 = 0.01;

// Excludes trials with disc F1 below the threshold, ranks the rest (stance
// descending, discriminator ascending, ties share the average rank) and
// returns the index into `trials` of the minimal mean rank; ties go to the
// higher stance F1, then the lower trial index. Fills excluded/mean_rank.
std::optional<std::size_t> select_best(std::vector<TrialResult>& trials);

struct SearchResult {
  std::vector<TrialResult> trials;
  std::optional<std::size_t> best;  // index into trials
};

using TrialEvaluator = std::function<TrialOutcome(const TrainConfig&, std::size_t trial_index)>;

// Trial i samples its configuration from Rng(derive_seed(seed, i)) and is
// trained with that same derived seed. Trials run concurrently.
SearchResult hyperparameter_search(const SearchSpace& space, const TrainConfig& base,
                                   std::size_t trials, std::uint64_t seed,
                                   const TrialEvaluator& evaluate, int workers = 0);

void write_trial_table(const SearchResult& result, std::ostream& out);

// ---- ablations ---------------------------------------------------------------------------

// Accepted ids: full, no-transformation, no-transform-loss, no-topic-rec,
// no-doc-rec, no-rec, no-residual-topic, no-unlabeled, no-adv, bicond.
TrainConfig apply_variant(TrainConfig config, std::string_view variant);
std::vector<std::string> variant_ids();
// The full model followed by its seven single-component ablations.
std::vector<std::string> ablation_table_variants();

RunRecord ablate(const TrainConfig& base, std::string_view variant, const SplitSpec& split,
                 const EmbeddingTable& table, std::size_t n_topics, const TrainHooks& hooks = {});

}  // namespace toad::training
