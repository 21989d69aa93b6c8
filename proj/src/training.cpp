#include "toad/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <type_traits>
#include <variant>

#include <spdlog/spdlog.h>

#include "toad/adam.hpp"
#include "toad/analysis.hpp"
#include "toad/errors.hpp"
#include "toad/format.hpp"
#include "toad/rng.hpp"

namespace toad::training {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed streams derived from TrainConfig::seed.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 1;

static_assert(std::is_same_v<std::size_t, std::uint64_t>,
              "config fields assume a 64-bit size_t");

using Member = std::variant<std::size_t TrainConfig::*, int TrainConfig::*, double TrainConfig::*,
                            bool TrainConfig::*>;

struct Field {
  std::string_view key;
  Member member;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"embed_dim", &TrainConfig::embed_dim},
      {"hidden", &TrainConfig::hidden},
      {"stance_hidden", &TrainConfig::stance_hidden},
      {"disc_hidden", &TrainConfig::disc_hidden},
      {"lambda_rec", &TrainConfig::lambda_rec},
      {"lambda_tr", &TrainConfig::lambda_tr},
      {"gamma", &TrainConfig::gamma},
      {"alpha", &TrainConfig::alpha},
      {"beta", &TrainConfig::beta},
      {"learning_rate", &TrainConfig::learning_rate},
      {"max_epochs", &TrainConfig::max_epochs},
      {"patience", &TrainConfig::patience},
      {"batch_size", &TrainConfig::batch_size},
      {"seed", &TrainConfig::seed},
      {"use_transformation", &TrainConfig::use_transformation},
      {"use_transform_penalty", &TrainConfig::use_transform_penalty},
      {"use_topic_rec", &TrainConfig::use_topic_rec},
      {"use_doc_rec", &TrainConfig::use_doc_rec},
      {"use_residual_topic", &TrainConfig::use_residual_topic},
      {"use_unlabeled", &TrainConfig::use_unlabeled},
      {"use_adversary", &TrainConfig::use_adversary},
      {"use_attention", &TrainConfig::use_attention},
      {"target_train_accuracy", &TrainConfig::target_train_accuracy},
  };
  return table;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

bool parse_bool(std::string_view text, bool& out) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0" || text == "no" || text == "off") {
    out = false;
    return true;
  }
  return false;
}

std::string render(const TrainConfig& c, const Member& m) {
  return std::visit(
      [&](auto ptr) -> std::string {
        using V = std::decay_t<decltype(c.*ptr)>;
        if constexpr (std::is_same_v<V, bool>) return c.*ptr ? "true" : "false";
        else if constexpr (std::is_same_v<V, double>) return format_double(c.*ptr);
        else return std::to_string(c.*ptr);
      },
      m);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

ad::Tensor mean_of(const std::vector<ad::Tensor>& terms) {
  const auto stacked = ad::concat(terms);
  return ad::mean(stacked);
}

}  // namespace

// ---- configuration ---------------------------------------------------------------

void TrainConfig::validate() const {
  require(embed_dim >= 1, "embed_dim must be at least 1");
  require(hidden >= 1, "hidden must be at least 1");
  require(stance_hidden >= 1, "stance_hidden must be at least 1");
  require(disc_hidden >= 1, "disc_hidden must be at least 1");
  require(finite_nonneg(lambda_rec), "lambda_rec must be finite and non-negative");
  require(finite_nonneg(lambda_tr), "lambda_tr must be finite and non-negative");
  require(finite_nonneg(gamma), "gamma must be finite and non-negative");
  require(finite_nonneg(alpha), "alpha must be finite and non-negative");
  require(finite_nonneg(beta), "beta must be finite and non-negative");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, "learning_rate must be positive");
  require(max_epochs >= 1, "max_epochs must be at least 1");
  require(patience >= 1, "patience must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(target_train_accuracy >= 0.0 && target_train_accuracy <= 1.0,
          "target_train_accuracy must lie in [0, 1]");
}

model::ModelOptions TrainConfig::model_options() const {
  model::ModelOptions o;
  o.transformation = use_transformation;
  o.residual_topic = use_residual_topic;
  o.adversary = use_adversary;
  o.attention = use_attention;
  return o;
}

model::ModelDims TrainConfig::model_dims(std::size_t n_topics) const {
  model::ModelDims d;
  d.embed_dim = embed_dim;
  d.hidden = hidden;
  d.stance_hidden = stance_hidden;
  d.disc_hidden = disc_hidden;
  d.n_topics = n_topics;
  return d;
}

TrainConfig parse_config(std::istream& in, const std::string& source, TrainConfig base) {
  std::map<std::string_view, const Field*> by_key;
  for (const auto& f : fields()) by_key.emplace(f.key, &f);
  std::map<std::string, int> seen;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
    if (auto [prev, fresh] = seen.emplace(std::string(key), line_no); !fresh) {
      throw ConfigError(where + ": duplicate key '" + std::string(key) + "' (first set on line " +
                        std::to_string(prev->second) + ")");
    }
    const bool ok = std::visit(
        [&](auto ptr) {
          using V = std::decay_t<decltype(base.*ptr)>;
          if constexpr (std::is_same_v<V, bool>) return parse_bool(value, base.*ptr);
          else return parse_number(value, base.*ptr);
        },
        it->second->member);
    if (!ok) {
      throw ConfigError(where + ": cannot parse value '" + std::string(value) + "' for '" +
                        std::string(key) + "'");
    }
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

void write_config(const TrainConfig& config, std::ostream& out) {
  for (const auto& f : fields()) out << f.key << " = " << render(config, f.member) << '\n';
}

std::string describe(const TrainConfig& config) {
  std::string s;
  for (const auto& f : fields()) {
    if (!s.empty()) s += ' ';
    s += f.key;
    s += '=';
    s += render(config, f.member);
  }
  return s;
}

// ---- schedule -----------------------------------------------------------------------

ScheduleState schedule(int epoch, int total_epochs, double base_lr, double alpha, double beta,
                       double gamma) {
  if (total_epochs < 1 || epoch < 1 || epoch > total_epochs) {
    throw ConfigError("schedule: epoch " + std::to_string(epoch) + " outside [1, " +
                      std::to_string(total_epochs) + "]");
  }
  ScheduleState s;
  s.epoch = epoch;
  s.total_epochs = total_epochs;
  if (epoch <= kWarmupEpochs) {
    s.lr = base_lr;
    return s;
  }
  const double p = static_cast<double>(epoch - kWarmupEpochs) / static_cast<double>(total_epochs);
  s.progress = p;
  s.lr = base_lr / std::pow(1.0 + alpha * p, beta);
  s.rho = 2.0 / (1.0 + std::exp(-gamma * p)) - 1.0;
  return s;
}

// ---- loss -----------------------------------------------------------------------------

BatchLoss batch_loss(std::span<const model::EncodedExample> members, const EmbeddingTable& table,
                     const model::ModelParams& params, const TrainConfig& config, double rho) {
  if (members.empty()) throw InputError("batch_loss: empty batch");
  const bool adversary = config.use_adversary && params.options.adversary;
  const bool with_rec = config.use_topic_rec || config.use_doc_rec;

  std::vector<ad::Tensor> stance, topic, topic_rec, doc_rec;
  for (const auto& m : members) {
    const auto out = model::forward(m, table, params, rho, with_rec);
    if (m.stance) {
      stance.push_back(ad::cross_entropy(out.stance_logits, static_cast<std::size_t>(*m.stance)));
    }
    if (adversary) {
      topic.push_back(ad::cross_entropy(out.topic_logits, static_cast<std::size_t>(m.topic_id)));
    }
    if (config.use_topic_rec) topic_rec.push_back(out.topic_rec);
    if (config.use_doc_rec) doc_rec.push_back(out.doc_rec);
  }

  BatchLoss result;
  auto& b = result.breakdown;
  std::vector<ad::Tensor> weighted;
  if (!stance.empty()) {
    auto ls = mean_of(stance);
    b.stance = ls.item();
    weighted.push_back(ls);
  }
  if (!topic.empty()) {
    auto lt = mean_of(topic);
    b.topic = lt.item();
    weighted.push_back(lt);
  }
  if (!topic_rec.empty()) {
    auto l = mean_of(topic_rec);
    b.topic_rec = l.item();
    weighted.push_back(ad::scale(l, config.lambda_rec));
  }
  if (!doc_rec.empty()) {
    auto l = mean_of(doc_rec);
    b.doc_rec = l.item();
    weighted.push_back(ad::scale(l, config.lambda_rec));
  }
  if (config.use_transform_penalty && params.transform.defined()) {
    auto l = model::identity_penalty(params.transform);
    b.transform = l.item();
    weighted.push_back(ad::scale(l, config.lambda_tr));
  }
  if (weighted.empty()) {
    result.total = ad::Tensor::scalar(0.0);
  } else {
    result.total = ad::sum(ad::concat(weighted));
  }
  b.total = result.total.item();
  return result;
}

// ---- early stopping ------------------------------------------------------------------

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_score_(-std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw ConfigError("early stopping patience must be at least 1");
}

bool EarlyStopping::update(int epoch, double score) {
  if (score > best_score_) {
    best_score_ = score;
    best_epoch_ = epoch;
    return true;
  }
  return false;
}

bool EarlyStopping::should_stop(int epoch) const {
  return best_epoch_ > 0 && epoch - best_epoch_ >= patience_;
}

// ---- inference ------------------------------------------------------------------------

std::vector<Stance> predict(const model::ModelParams& params, const EmbeddingTable& table,
                            std::span<const Example> examples, kernels::Exec exec) {
  std::vector<Stance> out(examples.size(), Stance::kNeutral);
  kernels::for_each_index(
      examples.size(),
      [&](std::size_t i) {
        ad::NoGradGuard guard;
        const auto enc = model::encode(examples[i], table);
        const auto fw = model::forward(enc, table, params, 0.0, false);
        out[i] = model::predict_stance(fw.stance_logits);
      },
      exec);
  return out;
}

std::vector<int> predict_topics(const model::ModelParams& params, const EmbeddingTable& table,
                                std::span<const Example> examples, kernels::Exec exec) {
  if (!params.options.adversary) throw ConfigError("predict_topics: model has no discriminator");
  std::vector<int> out(examples.size(), 0);
  kernels::for_each_index(
      examples.size(),
      [&](std::size_t i) {
        ad::NoGradGuard guard;
        const auto enc = model::encode(examples[i], table);
        const auto fw = model::forward(enc, table, params, 0.0, false);
        out[i] = model::argmax(fw.topic_logits.values());
      },
      exec);
  return out;
}

double evaluate_f_avg(const model::ModelParams& params, const EmbeddingTable& table,
                      std::span<const Example> examples, kernels::Exec exec) {
  std::vector<Example> labeled;
  for (const auto& e : examples)
    if (e.is_labeled()) labeled.push_back(e);
  if (labeled.empty()) throw InputError("evaluate_f_avg: no labeled examples");
  const auto preds = predict(params, table, labeled, exec);
  std::vector<Stance> golds;
  golds.reserve(labeled.size());
  for (const auto& e : labeled) golds.push_back(*e.stance);
  return analysis::f_avg(preds, golds).f_avg;
}

// ---- training loop ---------------------------------------------------------------------

const EpochRecord& RunRecord::best() const {
  for (const auto& e : epochs)
    if (e.epoch == best_epoch) return e;
  throw UsageError("run record has no best epoch");
}

void write_run_record(const RunRecord& record, std::ostream& out) {
  out << "variant\tepoch\tlr\trho\tloss_total\tloss_stance\tloss_topic\tloss_topic_rec"
         "\tloss_doc_rec\tloss_transform\tdev_f_avg\ttrain_disc_f1\ttrain_accuracy\tbest\n";
  for (const auto& e : record.epochs) {
    out << record.variant << '\t' << e.epoch << '\t' << format_double(e.lr) << '\t'
        << format_double(e.rho) << '\t' << format_double(e.loss.total) << '\t'
        << format_double(e.loss.stance) << '\t' << format_double(e.loss.topic) << '\t'
        << format_double(e.loss.topic_rec) << '\t' << format_double(e.loss.doc_rec) << '\t'
        << format_double(e.loss.transform) << '\t' << format_double(e.dev_f_avg) << '\t'
        << format_double(e.train_disc_f1) << '\t' << format_double(e.train_accuracy) << '\t'
        << (e.epoch == record.best_epoch ? 1 : 0) << '\n';
  }
}

namespace {

void check_finite(const LossBreakdown& b, int epoch) {
  const std::pair<const char*, double> terms[] = {{"stance", b.stance},       {"topic", b.topic},
                                                  {"topic_rec", b.topic_rec}, {"doc_rec", b.doc_rec},
                                                  {"transform", b.transform}, {"total", b.total}};
  for (const auto& [name, value] : terms)
    if (!std::isfinite(value)) throw DivergedError(name, epoch);
}

struct PoolScores {
  double accuracy = kNaN;
  double disc_f1 = kNaN;
};

// Stance accuracy over the labeled members and discriminator macro F1 over
// every member of the training pool.
PoolScores score_pool(const model::ModelParams& params, const EmbeddingTable& table,
                      std::span<const model::EncodedExample> pool) {
  const bool adversary = params.options.adversary;
  std::vector<int> stance_pred(pool.size()), topic_pred(pool.size());
  kernels::for_each_index(
      pool.size(),
      [&](std::size_t i) {
        ad::NoGradGuard guard;
        const auto fw = model::forward(pool[i], table, params, 0.0, false);
        stance_pred[i] = static_cast<int>(model::predict_stance(fw.stance_logits));
        if (adversary) topic_pred[i] = model::argmax(fw.topic_logits.values());
      },
      kernels::Exec::kParallel);

  PoolScores s;
  std::size_t labeled = 0, correct = 0;
  std::vector<int> topic_gold(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    topic_gold[i] = pool[i].topic_id;
    if (!pool[i].stance) continue;
    ++labeled;
    if (stance_pred[i] == static_cast<int>(*pool[i].stance)) ++correct;
  }
  if (labeled > 0) s.accuracy = static_cast<double>(correct) / static_cast<double>(labeled);
  if (adversary && !pool.empty()) s.disc_f1 = analysis::macro_f1(topic_pred, topic_gold);
  return s;
}

void add_into(LossBreakdown& acc, const LossBreakdown& b) {
  acc.stance += b.stance;
  acc.topic += b.topic;
  acc.topic_rec += b.topic_rec;
  acc.doc_rec += b.doc_rec;
  acc.transform += b.transform;
  acc.total += b.total;
}

LossBreakdown divided(LossBreakdown b, double n) {
  b.stance /= n;
  b.topic /= n;
  b.topic_rec /= n;
  b.doc_rec /= n;
  b.transform /= n;
  b.total /= n;
  return b;
}

}  // namespace

RunRecord train(const TrainConfig& config, const SplitSpec& split, const EmbeddingTable& table,
                model::ModelParams& params, const TrainHooks& hooks) {
  config.validate();
  const auto expected = config.model_options();
  const auto& got = params.options;
  if (got.transformation != expected.transformation || got.residual_topic != expected.residual_topic ||
      got.adversary != expected.adversary || got.attention != expected.attention) {
    throw ConfigError("train: parameter structure does not match the config's component flags");
  }
  if (params.dims.embed_dim != table.dim()) {
    throw ConfigError("train: model expects " + std::to_string(params.dims.embed_dim) +
                      "-d embeddings, table has " + std::to_string(table.dim()));
  }

  std::vector<model::EncodedExample> pool = model::encode_all(split.train, table);
  if (config.use_unlabeled) {
    auto extra = model::encode_all(split.unlabeled, table);
    pool.insert(pool.end(), std::make_move_iterator(extra.begin()),
                std::make_move_iterator(extra.end()));
  }
  if (pool.empty()) throw InputError("train: the training pool is empty");
  for (const auto& m : pool) {
    if (m.topic_id < 0 || static_cast<std::size_t>(m.topic_id) >= params.dims.n_topics) {
      throw ConfigError("train: topic id " + std::to_string(m.topic_id) +
                        " outside the discriminator's " + std::to_string(params.dims.n_topics) +
                        " classes");
    }
  }

  std::function<double(const model::ModelParams&)> scorer = hooks.dev_scorer;
  if (!scorer) {
    const bool has_dev = std::any_of(split.dev.begin(), split.dev.end(),
                                     [](const Example& e) { return e.is_labeled(); });
    const std::vector<Example>& target = has_dev ? split.dev : split.train;
    scorer = [&table, &target](const model::ModelParams& p) {
      return evaluate_f_avg(p, table, target);
    };
  }

  auto tensors = params.tensors();
  auto adam = ad::AdamState::for_params(tensors);
  EarlyStopping stopper(config.patience);
  RunRecord record;
  record.stop_reason = "max-epochs";

  std::vector<std::size_t> order(pool.size());
  std::vector<model::EncodedExample> batch;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto sched = schedule(epoch, config.max_epochs, config.learning_rate, config.alpha,
                                config.beta, config.gamma);
    const double rho = config.use_adversary ? sched.rho : 0.0;
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(derive_seed(config.seed, kShuffleStream), static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    LossBreakdown sum;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(pool[order[i]]);

      params.zero_grad();
      const auto loss = batch_loss(batch, table, params, config, rho);
      check_finite(loss.breakdown, epoch);
      if (loss.total.requires_grad()) {
        ad::backward(loss.total);
        ad::adam_step(tensors, adam, sched.lr);
      }
      add_into(sum, loss.breakdown);
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = sched.lr;
    rec.rho = rho;
    rec.loss = divided(sum, static_cast<double>(batches));
    const auto pool_scores = score_pool(params, table, pool);
    rec.train_accuracy = pool_scores.accuracy;
    rec.train_disc_f1 = pool_scores.disc_f1;
    rec.dev_f_avg = scorer(params);
    if (stopper.update(epoch, rec.dev_f_avg)) record.best_params = params.clone();
    record.epochs.push_back(rec);
    record.stopping_epoch = epoch;
    spdlog::debug("epoch {} lr={:.6g} rho={:.4f} loss={:.5f} dev_f_avg={:.4f} acc={:.4f} disc_f1={:.4f}",
                  epoch, rec.lr, rec.rho, rec.loss.total, rec.dev_f_avg, rec.train_accuracy,
                  rec.train_disc_f1);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    if (config.target_train_accuracy > 0.0 && rec.train_accuracy >= config.target_train_accuracy) {
      record.stop_reason = "target-accuracy";
      break;
    }
    if (stopper.should_stop(epoch)) {
      record.stop_reason = "patience";
      break;
    }
  }
  record.best_epoch = stopper.best_epoch();
  record.best_dev_f_avg = stopper.best_score();
  if (!record.best_params) {
    // Every score was NaN; fall back to the final state.
    record.best_params = params.clone();
    record.best_epoch = record.stopping_epoch;
    record.best_dev_f_avg = kNaN;
  }
  return record;
}

RunRecord train_fresh(const TrainConfig& config, const SplitSpec& split,
                      const EmbeddingTable& table, std::size_t n_topics, const TrainHooks& hooks) {
  config.validate();
  auto params = model::ModelParams::init(config.model_dims(n_topics), config.model_options(),
                                         derive_seed(config.seed, kInitStream));
  return train(config, split, table, params, hooks);
}

// ---- hyperparameter search ------------------------------------------------------------

namespace {

bool in_range(const IntRange& r, long long v) { return v >= r.lo && v <= r.hi; }

bool in_choices(const std::vector<double>& choices, double v) {
  return std::find(choices.begin(), choices.end(), v) != choices.end();
}

long long draw_int(const IntRange& r, const IndexSource& draw, const char* name) {
  if (r.hi < r.lo) throw ConfigError(std::string("search space: empty range for ") + name);
  const auto n = static_cast<std::uint64_t>(r.hi - r.lo) + 1;
  const auto idx = draw(n);
  if (idx >= n) throw UsageError(std::string("index source out of range for ") + name);
  return r.lo + static_cast<long long>(idx);
}

double draw_choice(const std::vector<double>& choices, const IndexSource& draw, const char* name) {
  if (choices.empty()) throw ConfigError(std::string("search space: no choices for ") + name);
  const auto idx = draw(choices.size());
  if (idx >= choices.size()) throw UsageError(std::string("index source out of range for ") + name);
  return choices[idx];
}

// 1-based ranks; tied values share the mean of the positions they span.
std::vector<double> average_ranks(const std::vector<double>& values, bool descending) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

bool SearchSpace::contains(const TrainConfig& c) const {
  return in_range(hidden, static_cast<long long>(c.hidden)) &&
         in_range(stance_hidden, static_cast<long long>(c.stance_hidden)) &&
         in_range(disc_hidden, static_cast<long long>(c.disc_hidden)) &&
         in_choices(lambda_rec, c.lambda_rec) && in_choices(lambda_tr, c.lambda_tr) &&
         c.gamma == std::floor(c.gamma) && in_range(gamma, static_cast<long long>(c.gamma)) &&
         in_choices(alpha, c.alpha) && in_choices(beta, c.beta) &&
         in_choices(learning_rate, c.learning_rate);
}

TrainConfig sample_config(const SearchSpace& space, const TrainConfig& base,
                          const IndexSource& draw) {
  TrainConfig c = base;
  c.hidden = static_cast<std::size_t>(draw_int(space.hidden, draw, "hidden"));
  c.stance_hidden = static_cast<std::size_t>(draw_int(space.stance_hidden, draw, "stance_hidden"));
  c.disc_hidden = static_cast<std::size_t>(draw_int(space.disc_hidden, draw, "disc_hidden"));
  c.lambda_rec = draw_choice(space.lambda_rec, draw, "lambda_rec");
  c.lambda_tr = draw_choice(space.lambda_tr, draw, "lambda_tr");
  c.gamma = static_cast<double>(draw_int(space.gamma, draw, "gamma"));
  c.alpha = draw_choice(space.alpha, draw, "alpha");
  c.beta = draw_choice(space.beta, draw, "beta");
  c.learning_rate = draw_choice(space.learning_rate, draw, "learning_rate");
  return c;
}

std::optional<std::size_t> select_best(std::vector<TrialResult>& trials) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    auto& t = trials[i];
    t.excluded = !std::isfinite(t.stance_f1) || !std::isfinite(t.disc_f1) ||
                 t.disc_f1 < kMinDiscriminatorF1;
    t.mean_rank = kNaN;
    if (!t.excluded) kept.push_back(i);
  }
  if (kept.empty()) return std::nullopt;

  std::vector<double> stance, disc;
  for (auto i : kept) {
    stance.push_back(trials[i].stance_f1);
    disc.push_back(trials[i].disc_f1);
  }
  const auto stance_rank = average_ranks(stance, true);
  const auto disc_rank = average_ranks(disc, false);
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    auto& t = trials[kept[k]];
    t.mean_rank = 0.5 * (stance_rank[k] + disc_rank[k]);
    if (!best) {
      best = kept[k];
      continue;
    }
    const auto& b = trials[*best];
    const bool better =
        t.mean_rank < b.mean_rank ||
        (t.mean_rank == b.mean_rank &&
         (t.stance_f1 > b.stance_f1 || (t.stance_f1 == b.stance_f1 && t.index < b.index)));
    if (better) best = kept[k];
  }
  return best;
}

SearchResult hyperparameter_search(const SearchSpace& space, const TrainConfig& base,
                                   std::size_t trials, std::uint64_t seed,
                                   const TrialEvaluator& evaluate, int workers) {
  if (trials == 0) throw ConfigError("search: at least one trial is required");
  SearchResult result;
  result.trials.resize(trials);
  kernels::omp::for_each_index(
      trials,
      [&](std::size_t i) {
        const auto trial_seed = derive_seed(seed, i);
        Rng rng(trial_seed);
        auto config = sample_config(space, base, [&rng](std::uint64_t n) { return rng.below(n); });
        config.seed = trial_seed;
        const auto outcome = evaluate(config, i);
        auto& t = result.trials[i];
        t.index = i;
        t.config = config;
        t.stance_f1 = outcome.stance_f1;
        t.disc_f1 = outcome.disc_f1;
      },
      workers);
  result.best = select_best(result.trials);
  return result;
}

void write_trial_table(const SearchResult& result, std::ostream& out) {
  out << "trial_index\thidden\tstance_hidden\tdisc_hidden\tlambda_rec\tlambda_tr\tgamma\talpha"
         "\tbeta\tlearning_rate\tseed\tdev_f_avg\ttrain_disc_f1\texcluded\tmean_rank\tselected\n";
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const auto& t = result.trials[i];
    const auto& c = t.config;
    out << t.index << '\t' << c.hidden << '\t' << c.stance_hidden << '\t' << c.disc_hidden << '\t'
        << format_double(c.lambda_rec) << '\t' << format_double(c.lambda_tr) << '\t'
        << format_double(c.gamma) << '\t' << format_double(c.alpha) << '\t'
        << format_double(c.beta) << '\t' << format_double(c.learning_rate) << '\t' << c.seed
        << '\t' << format_double(t.stance_f1) << '\t' << format_double(t.disc_f1) << '\t'
        << (t.excluded ? 1 : 0) << '\t' << format_double(t.mean_rank) << '\t'
        << (result.best && *result.best == i ? 1 : 0) << '\n';
  }
}

// ---- ablations ---------------------------------------------------------------------------

std::vector<std::string> variant_ids() {
  return {"full",      "no-transformation", "no-transform-loss", "no-topic-rec",
          "no-doc-rec", "no-rec",            "no-residual-topic", "no-unlabeled",
          "no-adv",    "bicond"};
}

std::vector<std::string> ablation_table_variants() {
  return {"full",   "no-transformation", "no-transform-loss", "no-topic-rec",
          "no-doc-rec", "no-rec",        "no-residual-topic", "no-unlabeled"};
}

TrainConfig apply_variant(TrainConfig c, std::string_view variant) {
  if (variant == "full") {
  } else if (variant == "no-transformation") {
    c.use_transformation = false;
    c.use_transform_penalty = false;
  } else if (variant == "no-transform-loss") {
    c.use_transform_penalty = false;
  } else if (variant == "no-topic-rec") {
    c.use_topic_rec = false;
  } else if (variant == "no-doc-rec") {
    c.use_doc_rec = false;
  } else if (variant == "no-rec") {
    c.use_topic_rec = false;
    c.use_doc_rec = false;
  } else if (variant == "no-residual-topic") {
    c.use_residual_topic = false;
  } else if (variant == "no-unlabeled") {
    c.use_unlabeled = false;
  } else if (variant == "no-adv") {
    c.use_adversary = false;
  } else if (variant == "bicond") {
    c.use_attention = false;
    c.use_adversary = false;
    c.use_transformation = false;
    c.use_transform_penalty = false;
    c.use_topic_rec = false;
    c.use_doc_rec = false;
    c.use_residual_topic = false;
    c.use_unlabeled = false;
  } else {
    std::string known;
    for (const auto& v : variant_ids()) known += (known.empty() ? "" : ", ") + v;
    throw ConfigError("unknown variant '" + std::string(variant) + "' (known: " + known + ")");
  }
  return c;
}

RunRecord ablate(const TrainConfig& base, std::string_view variant, const SplitSpec& split,
                 const EmbeddingTable& table, std::size_t n_topics, const TrainHooks& hooks) {
  const auto config = apply_variant(base, variant);
  auto record = train_fresh(config, split, table, n_topics, hooks);
  record.variant = std::string(variant);
  return record;
}

}  // namespace toad::training
