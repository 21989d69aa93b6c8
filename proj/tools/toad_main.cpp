// Command-line driver: preprocess, split, train, search, ablate, eval, analyze.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or input
// error, 3 diverged training, 4 hyperparameter search with no surviving trial.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "toad/analysis.hpp"
#include "toad/data.hpp"
#include "toad/errors.hpp"
#include "toad/format.hpp"
#include "toad/model.hpp"
#include "toad/rng.hpp"
#include "toad/text.hpp"
#include "toad/training.hpp"

#ifndef TOAD_VERSION
#define TOAD_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace toad;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitSearchFailed = 4;

// Seed streams for data-side randomness, derived from the run seed.
constexpr std::uint64_t kEmbeddingStream = 0xE3B;

class SearchFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest initialisation failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

// Collects everything a manifest records and writes it on success.
class Manifest {
 public:
  explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["version"] = TOAD_VERSION;
  }

  void argv(int argc, char** argv) {
    json a = json::array();
    for (int i = 0; i < argc; ++i) a.push_back(argv[i]);
    doc_["argv"] = a;
  }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void seed(const std::string& name, std::uint64_t value) { doc_["seeds"][name] = value; }
  void input(const fs::path& path) {
    doc_["inputs"].push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
  }
  void output(const fs::path& path) { doc_["outputs"].push_back(path.string()); }
  void config(const training::TrainConfig& c) {
    std::ostringstream text;
    training::write_config(c, text);
    json cfg = json::object();
    std::istringstream lines(text.str());
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find(" = ");
      cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
    doc_["config"] = cfg;
  }

  void write(const fs::path& dir) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    doc_["wall_time_seconds"] = seconds;
    std::ofstream out(dir / "manifest.json");
    out << doc_.dump(2) << '\n';
    if (!out) throw InputError("cannot write " + (dir / "manifest.json").string());
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

std::ofstream open_output(const fs::path& path, Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  manifest.output(path);
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
}

// ---- shared options --------------------------------------------------------------

struct Options {
  std::string config_path;
  std::string data_dir;
  std::string zero_shot_topic;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::size_t trials = 20;
  std::string variant = "full";
  std::string convention = "union-of-pair";
  int workers = 0;
  std::string input;
  std::string model_dir;
  std::size_t k = 6;
  bool heatmap = false;
};

struct DataFiles {
  fs::path dataset, unlabeled, keywords, embeddings;
};

DataFiles data_files(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--data-dir is required");
  const fs::path root(dir);
  DataFiles f{root / "dataset.tsv", root / "unlabeled.txt", root / "keywords.tsv",
              root / "embeddings.txt"};
  if (!fs::exists(f.dataset)) throw ConfigError("missing " + f.dataset.string());
  return f;
}

int resolve_topic(const Corpus& corpus, const std::string& name) {
  if (name.empty()) throw ConfigError("--zero-shot-topic is required");
  const int id = corpus.topic_id(name);
  if (id >= 0) return id;
  std::string known;
  for (const auto& t : corpus.topics) known += (known.empty() ? "" : ", ") + t;
  throw ConfigError("unknown topic '" + name + "'; valid topics: " + known);
}

training::TrainConfig resolve_config(const Options& opt) {
  training::TrainConfig c;
  if (!opt.config_path.empty()) c = training::load_config(opt.config_path);
  if (opt.seed) c.seed = *opt.seed;
  c.validate();
  return c;
}

// Corpus, leave-one-topic-out split (with keyword-matched unlabeled tweets
// when the files exist) and the embedding table for one run.
struct Workspace {
  Corpus corpus;
  SplitSpec split;
  EmbeddingTable table;
  std::uint64_t embedding_seed = 0;
};

std::set<std::string> split_vocabulary(const Corpus& corpus, const SplitSpec& split) {
  auto vocab = corpus.vocabulary();
  for (const auto& ex : split.unlabeled) vocab.insert(ex.document_tokens.begin(), ex.document_tokens.end());
  return vocab;
}

Workspace prepare(const Options& opt, std::uint64_t seed, std::size_t embed_dim, Manifest& manifest) {
  const auto files = data_files(opt.data_dir);
  Workspace ws;
  manifest.input(files.dataset);
  ws.corpus = load_dataset(files.dataset);
  const int topic = resolve_topic(ws.corpus, opt.zero_shot_topic);
  manifest.set("zero_shot_topic", opt.zero_shot_topic);
  ws.split = make_splits(ws.corpus, topic, seed);

  if (fs::exists(files.unlabeled) && fs::exists(files.keywords)) {
    manifest.input(files.unlabeled);
    manifest.input(files.keywords);
    const auto keywords = load_keywords(files.keywords);
    const auto it = keywords.find(opt.zero_shot_topic);
    if (it == keywords.end() || it->second.empty()) {
      spdlog::warn("no keywords for '{}' in {}; unlabeled tweets not used", opt.zero_shot_topic,
                   files.keywords.string());
    } else {
      const auto tweets = load_lines(files.unlabeled);
      ws.split = attach_unlabeled(std::move(ws.split), tweets, it->second, ws.corpus);
    }
  }

  ws.embedding_seed = derive_seed(seed, kEmbeddingStream);
  const auto vocab = split_vocabulary(ws.corpus, ws.split);
  if (fs::exists(files.embeddings)) {
    manifest.input(files.embeddings);
    ws.table = load_embeddings(files.embeddings, vocab, embed_dim, ws.embedding_seed);
    spdlog::info("embeddings: {} of {} tokens found in {}", ws.table.found_in_file(), vocab.size(),
                 files.embeddings.string());
  } else {
    spdlog::warn("no embeddings file in {}; all rows are random", opt.data_dir);
    ws.table = EmbeddingTable::build(vocab, nullptr, embed_dim, ws.embedding_seed);
  }
  spdlog::info("split: train={} dev={} test={} unlabeled={}", ws.split.train.size(),
               ws.split.dev.size(), ws.split.test.size(), ws.split.unlabeled.size());
  return ws;
}

void write_examples(const std::vector<Example>& examples, const Corpus& corpus, std::ostream& out) {
  out << "uid\ttopic\tstance\ttweet\n";
  for (const auto& ex : examples) {
    out << ex.uid << '\t' << corpus.topics[static_cast<std::size_t>(ex.topic_id)] << '\t'
        << (ex.stance ? stance_name(*ex.stance) : "") << '\t' << text::join(ex.document_tokens)
        << '\n';
  }
}

void write_metrics(const analysis::MetricsReport& report, const std::string& label, std::ostream& out) {
  out << "# " << label << '\n';
  out << "class\tprecision\trecall\tf1\tsupport\n";
  for (auto s : {Stance::kPro, Stance::kCon, Stance::kNeutral}) {
    const auto& c = report.of(s);
    out << stance_name(s) << '\t' << format_fixed(100 * c.precision, 2) << '\t'
        << format_fixed(100 * c.recall, 2) << '\t' << format_fixed(100 * c.f1, 2) << '\t'
        << c.support << '\n';
  }
  out << "f_avg\t\t\t" << format_fixed(100 * report.f_avg, 2) << '\t' << report.count << '\n';
}

analysis::MetricsReport test_report(const model::ModelParams& params, const EmbeddingTable& table,
                                    const std::vector<Example>& test) {
  std::vector<Example> labeled;
  for (const auto& ex : test)
    if (ex.is_labeled()) labeled.push_back(ex);
  if (labeled.empty()) throw InputError("the zero-shot topic has no labeled examples to evaluate");
  const auto preds = training::predict(params, table, labeled);
  std::vector<Stance> golds;
  for (const auto& ex : labeled) golds.push_back(*ex.stance);
  return analysis::f_avg(preds, golds);
}

// Writes the artifacts of one trained model into `dir`.
void save_model(const fs::path& dir, const training::TrainConfig& config, const EmbeddingTable& table,
                const model::ModelParams& params, Manifest& manifest) {
  {
    auto out = open_output(dir / "checkpoint.bin", manifest);
    model::save_checkpoint(params, out);
  }
  {
    auto out = open_output(dir / "embeddings.txt", manifest);
    table.save(out);
  }
  {
    auto out = open_output(dir / "config.txt", manifest);
    training::write_config(config, out);
  }
}

struct LoadedModel {
  training::TrainConfig config;
  model::ModelParams params;
  EmbeddingTable table;
  json manifest;
};

LoadedModel load_model(const fs::path& dir, Manifest& manifest) {
  if (dir.empty()) throw ConfigError("--model is required");
  LoadedModel m;
  const auto ckpt = dir / "checkpoint.bin";
  const auto emb = dir / "embeddings.txt";
  const auto cfg = dir / "config.txt";
  for (const auto& p : {ckpt, emb, cfg}) {
    if (!fs::exists(p)) throw ConfigError("model directory lacks " + p.string());
    manifest.input(p);
  }
  m.config = training::load_config(cfg);
  std::ifstream in(ckpt, std::ios::binary);
  m.params = model::load_checkpoint(in);

  std::set<std::string> vocab;
  for (const auto& line : load_lines(emb)) vocab.insert(line.substr(0, line.find(' ')));
  std::ifstream emb_in(emb);
  m.table = EmbeddingTable::build(vocab, &emb_in, m.params.dims.embed_dim, 0, emb.string());

  if (fs::exists(dir / "manifest.json")) {
    std::ifstream min(dir / "manifest.json");
    m.manifest = json::parse(min, nullptr, false);
  }
  return m;
}

// ---- subcommands ------------------------------------------------------------------------

int cmd_preprocess(const Options& opt, Manifest& manifest) {
  if (opt.input.empty()) throw ConfigError("--input is required");
  ensure_dir(opt.out_dir);
  manifest.input(opt.input);
  const auto corpus = load_dataset(opt.input);
  const fs::path out_path = fs::path(opt.out_dir) / "preprocessed.tsv";
  auto out = open_output(out_path, manifest);
  out << "tweet\ttopic\tstance\n";
  for (const auto& ex : corpus.examples) {
    out << text::join(ex.document_tokens) << '\t' << corpus.topics[static_cast<std::size_t>(ex.topic_id)]
        << '\t' << (ex.stance ? stance_name(*ex.stance) : "") << '\n';
  }
  manifest.set("rows_kept", corpus.examples.size());
  manifest.set("rows_rejected", corpus.rejected);
  std::cout << "kept " << corpus.examples.size() << " rows, rejected " << corpus.rejected << '\n';
  return kExitOk;
}

int cmd_split(const Options& opt, Manifest& manifest) {
  const std::uint64_t seed = opt.seed.value_or(0);
  manifest.seed("split", seed);
  ensure_dir(opt.out_dir);
  const auto ws = prepare(opt, seed, EmbeddingTable::kDefaultDim, manifest);
  manifest.seed("embedding", ws.embedding_seed);
  const fs::path dir(opt.out_dir);
  const std::pair<const char*, const std::vector<Example>*> parts[] = {
      {"train.tsv", &ws.split.train},
      {"dev.tsv", &ws.split.dev},
      {"test.tsv", &ws.split.test},
      {"unlabeled.tsv", &ws.split.unlabeled}};
  for (const auto& [name, examples] : parts) {
    auto out = open_output(dir / name, manifest);
    write_examples(*examples, ws.corpus, out);
  }
  auto out = open_output(dir / "class_distribution.tsv", manifest);
  out << "topic\ttotal\tpro\tcon\tneutral\n";
  for (const auto& [topic, d] : class_distribution(ws.corpus.examples)) {
    out << ws.corpus.topics[static_cast<std::size_t>(topic)] << '\t' << d.total << '\t'
        << format_fixed(d.percent[static_cast<std::size_t>(Stance::kPro)], 1) << '\t'
        << format_fixed(d.percent[static_cast<std::size_t>(Stance::kCon)], 1) << '\t'
        << format_fixed(d.percent[static_cast<std::size_t>(Stance::kNeutral)], 1) << '\n';
  }
  std::cout << "train " << ws.split.train.size() << ", dev " << ws.split.dev.size() << ", test "
            << ws.split.test.size() << ", unlabeled " << ws.split.unlabeled.size() << '\n';
  return kExitOk;
}

// Trains one variant and writes its artifacts; returns the test report.
analysis::MetricsReport run_variant(const Options& opt, const training::TrainConfig& base,
                                    const std::string& variant, const fs::path& dir,
                                    Manifest& manifest, const Workspace& ws) {
  const auto config = training::apply_variant(base, variant);
  auto record = training::train_fresh(config, ws.split, ws.table, ws.corpus.topics.size());
  record.variant = variant;
  ensure_dir(dir);
  save_model(dir, config, ws.table, *record.best_params, manifest);
  {
    auto out = open_output(dir / "run_record.tsv", manifest);
    training::write_run_record(record, out);
  }
  const auto report = test_report(*record.best_params, ws.table, ws.split.test);
  {
    auto out = open_output(dir / "test_metrics.tsv", manifest);
    write_metrics(report, "variant=" + variant + " zero_shot_topic=" + opt.zero_shot_topic +
                              " seed=" + std::to_string(config.seed), out);
  }
  spdlog::info("{}: stopped at epoch {} ({}), best epoch {} dev F_avg {:.4f}", variant,
               record.stopping_epoch, record.stop_reason, record.best_epoch, record.best_dev_f_avg);
  return report;
}

int cmd_train(const Options& opt, Manifest& manifest) {
  const auto config = resolve_config(opt);
  ensure_dir(opt.out_dir);
  manifest.config(training::apply_variant(config, opt.variant));
  manifest.seed("run", config.seed);
  manifest.set("variant", opt.variant);
  const auto ws = prepare(opt, config.seed, config.embed_dim, manifest);
  manifest.seed("split", config.seed);
  manifest.seed("embedding", ws.embedding_seed);
  const auto report = run_variant(opt, config, opt.variant, opt.out_dir, manifest, ws);
  std::cout << "test F_avg " << format_fixed(100 * report.f_avg, 2) << '\n';
  return kExitOk;
}

int cmd_ablate(const Options& opt, Manifest& manifest) {
  const auto config = resolve_config(opt);
  ensure_dir(opt.out_dir);
  manifest.config(config);
  manifest.seed("run", config.seed);
  const auto ws = prepare(opt, config.seed, config.embed_dim, manifest);
  manifest.seed("split", config.seed);
  manifest.seed("embedding", ws.embedding_seed);

  std::vector<std::string> variants;
  if (opt.variant == "all") {
    variants = training::ablation_table_variants();
    variants.push_back("no-adv");
  } else {
    variants.push_back(opt.variant);
  }
  manifest.set("variants", variants);
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& v : variants) {
    const auto report = run_variant(opt, config, v, fs::path(opt.out_dir) / v, manifest, ws);
    rows.emplace_back(v, report.f_avg);
  }
  auto out = open_output(fs::path(opt.out_dir) / "ablation.tsv", manifest);
  out << "variant\ttest_f_avg\tdelta\n";
  // deltas are against the full model, when it was run
  const bool has_full = rows.front().first == "full";
  const double full = rows.front().second;
  for (const auto& [v, f] : rows) {
    out << v << '\t' << format_fixed(100 * f, 2) << '\t'
        << (has_full ? format_fixed(100 * (f - full), 2) : std::string("NA")) << '\n';
    std::cout << v << '\t' << format_fixed(100 * f, 2) << '\n';
  }
  return kExitOk;
}

int cmd_search(const Options& opt, Manifest& manifest) {
  const auto base = resolve_config(opt);
  ensure_dir(opt.out_dir);
  manifest.config(base);
  manifest.seed("search", base.seed);
  manifest.set("trials", opt.trials);
  const auto ws = prepare(opt, base.seed, base.embed_dim, manifest);
  manifest.seed("split", base.seed);
  manifest.seed("embedding", ws.embedding_seed);

  const auto evaluate = [&](const training::TrainConfig& c, std::size_t index) {
    training::TrialOutcome outcome;
    try {
      const auto record = training::train_fresh(c, ws.split, ws.table, ws.corpus.topics.size());
      outcome.stance_f1 = record.best_dev_f_avg;
      outcome.disc_f1 = record.best().train_disc_f1;
    } catch (const DivergedError& e) {
      spdlog::warn("trial {} diverged: {}", index, e.what());
      outcome.stance_f1 = std::numeric_limits<double>::quiet_NaN();
      outcome.disc_f1 = std::numeric_limits<double>::quiet_NaN();
    }
    spdlog::info("trial {}: dev F_avg {:.4f}, train disc F1 {:.4f}", index, outcome.stance_f1,
                 outcome.disc_f1);
    return outcome;
  };
  const auto result = training::hyperparameter_search(training::SearchSpace::standard(), base,
                                                      opt.trials, base.seed, evaluate, opt.workers);
  {
    auto out = open_output(fs::path(opt.out_dir) / "trials.tsv", manifest);
    training::write_trial_table(result, out);
  }
  if (!result.best) {
    throw SearchFailed("every trial was excluded (train discriminator F1 < 0.01 or diverged); see " +
                       (fs::path(opt.out_dir) / "trials.tsv").string());
  }
  const auto& best = result.trials[*result.best];
  auto out = open_output(fs::path(opt.out_dir) / "best_config.txt", manifest);
  training::write_config(best.config, out);
  std::cout << "best trial " << best.index << ": dev F_avg " << format_fixed(100 * best.stance_f1, 2)
            << ", disc F1 " << format_fixed(100 * best.disc_f1, 2) << '\n';
  return kExitOk;
}

int cmd_eval(const Options& opt, Manifest& manifest) {
  ensure_dir(opt.out_dir);
  const auto m = load_model(opt.model_dir, manifest);
  std::string topic = opt.zero_shot_topic;
  if (topic.empty() && m.manifest.is_object() && m.manifest.contains("zero_shot_topic"))
    topic = m.manifest["zero_shot_topic"].get<std::string>();
  const auto files = data_files(opt.data_dir);
  manifest.input(files.dataset);
  const auto corpus = load_dataset(files.dataset);
  const int id = resolve_topic(corpus, topic);
  manifest.set("zero_shot_topic", topic);
  std::vector<Example> test;
  for (const auto& ex : corpus.examples)
    if (ex.topic_id == id && ex.is_labeled()) test.push_back(ex);
  if (m.params.dims.n_topics != corpus.topics.size() && m.params.options.adversary) {
    throw ConfigError("model was trained with " + std::to_string(m.params.dims.n_topics) +
                      " topics, dataset has " + std::to_string(corpus.topics.size()));
  }
  const auto report = test_report(m.params, m.table, test);
  auto out = open_output(fs::path(opt.out_dir) / "metrics.tsv", manifest);
  write_metrics(report, "model=" + opt.model_dir + " zero_shot_topic=" + topic, out);
  std::cout << "test F_avg " << format_fixed(100 * report.f_avg, 2) << '\n';
  return kExitOk;
}

// Binary PPM; white (0) to dark blue (ln 2), one square cell per entry.
void write_heatmap(const analysis::DivergenceMatrix& m, std::ostream& out) {
  constexpr std::size_t cell = 32;
  const std::size_t side = m.size() * cell;
  out << "P6\n" << side << ' ' << side << "\n255\n";
  const double top = std::log(2.0);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double t = std::clamp(m.at(y / cell, x / cell) / top, 0.0, 1.0);
      const unsigned char px[3] = {static_cast<unsigned char>(255 * (1 - t)),
                                   static_cast<unsigned char>(255 * (1 - 0.8 * t)),
                                   static_cast<unsigned char>(255 * (1 - 0.45 * t))};
      out.write(reinterpret_cast<const char*>(px), 3);
    }
  }
}

int cmd_divergence(const Options& opt, Manifest& manifest) {
  ensure_dir(opt.out_dir);
  const auto convention = analysis::parse_convention(opt.convention);
  const auto files = data_files(opt.data_dir);
  manifest.input(files.dataset);
  manifest.set("convention", std::string(analysis::convention_name(convention)));
  const auto corpus = load_dataset(files.dataset);
  std::vector<std::vector<analysis::Document>> corpora(corpus.topics.size());
  for (const auto& ex : corpus.examples)
    corpora[static_cast<std::size_t>(ex.topic_id)].push_back(ex.document_tokens);
  const auto m = analysis::divergence_matrix(corpora, corpus.topics, convention);

  auto out = open_output(fs::path(opt.out_dir) / "divergence.tsv", manifest);
  out << "convention=" << analysis::convention_name(convention);
  for (const auto& t : m.topics) out << '\t' << t;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.topics[i];
    for (std::size_t j = 0; j < m.size(); ++j) out << '\t' << format_double(m.at(i, j));
    out << '\n';
  }
  if (opt.heatmap) {
    auto img = open_output(fs::path(opt.out_dir) / "divergence.ppm", manifest);
    write_heatmap(m, img);
  }
  return kExitOk;
}

int cmd_cluster(const Options& opt, Manifest& manifest) {
  ensure_dir(opt.out_dir);
  const std::uint64_t seed = opt.seed.value_or(0);
  manifest.seed("probe", seed);
  const auto m = load_model(opt.model_dir, manifest);
  const auto files = data_files(opt.data_dir);
  manifest.input(files.dataset);
  const auto corpus = load_dataset(files.dataset);
  std::vector<Example> labeled;
  for (const auto& ex : corpus.examples)
    if (ex.is_labeled()) labeled.push_back(ex);
  const auto reps = analysis::extract_representations(m.params, m.table, labeled);
  const auto report = analysis::cluster_probe(reps, opt.k, seed);
  auto out = open_output(fs::path(opt.out_dir) / "cluster.tsv", manifest);
  out << "# seed=" << seed << " k=" << report.k << '\n';
  out << "homogeneity\tcompleteness\tfit_size\teval_size\n";
  out << format_fixed(report.homogeneity, 4) << '\t' << format_fixed(report.completeness, 4) << '\t'
      << report.fit_size << '\t' << report.eval_size << '\n';
  std::cout << "homogeneity " << format_fixed(report.homogeneity, 4) << ", completeness "
            << format_fixed(report.completeness, 4) << '\n';
  return kExitOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("toad");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("TOAD_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Topic-adversarial zero-shot stance detection"};
  app.require_subcommand(1);
  Options opt;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { opt.seed = s; },
                                            "Master seed (default 0)");
  };
  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "key = value configuration file");
    cmd->add_option("--data-dir", opt.data_dir, "Directory with dataset.tsv and optional inputs")
        ->required();
    cmd->add_option("--zero-shot-topic", opt.zero_shot_topic, "Held-out topic name")->required();
    add_seed(cmd);
    cmd->add_option("--out", opt.out_dir, "Output directory")->required();
  };

  auto* preprocess = app.add_subcommand("preprocess", "Preprocess a dataset TSV");
  preprocess->add_option("--input", opt.input, "Dataset TSV")->required();
  preprocess->add_option("--out", opt.out_dir, "Output directory")->required();

  auto* split = app.add_subcommand("split", "Write the leave-one-topic-out split");
  split->add_option("--data-dir", opt.data_dir)->required();
  split->add_option("--zero-shot-topic", opt.zero_shot_topic)->required();
  add_seed(split);
  split->add_option("--out", opt.out_dir)->required();

  auto* train = app.add_subcommand("train", "Train one model");
  add_run_options(train);
  train->add_option("--variant", opt.variant, "Component variant (default full)");

  auto* search = app.add_subcommand("search", "Random hyperparameter search");
  add_run_options(search);
  search->add_option("--trials", opt.trials, "Number of trials (default 20)");
  search->add_option("--workers", opt.workers, "Concurrent trials (default: all cores)");

  auto* ablate = app.add_subcommand("ablate", "Train component ablations");
  add_run_options(ablate);
  ablate->add_option("--variant", opt.variant, "Variant id, or 'all'")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a trained model on a topic");
  eval->add_option("--model", opt.model_dir, "Output directory of a train run")->required();
  eval->add_option("--data-dir", opt.data_dir)->required();
  eval->add_option("--zero-shot-topic", opt.zero_shot_topic,
                   "Topic to evaluate (default: the model's zero-shot topic)");
  eval->add_option("--out", opt.out_dir)->required();

  auto* analyze = app.add_subcommand("analyze", "Corpus and representation analyses");
  analyze->require_subcommand(1);
  auto* divergence = analyze->add_subcommand("divergence", "Topic-pair JS divergence matrix");
  divergence->add_option("--data-dir", opt.data_dir)->required();
  divergence->add_option("--convention", opt.convention, "union-of-pair (default) or first-topic");
  divergence->add_option("--out", opt.out_dir)->required();
  divergence->add_flag("--heatmap", opt.heatmap, "Also write a PPM heatmap");
  auto* cluster = analyze->add_subcommand("cluster", "K-means topic probe on representations");
  cluster->add_option("--model", opt.model_dir)->required();
  cluster->add_option("--data-dir", opt.data_dir)->required();
  cluster->add_option("--k", opt.k, "Number of clusters (default 6)");
  add_seed(cluster);
  cluster->add_option("--out", opt.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  std::string command;
  for (auto* sub : app.get_subcommands()) {
    command = sub->get_name();
    for (auto* inner : sub->get_subcommands()) command += " " + inner->get_name();
  }
  Manifest manifest(command);
  manifest.argv(argc, argv);

  try {
    int rc = kExitOk;
    if (preprocess->parsed()) rc = cmd_preprocess(opt, manifest);
    else if (split->parsed()) rc = cmd_split(opt, manifest);
    else if (train->parsed()) rc = cmd_train(opt, manifest);
    else if (search->parsed()) rc = cmd_search(opt, manifest);
    else if (ablate->parsed()) rc = cmd_ablate(opt, manifest);
    else if (eval->parsed()) rc = cmd_eval(opt, manifest);
    else if (divergence->parsed()) rc = cmd_divergence(opt, manifest);
    else if (cluster->parsed()) rc = cmd_cluster(opt, manifest);
    manifest.write(opt.out_dir);
    return rc;
  } catch (const SearchFailed& e) {
    spdlog::error("{}", e.what());
    manifest.set("error", e.what());
    manifest.write(opt.out_dir);
    return kExitSearchFailed;
  } catch (const DivergedError& e) {
    spdlog::error("training diverged: {}", e.what());
    return kExitDiverged;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return kExitFailure;
  }
}
