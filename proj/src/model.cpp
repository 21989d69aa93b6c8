#include "toad/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "toad/errors.hpp"
#include "toad/rng.hpp"

namespace toad::model {

namespace {

Tensor uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-0.1, 0.1);
  return Tensor::from({rows, cols}, std::move(v), true);
}

Tensor zero_vector(std::size_t n) { return Tensor::zeros({n}, true); }

LstmParams init_lstm(std::size_t in, std::size_t h, Rng& rng) {
  LstmParams p;
  p.w_input = uniform_matrix(4 * h, in, rng);
  p.w_hidden = uniform_matrix(4 * h, h, rng);
  std::vector<double> b(4 * h, 0.0);
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(h), b.begin() + static_cast<std::ptrdiff_t>(2 * h), 1.0);
  p.bias = Tensor::from({4 * h}, std::move(b), true);
  return p;
}

Affine init_affine(std::size_t in, std::size_t out, Rng& rng) {
  return {uniform_matrix(out, in, rng), zero_vector(out)};
}

ReconHead init_recon(std::size_t state_dim, std::size_t embed_dim, Rng& rng) {
  return {uniform_matrix(state_dim, embed_dim, rng), zero_vector(embed_dim)};
}

Tensor apply(const Affine& layer, const Tensor& x) {
  return ad::add(ad::matmul(layer.weight, x), layer.bias);
}

LstmState lstm_step(const LstmParams& p, const Tensor& x, const LstmState& prev) {
  const std::size_t h = p.w_hidden.dim(1);
  const Tensor z = ad::add(ad::add(ad::matmul(p.w_input, x), ad::matmul(p.w_hidden, prev.h)), p.bias);
  const Tensor i = ad::sigmoid(ad::slice(z, 0, h));
  const Tensor f = ad::sigmoid(ad::slice(z, h, h));
  const Tensor g = ad::tanh(ad::slice(z, 2 * h, h));
  const Tensor o = ad::sigmoid(ad::slice(z, 3 * h, h));
  const Tensor c = ad::add(ad::mul(f, prev.c), ad::mul(i, g));
  return {ad::mul(o, ad::tanh(c)), c};
}

struct BiRun {
  std::vector<Tensor> fwd;  // hidden at each position
  std::vector<Tensor> bwd;
  LstmState fwd_final;
  LstmState bwd_final;
};

BiRun run_bilstm(const std::vector<Tensor>& inputs, const LstmParams& fp, const LstmParams& bp,
                 LstmState f0, LstmState b0) {
  const std::size_t n = inputs.size();
  BiRun run;
  run.fwd.resize(n);
  run.bwd.resize(n);
  LstmState s = std::move(f0);
  for (std::size_t t = 0; t < n; ++t) {
    s = lstm_step(fp, inputs[t], s);
    run.fwd[t] = s.h;
  }
  run.fwd_final = s;
  s = std::move(b0);
  for (std::size_t t = n; t-- > 0;) {
    s = lstm_step(bp, inputs[t], s);
    run.bwd[t] = s.h;
  }
  run.bwd_final = s;
  return run;
}

std::vector<Tensor> embedding_inputs(std::span<const std::size_t> tokens, const EmbeddingTable& table) {
  std::vector<Tensor> out;
  out.reserve(tokens.size());
  for (auto idx : tokens) {
    const auto row = table.row(idx);
    out.push_back(Tensor::vector(std::vector<double>(row.begin(), row.end())));
  }
  return out;
}

void check_width(const EmbeddingTable& table, const ModelParams& params) {
  if (table.dim() != params.dims.embed_dim)
    throw ConfigError("embedding dimension " + std::to_string(table.dim()) +
                      " does not match model input dimension " +
                      std::to_string(params.dims.embed_dim));
}

}  // namespace

// ---- parameters --------------------------------------------------------------

ModelParams ModelParams::init(const ModelDims& dims, const ModelOptions& options, std::uint64_t seed) {
  if (dims.embed_dim == 0 || dims.hidden == 0 || dims.stance_hidden == 0 || dims.disc_hidden == 0)
    throw ConfigError("model dimensions must be positive");
  if (options.adversary && dims.n_topics < 2)
    throw ConfigError("topic discriminator needs at least 2 topic classes");
  Rng rng(seed);
  ModelParams p;
  p.dims = dims;
  p.options = options;
  const std::size_t h = dims.hidden;
  p.topic_fwd = init_lstm(dims.embed_dim, h, rng);
  p.topic_bwd = init_lstm(dims.embed_dim, h, rng);
  p.doc_fwd = init_lstm(dims.embed_dim, h, rng);
  p.doc_bwd = init_lstm(dims.embed_dim, h, rng);
  p.topic_recon = init_recon(2 * h, dims.embed_dim, rng);
  p.doc_recon = init_recon(2 * h, dims.embed_dim, rng);
  if (options.transformation) p.transform = Tensor::identity(2 * h, true);
  p.stance_hidden = init_affine(p.classifier_input_dim(), dims.stance_hidden, rng);
  p.stance_out = init_affine(dims.stance_hidden, kNumStances, rng);
  if (options.adversary) {
    p.disc_hidden = init_affine(2 * h, dims.disc_hidden, rng);
    p.disc_out = init_affine(dims.disc_hidden, dims.n_topics, rng);
  }
  return p;
}

std::size_t ModelParams::classifier_input_dim() const {
  return (options.residual_topic ? 4 : 2) * dims.hidden;
}

std::vector<NamedTensor> ModelParams::named() const {
  std::vector<NamedTensor> out;
  auto lstm = [&](const std::string& prefix, const LstmParams& p) {
    out.push_back({prefix + ".w_input", p.w_input});
    out.push_back({prefix + ".w_hidden", p.w_hidden});
    out.push_back({prefix + ".bias", p.bias});
  };
  lstm("topic_fwd", topic_fwd);
  lstm("topic_bwd", topic_bwd);
  lstm("doc_fwd", doc_fwd);
  lstm("doc_bwd", doc_bwd);
  out.push_back({"topic_recon.weight", topic_recon.weight});
  out.push_back({"topic_recon.bias", topic_recon.bias});
  out.push_back({"doc_recon.weight", doc_recon.weight});
  out.push_back({"doc_recon.bias", doc_recon.bias});
  if (transform.defined()) out.push_back({"transform", transform});
  out.push_back({"stance_hidden.weight", stance_hidden.weight});
  out.push_back({"stance_hidden.bias", stance_hidden.bias});
  out.push_back({"stance_out.weight", stance_out.weight});
  out.push_back({"stance_out.bias", stance_out.bias});
  if (disc_hidden.weight.defined()) {
    out.push_back({"disc_hidden.weight", disc_hidden.weight});
    out.push_back({"disc_hidden.bias", disc_hidden.bias});
    out.push_back({"disc_out.weight", disc_out.weight});
    out.push_back({"disc_out.bias", disc_out.bias});
  }
  return out;
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& nt : named()) out.push_back(nt.tensor);
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams c = *this;
  auto cl = [](Tensor& t) {
    if (t.defined()) t = t.clone();
  };
  for (LstmParams* l : {&c.topic_fwd, &c.topic_bwd, &c.doc_fwd, &c.doc_bwd}) {
    cl(l->w_input);
    cl(l->w_hidden);
    cl(l->bias);
  }
  for (ReconHead* r : {&c.topic_recon, &c.doc_recon}) {
    cl(r->weight);
    cl(r->bias);
  }
  cl(c.transform);
  for (Affine* a : {&c.stance_hidden, &c.stance_out, &c.disc_hidden, &c.disc_out}) {
    cl(a->weight);
    cl(a->bias);
  }
  return c;
}

void ModelParams::zero_grad() {
  for (auto& t : tensors()) t.zero_grad();
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

// ---- encoding ----------------------------------------------------------------

EncodedExample encode(const Example& example, const EmbeddingTable& table) {
  EncodedExample e;
  for (const auto& t : example.document_tokens) e.document.push_back(table.index(t));
  for (const auto& t : example.topic_tokens) e.topic.push_back(table.index(t));
  e.topic_id = example.topic_id;
  e.stance = example.stance;
  return e;
}

std::vector<EncodedExample> encode_all(std::span<const Example> examples, const EmbeddingTable& table) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(encode(ex, table));
  return out;
}

Tensor embedding_matrix(std::span<const std::size_t> tokens, const EmbeddingTable& table) {
  std::vector<double> v;
  v.reserve(tokens.size() * table.dim());
  for (auto idx : tokens) {
    const auto row = table.row(idx);
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor::from({tokens.size(), table.dim()}, std::move(v));
}

TopicEncoding encode_topic(std::span<const std::size_t> tokens, const EmbeddingTable& table,
                           const ModelParams& params) {
  if (tokens.empty()) throw InputError("encode_topic: empty topic sequence");
  check_width(table, params);
  const std::size_t h = params.dims.hidden;
  const LstmState zero{Tensor::zeros({h}), Tensor::zeros({h})};
  BiRun run = run_bilstm(embedding_inputs(tokens, table), params.topic_fwd, params.topic_bwd, zero, zero);
  TopicEncoding enc;
  const std::array<Tensor, 2> finals{run.fwd_final.h, run.bwd_final.h};
  enc.h_t = ad::concat(finals);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::array<Tensor, 2> both{run.fwd[t], run.bwd[t]};
    enc.states.push_back(ad::concat(both));
  }
  enc.fwd_final = run.fwd_final;
  enc.bwd_final = run.bwd_final;
  return enc;
}

DocumentEncoding encode_document(std::span<const std::size_t> tokens, const TopicEncoding& topic,
                                 const EmbeddingTable& table, const ModelParams& params) {
  if (tokens.empty()) throw InputError("encode_document: empty document");
  check_width(table, params);
  BiRun run = run_bilstm(embedding_inputs(tokens, table), params.doc_fwd, params.doc_bwd,
                         topic.fwd_final, topic.bwd_final);
  std::vector<Tensor> rows;
  rows.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::array<Tensor, 2> both{run.fwd[t], run.bwd[t]};
    rows.push_back(ad::concat(both));
  }
  return {ad::stack_rows(rows), run.fwd_final, run.bwd_final};
}

AttentionResult topic_attention(const Tensor& states, const Tensor& h_t, const std::vector<bool>* mask) {
  if (states.rank() != 2 || h_t.rank() != 1 || states.dim(1) != h_t.dim(0))
    throw ConfigError("topic_attention: states " + ad::to_string(states.shape()) +
                      " incompatible with query " + ad::to_string(h_t.shape()));
  if (mask && std::none_of(mask->begin(), mask->end(), [](bool b) { return b; }))
    throw InputError("topic_attention: every position is masked");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(h_t.dim(0)));
  const Tensor scores = ad::scale(ad::matmul(states, h_t), inv_sqrt);
  const Tensor weights = ad::softmax(scores, mask);
  return {ad::matmul(weights, states), weights};
}

Tensor reconstruction_loss(const Tensor& states, const Tensor& embeddings, const ReconHead& head) {
  if (states.rank() != 2 || embeddings.rank() != 2 || states.dim(0) != embeddings.dim(0))
    throw ConfigError("reconstruction_loss: states " + ad::to_string(states.shape()) +
                      " do not pair with embeddings " + ad::to_string(embeddings.shape()));
  const Tensor recon = ad::tanh(ad::add_rowwise(ad::matmul(states, head.weight), head.bias));
  Tensor target;
  {
    ad::NoGradGuard guard;
    target = ad::tanh(embeddings);
  }
  return ad::scale(ad::sum(ad::squared_difference(recon, target)),
                   1.0 / static_cast<double>(states.dim(0)));
}

Tensor transform(const Tensor& v, const Tensor& w_tr) { return ad::matmul(w_tr, v); }

Tensor identity_penalty(const Tensor& w_tr) {
  if (w_tr.rank() != 2 || w_tr.dim(0) != w_tr.dim(1))
    throw ConfigError("identity_penalty: W^tr must be square, got " + ad::to_string(w_tr.shape()));
  return ad::sum(ad::squared_difference(w_tr, Tensor::identity(w_tr.dim(0))));
}

Tensor classify_stance(const Tensor& v_tilde, const Tensor& h_t, const ModelParams& params) {
  Tensor input = v_tilde;
  if (params.options.residual_topic) {
    const std::array<Tensor, 2> parts{v_tilde, h_t};
    input = ad::concat(parts);
  }
  return apply(params.stance_out, ad::relu(apply(params.stance_hidden, input)));
}

Tensor discriminate_topic(const Tensor& v_tilde, double rho, const ModelParams& params) {
  if (!params.disc_hidden.weight.defined())
    throw ConfigError("discriminate_topic: model was built without an adversary");
  return apply(params.disc_out, ad::relu(apply(params.disc_hidden, ad::grad_reverse(v_tilde, rho))));
}

int argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

Stance predict_stance(const Tensor& stance_logits) {
  return static_cast<Stance>(argmax(stance_logits.values()));
}

ForwardOutputs forward(const EncodedExample& example, const EmbeddingTable& table,
                       const ModelParams& params, double rho, bool with_reconstruction) {
  ForwardOutputs out;
  const TopicEncoding topic = encode_topic(example.topic, table, params);
  const DocumentEncoding doc = encode_document(example.document, topic, table, params);
  out.h_t = topic.h_t;
  out.states = doc.states;
  if (params.options.attention) {
    auto att = topic_attention(doc.states, topic.h_t);
    out.v = att.context;
    out.attention = att.weights;
  } else {
    const std::array<Tensor, 2> finals{doc.fwd_final.h, doc.bwd_final.h};
    out.v = ad::concat(finals);
  }
  out.v_tilde = params.transform.defined() ? transform(out.v, params.transform) : out.v;
  out.stance_logits = classify_stance(out.v_tilde, out.h_t, params);
  if (params.options.adversary) out.topic_logits = discriminate_topic(out.v_tilde, rho, params);
  if (with_reconstruction) {
    out.topic_rec = reconstruction_loss(ad::stack_rows(topic.states),
                                        embedding_matrix(example.topic, table), params.topic_recon);
    out.doc_rec = reconstruction_loss(doc.states, embedding_matrix(example.document, table),
                                      params.doc_recon);
  }
  return out;
}

// ---- checkpoints -------------------------------------------------------------

namespace {

void write_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double read_le(std::istream& in) {
  std::uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), sizeof bits);
  if (!in) throw InputError("checkpoint: truncated tensor data");
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const ModelParams& params, std::ostream& out) {
  const auto& d = params.dims;
  const auto& o = params.options;
  const auto named = params.named();
  out << "toad-checkpoint " << kCheckpointVersion << '\n';
  out << "dims " << d.embed_dim << ' ' << d.hidden << ' ' << d.stance_hidden << ' '
      << d.disc_hidden << ' ' << d.n_topics << '\n';
  out << "options " << o.transformation << ' ' << o.residual_topic << ' ' << o.adversary << ' '
      << o.attention << '\n';
  out << "tensors " << named.size() << '\n';
  for (const auto& nt : named) {
    out << nt.name;
    for (auto e : nt.tensor.shape()) out << ' ' << e;
    out << '\n';
  }
  out << "end\n";
  for (const auto& nt : named)
    for (double v : nt.tensor.values()) write_le(out, v);
}

ModelParams load_checkpoint(std::istream& in) {
  auto expect_line = [&](const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw InputError(std::string("checkpoint: missing ") + what);
    return std::istringstream(line);
  };
  std::string tag;
  int version = 0;
  if (!(expect_line("version") >> tag >> version) || tag != "toad-checkpoint")
    throw InputError("checkpoint: bad magic line");
  if (version != kCheckpointVersion)
    throw InputError("checkpoint: unsupported format version " + std::to_string(version));
  ModelDims d;
  if (!(expect_line("dims") >> tag >> d.embed_dim >> d.hidden >> d.stance_hidden >> d.disc_hidden >>
        d.n_topics) ||
      tag != "dims")
    throw InputError("checkpoint: bad dims line");
  ModelOptions o;
  if (!(expect_line("options") >> tag >> o.transformation >> o.residual_topic >> o.adversary >>
        o.attention) ||
      tag != "options")
    throw InputError("checkpoint: bad options line");
  std::size_t count = 0;
  if (!(expect_line("tensor count") >> tag >> count) || tag != "tensors")
    throw InputError("checkpoint: bad tensor count line");

  ModelParams params = ModelParams::init(d, o, 0);
  auto named = params.named();
  if (named.size() != count)
    throw InputError("checkpoint: expected " + std::to_string(named.size()) + " tensors, header lists " +
                     std::to_string(count));
  for (auto& nt : named) {
    std::istringstream ls = expect_line("tensor header");
    std::string name;
    ls >> name;
    ad::Shape shape;
    for (std::size_t e; ls >> e;) shape.push_back(e);
    if (name != nt.name || shape != nt.tensor.shape())
      throw InputError("checkpoint: tensor '" + name + "' " + ad::to_string(shape) +
                       " does not match expected '" + nt.name + "' " +
                       ad::to_string(nt.tensor.shape()));
  }
  std::string end;
  if (!std::getline(in, end) || end != "end") throw InputError("checkpoint: missing header terminator");
  for (auto& nt : named)
    for (auto& v : nt.tensor.mutable_values()) v = read_le(in);
  return params;
}

}  // namespace toad::model
