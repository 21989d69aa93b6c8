#pragma once

// Topic-adversarial stance network: a topic BiLSTM, a document BiLSTM whose
// initial states are the topic encoder's final states, topic-query attention
// over the document states, reconstruction heads on both encoders, a
// regularized linear transformation, a stance classifier that also sees the
// topic encoding, and a topic discriminator behind gradient reversal.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toad/autodiff.hpp"
#include "toad/data.hpp"

namespace toad::model {

using ad::Tensor;

struct ModelDims {
  std::size_t embed_dim = EmbeddingTable::kDefaultDim;
  std::size_t hidden = 80;         // per LSTM direction
  std::size_t stance_hidden = 147;
  std::size_t disc_hidden = 85;
  std::size_t n_topics = 6;        // source topics + the zero-shot topic
};

struct ModelOptions {
  bool transformation = true;  // W^tr between attention and the heads
  bool residual_topic = true;  // classifier input is [v~ ; h_t]
  bool adversary = true;       // topic discriminator + gradient reversal
  bool attention = true;       // false: v = final document states (BiCond)
};

struct LstmParams {
  Tensor w_input;   // [4h, in], gate order i, f, g, o
  Tensor w_hidden;  // [4h, h]
  Tensor bias;      // [4h]; forget-gate slice starts at 1
};

struct Affine {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
};

// Reconstruction head applied row-wise to encoder states: state . weight + bias.
struct ReconHead {
  Tensor weight;  // [2h, embed_dim]
  Tensor bias;    // [embed_dim]
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ModelParams {
  ModelDims dims;
  ModelOptions options;
  LstmParams topic_fwd, topic_bwd, doc_fwd, doc_bwd;
  ReconHead topic_recon, doc_recon;
  Tensor transform;  // [2h, 2h], identity at init; undefined without transformation
  Affine stance_hidden, stance_out;
  Affine disc_hidden, disc_out;  // undefined without adversary

  // Matrices uniform in [-0.1, 0.1], biases zero except the LSTM forget
  // gates (+1), transform = I.
  static ModelParams init(const ModelDims& dims, const ModelOptions& options, std::uint64_t seed);

  // Stable name order used by the optimizer and checkpoints.
  std::vector<NamedTensor> named() const;
  std::vector<Tensor> tensors() const;
  ModelParams clone() const;
  void zero_grad();
  std::size_t parameter_count() const;
  std::size_t classifier_input_dim() const;
};

struct EncodedExample {
  std::vector<std::size_t> document;
  std::vector<std::size_t> topic;
  int topic_id = 0;
  std::optional<Stance> stance;
};

EncodedExample encode(const Example& example, const EmbeddingTable& table);
std::vector<EncodedExample> encode_all(std::span<const Example> examples,
                                       const EmbeddingTable& table);

struct LstmState {
  Tensor h;
  Tensor c;
};

struct TopicEncoding {
  Tensor h_t;                 // [2h] = [fwd final ; bwd final]
  std::vector<Tensor> states; // per token, [2h]
  LstmState fwd_final;
  LstmState bwd_final;
};

struct DocumentEncoding {
  Tensor states;  // H, [n, 2h]
  LstmState fwd_final;
  LstmState bwd_final;
};

// Constant [n, dim] tensor of embedding rows.
Tensor embedding_matrix(std::span<const std::size_t> tokens, const EmbeddingTable& table);

TopicEncoding encode_topic(std::span<const std::size_t> tokens, const EmbeddingTable& table,
                           const ModelParams& params);

// The forward direction starts from the topic's forward final (h, c), the
// backward direction from the topic's backward final (h, c).
DocumentEncoding encode_document(std::span<const std::size_t> tokens,
                                 const TopicEncoding& topic, const EmbeddingTable& table,
                                 const ModelParams& params);

struct AttentionResult {
  Tensor context;  // v_dt, [2h]
  Tensor weights;  // [n]
};

// softmax((H h_t) / sqrt(2h)) over unmasked rows, then the weighted sum of rows.
AttentionResult topic_attention(const Tensor& states, const Tensor& h_t,
                                const std::vector<bool>* mask = nullptr);

// mean_i || tanh(state_i . W + b) - tanh(e_i) ||^2
Tensor reconstruction_loss(const Tensor& states, const Tensor& embeddings, const ReconHead& head);

Tensor transform(const Tensor& v, const Tensor& w_tr);
// || W - I ||_F^2
Tensor identity_penalty(const Tensor& w_tr);

Tensor classify_stance(const Tensor& v_tilde, const Tensor& h_t, const ModelParams& params);
Tensor discriminate_topic(const Tensor& v_tilde, double rho, const ModelParams& params);

// Argmax of stance logits; ties resolve to the lower class index.
Stance predict_stance(const Tensor& stance_logits);
int argmax(std::span<const double> values);

struct ForwardOutputs {
  Tensor h_t;
  Tensor states;  // H
  Tensor v;       // v_dt
  Tensor v_tilde;
  Tensor attention;  // undefined without attention
  Tensor stance_logits;
  Tensor topic_logits;  // undefined without adversary
  Tensor topic_rec;
  Tensor doc_rec;
};

ForwardOutputs forward(const EncodedExample& example, const EmbeddingTable& table,
                       const ModelParams& params, double rho, bool with_reconstruction = true);

// ---- checkpoints -------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

// Text header (version, option flags, one "name d0 d1" line per tensor,
// "end"), then each tensor's values as little-endian float64 in header order.
void save_checkpoint(const ModelParams& params, std::ostream& out);
ModelParams load_checkpoint(std::istream& in);

}  // namespace toad::model
