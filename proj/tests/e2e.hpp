#pragma once

// Finite-difference check of the full training objective on a tiny model.
// Discriminator weights see L^t directly; every other parameter sits below
// the reversal layer, so its gradient is d/dθ (total - (1 + rho) L^t).

#include <set>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "toad/model.hpp"
#include "toad/rng.hpp"
#include "toad/training.hpp"

namespace e2e {

namespace model = toad::model;
namespace training = toad::training;
using toad::ad::Tensor;

struct Fixture {
  toad::EmbeddingTable table;
  model::ModelParams params;
  std::vector<model::EncodedExample> batch;
  training::TrainConfig config;
};

inline Fixture make_fixture(std::uint64_t seed) {
  Fixture f;
  const std::set<std::string> vocab{"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta"};
  f.table = toad::EmbeddingTable::build(vocab, nullptr, 4, toad::derive_seed(seed, 1));
  f.config.embed_dim = 4;
  f.config.hidden = 3;
  f.config.stance_hidden = 5;
  f.config.disc_hidden = 4;
  f.config.lambda_tr = 0.7;
  f.config.lambda_rec = 1.3;
  f.params = model::ModelParams::init(f.config.model_dims(3), f.config.model_options(), toad::derive_seed(seed, 2));
  // move W^tr off the identity so the penalty has a gradient
  toad::Rng rng(toad::derive_seed(seed, 3));
  for (auto& v : f.params.transform.mutable_values()) v += rng.uniform(-0.2, 0.2);
  // larger weights than the init range make the check less trivial
  for (auto& t : f.params.tensors())
    for (auto& v : t.mutable_values()) v += rng.uniform(-0.3, 0.3);

  auto idx = [&](std::initializer_list<const char*> toks) {
    std::vector<std::size_t> out;
    for (auto* t : toks) out.push_back(f.table.index(t));
    return out;
  };
  f.batch.push_back({idx({"alpha", "beta", "gamma"}), idx({"delta"}), 0, toad::Stance::kPro});
  f.batch.push_back({idx({"eps", "zeta"}), idx({"eta", "alpha"}), 1, toad::Stance::kCon});
  f.batch.push_back({idx({"gamma", "unseen", "beta", "eta"}), idx({"zeta"}), 2, std::nullopt});
  return f;
}

inline gradcheck::Result check(std::uint64_t seed, double rho) {
  Fixture f = make_fixture(seed);
  auto named = f.params.named();
  std::vector<Tensor> leaves;
  std::vector<std::string> names;
  for (auto& nt : named) {
    leaves.push_back(nt.tensor);
    names.push_back(nt.name);
  }
  auto analytic = [&] {
    f.params.zero_grad();
    toad::ad::backward(training::batch_loss(f.batch, f.table, f.params, f.config, rho).total);
    std::vector<std::vector<double>> g;
    for (auto& t : leaves) g.emplace_back(t.grad().begin(), t.grad().end());
    return g;
  };
  std::vector<std::vector<double>> grads = analytic();

  gradcheck::Result total;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const bool disc = names[l].rfind("disc_", 0) == 0;
    auto objective = [&] {
      toad::ad::NoGradGuard guard;
      const auto b = training::batch_loss(f.batch, f.table, f.params, f.config, rho).breakdown;
      return disc ? b.total : b.total - (1.0 + rho) * b.topic;
    };
    std::vector<Tensor> one{leaves[l]};
    const std::vector<std::string> nm{names[l]};
    const auto r = gradcheck::check(one, nm, [&] { return std::vector<std::vector<double>>{grads[l]}; },
                                    objective);
    total.checked += r.checked;
    if (r.max_error > total.max_error) {
      total.max_error = r.max_error;
      total.worst = r.worst;
    }
  }
  return total;
}

}  // namespace e2e
