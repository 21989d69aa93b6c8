#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "toad/autodiff.hpp"

namespace toad::ad {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter first/second moment buffers plus the shared step counter.
struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(std::span<const Tensor> params);
};

// One bias-corrected Adam update of every parameter from its accumulated
// gradient. Parameters without a gradient buffer are left untouched.
void adam_step(std::span<Tensor> params, AdamState& state, double lr,
               const AdamOptions& options = {});

}  // namespace toad::ad
