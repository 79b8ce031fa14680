#pragma once

#include <cstdint>
#include <vector>

#include "genplan/flow_model.hpp"

namespace genplan {

enum class Optimizer { kSgdMomentum, kAdam };

struct TrainConfig {
  FlowArchitecture arch;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double lr_decay = 0.5;      // multiplied into the rate every `decay_every` epochs
  int decay_every = 200;
  int epochs = 600;
  double validation_fraction = 0.1;
  double momentum = 0.9;
  Optimizer optimizer = Optimizer::kSgdMomentum;
  double grad_clip = 10.0;    // global L2 norm; <= 0 disables
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> train_nll;  // full training-split NLL after each epoch
  std::vector<double> val_nll;    // validation NLL after each epoch
  double initial_train_nll = 0.0;
  double initial_val_nll = 0.0;
  int best_epoch = -1;            // -1: the initial model was never beaten
  double best_val_nll = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
};

// Per-coordinate mean and standard deviation (floored at 1e-6).
void whitening_stats(const std::vector<Vec4>& data, Vec4& mean, Vec4& stddev);

// Maximum-likelihood training with mini-batch gradients from
// FlowModel::nll. Returns the parameters with the best validation NLL.
// Throws ParameterError for fewer than 100 samples or bad config and
// RuntimeFailure if the loss becomes non-finite.
FlowModel train_flow(const std::vector<Vec4>& data, const TrainConfig& cfg, TrainReport* report = nullptr);

}  // namespace genplan
