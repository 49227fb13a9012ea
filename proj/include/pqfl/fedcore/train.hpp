#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pqfl/codec/codec.hpp"
#include "pqfl/fedcore/dataset.hpp"
#include "pqfl/fedcore/model.hpp"

namespace pqfl::fedcore {

enum class OptimizerKind { kSgd, kAdamW };

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

struct TrainConfig {
  std::size_t num_clients = 10;
  std::size_t num_rounds = 10;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 1e-2;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  AdamWParams adamw;
  std::uint64_t seed = 0;

  // Throws kConfigError unless M, T, epochs, batch size >= 1 and lr > 0.
  void validate() const;
};

struct ModelUpdate {
  codec::ParameterVector delta;
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
};

// Runs cfg.local_epochs epochs of mini-batch optimisation over `data` in
// place on `params`. Epoch e shuffles with derive-from(rng_seed, e). Optimizer
// state lives for the duration of this call only.
void train_epochs(const Architecture& arch, std::vector<float>& params, const ClientDataset& data,
                  const TrainConfig& cfg, std::uint64_t rng_seed);

// Trains a copy of the global parameters and returns theta_local - theta_global.
// A zero learning rate is accepted and yields an all-zero delta.
// Throws kNonFiniteGradient if training diverges.
ModelUpdate local_train(const GlobalModel& global, const ClientDataset& data,
                        const TrainConfig& cfg, std::uint64_t client_rng_seed,
                        std::uint32_t client_id);

// theta + mean(deltas), summed in ascending client_id order in double
// precision and rounded once to float. Returns the model for round + 1.
GlobalModel aggregate(const GlobalModel& global, std::span<const ModelUpdate> updates);

}  // namespace pqfl::fedcore
