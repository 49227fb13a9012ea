#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pqfl/codec/codec.hpp"
#include "pqfl/fedcore/dataset.hpp"

namespace pqfl::fedcore {

// Fully connected ReLU network with a softmax cross-entropy head. No hidden
// layers gives multinomial logistic regression.
struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 0;

  // Per layer: weights (out x in, row-major) followed by biases (out).
  std::size_t parameter_count() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct GlobalModel {
  Architecture arch;
  codec::ParameterVector params;
  std::uint32_t round = 0;
};

// Glorot-uniform weights, zero biases.
GlobalModel init_model(const Architecture& arch, std::uint64_t seed);
GlobalModel zero_model(const Architecture& arch);

// Mean cross-entropy over every sample in `data`. Throws kDimensionMismatch
// if the model and data disagree.
double forward_loss(const GlobalModel& model, const ClientDataset& data);

// Mean loss over `rows` and its gradient with respect to `params`, computed
// in double precision. `grad` must have parameter_count() entries and is
// overwritten.
double loss_and_gradient(const Architecture& arch, std::span<const double> params,
                         const ClientDataset& data, std::span<const std::size_t> rows,
                         std::span<double> grad);

double loss_only(const Architecture& arch, std::span<const double> params,
                 const ClientDataset& data, std::span<const std::size_t> rows);

// Classification accuracy in [0, 1].
double accuracy(const GlobalModel& model, const ClientDataset& data);

}  // namespace pqfl::fedcore
