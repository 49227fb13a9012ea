#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pqfl/bytes.hpp"
#include "pqfl/fedcore/dataset.hpp"
#include "pqfl/fedcore/model.hpp"
#include "pqfl/fedcore/train.hpp"

// Reference implementations used only to check the library.
namespace pqfl::oracle {

// Central differences of the mean cross-entropy, one coordinate at a time.
std::vector<double> finite_difference_gradient(const fedcore::Architecture& arch,
                                               std::span<const double> params,
                                               const fedcore::ClientDataset& data, double h);

// ||a - b|| / max(||a||, ||b||), or 0 when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

// Byte-by-byte parameter encoding: rank, dims, then floats, little-endian.
Bytes encode_params(std::span<const std::uint64_t> shape, std::span<const float> values);

// theta + (1/n) * sum(deltas), one coordinate at a time, deltas added in the
// order given.
std::vector<float> mean_update(std::span<const float> theta,
                               const std::vector<std::vector<float>>& deltas);

// Federated averaging with no keys, envelopes or channel: the same data,
// split, initial model and per-(client, round) training seeds as a protocol
// run with master seed `cfg.seed`. Clients listed in `skip` never contribute.
struct PlainRun {
  fedcore::ClientDataset data;
  std::vector<std::size_t> hidden;
  fedcore::TrainConfig cfg;
  std::vector<std::uint32_t> skip;
};
fedcore::GlobalModel plain_fedavg(const PlainRun& run);

// Single full-batch gradient step for multinomial logistic regression,
// written without the library's model code.
std::vector<double> logistic_gradient(const fedcore::ClientDataset& data,
                                      std::span<const double> params);

}  // namespace pqfl::oracle
