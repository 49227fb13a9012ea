#include "pqfl/fedcore/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"

namespace pqfl::fedcore {

void ClientDataset::validate() const {
  if (labels.empty()) throw Error(ErrorCode::kDimensionMismatch, "dataset is empty");
  if (num_features == 0 || features.size() != labels.size() * num_features) {
    throw Error(ErrorCode::kDimensionMismatch, "feature rows do not match label count");
  }
  for (std::uint32_t y : labels) {
    if (y >= num_classes) {
      throw Error(ErrorCode::kDimensionMismatch, "label " + std::to_string(y) + " out of range");
    }
  }
}

ClientDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.num_samples == 0 || spec.num_features == 0 || spec.num_classes < 2) {
    throw Error(ErrorCode::kDimensionMismatch, "synthetic spec needs samples, features, >=2 classes");
  }
  Rng rng(spec.seed);
  std::vector<double> centroids(spec.num_classes * spec.num_features);
  for (double& c : centroids) c = spec.separation * rng.normal();

  std::vector<std::uint32_t> labels(spec.num_samples);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<std::uint32_t>(i % spec.num_classes);
  }
  rng.shuffle(std::span(labels));

  ClientDataset d;
  d.num_features = spec.num_features;
  d.num_classes = spec.num_classes;
  d.labels = std::move(labels);
  d.features.resize(spec.num_samples * spec.num_features);
  for (std::size_t i = 0; i < spec.num_samples; ++i) {
    const double* c = centroids.data() + d.labels[i] * spec.num_features;
    for (std::size_t j = 0; j < spec.num_features; ++j) {
      d.features[i * spec.num_features + j] = static_cast<float>(c[j] + rng.normal());
    }
  }
  return d;
}

ClientDataset subset(const ClientDataset& data, std::span<const std::size_t> rows) {
  ClientDataset out;
  out.num_features = data.num_features;
  out.num_classes = data.num_classes;
  out.features.reserve(rows.size() * data.num_features);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto x = data.row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    out.labels.push_back(data.labels[r]);
  }
  return out;
}

std::vector<ClientDataset> split_iid(const ClientDataset& data, std::size_t num_shards,
                                     std::uint64_t seed) {
  if (num_shards == 0) throw Error(ErrorCode::kTooFewSamples, "zero shards requested");
  if (data.size() < num_shards) {
    throw Error(ErrorCode::kTooFewSamples, std::to_string(data.size()) + " samples for " +
                                               std::to_string(num_shards) + " shards");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));

  const std::size_t base = data.size() / num_shards;
  const std::size_t extra = data.size() % num_shards;
  std::vector<ClientDataset> shards;
  shards.reserve(num_shards);
  std::size_t begin = 0;
  for (std::size_t s = 0; s < num_shards; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    shards.push_back(subset(data, std::span(order).subspan(begin, len)));
    begin += len;
  }
  return shards;
}

ClientDataset concat(std::span<const ClientDataset> parts) {
  ClientDataset out;
  if (parts.empty()) return out;
  out.num_features = parts.front().num_features;
  out.num_classes = parts.front().num_classes;
  for (const auto& p : parts) {
    if (p.num_features != out.num_features || p.num_classes != out.num_classes) {
      throw Error(ErrorCode::kDimensionMismatch, "concat of incompatible datasets");
    }
    out.features.insert(out.features.end(), p.features.begin(), p.features.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

}  // namespace pqfl::fedcore
