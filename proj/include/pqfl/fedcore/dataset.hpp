#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pqfl::fedcore {

// Row-major feature matrix with integer class labels.
struct ClientDataset {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<float> features;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
  // Throws kDimensionMismatch when rows/labels disagree, the set is empty, or
  // a label is out of range.
  void validate() const;

  friend bool operator==(const ClientDataset&, const ClientDataset&) = default;
};

struct SyntheticSpec {
  std::size_t num_samples = 2000;
  std::size_t num_features = 20;
  std::size_t num_classes = 10;
  std::uint64_t seed = 0;
  // Std-dev of the class centroids; samples add unit-variance noise.
  double separation = 1.0;
};

// Gaussian mixture: one centroid per class, balanced labels in shuffled order.
ClientDataset make_synthetic(const SyntheticSpec& spec);

// Shuffles with a seeded generator and cuts into `num_shards` contiguous
// shards whose sizes differ by at most one (the first size % M shards get the
// extra sample). Throws kTooFewSamples if size() < num_shards.
std::vector<ClientDataset> split_iid(const ClientDataset& data, std::size_t num_shards,
                                     std::uint64_t seed);

ClientDataset concat(std::span<const ClientDataset> parts);
ClientDataset subset(const ClientDataset& data, std::span<const std::size_t> rows);

// Reads an IDX image file and its IDX label file (the MNIST container
// format). Pixel values are scaled by 1/255 for unsigned-byte data. Only the
// first `limit` samples are kept when limit > 0.
ClientDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::size_t limit = 0);

}  // namespace pqfl::fedcore
