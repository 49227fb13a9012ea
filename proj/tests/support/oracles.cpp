#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "pqfl/fedcore/rng.hpp"

namespace pqfl::oracle {

std::vector<double> finite_difference_gradient(const fedcore::Architecture& arch,
                                               std::span<const double> params,
                                               const fedcore::ClientDataset& data, double h) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double orig = p[k];
    p[k] = orig + h;
    const double up = fedcore::loss_only(arch, p, data, rows);
    p[k] = orig - h;
    const double down = fedcore::loss_only(arch, p, data, rows);
    p[k] = orig;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

Bytes encode_params(std::span<const std::uint64_t> shape, std::span<const float> values) {
  Bytes out;
  const auto rank = static_cast<std::uint32_t>(shape.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(rank >> (8 * i)));
  for (std::uint64_t d : shape) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(d >> (8 * i)));
  }
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

std::vector<float> mean_update(std::span<const float> theta,
                               const std::vector<std::vector<float>>& deltas) {
  std::vector<float> out(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    double sum = 0.0;
    for (const auto& d : deltas) sum += static_cast<double>(d[j]);
    out[j] = static_cast<float>(static_cast<double>(theta[j]) +
                                sum / static_cast<double>(deltas.size()));
  }
  return out;
}

fedcore::GlobalModel plain_fedavg(const PlainRun& run) {
  using fedcore::derive_seed;
  using fedcore::SeedTag;
  const auto shards =
      fedcore::split_iid(run.data, run.cfg.num_clients, derive_seed(run.cfg.seed, SeedTag::kSplit));
  const fedcore::Architecture arch{run.data.num_features, run.hidden, run.data.num_classes};
  fedcore::GlobalModel model = fedcore::init_model(arch, derive_seed(run.cfg.seed, SeedTag::kInit));
  for (std::uint32_t t = 0; t < run.cfg.num_rounds; ++t) {
    std::vector<std::vector<float>> deltas;
    for (std::uint32_t id = 1; id <= run.cfg.num_clients; ++id) {
      if (std::find(run.skip.begin(), run.skip.end(), id) != run.skip.end()) continue;
      std::vector<float> local = model.params.values;
      fedcore::train_epochs(arch, local, shards[id - 1], run.cfg,
                            derive_seed(run.cfg.seed, SeedTag::kTrain, id, t));
      std::vector<float> delta(local.size());
      for (std::size_t j = 0; j < local.size(); ++j) delta[j] = local[j] - model.params.values[j];
      deltas.push_back(std::move(delta));
    }
    if (!deltas.empty()) model.params.values = mean_update(model.params.values, deltas);
    ++model.round;
  }
  return model;
}

std::vector<double> logistic_gradient(const fedcore::ClientDataset& data,
                                      std::span<const double> params) {
  const std::size_t f = data.num_features;
  const std::size_t c = data.num_classes;
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> z(c);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto x = data.row(r);
    for (std::size_t k = 0; k < c; ++k) {
      z[k] = params[f * c + k];
      for (std::size_t i = 0; i < f; ++i) z[k] += params[k * f + i] * x[i];
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) sum += (v = std::exp(v - mx));
    for (std::size_t k = 0; k < c; ++k) {
      const double g = z[k] / sum - (k == data.labels[r] ? 1.0 : 0.0);
      for (std::size_t i = 0; i < f; ++i) grad[k * f + i] += g * x[i];
      grad[f * c + k] += g;
    }
  }
  for (double& g : grad) g /= static_cast<double>(data.size());
  return grad;
}

}  // namespace pqfl::oracle
