#include "pqfl/fedcore/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"

namespace pqfl::fedcore {

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kConfigError, why); };
  if (num_clients < 1) fail("num_clients must be >= 1");
  if (num_rounds < 1) fail("num_rounds must be >= 1");
  if (local_epochs < 1) fail("local_epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
}

void train_epochs(const Architecture& arch, std::vector<float>& params, const ClientDataset& data,
                  const TrainConfig& cfg, std::uint64_t rng_seed) {
  if (params.size() != arch.parameter_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "parameter count does not match architecture");
  }
  if (cfg.batch_size == 0 || cfg.learning_rate < 0.0) {
    throw Error(ErrorCode::kConfigError, "batch_size must be >= 1 and learning_rate >= 0");
  }
  const std::size_t n = params.size();
  std::vector<double> work(n);
  std::vector<double> grad(n);
  std::vector<double> m;
  std::vector<double> v;
  if (cfg.optimizer == OptimizerKind::kAdamW) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
  std::uint64_t step = 0;
  std::vector<std::size_t> order(data.size());

  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix64(rng_seed ^ mix64(epoch)));
    rng.shuffle(std::span(order));

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      std::copy(params.begin(), params.end(), work.begin());
      const double loss =
          loss_and_gradient(arch, work, data, std::span(order).subspan(start, len), grad);
      if (!std::isfinite(loss)) throw Error(ErrorCode::kNonFiniteGradient, "loss is not finite");
      ++step;
      const double lr = cfg.learning_rate;
      if (cfg.optimizer == OptimizerKind::kSgd) {
        for (std::size_t k = 0; k < n; ++k) work[k] -= lr * grad[k];
      } else {
        const AdamWParams& a = cfg.adamw;
        const double bc1 = 1.0 - std::pow(a.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(a.beta2, static_cast<double>(step));
        for (std::size_t k = 0; k < n; ++k) {
          work[k] -= lr * a.weight_decay * work[k];
          m[k] = a.beta1 * m[k] + (1.0 - a.beta1) * grad[k];
          v[k] = a.beta2 * v[k] + (1.0 - a.beta2) * grad[k] * grad[k];
          work[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + a.epsilon);
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const float p = static_cast<float>(work[k]);
        if (!std::isfinite(p)) {
          throw Error(ErrorCode::kNonFiniteGradient,
                      "parameter " + std::to_string(k) + " diverged at step " + std::to_string(step));
        }
        params[k] = p;
      }
    }
  }
}

ModelUpdate local_train(const GlobalModel& global, const ClientDataset& data,
                        const TrainConfig& cfg, std::uint64_t client_rng_seed,
                        std::uint32_t client_id) {
  std::vector<float> local = global.params.values;
  train_epochs(global.arch, local, data, cfg, client_rng_seed);
  ModelUpdate u;
  u.client_id = client_id;
  u.round = global.round;
  u.delta.shape = global.params.shape;
  u.delta.values.resize(local.size());
  for (std::size_t k = 0; k < local.size(); ++k) {
    u.delta.values[k] = local[k] - global.params.values[k];
  }
  return u;
}

GlobalModel aggregate(const GlobalModel& global, std::span<const ModelUpdate> updates) {
  if (updates.empty()) throw Error(ErrorCode::kEmptyVerifiedSet, "no updates to aggregate");
  std::vector<const ModelUpdate*> ordered;
  ordered.reserve(updates.size());
  for (const auto& u : updates) {
    if (u.round != global.round) {
      throw Error(ErrorCode::kRoundMismatch, "update from client " + std::to_string(u.client_id) +
                                                 " is for round " + std::to_string(u.round) +
                                                 ", model is at round " +
                                                 std::to_string(global.round));
    }
    if (u.delta.shape != global.params.shape || u.delta.size() != global.params.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "update from client " + std::to_string(u.client_id) + " has the wrong shape");
    }
    ordered.push_back(&u);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ModelUpdate* a, const ModelUpdate* b) { return a->client_id < b->client_id; });

  const std::size_t n = global.params.size();
  std::vector<double> sum(n, 0.0);
  for (const ModelUpdate* u : ordered) {
    for (std::size_t k = 0; k < n; ++k) sum[k] += static_cast<double>(u->delta.values[k]);
  }
  const double count = static_cast<double>(ordered.size());
  GlobalModel next = global;
  for (std::size_t k = 0; k < n; ++k) {
    next.params.values[k] =
        static_cast<float>(static_cast<double>(global.params.values[k]) + sum[k] / count);
  }
  next.round = global.round + 1;
  return next;
}

}  // namespace pqfl::fedcore
