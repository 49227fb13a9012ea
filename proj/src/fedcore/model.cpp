#include "pqfl/fedcore/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"

namespace pqfl::fedcore {
namespace {

struct Layer {
  std::size_t in;
  std::size_t out;
  std::size_t offset;  // start of weights; biases follow at offset + in*out
};

std::vector<Layer> layers_of(const Architecture& arch) {
  std::vector<Layer> layers;
  std::size_t in = arch.input_dim;
  std::size_t offset = 0;
  auto add = [&](std::size_t out) {
    layers.push_back({in, out, offset});
    offset += in * out + out;
    in = out;
  };
  for (std::size_t h : arch.hidden_dims) add(h);
  add(arch.num_classes);
  return layers;
}

void check_dims(const Architecture& arch, std::size_t param_count, const ClientDataset& data) {
  if (arch.input_dim == 0 || arch.num_classes < 2) {
    throw Error(ErrorCode::kDimensionMismatch, "architecture needs inputs and >=2 classes");
  }
  if (param_count != arch.parameter_count()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "parameter vector has " + std::to_string(param_count) + " entries, architecture needs " +
                    std::to_string(arch.parameter_count()));
  }
  if (data.num_features != arch.input_dim || data.num_classes != arch.num_classes) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset does not match architecture");
  }
  data.validate();
}

// Forward pass for one sample. acts[0] is the input; acts[l+1] the output of
// layer l (post-ReLU for hidden layers, raw logits for the last).
void forward(const std::vector<Layer>& layers, std::span<const double> params,
             std::span<const float> x, std::vector<std::vector<double>>& acts) {
  acts.resize(layers.size() + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& L = layers[l];
    const double* w = params.data() + L.offset;
    const double* b = w + L.in * L.out;
    auto& out = acts[l + 1];
    out.assign(L.out, 0.0);
    const bool hidden = l + 1 < layers.size();
    for (std::size_t o = 0; o < L.out; ++o) {
      double z = b[o];
      const double* row = w + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) z += row[i] * acts[l][i];
      out[o] = hidden ? std::max(z, 0.0) : z;
    }
  }
}

// Softmax probabilities in place; returns -log p[label].
double softmax_xent(std::vector<double>& logits, std::uint32_t label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  const double shifted = logits[label] - mx;
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - mx);
    sum += z;
  }
  for (double& z : logits) z /= sum;
  return std::log(sum) - shifted;
}

std::vector<double> widen(const codec::ParameterVector& p) {
  return {p.values.begin(), p.values.end()};
}

std::vector<std::size_t> all_rows(const ClientDataset& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

std::size_t Architecture::parameter_count() const {
  std::size_t n = 0;
  std::size_t in = input_dim;
  for (std::size_t h : hidden_dims) {
    n += in * h + h;
    in = h;
  }
  return n + in * num_classes + num_classes;
}

GlobalModel init_model(const Architecture& arch, std::uint64_t seed) {
  GlobalModel m = zero_model(arch);
  Rng rng(seed);
  for (const Layer& L : layers_of(arch)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
    for (std::size_t k = 0; k < L.in * L.out; ++k) {
      m.params.values[L.offset + k] = static_cast<float>(rng.uniform(-limit, limit));
    }
  }
  return m;
}

GlobalModel zero_model(const Architecture& arch) {
  GlobalModel m;
  m.arch = arch;
  m.params = codec::ParameterVector::zeros(arch.parameter_count());
  m.round = 0;
  return m;
}

double loss_only(const Architecture& arch, std::span<const double> params,
                 const ClientDataset& data, std::span<const std::size_t> rows) {
  check_dims(arch, params.size(), data);
  const auto layers = layers_of(arch);
  std::vector<std::vector<double>> acts;
  double total = 0.0;
  for (std::size_t r : rows) {
    forward(layers, params, data.row(r), acts);
    total += softmax_xent(acts.back(), data.labels[r]);
  }
  return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
}

double loss_and_gradient(const Architecture& arch, std::span<const double> params,
                         const ClientDataset& data, std::span<const std::size_t> rows,
                         std::span<double> grad) {
  check_dims(arch, params.size(), data);
  if (grad.size() != params.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient buffer size");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  if (rows.empty()) return 0.0;

  const auto layers = layers_of(arch);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  double total = 0.0;
  for (std::size_t r : rows) {
    forward(layers, params, data.row(r), acts);
    delta = acts.back();
    total += softmax_xent(delta, data.labels[r]);
    delta[data.labels[r]] -= 1.0;  // d(loss)/d(logits) = p - onehot

    for (std::size_t l = layers.size(); l-- > 0;) {
      const Layer& L = layers[l];
      const double* w = params.data() + L.offset;
      double* gw = grad.data() + L.offset;
      double* gb = gw + L.in * L.out;
      const auto& input = acts[l];
      for (std::size_t o = 0; o < L.out; ++o) {
        const double d = delta[o];
        gb[o] += d;
        double* grow = gw + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) grow[i] += d * input[i];
      }
      if (l == 0) break;
      prev_delta.assign(L.in, 0.0);
      for (std::size_t o = 0; o < L.out; ++o) {
        const double* row = w + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) prev_delta[i] += row[i] * delta[o];
      }
      // ReLU derivative, taken as 0 at the kink.
      for (std::size_t i = 0; i < L.in; ++i) {
        if (input[i] <= 0.0) prev_delta[i] = 0.0;
      }
      delta.swap(prev_delta);
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& g : grad) g *= inv;
  return total * inv;
}

double forward_loss(const GlobalModel& model, const ClientDataset& data) {
  const auto params = widen(model.params);
  return loss_only(model.arch, params, data, all_rows(data));
}

double accuracy(const GlobalModel& model, const ClientDataset& data) {
  check_dims(model.arch, model.params.size(), data);
  const auto params = widen(model.params);
  const auto layers = layers_of(model.arch);
  std::vector<std::vector<double>> acts;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    forward(layers, params, data.row(r), acts);
    const auto& z = acts.back();
    const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    if (best == data.labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace pqfl::fedcore
