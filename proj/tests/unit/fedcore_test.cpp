#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "oracles.hpp"
#include "pqfl/error.hpp"
#include "pqfl/fedcore/dataset.hpp"
#include "pqfl/fedcore/model.hpp"
#include "pqfl/fedcore/rng.hpp"
#include "pqfl/fedcore/train.hpp"

namespace pqfl::fedcore {
namespace {

ClientDataset small_data(std::size_t n, std::size_t features, std::size_t classes,
                         std::uint64_t seed, double separation = 1.0) {
  return make_synthetic({n, features, classes, seed, separation});
}

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kConfigError;
}

TEST(Rng, DerivedSeedsAreDistinctAndStable) {
  EXPECT_EQ(derive_seed(1, SeedTag::kTrain, 2, 3), derive_seed(1, SeedTag::kTrain, 2, 3));
  EXPECT_NE(derive_seed(1, SeedTag::kTrain, 2, 3), derive_seed(1, SeedTag::kTrain, 3, 2));
  EXPECT_NE(derive_seed(1, SeedTag::kTrain, 2, 3), derive_seed(1, SeedTag::kKeys, 2, 3));
  EXPECT_NE(derive_seed(1, SeedTag::kTrain), derive_seed(2, SeedTag::kTrain));
}

TEST(Rng, DistributionsLookRight) {
  Rng rng(42);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(3);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(std::span(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Dataset, SyntheticIsBalancedAndSeeded) {
  const ClientDataset a = small_data(1000, 5, 10, 1);
  EXPECT_EQ(a, small_data(1000, 5, 10, 1));
  EXPECT_NE(a, small_data(1000, 5, 10, 2));
  std::map<std::uint32_t, int> counts;
  for (auto y : a.labels) ++counts[y];
  EXPECT_EQ(counts.size(), 10u);
  for (const auto& [label, c] : counts) EXPECT_EQ(c, 100);
}

TEST(Dataset, SplitSizes) {
  const auto even = split_iid(small_data(100, 3, 4, 1), 10, 5);
  ASSERT_EQ(even.size(), 10u);
  for (const auto& s : even) EXPECT_EQ(s.size(), 10u);

  const auto uneven = split_iid(small_data(101, 3, 4, 1), 10, 5);
  EXPECT_EQ(uneven[0].size(), 11u);
  for (std::size_t i = 1; i < 10; ++i) EXPECT_EQ(uneven[i].size(), 10u);
}

TEST(Dataset, SplitIsDeterministicPartition) {
  const ClientDataset d = small_data(97, 4, 3, 8);
  const auto a = split_iid(d, 6, 11);
  EXPECT_EQ(a, split_iid(d, 6, 11));
  EXPECT_NE(a, split_iid(d, 6, 12));
  // Union of shards is the original multiset of rows.
  auto rows_of = [](const ClientDataset& x) {
    std::vector<std::vector<float>> rows;
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto r = x.row(i);
      std::vector<float> row(r.begin(), r.end());
      row.push_back(static_cast<float>(x.labels[i]));
      rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  EXPECT_EQ(rows_of(concat(a)), rows_of(d));
}

TEST(Dataset, TooFewSamples) {
  EXPECT_EQ(code_of([] { split_iid(small_data(5, 2, 2, 1), 6, 1); }), ErrorCode::kTooFewSamples);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

TEST(Dataset, IdxLoader) {
  const auto dir = std::filesystem::temp_directory_path() / "pqfl_idx_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream img(dir / "img", std::ios::binary);
    img.write("\0\0\x08\x03", 4);
    write_be32(img, 3);
    write_be32(img, 2);
    write_be32(img, 2);
    for (int i = 0; i < 12; ++i) img.put(static_cast<char>(i * 20));
    std::ofstream lab(dir / "lab", std::ios::binary);
    lab.write("\0\0\x08\x01", 4);
    write_be32(lab, 3);
    lab.put(0);
    lab.put(7);
    lab.put(3);
  }
  const ClientDataset d = load_idx(dir / "img", dir / "lab");
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.num_features, 4u);
  EXPECT_EQ(d.num_classes, 8u);
  EXPECT_FLOAT_EQ(d.features[5], static_cast<float>(100.0 / 255.0));
  EXPECT_EQ(d.labels[1], 7u);

  const ClientDataset first2 = load_idx(dir / "img", dir / "lab", 2);
  EXPECT_EQ(first2.size(), 2u);
  EXPECT_EQ(code_of([&] { load_idx(dir / "missing", dir / "lab"); }), ErrorCode::kIoError);
  EXPECT_EQ(code_of([&] { load_idx(dir / "lab", dir / "img"); }), ErrorCode::kDimensionMismatch);
  std::filesystem::remove_all(dir);
}

TEST(Model, ParameterCount) {
  EXPECT_EQ((Architecture{20, {}, 10}).parameter_count(), 210u);
  EXPECT_EQ((Architecture{20, {32}, 10}).parameter_count(), 20u * 32 + 32 + 32 * 10 + 10);
}

TEST(Model, UniformModelLossIsLogClasses) {
  const ClientDataset d = small_data(50, 6, 10, 2);
  const GlobalModel m = zero_model(Architecture{6, {8}, 10});
  EXPECT_NEAR(forward_loss(m, d), std::log(10.0), 1e-12);
}

TEST(Model, GlobalLossIsMeanOfEvenShardLosses) {
  const ClientDataset d = small_data(120, 5, 3, 9);
  const GlobalModel m = init_model(Architecture{5, {4}, 3}, 1);
  const auto shards = split_iid(d, 4, 2);
  double mean = 0.0;
  for (const auto& s : shards) mean += forward_loss(m, s) / 4.0;
  EXPECT_NEAR(forward_loss(m, concat(shards)), mean, 1e-12);
}

TEST(Model, DimensionMismatch) {
  const ClientDataset d = small_data(10, 5, 3, 1);
  EXPECT_EQ(code_of([&] { forward_loss(zero_model(Architecture{4, {}, 3}), d); }),
            ErrorCode::kDimensionMismatch);
  GlobalModel m = zero_model(Architecture{5, {}, 3});
  m.params.values.pop_back();
  EXPECT_EQ(code_of([&] { forward_loss(m, d); }), ErrorCode::kDimensionMismatch);
}

TEST(Model, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  for (int instance = 0; instance < 24; ++instance) {
    const std::size_t features = 2 + rng.below(4);
    const std::size_t classes = 2 + rng.below(3);
    std::vector<std::size_t> hidden;
    if (instance % 2 == 1) hidden.push_back(2 + rng.below(4));
    const Architecture arch{features, hidden, classes};
    const ClientDataset d = small_data(8 + rng.below(8), features, classes, rng.next_u64());
    const auto params = widen(init_model(arch, rng.next_u64()).params.values);
    std::vector<double> grad(params.size());
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    loss_and_gradient(arch, params, d, rows, grad);
    const auto fd = oracle::finite_difference_gradient(arch, params, d, 1e-6);
    EXPECT_LT(oracle::relative_error(grad, fd), 1e-4) << "instance " << instance;
  }
}

TEST(Model, LogisticGradientMatchesReference) {
  const ClientDataset d = small_data(30, 4, 3, 5);
  const Architecture arch{4, {}, 3};
  const auto params = widen(init_model(arch, 6).params.values);
  std::vector<double> grad(params.size());
  std::vector<std::size_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  loss_and_gradient(arch, params, d, rows, grad);
  EXPECT_LT(oracle::relative_error(grad, oracle::logistic_gradient(d, params)), 1e-12);
}

TrainConfig sgd(double lr, std::size_t batch, std::size_t epochs = 1) {
  TrainConfig c;
  c.learning_rate = lr;
  c.batch_size = batch;
  c.local_epochs = epochs;
  return c;
}

TEST(Train, ZeroLearningRateGivesZeroDelta) {
  const ClientDataset d = small_data(40, 5, 3, 1);
  const GlobalModel g = init_model(Architecture{5, {6}, 3}, 2);
  const ModelUpdate u = local_train(g, d, sgd(0.0, 8), 3, 1);
  for (float v : u.delta.values) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(u.delta.shape, g.params.shape);
}

TEST(Train, FullBatchStepIsMinusLrTimesGradient) {
  const ClientDataset d = small_data(25, 4, 3, 3);
  const GlobalModel g = init_model(Architecture{4, {}, 3}, 4);
  const double lr = 0.05;
  const ModelUpdate u = local_train(g, d, sgd(lr, d.size()), 5, 1);
  const auto theta = widen(g.params.values);
  const auto grad = oracle::logistic_gradient(d, theta);
  std::vector<double> expected(grad.size());
  for (std::size_t k = 0; k < grad.size(); ++k) expected[k] = -lr * grad[k];
  // Float storage of theta and delta bounds the achievable agreement.
  EXPECT_LT(oracle::relative_error(widen(u.delta.values), expected), 1e-4);
}

TEST(Train, DeterministicAndInputUntouched) {
  const ClientDataset d = small_data(64, 5, 4, 1);
  const GlobalModel g = init_model(Architecture{5, {7}, 4}, 2);
  const GlobalModel copy = g;
  const ModelUpdate a = local_train(g, d, sgd(0.1, 8, 2), 9, 3);
  const ModelUpdate b = local_train(g, d, sgd(0.1, 8, 2), 9, 3);
  EXPECT_TRUE(a.delta == b.delta);
  EXPECT_TRUE(g.params == copy.params);
  EXPECT_EQ(a.client_id, 3u);
  const ModelUpdate c = local_train(g, d, sgd(0.1, 8, 2), 10, 3);
  EXPECT_FALSE(a.delta == c.delta);
}

TEST(Train, AdamWReducesLoss) {
  const ClientDataset d = small_data(200, 6, 3, 1, 3.0);
  GlobalModel g = init_model(Architecture{6, {8}, 3}, 2);
  TrainConfig c = sgd(1e-2, 16, 5);
  c.optimizer = OptimizerKind::kAdamW;
  const double before = forward_loss(g, d);
  const ModelUpdate u = local_train(g, d, c, 1, 1);
  const GlobalModel after = aggregate(g, std::vector<ModelUpdate>{u});
  EXPECT_LT(forward_loss(after, d), before);
}

TEST(Train, SeparableDataTrainsToLowLoss) {
  const ClientDataset d = small_data(200, 4, 2, 7, 8.0);
  std::vector<float> params = init_model(Architecture{4, {}, 2}, 1).params.values;
  train_epochs(Architecture{4, {}, 2}, params, d, sgd(0.5, 20, 30), 3);
  GlobalModel m = zero_model(Architecture{4, {}, 2});
  m.params.values = params;
  EXPECT_LT(forward_loss(m, d), 0.1);
  EXPECT_GT(accuracy(m, d), 0.98);
}

TEST(Train, DivergenceIsReported) {
  ClientDataset d = small_data(20, 3, 2, 1);
  for (float& x : d.features) x *= 1e18f;
  const GlobalModel g = init_model(Architecture{3, {}, 2}, 1);
  EXPECT_EQ(code_of([&] { local_train(g, d, sgd(1e30, 4), 1, 1); }),
            ErrorCode::kNonFiniteGradient);
}

TEST(Train, ConfigValidation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.num_clients = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
}

ModelUpdate update_of(std::uint32_t id, std::vector<float> delta, std::uint32_t round = 0) {
  ModelUpdate u;
  u.client_id = id;
  u.round = round;
  u.delta = codec::ParameterVector::flat(std::move(delta));
  return u;
}

TEST(Aggregate, IdenticalUpdatesAddOnce) {
  GlobalModel g = zero_model(Architecture{1, {}, 2});
  g.params.values = {1, 2, 3, 4};
  const std::vector<ModelUpdate> us = {update_of(1, {0.5f, 0.25f, -1, 0}),
                                       update_of(2, {0.5f, 0.25f, -1, 0}),
                                       update_of(3, {0.5f, 0.25f, -1, 0})};
  const GlobalModel n = aggregate(g, us);
  EXPECT_EQ(n.params.values, (std::vector<float>{1.5f, 2.25f, 2, 4}));
  EXPECT_EQ(n.round, 1u);
}

TEST(Aggregate, OppositeUpdatesCancel) {
  GlobalModel g = zero_model(Architecture{1, {}, 2});
  g.params.values = {1, -2, 3, 0.1f};
  const std::vector<ModelUpdate> us = {update_of(4, {0.3f, -0.7f, 1e-3f, 5}),
                                       update_of(2, {-0.3f, 0.7f, -1e-3f, -5})};
  EXPECT_TRUE(aggregate(g, us).params == g.params);
}

TEST(Aggregate, MatchesScalarLoopAndIsOrderInvariant) {
  Rng rng(8);
  GlobalModel g = zero_model(Architecture{7, {5}, 3});
  for (float& v : g.params.values) v = static_cast<float>(rng.normal());
  std::vector<ModelUpdate> us;
  for (std::uint32_t id : {9u, 1u, 4u, 6u, 2u, 10u, 7u}) {
    std::vector<float> delta(g.params.size());
    for (float& v : delta) v = static_cast<float>(1e-2 * rng.normal());
    us.push_back(update_of(id, delta));
  }
  std::vector<ModelUpdate> sorted = us;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  std::vector<std::vector<float>> deltas;
  for (const auto& u : sorted) deltas.push_back(u.delta.values);
  const auto expected = oracle::mean_update(g.params.values, deltas);

  EXPECT_EQ(aggregate(g, us).params.values, expected);
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(std::span(us));
    EXPECT_EQ(aggregate(g, us).params.values, expected);
  }
}

TEST(Aggregate, Errors) {
  const GlobalModel g = zero_model(Architecture{1, {}, 2});
  EXPECT_EQ(code_of([&] { aggregate(g, std::vector<ModelUpdate>{}); }), ErrorCode::kEmptyVerifiedSet);
  EXPECT_EQ(code_of([&] { aggregate(g, std::vector<ModelUpdate>{update_of(1, {0, 0, 0, 0}, 1)}); }),
            ErrorCode::kRoundMismatch);
  EXPECT_EQ(code_of([&] { aggregate(g, std::vector<ModelUpdate>{update_of(1, {0, 0, 0})}); }),
            ErrorCode::kDimensionMismatch);
}

}  // namespace
}  // namespace pqfl::fedcore
