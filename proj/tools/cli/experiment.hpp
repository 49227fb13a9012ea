#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pqfl/bench/metrics.hpp"
#include "pqfl/channel/attack.hpp"
#include "pqfl/channel/channel.hpp"
#include "pqfl/fedcore/dataset.hpp"
#include "pqfl/fedcore/train.hpp"
#include "pqfl/protocol/protocol.hpp"
#include "pqfl/protocol/runner.hpp"
#include "pqfl/sig/scheme.hpp"

namespace pqfl::cli {

struct DatasetSource {
  enum class Kind { kSynthetic, kIdx };
  Kind kind = Kind::kSynthetic;
  fedcore::SyntheticSpec synthetic;  // seed is overridden from the master seed
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  std::size_t subset = 0;  // 0 = whole file
};

enum class TransportKind { kInProcess, kTcp };

struct RunSpec {
  sig::ParameterSet params = sig::ParameterSet::kMlDsa44;
  fedcore::TrainConfig train;  // train.seed is the master seed
  std::vector<std::size_t> hidden = {32};
  DatasetSource dataset;
  channel::AttackConfig attack;  // attack.seed is mixed with the master seed
  TransportKind transport = TransportKind::kInProcess;
  std::string listen = "127.0.0.1:0";
  protocol::ProtocolOptions options;
  std::optional<std::filesystem::path> metrics_path;

  std::uint64_t seed() const { return train.seed; }
};

// Dataset, split, initial model and keys, each from its own stream of the
// master seed.
struct Federation {
  protocol::SetupResult setup;
  fedcore::ClientDataset full_data;
};

fedcore::ClientDataset load_dataset(const RunSpec& spec);
Federation build_federation(const RunSpec& spec);

struct RunResult {
  protocol::TrainingResult training;
  std::vector<bench::RoundMetrics> metrics;
  channel::ChannelStats channel_stats;
  std::vector<channel::AttackEvent> attack_events;
};

// Builds the federation and runs every round over the configured transport.
// Metrics go to `sink` (if any) and to the CSV at spec.metrics_path (if set).
RunResult run_experiment(const RunSpec& spec, bench::MetricsSink* sink = nullptr,
                         const std::function<void(const bench::RoundMetrics&)>& on_round = {});

}  // namespace pqfl::cli
