#include "experiment.hpp"

#include <memory>

#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"
#include "pqfl/protocol/tcp_transport.hpp"

namespace pqfl::cli {

using fedcore::derive_seed;
using fedcore::SeedTag;

fedcore::ClientDataset load_dataset(const RunSpec& spec) {
  if (spec.dataset.kind == DatasetSource::Kind::kIdx) {
    return fedcore::load_idx(spec.dataset.idx_images, spec.dataset.idx_labels, spec.dataset.subset);
  }
  fedcore::SyntheticSpec s = spec.dataset.synthetic;
  s.seed = derive_seed(spec.seed(), SeedTag::kDataset);
  return fedcore::make_synthetic(s);
}

namespace {

struct Prepared {
  fedcore::ClientDataset data;
  std::vector<fedcore::ClientDataset> shards;
  fedcore::GlobalModel initial;
};

Prepared prepare(const RunSpec& spec) {
  spec.train.validate();
  Prepared p;
  p.data = load_dataset(spec);
  p.shards = fedcore::split_iid(p.data, spec.train.num_clients, derive_seed(spec.seed(), SeedTag::kSplit));
  fedcore::Architecture arch{p.data.num_features, spec.hidden, p.data.num_classes};
  p.initial = fedcore::init_model(arch, derive_seed(spec.seed(), SeedTag::kInit));
  return p;
}

}  // namespace

Federation build_federation(const RunSpec& spec) {
  Prepared p = prepare(spec);
  Federation f;
  f.setup = protocol::setup_keys(spec.train, spec.params, spec.seed(), spec.options,
                                 std::move(p.initial), std::move(p.shards));
  f.full_data = std::move(p.data);
  return f;
}

RunResult run_experiment(const RunSpec& spec, bench::MetricsSink* sink,
                         const std::function<void(const bench::RoundMetrics&)>& on_round) {
  Federation fed = build_federation(spec);
  channel::AttackConfig attack = spec.attack;
  attack.seed = derive_seed(spec.seed(), SeedTag::kAttack, spec.attack.seed);
  channel::Channel link(attack);

  std::unique_ptr<bench::CsvFileSink> file_sink;
  if (spec.metrics_path) file_sink = std::make_unique<bench::CsvFileSink>(*spec.metrics_path);

  RunResult result;
  const std::string scheme(sig::metadata(spec.params).name);
  auto record = [&](const protocol::RoundOutcome& outcome) {
    bench::RoundMetrics m = bench::to_metrics(scheme, outcome);
    if (sink != nullptr) sink->record(m);
    if (file_sink) file_sink->record(m);
    if (on_round) on_round(m);
    result.metrics.push_back(std::move(m));
  };

  auto& clients = fed.setup.clients;
  if (spec.transport == TransportKind::kTcp) {
    const auto [host, port] = channel::parse_endpoint(spec.listen);
    protocol::TcpTransport transport(clients, link, fed.setup.registry, {host, port});
    result.training = protocol::run_training(fed.setup.server, transport, record);
  } else {
    protocol::InProcessTransport transport(clients, link, spec.options.parallel_clients);
    result.training = protocol::run_training(fed.setup.server, transport, record);
  }
  result.channel_stats = link.stats();
  result.attack_events = link.events();
  return result;
}

}  // namespace pqfl::cli
