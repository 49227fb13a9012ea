#pragma once

#include <cstdint>

#include "cli/experiment.hpp"
#include "oracles.hpp"

namespace pqfl::testing {

// Small synthetic federation that trains in milliseconds per round.
inline cli::RunSpec small_spec(sig::ParameterSet params, std::size_t clients, std::size_t rounds,
                               std::uint64_t seed = 7) {
  cli::RunSpec spec;
  spec.params = params;
  spec.train.num_clients = clients;
  spec.train.num_rounds = rounds;
  spec.train.batch_size = 16;
  spec.train.learning_rate = 0.05;
  spec.train.seed = seed;
  spec.hidden = {8};
  spec.dataset.synthetic.num_samples = 40 * clients;
  spec.dataset.synthetic.num_features = 12;
  spec.dataset.synthetic.num_classes = 4;
  return spec;
}

inline oracle::PlainRun plain_run_for(const cli::RunSpec& spec) {
  return {cli::load_dataset(spec), spec.hidden, spec.train, {}};
}

}  // namespace pqfl::testing
