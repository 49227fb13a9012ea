#include "commands.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "experiment.hpp"
#include "pqfl/bench/csv.hpp"
#include "pqfl/bench/metrics.hpp"
#include "pqfl/bench/microbench.hpp"
#include "pqfl/channel/tcp.hpp"
#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"
#include "pqfl/protocol/protocol.hpp"

namespace pqfl::cli {
namespace {

namespace fs = std::filesystem;

void setup_logging() {
  auto logger = spdlog::get("pqfl");
  if (!logger) {
    logger = spdlog::stderr_logger_mt("pqfl");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  const char* env = std::getenv("PQFL_LOG");
  const std::string level = env != nullptr ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty() || text == "none") return out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = text.find(',', start);
    out.push_back(bench::csv::number<std::size_t>(text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

sig::ParameterSet resolve_params(const std::string& scheme, const std::string& params) {
  if (!params.empty()) {
    const sig::ParameterSet p = sig::parse_parameter_set(params);
    if (!scheme.empty() && sig::scheme_of(p) != sig::parse_scheme(scheme)) {
      throw Error(ErrorCode::kConfigError, params + " does not belong to " + scheme);
    }
    return p;
  }
  return sig::default_parameter_set(sig::parse_scheme(scheme));
}

void write_key_file(const fs::path& path, const Bytes& bytes, bool secret) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, secret ? 0600 : 0644);
  if (fd < 0) throw Error(ErrorCode::kIoError, "cannot create " + path.string());
  if (secret) ::fchmod(fd, 0600);
  const ssize_t n = ::write(fd, bytes.data(), bytes.size());
  ::close(fd);
  if (n != static_cast<ssize_t>(bytes.size())) {
    throw Error(ErrorCode::kIoError, "short write to " + path.string());
  }
}

struct KeygenArgs {
  std::string scheme = "dilithium";
  std::string params;
  std::size_t clients = 10;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_keygen(const KeygenArgs& a, std::ostream& out) {
  const sig::ParameterSet params = resolve_params(a.scheme, a.params);
  const auto& md = sig::metadata(params);
  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());

  std::string manifest;
  for (std::uint32_t id = 0; id <= a.clients; ++id) {
    std::optional<sig::Seed> seed;
    if (a.seed) {
      seed = protocol::seed_bytes(fedcore::derive_seed(*a.seed, fedcore::SeedTag::kKeys, id));
    }
    const sig::KeyPair kp = sig::keygen(params, seed);
    char stem[32];
    if (id == 0) {
      std::snprintf(stem, sizeof(stem), "server");
    } else {
      std::snprintf(stem, sizeof(stem), "client_%02u", id);
    }
    write_key_file(dir / (std::string(stem) + ".pk"), kp.public_key, false);
    write_key_file(dir / (std::string(stem) + ".sk"), kp.secret_key, true);
    char line[256];
    std::snprintf(line, sizeof(line), "scheme=%s params=%s id=%u pk=%s.pk pk_len=%zu sk_len=%zu\n",
                  md.name.c_str(), md.parameter_set.c_str(), id, stem, kp.public_key.size(),
                  kp.secret_key.size());
    manifest += line;
  }
  bench::csv::write_file(dir / "manifest.txt", manifest);
  out << "wrote " << 2 * (a.clients + 1) << " key files to " << dir.string() << '\n';
  return kExitOk;
}

struct RunArgs {
  std::string scheme = "dilithium";
  std::string params;
  std::size_t clients = 10;
  std::size_t rounds = 10;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  std::optional<double> lr;
  std::string optimizer = "sgd";
  std::string dataset = "synthetic";
  std::size_t samples = 2000;
  std::size_t features = 20;
  std::size_t classes = 10;
  double separation = 1.0;
  std::string idx_images;
  std::string idx_labels;
  std::size_t subset = 0;
  std::string hidden = "32";
  std::string attack = "none";
  std::string transport = "inprocess";
  std::string listen = "127.0.0.1:0";
  bool strict = false;
  bool no_verify = false;
  bool no_bind = false;
  bool sequential = false;
  bool random_signing = false;
  std::string metrics;
  std::uint64_t seed = 0;
};

RunSpec to_spec(const RunArgs& a) {
  RunSpec s;
  s.params = resolve_params(a.scheme, a.params);
  s.train.num_clients = a.clients;
  s.train.num_rounds = a.rounds;
  s.train.local_epochs = a.local_epochs;
  s.train.batch_size = a.batch_size;
  s.train.seed = a.seed;
  if (a.optimizer == "sgd") {
    s.train.optimizer = fedcore::OptimizerKind::kSgd;
    s.train.learning_rate = a.lr.value_or(1e-2);
  } else if (a.optimizer == "adamw") {
    s.train.optimizer = fedcore::OptimizerKind::kAdamW;
    s.train.learning_rate = a.lr.value_or(1e-5);
  } else {
    throw Error(ErrorCode::kConfigError, "unknown optimizer '" + a.optimizer + "'");
  }
  s.train.validate();

  if (a.dataset == "synthetic") {
    s.dataset.kind = DatasetSource::Kind::kSynthetic;
    s.dataset.synthetic.num_samples = a.samples;
    s.dataset.synthetic.num_features = a.features;
    s.dataset.synthetic.num_classes = a.classes;
    s.dataset.synthetic.separation = a.separation;
  } else if (a.dataset == "idx") {
    if (a.idx_images.empty() || a.idx_labels.empty()) {
      throw Error(ErrorCode::kConfigError, "--dataset idx needs --idx-images and --idx-labels");
    }
    for (const auto& p : {a.idx_images, a.idx_labels}) {
      if (!fs::exists(p)) throw Error(ErrorCode::kConfigError, "no such file: " + p);
    }
    s.dataset.kind = DatasetSource::Kind::kIdx;
    s.dataset.idx_images = a.idx_images;
    s.dataset.idx_labels = a.idx_labels;
    s.dataset.subset = a.subset;
  } else {
    throw Error(ErrorCode::kConfigError, "unknown dataset '" + a.dataset + "'");
  }
  try {
    s.hidden = parse_size_list(a.hidden);
  } catch (const Error&) {
    throw Error(ErrorCode::kConfigError, "bad --hidden list '" + a.hidden + "'");
  }

  s.attack = channel::parse_attack(a.attack);
  if (a.transport == "inprocess") {
    s.transport = TransportKind::kInProcess;
  } else if (a.transport == "tcp") {
    s.transport = TransportKind::kTcp;
    (void)channel::parse_endpoint(a.listen);
  } else {
    throw Error(ErrorCode::kConfigError, "unknown transport '" + a.transport + "'");
  }
  s.listen = a.listen;
  s.options.strict = a.strict;
  s.options.verify_updates = !a.no_verify;
  s.options.bind_context = !a.no_bind;
  s.options.parallel_clients = !a.sequential;
  s.options.deterministic_signing = !a.random_signing;
  if (!a.metrics.empty()) s.metrics_path = a.metrics;
  return s;
}

int cmd_run(const RunSpec& spec, std::ostream& out) {
  const auto& md = sig::metadata(spec.params);
  spdlog::info("scheme {} ({}), M={}, T={}, seed {}, attack {}", md.name, md.parameter_set,
               spec.train.num_clients, spec.train.num_rounds, spec.seed(),
               channel::format_attack(spec.attack));
  const std::size_t total = spec.train.num_rounds;
  const RunResult result = run_experiment(spec, nullptr, [&](const bench::RoundMetrics& m) {
    char line[256];
    std::snprintf(line, sizeof(line),
                  "round %u/%zu verified=%llu rejected=%llu loss=%.6f wall=%.3fs sign=%.3fs "
                  "verify=%.3fs bytes=%llu\n",
                  m.round + 1, total, static_cast<unsigned long long>(m.verified_count),
                  static_cast<unsigned long long>(m.rejected_count), m.global_loss, m.wall_time_s,
                  m.sign_time_s, m.verify_time_s, static_cast<unsigned long long>(m.payload_bytes));
    out << line << std::flush;
  });
  for (const auto& outcome : result.training.outcomes) {
    for (const auto& r : outcome.rejections) {
      spdlog::debug("round {}: rejected update from {}: {} ({})", outcome.round,
                    r.sender ? std::to_string(*r.sender) : "?", protocol::to_string(r.reason),
                    r.detail);
    }
    for (const auto& r : outcome.model_rejections) {
      spdlog::debug("round {}: client {} refused the broadcast: {} ({})", outcome.round,
                    r.sender ? std::to_string(*r.sender) : "?", protocol::to_string(r.reason),
                    r.detail);
    }
    if (outcome.skipped) spdlog::warn("round {}: no verified updates, round skipped", outcome.round);
  }
  const auto& stats = result.channel_stats;
  spdlog::info("channel: up {} sent / {} tampered / {} replayed, down {} sent / {} tampered / {} replayed",
               stats.uplink.sent, stats.uplink.tampered, stats.uplink.replayed, stats.downlink.sent,
               stats.downlink.tampered, stats.downlink.replayed);
  char line[128];
  const double loss = result.metrics.empty() ? 0.0 : result.metrics.back().global_loss;
  std::snprintf(line, sizeof(line), "final loss: %.17g\n", loss);
  out << line;
  if (spec.metrics_path) spdlog::info("metrics written to {}", spec.metrics_path->string());
  return kExitOk;
}

struct BenchArgs {
  std::string schemes = "all";
  std::string sizes = "1024,1048576";
  std::size_t iters = 30;
  std::string out_path;
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  std::vector<sig::ParameterSet> sets;
  if (a.schemes == "all") {
    sets = {sig::default_parameter_set(sig::SchemeId::kDilithium),
            sig::default_parameter_set(sig::SchemeId::kFalcon),
            sig::default_parameter_set(sig::SchemeId::kSphincsPlus)};
  } else {
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = a.schemes.find(',', start);
      const std::string name = a.schemes.substr(start, comma - start);
      // Either a scheme name or a specific parameter set.
      try {
        sets.push_back(sig::parse_parameter_set(name));
      } catch (const Error&) {
        sets.push_back(sig::default_parameter_set(sig::parse_scheme(name)));
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  std::vector<std::size_t> sizes;
  try {
    sizes = parse_size_list(a.sizes);
  } catch (const Error&) {
    throw Error(ErrorCode::kConfigError, "bad --sizes list '" + a.sizes + "'");
  }
  if (sizes.empty()) throw Error(ErrorCode::kConfigError, "--sizes is empty");
  if (a.iters < 30) throw Error(ErrorCode::kConfigError, "--iters must be at least 30");

  bench::MicrobenchOptions opts;
  opts.iterations = a.iters;
  opts.seed = a.seed;
  const auto records = bench::microbench(sets, sizes, opts);
  if (a.out_path.empty()) {
    out << bench::to_csv(records);
  } else {
    bench::emit_csv(records, a.out_path);
    spdlog::info("{} records written to {}", records.size(), a.out_path);
  }
  out << bench::summarize(records);
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& paths, std::ostream& out) {
  std::vector<bench::RoundMetrics> rounds;
  std::vector<bench::MicrobenchRecord> micro;
  for (const auto& p : paths) {
    const std::string text = bench::csv::read_file(p);
    const std::string_view first(text.data(), std::min(text.find('\n'), text.size()));
    if (first.starts_with(bench::kBenchCsvHeader)) {
      auto r = bench::parse_bench_csv(text);
      micro.insert(micro.end(), r.begin(), r.end());
    } else {
      auto r = bench::parse_round_csv(text);
      rounds.insert(rounds.end(), r.begin(), r.end());
    }
  }
  if (!rounds.empty()) out << bench::summarize(rounds);
  if (!micro.empty()) out << bench::summarize(micro);
  if (rounds.empty() && micro.empty()) out << "no records\n";
  return kExitOk;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Replaces `--config FILE` with the flags the file sets, skipping any key
// also given on the command line so that flags win. Lines are `key = value`;
// `#` starts a comment; boolean flags take true/false.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (path.empty()) return out;

  auto given = [&](const std::string& flag) {
    return std::any_of(out.begin(), out.end(), [&](const std::string& a) {
      return a == flag || a.starts_with(flag + "=");
    });
  };
  std::string text;
  try {
    text = bench::csv::read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::kConfigError, "cannot read config file " + path);
  }
  std::vector<std::string> extra;
  std::size_t line_no = 0;
  for (std::size_t start = 0; start <= text.size();) {
    const std::size_t nl = std::min(text.find('\n', start), text.size());
    std::string line(text, start, nl - start);
    start = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfigError,
                  path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string flag = "--" + trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (given(flag)) continue;
    if (value == "true") {
      extra.push_back(flag);
    } else if (value != "false") {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  // Options belong to the subcommand, so they go after its name.
  const auto sub = std::find(out.begin(), out.end(), "run");
  out.insert(sub == out.end() ? out.end() : sub + 1, extra.begin(), extra.end());
  return out;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kConfigError:
    case ErrorCode::kUnsupportedScheme:
    case ErrorCode::kStrictModeViolation: return kExitUsage;
    default: return kExitRuntime;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  setup_logging();
  CLI::App app{"Federated averaging with post-quantum signed model exchange", "pqfl"};
  app.require_subcommand(1);

  KeygenArgs kg;
  auto* keygen = app.add_subcommand("keygen", "Generate key pairs for the server and M clients");
  keygen->add_option("--scheme", kg.scheme, "dilithium | falcon | sphincs+ | test");
  keygen->add_option("--params", kg.params, "Explicit parameter set, e.g. ML-DSA-65");
  keygen->add_option("--clients", kg.clients, "Number of clients")->check(CLI::PositiveNumber);
  keygen->add_option("--out", kg.out_dir, "Output directory")->required();
  keygen->add_option("--seed", kg.seed, "Derive keys from this seed instead of system entropy");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run federated training");
  std::string config_path;  // consumed by expand_config before parsing
  run->add_option("--config", config_path, "File of `key = value` lines using the flag names");
  run->add_option("--scheme", ra.scheme, "dilithium | falcon | sphincs+ | test");
  run->add_option("--params", ra.params, "Explicit parameter set, e.g. Falcon-512");
  run->add_option("--clients", ra.clients, "Number of clients M")->check(CLI::PositiveNumber);
  run->add_option("--rounds", ra.rounds, "Number of rounds T")->check(CLI::PositiveNumber);
  run->add_option("--local-epochs", ra.local_epochs, "Local epochs per round")->check(CLI::PositiveNumber);
  run->add_option("--batch-size", ra.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  run->add_option("--lr", ra.lr, "Learning rate (default 1e-2 for sgd, 1e-5 for adamw)");
  run->add_option("--optimizer", ra.optimizer, "sgd | adamw");
  run->add_option("--dataset", ra.dataset, "synthetic | idx");
  run->add_option("--samples", ra.samples, "Synthetic sample count");
  run->add_option("--features", ra.features, "Synthetic feature count");
  run->add_option("--classes", ra.classes, "Synthetic class count");
  run->add_option("--separation", ra.separation, "Synthetic centroid spread");
  run->add_option("--idx-images", ra.idx_images, "IDX image file");
  run->add_option("--idx-labels", ra.idx_labels, "IDX label file");
  run->add_option("--subset", ra.subset, "Use only the first N IDX samples");
  run->add_option("--hidden", ra.hidden, "Hidden layer widths, e.g. 64,32; none = logistic");
  run->add_option("--attack", ra.attack, "kind:key=value:..., e.g. bitflip:target=1:p=1.0");
  run->add_option("--transport", ra.transport, "inprocess | tcp");
  run->add_option("--listen", ra.listen, "host:port for --transport tcp");
  run->add_flag("--strict", ra.strict, "Refuse non-post-quantum schemes");
  run->add_flag("--no-verify", ra.no_verify, "Aggregate without checking signatures");
  run->add_flag("--no-bind", ra.no_bind, "Sign payloads only, without round and sender");
  run->add_flag("--sequential", ra.sequential, "Run clients one after another");
  run->add_flag("--random-signing", ra.random_signing, "Use system entropy when signing");
  run->add_option("--metrics", ra.metrics, "Per-round CSV output path");
  run->add_option("--seed", ra.seed, "Master seed")->required();

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Time keygen, sign and verify");
  bench_cmd->add_option("--schemes", ba.schemes, "all or a comma list of schemes/parameter sets");
  bench_cmd->add_option("--sizes", ba.sizes, "Comma list of payload sizes in bytes");
  bench_cmd->add_option("--iters", ba.iters, "Timed iterations per cell (>= 30)");
  bench_cmd->add_option("--out", ba.out_path, "CSV output path (default stdout)");
  bench_cmd->add_option("--seed", ba.seed, "Payload seed");

  std::vector<std::string> report_paths;
  auto* report = app.add_subcommand("report", "Summarize metric or benchmark CSV files");
  report->add_option("csv", report_paths, "CSV files")->required()->check(CLI::ExistingFile);

  std::vector<std::string> expanded;
  try {
    expanded = expand_config(args);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  std::vector<std::string> argv_rev(expanded.rbegin(), expanded.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (keygen->parsed()) return cmd_keygen(kg, out);
    if (bench_cmd->parsed()) return cmd_bench(ba, out);
    if (report->parsed()) return cmd_report(report_paths, out);
    RunSpec spec;
    try {
      spec = to_spec(ra);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    }
    return cmd_run(spec, out);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
}

}  // namespace pqfl::cli
