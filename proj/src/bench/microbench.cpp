#include "pqfl/bench/microbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "pqfl/bench/csv.hpp"
#include "pqfl/error.hpp"
#include "pqfl/fedcore/rng.hpp"
#include "pqfl/stopwatch.hpp"

namespace pqfl::bench {
namespace {

template <typename F>
std::vector<double> time_runs(std::size_t warmup, std::size_t iterations, F&& op) {
  for (std::size_t i = 0; i < warmup; ++i) op();
  std::vector<double> samples;
  samples.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    Stopwatch clock;
    op();
    samples.push_back(clock.seconds());
  }
  return samples;
}

MicrobenchRecord make_record(const std::string& scheme, std::size_t size, Op op,
                             std::vector<double> samples) {
  const std::size_t n = samples.size();
  const Percentiles p = percentiles(std::move(samples));
  return {scheme, size, op, n, p.median, p.p10, p.p90};
}

Bytes random_payload(std::size_t size, std::uint64_t seed) {
  fedcore::Rng rng(seed);
  Bytes out(size);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.next_u64());
  return out;
}

}  // namespace

std::string_view to_string(Op op) {
  switch (op) {
    case Op::kKeygen: return "keygen";
    case Op::kSign: return "sign";
    case Op::kVerify: return "verify";
  }
  return "sign";
}

Op parse_op(std::string_view s) {
  if (s == "keygen") return Op::kKeygen;
  if (s == "sign") return Op::kSign;
  if (s == "verify") return Op::kVerify;
  throw Error(ErrorCode::kDecodeError, "unknown op '" + std::string(s) + "'");
}

Percentiles percentiles(std::vector<double> samples) {
  if (samples.empty()) throw Error(ErrorCode::kConfigError, "no samples");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    return samples[std::max<std::size_t>(k, 1) - 1];
  };
  Percentiles p;
  p.median = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  p.p10 = rank(0.10);
  p.p90 = rank(0.90);
  return p;
}

std::vector<MicrobenchRecord> microbench(std::span<const sig::ParameterSet> schemes,
                                         std::span<const std::size_t> payload_sizes,
                                         const MicrobenchOptions& options) {
  if (options.iterations < 30) {
    throw Error(ErrorCode::kConfigError, "microbench needs at least 30 iterations");
  }
  std::vector<MicrobenchRecord> out;
  for (const sig::ParameterSet params : schemes) {
    const std::string name(sig::metadata(params).name);
    const sig::KeyPair kp = sig::keygen(params);
    for (const std::size_t size : payload_sizes) {
      if (options.include_keygen) {
        out.push_back(make_record(name, size, Op::kKeygen,
                                  time_runs(options.warmup, options.iterations,
                                            [&] { (void)sig::keygen(params); })));
      }
      const Bytes msg = random_payload(size, fedcore::mix64(options.seed ^ size));
      sig::SignatureBytes sig_bytes;
      out.push_back(make_record(name, size, Op::kSign,
                                time_runs(options.warmup, options.iterations,
                                          [&] { sig_bytes = sig::sign(kp, msg); })));
      bool ok = true;
      out.push_back(make_record(name, size, Op::kVerify,
                                time_runs(options.warmup, options.iterations, [&] {
                                  ok = ok && sig::verify(kp.public_key, params, msg, sig_bytes);
                                })));
      if (!ok) throw Error(ErrorCode::kAdapterFailure, name + ": benchmark signature did not verify");
    }
  }
  return out;
}

std::string to_csv(const std::vector<MicrobenchRecord>& records) {
  std::string out(kBenchCsvHeader);
  out += '\n';
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%s,%llu,%s,%llu,%.6f,%.6f,%.6f\n", r.scheme.c_str(),
                  static_cast<unsigned long long>(r.payload_bytes),
                  std::string(to_string(r.op)).c_str(),
                  static_cast<unsigned long long>(r.iterations), r.median_s, r.p10_s, r.p90_s);
    out += line;
  }
  return out;
}

std::vector<MicrobenchRecord> parse_bench_csv(std::string_view text) {
  std::vector<MicrobenchRecord> out;
  for (const auto& f : csv::parse(text, kBenchCsvHeader, 7)) {
    MicrobenchRecord r;
    r.scheme = std::string(f[0]);
    r.payload_bytes = csv::number<std::uint64_t>(f[1]);
    r.op = parse_op(f[2]);
    r.iterations = csv::number<std::uint64_t>(f[3]);
    r.median_s = csv::number<double>(f[4]);
    r.p10_s = csv::number<double>(f[5]);
    r.p90_s = csv::number<double>(f[6]);
    out.push_back(std::move(r));
  }
  return out;
}

void emit_csv(const std::vector<MicrobenchRecord>& records, const std::filesystem::path& path) {
  csv::write_file(path, to_csv(records));
}

std::string summarize(const std::vector<MicrobenchRecord>& records) {
  // size -> scheme -> sign+verify median
  std::map<std::uint64_t, std::vector<std::pair<std::string, double>>> cost;
  std::map<std::pair<std::uint64_t, std::string>, double> partial;
  std::vector<std::string> schemes;
  for (const auto& r : records) {
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) {
      schemes.push_back(r.scheme);
    }
    if (r.op == Op::kKeygen) continue;
    partial[{r.payload_bytes, r.scheme}] += r.median_s;
  }
  for (const auto& [key, seconds] : partial) cost[key.first].emplace_back(key.second, seconds);

  std::ostringstream os;
  char line[256];
  std::map<std::string, int> wins;
  for (auto& [size, entries] : cost) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    os << "payload " << size << " B, median sign+verify:";
    for (std::size_t i = 0; i < entries.size(); ++i) {
      std::snprintf(line, sizeof(line), "%s %s %.6f s", i ? " <" : "", entries[i].first.c_str(),
                    entries[i].second);
      os << line;
    }
    os << '\n';
    ++wins[entries.front().first];
  }
  for (const auto& name : schemes) {
    const auto* md = [&]() -> const sig::SchemeMetadata* {
      for (auto id : {sig::SchemeId::kDilithium, sig::SchemeId::kFalcon,
                      sig::SchemeId::kSphincsPlus, sig::SchemeId::kTestScheme}) {
        if (sig::metadata(id).name == name) return &sig::metadata(id);
      }
      return nullptr;
    }();
    if (md == nullptr) continue;
    std::snprintf(line, sizeof(line), "%-12s %-28s pk %6zu B  sig %6zu B%s\n", name.c_str(),
                  md->parameter_set.c_str(), md->public_key_len, md->signature_max_len,
                  md->variable_length_signature ? " (max)" : "");
    os << line;
  }
  if (!wins.empty()) {
    const auto best = std::max_element(wins.begin(), wins.end(), [](const auto& a, const auto& b) {
      return a.second < b.second;
    });
    os << "verdict: " << best->first << " is fastest at " << best->second << " of " << cost.size()
       << " payload sizes\n";
  }
  return os.str();
}

}  // namespace pqfl::bench
