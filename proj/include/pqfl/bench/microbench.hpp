#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqfl/sig/scheme.hpp"

namespace pqfl::bench {

enum class Op { kKeygen, kSign, kVerify };

std::string_view to_string(Op op);
Op parse_op(std::string_view s);

struct MicrobenchRecord {
  std::string scheme;
  std::uint64_t payload_bytes = 0;
  Op op = Op::kSign;
  std::uint64_t iterations = 0;
  double median_s = 0.0;
  double p10_s = 0.0;
  double p90_s = 0.0;

  friend bool operator==(const MicrobenchRecord&, const MicrobenchRecord&) = default;
};

struct Percentiles {
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};

// Nearest-rank percentiles; the median of an even count is the mean of the
// middle pair. `samples` must be non-empty.
Percentiles percentiles(std::vector<double> samples);

struct MicrobenchOptions {
  std::size_t iterations = 30;
  std::size_t warmup = 2;
  std::uint64_t seed = 1;
  // Keygen does not depend on the payload; it is still measured once per
  // size so that every (scheme, size) cell has all three operations.
  bool include_keygen = true;
};

// For every parameter set and payload size: keygen, sign, verify. Warm-up runs are discarded. Throws kConfigError when
// iterations < 30.
std::vector<MicrobenchRecord> microbench(std::span<const sig::ParameterSet> schemes,
                                         std::span<const std::size_t> payload_sizes,
                                         const MicrobenchOptions& options = {});

inline constexpr std::string_view kBenchCsvHeader =
    "scheme,payload_bytes,op,iterations,median_s,p10_s,p90_s";

std::string to_csv(const std::vector<MicrobenchRecord>& records);
std::vector<MicrobenchRecord> parse_bench_csv(std::string_view text);
void emit_csv(const std::vector<MicrobenchRecord>& records, const std::filesystem::path& path);

// Per-size sign+verify comparison plus sizes from scheme metadata.
std::string summarize(const std::vector<MicrobenchRecord>& records);

}  // namespace pqfl::bench
