#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "pqfl/protocol/protocol.hpp"

namespace pqfl::bench {

struct RoundMetrics {
  std::string scheme;
  std::uint32_t round = 0;
  double wall_time_s = 0.0;
  double train_time_s = 0.0;
  double sign_time_s = 0.0;
  double verify_time_s = 0.0;
  double serialize_time_s = 0.0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t signature_bytes = 0;
  std::uint64_t verified_count = 0;
  std::uint64_t rejected_count = 0;
  double global_loss = 0.0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

RoundMetrics to_metrics(std::string_view scheme, const protocol::RoundOutcome& outcome);

inline constexpr std::string_view kRoundCsvHeader =
    "scheme,round,wall_time_s,train_time_s,sign_time_s,verify_time_s,serialize_time_s,"
    "payload_bytes,signature_bytes,verified_count,rejected_count,global_loss";

// Times carry 6 fractional digits; the loss is written with 17 significant
// digits so that it survives a round trip.
std::string format_csv_row(const RoundMetrics& m);
std::string to_csv(const std::vector<RoundMetrics>& records);
// Throws kDecodeError on a header or field mismatch.
std::vector<RoundMetrics> parse_round_csv(std::string_view text);
// Throws kIoError.
void emit_csv(const std::vector<RoundMetrics>& records, const std::filesystem::path& path);

// Accepts records from any thread.
class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void record(const RoundMetrics& m) = 0;
};

class MemorySink final : public MetricsSink {
 public:
  void record(const RoundMetrics& m) override;
  std::vector<RoundMetrics> records() const;

 private:
  mutable std::mutex mu_;
  std::vector<RoundMetrics> records_;
};

// Writes the header on open and one flushed row per record. Throws
// kSinkUnavailable if the file cannot be opened or written.
class CsvFileSink final : public MetricsSink {
 public:
  explicit CsvFileSink(const std::filesystem::path& path);
  void record(const RoundMetrics& m) override;

 private:
  std::mutex mu_;
  std::filesystem::path path_;
  std::ofstream out_;
};

// Per-scheme totals and the overhead ordering verdict.
std::string summarize(const std::vector<RoundMetrics>& records);

}  // namespace pqfl::bench
