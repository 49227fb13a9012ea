#include "pqfl/bench/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "pqfl/bench/csv.hpp"
#include "pqfl/error.hpp"

namespace pqfl::bench {

RoundMetrics to_metrics(std::string_view scheme, const protocol::RoundOutcome& outcome) {
  RoundMetrics m;
  m.scheme = std::string(scheme);
  m.round = outcome.round;
  m.wall_time_s = outcome.timings.wall_s;
  m.train_time_s = outcome.timings.train_s;
  m.sign_time_s = outcome.timings.sign_s;
  m.verify_time_s = outcome.timings.verify_s;
  m.serialize_time_s = outcome.timings.serialize_s;
  m.payload_bytes = outcome.envelope_bytes;
  m.signature_bytes = outcome.signature_bytes;
  m.verified_count = outcome.verified_set_size();
  m.rejected_count = outcome.rejections.size();
  m.global_loss = outcome.global_loss;
  return m;
}

std::string format_csv_row(const RoundMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%u,%.6f,%.6f,%.6f,%.6f,%.6f,%llu,%llu,%llu,%llu,%.17g",
                m.scheme.c_str(), m.round, m.wall_time_s, m.train_time_s, m.sign_time_s,
                m.verify_time_s, m.serialize_time_s,
                static_cast<unsigned long long>(m.payload_bytes),
                static_cast<unsigned long long>(m.signature_bytes),
                static_cast<unsigned long long>(m.verified_count),
                static_cast<unsigned long long>(m.rejected_count), m.global_loss);
  return buf;
}

std::string to_csv(const std::vector<RoundMetrics>& records) {
  std::string out(kRoundCsvHeader);
  out += '\n';
  for (const auto& m : records) {
    out += format_csv_row(m);
    out += '\n';
  }
  return out;
}

std::vector<RoundMetrics> parse_round_csv(std::string_view text) {
  const auto rows = csv::parse(text, kRoundCsvHeader, 12);
  std::vector<RoundMetrics> out;
  out.reserve(rows.size());
  for (const auto& f : rows) {
    RoundMetrics m;
    m.scheme = std::string(f[0]);
    m.round = csv::number<std::uint32_t>(f[1]);
    m.wall_time_s = csv::number<double>(f[2]);
    m.train_time_s = csv::number<double>(f[3]);
    m.sign_time_s = csv::number<double>(f[4]);
    m.verify_time_s = csv::number<double>(f[5]);
    m.serialize_time_s = csv::number<double>(f[6]);
    m.payload_bytes = csv::number<std::uint64_t>(f[7]);
    m.signature_bytes = csv::number<std::uint64_t>(f[8]);
    m.verified_count = csv::number<std::uint64_t>(f[9]);
    m.rejected_count = csv::number<std::uint64_t>(f[10]);
    m.global_loss = csv::number<double>(f[11]);
    out.push_back(std::move(m));
  }
  return out;
}

void emit_csv(const std::vector<RoundMetrics>& records, const std::filesystem::path& path) {
  csv::write_file(path, to_csv(records));
}

void MemorySink::record(const RoundMetrics& m) {
  std::lock_guard lock(mu_);
  records_.push_back(m);
}

std::vector<RoundMetrics> MemorySink::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

CsvFileSink::CsvFileSink(const std::filesystem::path& path) : path_(path), out_(path) {
  if (!out_) throw Error(ErrorCode::kSinkUnavailable, "cannot open " + path.string());
  out_ << kRoundCsvHeader << '\n' << std::flush;
}

void CsvFileSink::record(const RoundMetrics& m) {
  std::lock_guard lock(mu_);
  out_ << format_csv_row(m) << '\n' << std::flush;
  if (!out_) throw Error(ErrorCode::kSinkUnavailable, "write failed on " + path_.string());
}

std::string summarize(const std::vector<RoundMetrics>& records) {
  struct Totals {
    std::size_t rounds = 0;
    double wall = 0, train = 0, sign = 0, verify = 0, serialize = 0;
    std::uint64_t payload = 0, signature = 0, rejected = 0;
    std::uint64_t verified_min = UINT64_MAX, verified_max = 0;
    double final_loss = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Totals> by_scheme;
  for (const auto& m : records) {
    if (!by_scheme.count(m.scheme)) order.push_back(m.scheme);
    Totals& t = by_scheme[m.scheme];
    ++t.rounds;
    t.wall += m.wall_time_s;
    t.train += m.train_time_s;
    t.sign += m.sign_time_s;
    t.verify += m.verify_time_s;
    t.serialize += m.serialize_time_s;
    t.payload += m.payload_bytes;
    t.signature += m.signature_bytes;
    t.rejected += m.rejected_count;
    t.verified_min = std::min(t.verified_min, m.verified_count);
    t.verified_max = std::max(t.verified_max, m.verified_count);
    t.final_loss = m.global_loss;
  }
  if (order.empty()) return "no rounds recorded\n";

  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof(line), "%-12s %6s %10s %10s %12s %12s %14s %9s %12s\n", "scheme",
                "rounds", "wall_s", "train_s", "sign+verify", "serialize_s", "payload_bytes",
                "rejected", "final_loss");
  os << line;
  for (const auto& name : order) {
    const Totals& t = by_scheme[name];
    std::snprintf(line, sizeof(line), "%-12s %6zu %10.3f %10.3f %12.6f %12.6f %14llu %9llu %12.6f\n",
                  name.c_str(), t.rounds, t.wall, t.train, t.sign + t.verify, t.serialize,
                  static_cast<unsigned long long>(t.payload),
                  static_cast<unsigned long long>(t.rejected), t.final_loss);
    os << line;
  }
  for (const auto& name : order) {
    const Totals& t = by_scheme[name];
    if (t.verified_min == t.verified_max) {
      os << name << ": verified_count = " << t.verified_min << " in all " << t.rounds
         << " rounds\n";
    } else {
      os << name << ": verified_count ranges " << t.verified_min << ".." << t.verified_max
         << " over " << t.rounds << " rounds\n";
    }
  }
  std::vector<std::string> ranked = order;
  std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    const Totals& x = by_scheme[a];
    const Totals& y = by_scheme[b];
    return x.sign + x.verify < y.sign + y.verify;
  });
  os << "signature overhead (sign+verify):";
  for (std::size_t i = 0; i < ranked.size(); ++i) os << (i ? " < " : " ") << ranked[i];
  os << "\nverdict: " << ranked.front() << " is fastest\n";
  return os.str();
}

}  // namespace pqfl::bench
