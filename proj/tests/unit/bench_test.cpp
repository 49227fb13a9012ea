#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <thread>

#include "pqfl/bench/csv.hpp"
#include "pqfl/bench/metrics.hpp"
#include "pqfl/bench/microbench.hpp"
#include "pqfl/error.hpp"

namespace pqfl::bench {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kConfigError;
}

RoundMetrics sample(std::string scheme, std::uint32_t round, double sign, double loss) {
  RoundMetrics m;
  m.scheme = std::move(scheme);
  m.round = round;
  m.wall_time_s = 0.5 + round;
  m.train_time_s = 0.25;
  m.sign_time_s = sign;
  m.verify_time_s = sign / 2;
  m.serialize_time_s = 0.001;
  m.payload_bytes = 123456 + round;
  m.signature_bytes = 2420 * 20;
  m.verified_count = 10;
  m.rejected_count = round % 2;
  m.global_loss = loss;
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pqfl_bench_test_" + name);
}

TEST(Percentiles, OddAndEvenCounts) {
  const auto odd = percentiles({5, 1, 4, 2, 3});
  EXPECT_EQ(odd.median, 3);
  EXPECT_EQ(odd.p10, 1);
  EXPECT_EQ(odd.p90, 5);
  const auto even = percentiles({4, 1, 3, 2});
  EXPECT_EQ(even.median, 2.5);
  std::vector<double> hundred;
  for (int i = 1; i <= 100; ++i) hundred.push_back(i);
  const auto p = percentiles(hundred);
  EXPECT_EQ(p.p10, 10);
  EXPECT_EQ(p.p90, 90);
  EXPECT_EQ(p.median, 50.5);
  EXPECT_EQ(percentiles({7}).median, 7);
}

TEST(RoundCsv, HeaderAndRoundTrip) {
  std::vector<RoundMetrics> rows;
  for (std::uint32_t r = 0; r < 5; ++r) rows.push_back(sample("Dilithium", r, 0.01, 2.302585092994046 / (r + 1)));
  const std::string text = to_csv(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), kRoundCsvHeader);
  const auto back = parse_round_csv(text);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].global_loss, rows[i].global_loss);  // 17 digits survive exactly
    EXPECT_EQ(back[i].payload_bytes, rows[i].payload_bytes);
    EXPECT_EQ(back[i].rejected_count, rows[i].rejected_count);
    EXPECT_NEAR(back[i].sign_time_s, rows[i].sign_time_s, 1e-6);
  }
  EXPECT_NE(format_csv_row(rows[0]).find("0.010000"), std::string::npos);
}

TEST(RoundCsv, EmptyAndMalformed) {
  EXPECT_TRUE(parse_round_csv(std::string(kRoundCsvHeader) + "\n").empty());
  EXPECT_EQ(to_csv(std::vector<RoundMetrics>{}), std::string(kRoundCsvHeader) + "\n");
  EXPECT_EQ(code_of([] { parse_round_csv("a,b,c\n"); }), ErrorCode::kDecodeError);
  EXPECT_EQ(code_of([] { parse_round_csv(std::string(kRoundCsvHeader) + "\nx,1,2\n"); }),
            ErrorCode::kDecodeError);
  EXPECT_EQ(code_of([] {
              parse_round_csv(std::string(kRoundCsvHeader) + "\nD,zero,0,0,0,0,0,0,0,0,0,0\n");
            }),
            ErrorCode::kDecodeError);
}

TEST(RoundCsv, FileRoundTrip) {
  const auto path = temp_file("rounds.csv");
  std::vector<RoundMetrics> rows = {sample("Falcon", 0, 0.002, 1.5)};
  emit_csv(rows, path);
  EXPECT_EQ(parse_round_csv(csv::read_file(path)).size(), 1u);
  std::filesystem::remove(path);
  EXPECT_EQ(code_of([&] { csv::read_file(path); }), ErrorCode::kIoError);
  EXPECT_EQ(code_of([&] { emit_csv(rows, "/nonexistent-dir/x.csv"); }), ErrorCode::kIoError);
}

TEST(Sinks, MemorySinkIsThreadSafe) {
  MemorySink sink;
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&sink, t] {
      for (std::uint32_t r = 0; r < 50; ++r) sink.record(sample("S" + std::to_string(t), r, 0.1, 1));
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(sink.records().size(), 200u);
}

TEST(Sinks, CsvFileSinkWritesRowsAsTheyArrive) {
  const auto path = temp_file("sink.csv");
  {
    CsvFileSink sink(path);
    EXPECT_TRUE(parse_round_csv(csv::read_file(path)).empty());
    sink.record(sample("SPHINCS+", 0, 0.8, 2.0));
    EXPECT_EQ(parse_round_csv(csv::read_file(path)).size(), 1u);
    sink.record(sample("SPHINCS+", 1, 0.8, 1.9));
  }
  EXPECT_EQ(parse_round_csv(csv::read_file(path)).size(), 2u);
  std::filesystem::remove(path);
  EXPECT_EQ(code_of([] { CsvFileSink("/nonexistent-dir/sink.csv"); }), ErrorCode::kSinkUnavailable);
}

TEST(Summary, OrdersSchemesBySignatureOverhead) {
  std::vector<RoundMetrics> rows;
  for (std::uint32_t r = 0; r < 3; ++r) {
    rows.push_back(sample("SPHINCS+", r, 0.9, 1));
    rows.push_back(sample("Dilithium", r, 0.01, 1));
    rows.push_back(sample("Falcon", r, 0.05, 1));
  }
  const std::string s = summarize(rows);
  EXPECT_NE(s.find("signature overhead (sign+verify): Dilithium < Falcon < SPHINCS+"), std::string::npos) << s;
  EXPECT_NE(s.find("verdict: Dilithium is fastest"), std::string::npos);
  EXPECT_NE(s.find("Dilithium: verified_count = 10 in all 3 rounds"), std::string::npos);
  EXPECT_EQ(summarize(std::vector<RoundMetrics>{}), "no rounds recorded\n");
}

TEST(Microbench, RecordsEveryCell) {
  const std::vector<sig::ParameterSet> schemes = {sig::ParameterSet::kHmacSha256,
                                                  sig::ParameterSet::kMlDsa44};
  const std::vector<std::size_t> sizes = {1024, 65536};
  const auto records = microbench(schemes, sizes, {30, 1, 1, true});
  ASSERT_EQ(records.size(), 12u);
  for (const auto& r : records) {
    EXPECT_EQ(r.iterations, 30u);
    EXPECT_LE(r.p10_s, r.median_s);
    EXPECT_LE(r.median_s, r.p90_s);
    EXPECT_GT(r.median_s, 0.0);
  }
  const auto back = parse_bench_csv(to_csv(records));
  EXPECT_EQ(back.size(), records.size());
  EXPECT_EQ(back[3].op, records[3].op);
  EXPECT_EQ(back[3].payload_bytes, records[3].payload_bytes);
  const std::string s = summarize(records);
  EXPECT_NE(s.find("verdict:"), std::string::npos) << s;
}

TEST(Microbench, RejectsTooFewIterations) {
  const std::vector<sig::ParameterSet> schemes = {sig::ParameterSet::kHmacSha256};
  const std::vector<std::size_t> sizes = {16};
  EXPECT_EQ(code_of([&] { microbench(schemes, sizes, {29, 0, 1, true}); }), ErrorCode::kConfigError);
}

TEST(Microbench, OpNames) {
  for (Op op : {Op::kKeygen, Op::kSign, Op::kVerify}) EXPECT_EQ(parse_op(to_string(op)), op);
  EXPECT_EQ(code_of([] { parse_op("hash"); }), ErrorCode::kDecodeError);
  EXPECT_EQ(std::string(kBenchCsvHeader), "scheme,payload_bytes,op,iterations,median_s,p10_s,p90_s");
}

}  // namespace
}  // namespace pqfl::bench
