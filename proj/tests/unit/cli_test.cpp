#include <gtest/gtest.h>

#include <sys/stat.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/commands.hpp"
#include "pqfl/bench/csv.hpp"
#include "pqfl/bench/metrics.hpp"
#include "pqfl/bench/microbench.hpp"
#include "pqfl/sig/scheme.hpp"

namespace pqfl::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pqfl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Fast run arguments: 10 clients, small synthetic data.
  std::vector<std::string> run_args(const std::string& metrics, const std::string& scheme = "test") {
    return {"run",     "--scheme",  scheme, "--clients", "10",   "--rounds", "10",
            "--samples", "400",     "--features", "8", "--classes", "4",   "--hidden", "8",
            "--seed",  "3",         "--metrics", metrics};
  }

  fs::path dir_;
};

TEST_F(CliTest, KeygenWritesKeysAndManifest) {
  const auto r = cli({"keygen", "--scheme", "dilithium", "--clients", "10", "--out", path("keys"), "--seed", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto& meta = sig::metadata(sig::ParameterSet::kMlDsa44);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "keys")) {
    const std::string name = e.path().filename().string();
    if (name == "manifest.txt") continue;
    ++files;
    const auto size = fs::file_size(e.path());
    if (e.path().extension() == ".pk") {
      EXPECT_EQ(size, meta.public_key_len) << name;
    } else {
      EXPECT_EQ(size, meta.secret_key_len) << name;
      struct stat st{};
      ASSERT_EQ(::stat(e.path().c_str(), &st), 0);
      EXPECT_EQ(st.st_mode & 0777, 0600u) << name;
    }
  }
  EXPECT_EQ(files, 22u);
  EXPECT_TRUE(fs::exists(dir_ / "keys" / "server.pk"));
  EXPECT_TRUE(fs::exists(dir_ / "keys" / "client_10.sk"));
  std::ifstream manifest(dir_ / "keys" / "manifest.txt");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(manifest, line)) lines += !line.empty() && line[0] != '#';
  EXPECT_EQ(lines, 11u);

  // Seeded keygen is reproducible.
  ASSERT_EQ(cli({"keygen", "--scheme", "dilithium", "--clients", "10", "--out", path("again"), "--seed", "1"}).code, 0);
  EXPECT_EQ(bench::csv::read_file(dir_ / "keys" / "client_03.pk"),
            bench::csv::read_file(dir_ / "again" / "client_03.pk"));
}

TEST_F(CliTest, RunWritesOneRowPerRound) {
  const auto r = cli(run_args(path("m.csv")));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = bench::parse_round_csv(bench::csv::read_file(path("m.csv")));
  ASSERT_EQ(rows.size(), 10u);
  for (std::uint32_t t = 0; t < 10; ++t) {
    EXPECT_EQ(rows[t].round, t);
    EXPECT_EQ(rows[t].verified_count, 10u);
    EXPECT_EQ(rows[t].rejected_count, 0u);
    EXPECT_EQ(rows[t].scheme, "TestScheme");
  }
  EXPECT_LT(rows.back().global_loss, rows.front().global_loss);
  EXPECT_NE(r.out.find("final loss:"), std::string::npos);
}

TEST_F(CliTest, RunIsDeterministic) {
  ASSERT_EQ(cli(run_args(path("a.csv"), "dilithium")).code, 0);
  ASSERT_EQ(cli(run_args(path("b.csv"), "dilithium")).code, 0);
  const auto a = bench::parse_round_csv(bench::csv::read_file(path("a.csv")));
  const auto b = bench::parse_round_csv(bench::csv::read_file(path("b.csv")));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].global_loss, b[i].global_loss);
    EXPECT_EQ(a[i].payload_bytes, b[i].payload_bytes);
  }
}

TEST_F(CliTest, BitFlipAttackIsCounted) {
  auto args = run_args(path("m.csv"), "dilithium");
  args.insert(args.end(), {"--attack", "bitflip:target=1:p=1.0"});
  ASSERT_EQ(cli(args).code, kExitOk);
  for (const auto& row : bench::parse_round_csv(bench::csv::read_file(path("m.csv")))) {
    EXPECT_EQ(row.rejected_count, 1u);
    EXPECT_EQ(row.verified_count, 9u);
  }
}

TEST_F(CliTest, ConfigFileAndOverrides) {
  {
    std::ofstream cfg(path("run.cfg"));
    cfg << "# small run\nscheme = test\nclients = 3\nrounds = 2\nsamples = 60\nfeatures = 4\n"
           "classes = 3\nhidden = none\nseed = 5\nsequential = true\n";
  }
  ASSERT_EQ(cli({"run", "--config", path("run.cfg"), "--rounds", "3", "--metrics", path("m.csv")}).code, 0);
  EXPECT_EQ(bench::parse_round_csv(bench::csv::read_file(path("m.csv"))).size(), 3u);
  {
    std::ofstream cfg(path("bad.cfg"));
    cfg << "colour = blue\n";
  }
  EXPECT_EQ(cli({"run", "--config", path("bad.cfg"), "--seed", "1"}).code, kExitUsage);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({"run", "--scheme", "test"}).code, kExitUsage);  // --seed is required
  EXPECT_EQ(cli({"run", "--seed", "1", "--frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--seed", "1", "--scheme", "rsa"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--seed", "1", "--attack", "explode"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--seed", "1", "--scheme", "test", "--strict"}).code, kExitUsage);
  EXPECT_EQ(cli({"launch"}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"keygen", "--clients", "2"}).code, kExitUsage);  // --out is required
}

TEST_F(CliTest, RuntimeErrors) {
  EXPECT_EQ(cli({"report", path("missing.csv")}).code, kExitUsage);
  {
    std::ofstream junk(path("junk.csv"));
    junk << "not,a,metrics,file\n";
  }
  EXPECT_EQ(cli({"report", path("junk.csv")}).code, kExitRuntime);
  // Existing but malformed IDX files fail at load time.
  EXPECT_EQ(cli({"run", "--seed", "1", "--scheme", "test", "--dataset", "idx", "--idx-images",
                 path("junk.csv"), "--idx-labels", path("junk.csv")})
                .code,
            kExitRuntime);
}

TEST_F(CliTest, ReportGivesVerdict) {
  for (const char* scheme : {"dilithium", "falcon"}) {
    auto args = run_args(path(std::string(scheme) + ".csv"), scheme);
    args[6] = "3";  // rounds
    ASSERT_EQ(cli(args).code, 0);
  }
  const auto r = cli({"report", path("dilithium.csv"), path("falcon.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("signature overhead (sign+verify):"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("verdict:"), std::string::npos);
}

TEST_F(CliTest, BenchWritesEighteenRecords) {
  const auto r = cli({"bench", "--schemes", "dilithium,falcon,SPHINCS+-sha2-128f-simple", "--out",
                      path("bench.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto records = bench::parse_bench_csv(bench::csv::read_file(path("bench.csv")));
  EXPECT_EQ(records.size(), 18u);
  for (const auto& rec : records) EXPECT_GE(rec.iterations, 30u);
  const auto report = cli({"report", path("bench.csv")});
  ASSERT_EQ(report.code, kExitOk);
  EXPECT_NE(report.out.find("verdict:"), std::string::npos);
  EXPECT_EQ(cli({"bench", "--iters", "10"}).code, kExitUsage);
}

#ifdef PQFL_TOOL_PATH
TEST_F(CliTest, BinaryExitCodes) {
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  const std::string tool = PQFL_TOOL_PATH;
  EXPECT_EQ(status(tool + " run --scheme test --clients 2 --rounds 1 --samples 20 --seed 1"), 0);
  EXPECT_EQ(status(tool + " run --scheme test"), 2);
  EXPECT_EQ(status(tool + " --help"), 0);
}
#endif

}  // namespace
}  // namespace pqfl::cli
