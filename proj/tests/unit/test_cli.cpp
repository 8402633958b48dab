#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

#include "echoflag/bottomline.hpp"
#include "echoflag/echogram.hpp"
#include "echoflag/io.hpp"
#include "support.hpp"

namespace echoflag {
namespace {

using json = nlohmann::json;

struct Run {
  int code;
  std::string out, err;
};

Run cli(const testing::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd =
      std::string(ECHOFLAG_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_text(out), io::read_text(err)};
}

std::string p(const testing::TempDir& dir, const std::string& name) { return (dir / name).string(); }

TEST(Cli, GenIsDeterministic) {
  testing::TempDir dir;
  ASSERT_EQ(cli(dir, "gen --out " + p(dir, "a.echg") + " --seed 5 --cols 400").code, 0);
  ASSERT_EQ(cli(dir, "gen --out " + p(dir, "b.echg") + " --seed 5 --cols 400").code, 0);
  EXPECT_EQ(io::read_text(dir / "a.bottom.csv"), io::read_text(dir / "b.bottom.csv"));
  EXPECT_EQ(io::read_text(dir / "a.truth.csv"), io::read_text(dir / "b.truth.csv"));
  auto a = load_echogram(dir / "a.echg");
  auto b = load_echogram(dir / "b.echg");
  EXPECT_EQ(a.cols(), 400U);
  b.set_survey_id(a.survey_id());
  EXPECT_EQ(encode_echogram(a), encode_echogram(b));
}

TEST(Cli, FormatThenVerify) {
  testing::TempDir dir;
  ASSERT_EQ(cli(dir, "gen --out " + p(dir, "s.echg") + " --seed 2 --cols 300").code, 0);
  ASSERT_EQ(cli(dir, "format --in " + p(dir, "s.echg") + " --out " + p(dir, "f.echg") + " --partition " +
                         p(dir, "part.csv") + " --standardize --stats-out " + p(dir, "stats.csv"))
                .code,
            0);
  const auto expected = format_echogram(load_echogram(dir / "s.echg"));
  const auto formatted = load_echogram(dir / "f.echg");
  EXPECT_EQ(formatted.rows(), expected.echogram.rows());
  EXPECT_EQ(io::read_text(dir / "part.csv"), format_partition_csv(expected.partition, 300));
  EXPECT_EQ(read_stats_csv(dir / "stats.csv").mean.size(), formatted.rows());

  ASSERT_EQ(cli(dir, "format --in " + p(dir, "s.echg") + " --out " + p(dir, "plain.echg")).code, 0);
  const auto v = cli(dir, "verify --in " + p(dir, "plain.echg"));
  ASSERT_EQ(v.code, 0) << v.err;
  const auto report = json::parse(v.out);
  EXPECT_TRUE(report["ok"].get<bool>());
  EXPECT_EQ(report["nan_cells"], 0);

  const auto raw = cli(dir, "verify --in " + p(dir, "s.echg"));
  EXPECT_EQ(raw.code, 1);
  EXPECT_EQ(json::parse(raw.err)["error"], "VerifyFailed");
}

TEST(Cli, DetectAndLabelMatchLibrary) {
  testing::TempDir dir;
  ASSERT_EQ(cli(dir, "gen --out " + p(dir, "s.echg") + " --seed 9 --cols 500").code, 0);
  ASSERT_EQ(cli(dir, "detect --in " + p(dir, "s.echg") + " --clean " + p(dir, "s.bottom.csv") + " --out " +
                         p(dir, "det.csv"))
                .code,
            0);
  const auto raw = load_echogram(dir / "s.echg");
  auto b = read_bottom_csv(dir / "s.bottom.csv");
  b.bottom_m = bottomline::detect_bottom(raw);
  EXPECT_EQ(io::read_text(dir / "det.csv"), format_bottom_csv(b));

  const auto lab = cli(dir, "label --bottom " + p(dir, "det.csv") + " --echogram " + p(dir, "s.echg") +
                                " --threshold 2.5");
  ASSERT_EQ(lab.code, 0) << lab.err;
  const auto dropped = format_echogram(raw).partition.dropped;
  EXPECT_EQ(lab.out, format_labels_csv(bottomline::label_pings(b, dropped, 2.5)));
}

TEST(Cli, UsageErrorsExitTwo) {
  testing::TempDir dir;
  const auto r = cli(dir, "gen");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"], "Usage");
  EXPECT_EQ(cli(dir, "nonsense").code, 2);
  EXPECT_EQ(cli(dir, "gen --out x.echg --domain c").code, 2);
  EXPECT_EQ(cli(dir, "--help").code, 0);
}

TEST(Cli, DataErrorsExitOne) {
  testing::TempDir dir;
  io::write_text(dir / "junk.echg", "not an echogram");
  const auto r = cli(dir, "verify --in " + p(dir, "junk.echg"));
  EXPECT_EQ(r.code, 1);
  const auto err = json::parse(r.err);
  EXPECT_TRUE(err.contains("error"));
  EXPECT_TRUE(err.contains("message"));
  io::write_text(dir / "bad.csv", "what,ever\n1,2\n");
  EXPECT_EQ(cli(dir, "label --bottom " + p(dir, "bad.csv")).code, 1);
}

}  // namespace
}  // namespace echoflag
