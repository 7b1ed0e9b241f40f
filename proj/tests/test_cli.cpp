#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ranking_fixtures.hpp"
#include "mf/cli/commands.hpp"
#include "mf/cli/run_config.hpp"
#include "mf/error.hpp"
#include "mf/io/csv.hpp"
#include "mf/io/pnm.hpp"

using namespace mf;
using namespace mf::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mf_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int mfctl(const std::string& args) {
  const std::string cmd = std::string(MFCTL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.ini";
  io::write_text(p.string(), text);
  return p;
}

std::string slurp(const fs::path& p) { return io::read_text(p.string()); }

const char* kTinyModel =
    "[model]\n"
    "channels = 8, 16, 24, 32\n"
    "depths = 1, 1, 1, 1\n"
    "heads_divisor = 8\n"
    "signature = pool3\n"
    "num_classes = 2\n"
    "input_h = 32\n"
    "input_w = 32\n";

}  // namespace

TEST(RunConfig, DefaultTextRoundTrip) {
  const RunConfig c;
  EXPECT_EQ(RunConfig::parse(c.to_text()), c);
}

TEST(RunConfig, CustomValuesRoundTrip) {
  const auto c = RunConfig::parse(std::string(kTinyModel) +
                                  "[run]\nseed = 5\n[train]\nlr = 0.0025\nloss = ce_plus_dice\n"
                                  "[rank]\ncomparator = wilcoxon\nalpha = 0.01\n[params]\nsignatures = conv3; gattn\n");
  EXPECT_EQ(c.run.seed, 5u);
  EXPECT_EQ(c.train.lr, 0.0025);
  EXPECT_EQ(c.model.stage_channels, (std::vector<std::int64_t>{8, 16, 24, 32}));
  EXPECT_EQ(c.params.signatures, (std::vector<std::string>{"conv3", "gattn"}));
  EXPECT_EQ(RunConfig::parse(c.to_text()), c);
}

TEST(RunConfig, RejectsUnknownSectionsKeysAndValues) {
  EXPECT_THROW(RunConfig::parse("[bogus]\nx = 1\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[train]\nlearning_rate = 1\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[model]\nsignature = mlp3\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[rank]\ncomparator = ttest\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[run]\nseed = 2\n[train]\nseed = 5\n"), ConfigError);
  EXPECT_EQ(RunConfig::parse("[run]\nseed = 2\n").train.seed, 2u);
}

TEST(Commands, ExitCodeMapping) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(CapacityError("x")), 2);
  EXPECT_EQ(exit_code_for(DataError("x")), 3);
  EXPECT_EQ(exit_code_for(DimensionError("x")), 3);
  EXPECT_EQ(exit_code_for(NumericError("x")), 4);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
}

TEST(Mfctl, UsageAndConfigErrorsExitTwo) {
  const auto dir = scratch("usage");
  EXPECT_EQ(mfctl(""), 2);
  EXPECT_EQ(mfctl("nonsense"), 2);
  EXPECT_EQ(mfctl("flops --bogus-flag"), 2);
  EXPECT_EQ(mfctl("flops --config " + write_config(dir, "[flops]\nkernal = 3\n").string() + " --out " + dir.string()), 2);
  EXPECT_EQ(mfctl("flops --config " + (dir / "missing.ini").string()), 2);
}

TEST(Mfctl, FlopsWritesTwentyFourRowsAndResolvedConfig) {
  const auto dir = scratch("flops");
  const auto cfg = write_config(dir, "[flops]\ninput = 256\nkernel = 3\nmacs = true\n");
  ASSERT_EQ(mfctl("flops --config " + cfg.string() + " --out " + (dir / "o").string() + " --seed 4"), 0);
  const auto t = io::read_csv((dir / "o" / "flops.csv").string());
  EXPECT_EQ(t.rows.size(), 24u);
  EXPECT_EQ(t.header.back(), "macs");
  EXPECT_NE(slurp(dir / "o" / "flops.svg").find("<svg"), std::string::npos);
  const auto resolved = RunConfig::load((dir / "o" / "resolved.ini").string());
  EXPECT_EQ(resolved.flops.input, 256);
  EXPECT_EQ(resolved.run.seed, 4u);
  EXPECT_EQ(resolved.run.out, (dir / "o").string());
}

TEST(Mfctl, ParamsReportsKnownTotals) {
  const auto dir = scratch("params");
  const auto cfg = write_config(dir, "[params]\nsignatures = pool3; conv7; gattn\n");
  ASSERT_EQ(mfctl("params --config " + cfg.string() + " --out " + dir.string()), 0);
  const auto t = io::read_csv((dir / "params.csv").string());
  ASSERT_EQ(t.rows.size(), 3u);
  const auto total = t.column("total");
  EXPECT_EQ(t.rows[0][total], "11407306");
  EXPECT_EQ(io::parse_int(t.rows[1][total], "") - 11407306, 57802752);
  EXPECT_EQ(io::parse_int(t.rows[2][total], "") - 11407306, 4718592 + 388864);
}

TEST(Mfctl, RankFromPublishedWins) {
  const auto dir = scratch("rank");
  const auto& table = fixtures::classification_scratch();
  std::ostringstream wins;
  wins << "dataset,submission,wins\n";
  for (std::size_t d = 0; d < table.datasets.size(); ++d)
    for (const auto& row : table.rows) wins << table.datasets[d] << ',' << row.submission << ',' << row.cells[d]->first << '\n';
  io::write_text((dir / "wins.csv").string(), wins.str());
  const auto cfg = write_config(dir, "[rank]\nwins_csv = " + (dir / "wins.csv").string() + "\n");
  ASSERT_EQ(mfctl("rank --config " + cfg.string() + " --out " + (dir / "o").string()), 0);
  const auto t = io::read_csv((dir / "o" / "rank.csv").string());
  EXPECT_EQ(t.rows.size(), 14u * 5u);
  const auto sc = t.column("submission"), gc = t.column("global");
  for (const auto& row : table.rows)
    for (const auto& r : t.rows)
      if (r[sc] == row.submission) EXPECT_NEAR(io::parse_double(r[gc], ""), *row.geomean, 0.005) << row.submission;
}

TEST(Mfctl, TrainEvalRankPipelineIsDeterministic) {
  const auto dir = scratch("train");
  const std::string text = std::string(kTinyModel) +
                           "[train]\nmax_steps = 6\nbatch_size = 8\nwarmup_epochs = 0\n"
                           "[data]\nn = 24\nsize = 32\nshift = 1.0\n";
  const auto cfg = write_config(dir, text);
  for (const char* run : {"a", "b"}) {
    ASSERT_EQ(mfctl("train --config " + cfg.string() + " --seed 3 --out " + (dir / run).string()), 0);
  }
  ASSERT_EQ(mfctl("train --config " + cfg.string() + " --seed 4 --out " + (dir / "c").string()), 0);
  for (const char* f : {"checkpoint.mfck", "train_log.csv", "summary.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  EXPECT_NE(slurp(dir / "a" / "checkpoint.mfck"), slurp(dir / "c" / "checkpoint.mfck"));

  // Resolved config re-parses to the structure that was run.
  auto expect = RunConfig::parse(text);
  expect.run.seed = 3;
  expect.train.seed = 3;
  expect.run.out = (dir / "a").string();
  EXPECT_EQ(RunConfig::load((dir / "a" / "resolved.ini").string()), expect);

  fs::create_directories(dir / "cases");
  for (const char* run : {"a", "c"}) {
    const auto ecfg = write_config(dir / run, text + "[eval]\ncheckpoint = " + (dir / run / "checkpoint.mfck").string() +
                                                  "\ndataset = synth\nsubmission = " + run + "\n");
    ASSERT_EQ(mfctl("eval --config " + ecfg.string() + " --out " + (dir / run / "eval").string()), 0);
    fs::copy_file(dir / run / "eval" / "cases.csv", dir / "cases" / (std::string("synth__") + run + ".csv"));
  }
  const auto rcfg = write_config(dir, "[rank]\ncases_dir = " + (dir / "cases").string() + "\nrepeats = 200\n");
  ASSERT_EQ(mfctl("rank --config " + rcfg.string() + " --out " + (dir / "r1").string()), 0);
  ASSERT_EQ(mfctl("rank --config " + rcfg.string() + " --out " + (dir / "r2").string()), 0);
  EXPECT_EQ(slurp(dir / "r1" / "rank.csv"), slurp(dir / "r2" / "rank.csv"));
  EXPECT_EQ(io::read_csv((dir / "r1" / "rank.csv").string()).rows.size(), 2u);
}

TEST(Mfctl, SegmentationInferWritesMask) {
  const auto dir = scratch("infer");
  const std::string text =
      "[model]\nchannels = 8, 16, 24, 32\ndepths = 1, 1, 1, 1\nheads_divisor = 8\nsignature = gconv3\n"
      "num_classes = 2\nin_channels = 1\nhead = segment\ndecoder_dim = 8\ninput_h = 32\ninput_w = 32\n"
      "[train]\nmax_steps = 2\nbatch_size = 2\nwarmup_epochs = 0\n[data]\nsource = squares\nn = 4\nsize = 32\nchannels = 1\n";
  ASSERT_EQ(mfctl("train --config " + write_config(dir, text).string() + " --out " + (dir / "t").string()), 0);
  io::Image8 img{48, 40, 1, std::vector<std::uint8_t>(48 * 40, 30)};
  io::write_pnm((dir / "img.pgm").string(), img);
  const auto icfg = write_config(dir, "[infer]\ncheckpoint = " + (dir / "t" / "checkpoint.mfck").string() +
                                          "\nimage = " + (dir / "img.pgm").string() +
                                          "\npatch_h = 32\npatch_w = 32\ndump_logits = true\n");
  ASSERT_EQ(mfctl("infer --config " + icfg.string() + " --out " + (dir / "i").string()), 0);
  const auto mask = io::read_pnm((dir / "i" / "mask.pgm").string());
  EXPECT_EQ(mask.width, 48);
  EXPECT_EQ(mask.height, 40);
  EXPECT_EQ(fs::file_size(dir / "i" / "logits.bin"), 2u * 40u * 48u * sizeof(double));
}

TEST(Mfctl, DataAndNumericFailuresMapToExitCodes) {
  const auto dir = scratch("fail");
  const auto missing = write_config(dir, "[eval]\ncheckpoint = " + (dir / "none.mfck").string() + "\n");
  EXPECT_EQ(mfctl("eval --config " + missing.string() + " --out " + (dir / "o").string()), 3);
  const auto diverge = write_config(dir, std::string(kTinyModel) +
                                             "[train]\nmax_steps = 20\nbatch_size = 4\nwarmup_epochs = 0\nlr = 1e300\n"
                                             "[data]\nn = 8\nsize = 32\n");
  EXPECT_EQ(mfctl("train --config " + diverge.string() + " --out " + (dir / "t").string()), 4);
}
