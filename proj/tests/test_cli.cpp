#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& root() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "metroflow_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI with stderr captured to a file; returns the exit status.
int run(const std::string& args, const std::string& err_name = "stderr.txt") {
  const std::string cmd = std::string(METROFLOW_CLI) + " " + args + " > " +
                          (root() / "stdout.txt").string() + " 2> " + (root() / err_name).string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string error_category(const std::string& err_name = "stderr.txt") {
  const std::string text = read_file(root() / err_name);
  const auto j = nlohmann::json::parse(text.substr(0, text.find('\n')), nullptr, false);
  if (j.is_discarded() || !j.contains("error")) return "unparsed: " + text;
  return j["error"]["category"].get<std::string>();
}

}  // namespace

TEST(Cli, SynthWritesDataset) {
  const fs::path out = root() / "data";
  ASSERT_EQ(run("synth --out " + out.string() + " --stations 14 --lines 2 --seed 3"), 0);
  for (const char* f : {"traffic.csv", "social.csv", "edges.csv", "lines.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(read_file(out / "social.csv").rfind("station_id,zone,housing_price,life_expectancy\n", 0), 0u);
}

TEST(Cli, TrainWritesReports) {
  const fs::path data = root() / "train_data";
  ASSERT_EQ(run("synth --out " + data.string() + " --stations 14 --lines 2"), 0);
  const fs::path cfg = root() / "run.cfg";
  std::ofstream(cfg) << "hidden_width = 6\nfusion_width = 6\nlayers = 2\n";
  const fs::path out = root() / "train_out";
  ASSERT_EQ(run("train --data " + data.string() + " --config " + cfg.string() +
                " --variant kth --sampling-rate 0.8 --k 2 --epochs 5 --task pm-exit --out " + out.string()),
            0)
      << read_file(root() / "stderr.txt");
  for (const char* f : {"report.json", "report.csv", "predictions.csv", "model.ckpt"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto j = nlohmann::json::parse(read_file(out / "report.json"));
  EXPECT_EQ(j["variant"], "kth");
  EXPECT_EQ(j["task"], "pm-exit");
  EXPECT_EQ(j["layers"], 2);
  EXPECT_EQ(j["history"].size(), 6u);
}

TEST(Cli, ErrorsAreCategorizedJsonWithExitCodes) {
  const fs::path cfg = root() / "bad.cfg";
  std::ofstream(cfg) << "variant = transformer\n";
  EXPECT_EQ(run("train --synthetic --config " + cfg.string() + " --out " + (root() / "x").string()), 15);
  EXPECT_EQ(error_category(), "config");

  EXPECT_EQ(run("train --data " + (root() / "nowhere").string() + " --out " + (root() / "x").string()), 17);
  EXPECT_EQ(error_category(), "io");

  EXPECT_EQ(run("train --synthetic --variant kh --out " + (root() / "x").string()), 15);
  EXPECT_EQ(error_category(), "config");

  EXPECT_EQ(run("synth --out " + (root() / "tiny").string() + " --stations 2"), 11);
  EXPECT_EQ(error_category(), "contract");

  EXPECT_EQ(run("diagnose --synthetic --zones 9 --epochs 1 --out " + (root() / "diag").string()), 18);
  EXPECT_EQ(error_category(), "diagnostic");

  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Cli, GridAndReport) {
  const fs::path out = root() / "grid";
  const std::string args = "grid --synthetic --stations 14 --lines 2 --variants main_body,kh_0.9 "
                           "--hops 1,2 --tasks mid-entry --seeds 1 --epochs 3 --threads 2 --out ";
  ASSERT_EQ(run(args + out.string()), 0) << read_file(root() / "stderr.txt");
  const std::string results = read_file(out / "results.csv");
  EXPECT_EQ(std::count(results.begin(), results.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(out / "timings.csv"));
  EXPECT_TRUE(fs::exists(out / "mape_vs_hop_mid_entry.svg"));

  const fs::path again = root() / "report";
  ASSERT_EQ(run("report --results " + (out / "results.csv").string() + " --out " + again.string()), 0);
  EXPECT_EQ(read_file(again / "table_mid_entry.csv"), read_file(out / "table_mid_entry.csv"));
}
