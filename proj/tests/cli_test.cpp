#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = MAGCN_CLI_PATH;

struct CliRun {
  int exit_code = -1;
  std::string output;
};

CliRun run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "magcn_cli_output.txt";
  const std::string cmd = "\"" + kCli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("magcn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  fs::path write_json(const std::string& name, const nlohmann::json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  nlohmann::json small_config() const {
    return {{"seed", 3},
            {"epochs", 2},
            {"lr", 0.01},
            {"d", 8},
            {"L", 2},
            {"M", 2},
            {"Z", 1},
            {"d_s", 2},
            {"split", {0.6, 0.2, 0.2}},
            {"synthetic.n_samples", 20},
            {"synthetic.seq_len", 4},
            {"synthetic.d_e", 4},
            {"synthetic.d_v", 3},
            {"synthetic.d_a", 3}};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenDataTrainEval) {
  const fs::path spec = write_json("spec.json", {{"n_samples", 12}, {"seq_len", 4}, {"d_e", 4}, {"d_v", 3}, {"d_a", 3}});
  const fs::path data = dir_ / "data.jsonl";
  CliRun r = run("gen-data --spec " + spec.string() + " --out " + data.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  ASSERT_TRUE(fs::exists(data));

  nlohmann::json cfg = small_config();
  cfg["data"] = data.string();
  cfg["split"] = {0.5, 0.0, 0.5};
  const fs::path out = dir_ / "run";
  r = run("train --config " + write_json("cfg.json", cfg).string() + " --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_TRUE(fs::exists(out / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(out / "metrics.jsonl"));
  EXPECT_TRUE(fs::exists(out / "report.txt"));

  r = run("eval --checkpoint " + (out / "checkpoint.bin").string() + " --data " + data.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("accuracy"), std::string::npos) << r.output;
}

TEST_F(CliTest, GradcheckPasses) {
  const CliRun r = run("gradcheck --config " + write_json("g.json", small_config()).string() + " --length 3");
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("PASS"), std::string::npos) << r.output;
}

TEST_F(CliTest, AblateWritesTable) {
  nlohmann::json cfg = small_config();
  cfg["epochs"] = 1;
  const fs::path out = dir_ / "ablate";
  const CliRun r = run("ablate --config " + write_json("a.json", cfg).string() + " --grid se --out " + out.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_TRUE(fs::exists(out / "ablation.jsonl"));
  EXPECT_TRUE(fs::exists(out / "ablation.txt"));
  EXPECT_NE(r.output.find("MAGCN w/o SE"), std::string::npos) << r.output;
}

TEST_F(CliTest, BadInvocationsFail) {
  EXPECT_NE(run("ablate --config " + write_json("a.json", small_config()).string() + " --grid nope").exit_code, 0);
  EXPECT_NE(run("train").exit_code, 0);
  EXPECT_NE(run("train --config " + (dir_ / "missing.json").string()).exit_code, 0);
  nlohmann::json cfg = small_config();
  cfg.erase("seed");
  EXPECT_NE(run("train --config " + write_json("noseed.json", cfg).string()).exit_code, 0);
  EXPECT_NE(run("frobnicate").exit_code, 0);
}
