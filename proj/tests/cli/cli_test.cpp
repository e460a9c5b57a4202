#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "steer/cli/app.hpp"
#include "steer/cli/config.hpp"
#include "steer/error.hpp"

using namespace steer::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string log;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "steer-recon");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream log, err;
  const int code = main_entry(static_cast<int>(argv.size()), argv.data(), log, err);
  return {code, log.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("steer_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

steer::ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const steer::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return steer::ErrorKind::InvalidArgument;
}

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig c;
  EXPECT_EQ(c.order, 8);
  EXPECT_EQ(c.width, 8u);
  EXPECT_EQ(c.epochs, 2000u);
  EXPECT_EQ(c.size, 64u);
  EXPECT_DOUBLE_EQ(c.counts, 100.0);
  EXPECT_DOUBLE_EQ(c.lr, 1e-3);
  EXPECT_EQ(get_value(c, "grid"), "auto");
}

TEST(Config, SetAndGetRoundTrip) {
  ExperimentConfig c;
  for (const auto& key : config_keys()) {
    if (key == "command") continue;
    const auto v = get_value(c, key);
    set_value(c, key, v, "test");
    EXPECT_EQ(get_value(c, key), v) << key;
  }
  set_value(c, "pitch", "1.6", "test");
  EXPECT_DOUBLE_EQ(c.pitch, 1.6);
}

TEST_F(Cli, FlagsOverrideFileOverrideDefaults) {
  std::ofstream(path("c.txt")) << "# comment\n\nepochs = 500\nseed = 4\n";
  const auto c = load_config(path("c.txt"), {{"epochs", "100"}});
  EXPECT_EQ(c.epochs, 100u);
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.size, 64u);
}

TEST_F(Cli, ConfigErrorsNameTheirSource) {
  std::ofstream(path("bad.txt")) << "seed = 1\nepochs = banana\n";
  try {
    load_config(path("bad.txt"), {});
    FAIL();
  } catch (const steer::Error& e) {
    EXPECT_EQ(e.kind(), steer::ErrorKind::ConfigParse);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epochs"), std::string::npos) << msg;
    EXPECT_NE(msg.find("bad.txt:2"), std::string::npos) << msg;
  }
  std::ofstream(path("unknown.txt")) << "colour = red\n";
  EXPECT_EQ(kind_of([&] { load_config(path("unknown.txt"), {}); }), steer::ErrorKind::ConfigUnknownKey);
  EXPECT_EQ(kind_of([&] { load_config(path("missing.txt"), {}); }), steer::ErrorKind::ConfigMissingFile);
  std::ofstream(path("noeq.txt")) << "epochs 5\n";
  EXPECT_EQ(kind_of([&] { load_config(path("noeq.txt"), {}); }), steer::ErrorKind::ConfigParse);
}

TEST(Config, ResolveFillsAutoAndChecksGeometry) {
  ExperimentConfig c;
  c.command = Command::Basis;
  c.order = 4;
  const auto r = resolve(c);
  EXPECT_NE(r.grid, "auto");
  EXPECT_NE(r.phantom, "auto");
  c.order = 8;
  c.grid = "cartesian";
  EXPECT_EQ(kind_of([&] { resolve(c); }), steer::ErrorKind::Geometry);
  c.grid = "polar";
  c.kernel = 4;
  EXPECT_EQ(kind_of([&] { resolve(c); }), steer::ErrorKind::Geometry);
  ExperimentConfig recon;
  recon.command = Command::Reconstruct;
  recon.angles = 32;
  EXPECT_EQ(kind_of([&] { resolve(recon); }), steer::ErrorKind::Geometry);
  EXPECT_EQ(kind_of([] { resolve(ExperimentConfig{}); }), steer::ErrorKind::InvalidArgument);
}

TEST(Config, FormatListsEveryKey) {
  ExperimentConfig c;
  c.command = Command::Denoise;
  const auto text = format_config(resolve(c));
  for (const auto& key : config_keys()) EXPECT_NE(text.find(key + " = "), std::string::npos) << key;
}

TEST_F(Cli, BasisReportsDimension) {
  const auto o = invoke({"basis", "--order", "4", "--out", path("b")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.log.find("dimension 3\n"), std::string::npos) << o.log;
  EXPECT_TRUE(fs::exists(dir_ / "b" / "config.resolved"));
}

TEST_F(Cli, PhantomRatio) {
  const auto o = invoke({"phantom", "derenzo", "--size", "128", "--out", path("p")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.log.find("max/background ratio 10\n"), std::string::npos) << o.log;
  EXPECT_TRUE(fs::exists(dir_ / "p" / "derenzo.bin"));
}

TEST_F(Cli, AuditIdentityIsExact) {
  const auto o = invoke({"audit", "--size", "32", "--order", "4", "--network", "scnn", "--out", path("a")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.log.find("g0 (0.0 deg)  0\n"), std::string::npos) << o.log;
  EXPECT_TRUE(fs::exists(dir_ / "a" / "audit.csv"));
}

TEST_F(Cli, LibraryErrorsExitWithTwo) {
  auto o = invoke({"reconstruct", "--angles", "10", "--out", path("r")});
  EXPECT_EQ(o.code, 2);
  EXPECT_EQ(o.err.rfind("error [", 0), 0u) << o.err;
  o = invoke({"denoise", "--config", path("nope.txt"), "--out", path("r")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("config-missing-file"), std::string::npos) << o.err;
  o = invoke({"denoise", "extra", "--out", path("r")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(invoke({"--no-such-flag"}).code, 0);
}

TEST_F(Cli, ResolvedConfigReproducesTheRun) {
  const std::vector<std::string> args{"denoise", "--size", "16", "--epochs", "5", "--order", "4", "--width", "2",
                                      "--checkpoint_every", "2", "--csv", "true"};
  auto first = args;
  first.insert(first.end(), {"--out", path("one")});
  const auto a = invoke(first);
  ASSERT_EQ(a.code, 0) << a.err;

  // Replay from the echoed configuration with only the output directory changed.
  const auto b = invoke({"denoise", "--config", path("one/config.resolved"), "--out", path("two")});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.log, b.log);

  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir_ / "one")) {
    if (!entry.is_regular_file() || entry.path().filename() == "config.resolved") continue;
    const auto rel = fs::relative(entry.path(), dir_ / "one");
    EXPECT_EQ(slurp(entry.path()), slurp(dir_ / "two" / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 10u);
  EXPECT_TRUE(fs::exists(dir_ / "one" / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "one" / "scnn" / "seed_0" / "loss.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "one" / "cnn" / "seed_0" / "final.csv"));
}

TEST_F(Cli, MetricsCommandComparesImages) {
  ASSERT_EQ(invoke({"phantom", "brain", "--size", "32", "--out", path("p")}).code, 0);
  const auto o = invoke({"metrics", "--input", path("p/brain.bin"), "--reference", path("p/brain.bin"), "--out", path("m")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.log.find("ssim 1.000000"), std::string::npos) << o.log;
  EXPECT_NE(o.log.find("psnr inf"), std::string::npos) << o.log;
}
