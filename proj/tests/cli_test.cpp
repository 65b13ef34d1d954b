#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(GPERIODIC_CLI) + " " + args + " 2>/dev/null";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe.get())) > 0) out.append(buf.data(), n);
  const int status = pclose(pipe.release());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string scenario(const std::string& name) { return std::string(GPERIODIC_SCENARIO_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
  auto p = fs::path(testing::TempDir()) / ("gperiodic_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Cli, GraphTreeSequenceEndsNearLimit) {
  const auto r = run("graph --family tree --valence 3 --max-depth 12");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("depths").back(), 12);
  EXPECT_NEAR(j.at("converged_mu0").get<double>(), 0.1716, 1e-2);
}

TEST(Cli, GraphCsv) {
  const auto r = run("graph --family Z --max-depth 5 --format csv");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("depth,mu0,cheeger_sweep,folner\n", 0), 0u);
}

TEST(Cli, RunTreeWritesReport) {
  const auto dir = scratch("tree");
  const auto r = run("run --config " + scenario("tree3.toml") + " --max-depth 5 --out " + dir.string());
  EXPECT_EQ(r.code, 0);
  ASSERT_TRUE(fs::exists(dir / "tree3.json"));
  ASSERT_TRUE(fs::exists(dir / "tree3.csv"));
  std::ifstream f(dir / "tree3.json");
  const auto j = nlohmann::json::parse(f);
  EXPECT_TRUE(j.at("all_pass").get<bool>());
  EXPECT_EQ(j.at("depths").back().at("depth"), 5);

  const auto rep = run("report " + (dir / "tree3.json").string());
  EXPECT_EQ(rep.code, 0);
  EXPECT_EQ(rep.out.rfind("depth,cells", 0), 0u);
  fs::remove_all(dir);
}

TEST(Cli, RunIsDeterministicApartFromTiming) {
  auto strip = [](std::string s) {
    auto j = nlohmann::json::parse(s);
    j.erase("timing");
    return j.dump();
  };
  const auto a = run("run --config " + scenario("single.toml"));
  const auto b = run("run --config " + scenario("single.toml"));
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(strip(a.out), strip(b.out));
}

TEST(Cli, CellAndTube) {
  const auto c = run("cell --config " + scenario("cell_cosh.toml"));
  ASSERT_EQ(c.code, 0);
  const double l0 = nlohmann::json::parse(c.out).at("lambda0");
  EXPECT_GT(l0, 1.0);
  EXPECT_LT(l0, 1.01);
  const auto t = run("tube --config " + scenario("tube_cosh.toml"));
  ASSERT_EQ(t.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(t.out).at("comparison").at("holds").get<bool>());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("run --config /nonexistent/file.toml").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("graph --family hypercube").code, 2);
  EXPECT_EQ(run("graph --format xml").code, 2);
  EXPECT_EQ(run("graph --family tree --max-depth 40 --tol 0").code, 2);

  const auto dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.toml") << "[graph]\nfamily = \"tree\"\nvalence = 3\n[cell]\ntype = \"star\"\nlegs = 4\nleg_length = 0.5\n";
  std::ofstream(dir / "syntax.toml") << "[graph\n";
  EXPECT_EQ(run("run --config " + (dir / "bad.toml").string()).code, 2);
  EXPECT_EQ(run("run --config " + (dir / "syntax.toml").string()).code, 2);

  // a failing verdict: slack so tight that the tree gap is measured against 0 < target
  std::ofstream(dir / "fail.toml") << "name = \"fail\"\n[graph]\nfamily = \"tree\"\nvalence = 3\nschedule = [2, 3]\n"
                                      "mu0_ref = 1000.0\n[cell]\ntype = \"star\"\nlegs = 3\nleg_length = 0.5\nmesh_step = 0.1\n"
                                      "[cell.escape]\nlength = 1.0\n";
  EXPECT_EQ(run("run --config " + (dir / "fail.toml").string()).code, 1);
  fs::remove_all(dir);
}
