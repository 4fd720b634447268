#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ikr/bench.hpp"
#include "ikr/kernel.hpp"
#include "ikr/metrics.hpp"
#include "ikr/png_io.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using ikr::testing::synthetic_image;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "ikr_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct CliRun {
  int code;
  std::string out;
};

CliRun ikr_cli(const std::string& args) {
  const fs::path log = work_dir() / "stdout.txt";
  const std::string cmd = "env -u IKR_WEIGHTS \"" IKR_CLI_PATH "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string p(const std::string& name) { return (work_dir() / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(ikr_cli("--help").code, 0);
  EXPECT_EQ(ikr_cli("sr --help").code, 0);
  EXPECT_EQ(ikr_cli("").code, 1);
  EXPECT_EQ(ikr_cli("frobnicate").code, 1);
  EXPECT_EQ(ikr_cli("oracle-check --bogus").code, 1);
  EXPECT_EQ(ikr_cli("oracle-check --max-size 64").code, 1);
}

TEST(Cli, DegradeErrors) {
  ikr::write_png(synthetic_image(100, 100, 3, 1), p("hr100.png"));
  EXPECT_EQ(ikr_cli("degrade --input " + p("hr100.png") + " --output " + p("o.png") +
                    " --scale 3 --gauss 1,1,0").code,
            2);
  EXPECT_EQ(ikr_cli("degrade --input " + p("hr100.png") + " --output " + p("o.png") +
                    " --scale 2").code,
            1);
  EXPECT_EQ(ikr_cli("degrade --input " + p("hr100.png") + " --output " + p("o.png") +
                    " --scale 2 --gauss 1,1,0 --motion 1,0.5").code,
            1);
  EXPECT_EQ(ikr_cli("degrade --input " + p("hr100.png") + " --output " + p("o.png") +
                    " --scale 2 --gauss 1,1,0 --sigma 0.05").code,
            2);
  EXPECT_EQ(ikr_cli("degrade --input " + p("hr100.png") + " --output " + p("o.png") +
                    " --scale 2 --gauss 1,1,0 --sigma 0.05 --allow-high-noise").code,
            0);
  EXPECT_EQ(ikr_cli("degrade --input " + p("nope.png") + " --output " + p("o.png") +
                    " --scale 2 --gauss 1,1,0").code,
            1);
}

TEST(Cli, DegradeIsDeterministic) {
  ikr::write_png(synthetic_image(128, 128, 3, 2), p("hr.png"));
  const std::string base = "degrade --input " + p("hr.png") +
                           " --scale 2 --motion 5,0.6 --sigma 0.01 --seed 9 --output ";
  ASSERT_EQ(ikr_cli(base + p("lr_a.png")).code, 0);
  ASSERT_EQ(ikr_cli(base + p("lr_b.png")).code, 0);
  EXPECT_EQ(slurp(p("lr_a.png")), slurp(p("lr_b.png")));
  const ikr::Image lr = ikr::read_png(p("lr_a.png"));
  EXPECT_EQ(lr.height(), 64);
  EXPECT_EQ(ikr::load_kernel_window(p("lr_a.kernel.txt")), ikr::motion_kernel(5, 0.6).window());

  // A saved kernel file drives the same degradation.
  ASSERT_EQ(ikr_cli("degrade --input " + p("hr.png") + " --scale 2 --sigma 0.01 --seed 9 "
                    "--kernel " + p("lr_a.kernel.txt") + " --output " + p("lr_c.png")).code,
            0);
  EXPECT_EQ(slurp(p("lr_a.png")), slurp(p("lr_c.png")));
}

TEST(Cli, SrWritesTraceAndKernel) {
  ikr::write_png(synthetic_image(128, 128, 3, 3), p("hr3.png"));
  ASSERT_EQ(ikr_cli("degrade --input " + p("hr3.png") + " --output " + p("lr3.png") +
                    " --scale 2 --gauss 1.6,1.6,0").code,
            0);
  const CliRun r = ikr_cli("sr --input " + p("lr3.png") + " --output " + p("sr3.png") +
                        " --scale 2 --iters 8 --trace " + p("sr3.jsonl") + " --trace-images");
  ASSERT_EQ(r.code, 0) << r.out;
  const ikr::Image sr = ikr::read_png(p("sr3.png"));
  EXPECT_EQ(sr.height(), 128);
  EXPECT_EQ(sr.width(), 128);
  const ikr::Kernel k = ikr::load_kernel(p("sr3.kernel.txt"));
  EXPECT_TRUE(ikr::satisfies_kernel_invariants(k.coeffs(), 1e-9));
  EXPECT_TRUE(fs::exists(p("sr3.kernel.png")));

  std::ifstream trace(p("sr3.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) ++lines;
  EXPECT_EQ(lines, 8);
  EXPECT_TRUE(fs::exists(p("sr3.iter08.x.png")));

  EXPECT_EQ(ikr_cli("sr --input " + p("lr3.png") + " --output " + p("x.png") +
                    " --scale 2 --noise bogus").code,
            1);
  EXPECT_EQ(ikr_cli("sr --input " + p("lr3.png") + " --output " + p("x.png") +
                    " --scale 2 --noise known:0.06").code,
            1);
  EXPECT_EQ(ikr_cli("sr --input " + p("lr3.png") + " --output " + p("x.png") +
                    " --scale 2 --trace-images").code,
            1);
  EXPECT_EQ(ikr_cli("sr --input " + p("lr3.png") + " --output " + p("x.png") +
                    " --scale 2 --weights " + p("no_such_dir")).code,
            1);
  fs::create_directories(p("bad_weights"));
  std::ofstream(p("bad_weights/p.ikrw")) << "not a weight file";
  EXPECT_EQ(ikr_cli("sr --input " + p("lr3.png") + " --output " + p("x.png") +
                    " --scale 2 --weights " + p("bad_weights")).code,
            2);
}

TEST(Cli, NonBlindDeltaAtUnitScale) {
  const ikr::Image hr = synthetic_image(64, 64, 3, 4);
  ikr::write_png(hr, p("hr4.png"));
  ikr::save_kernel(ikr::Kernel::delta().window(), p("delta.txt"));
  const CliRun r = ikr_cli("sr --input " + p("hr4.png") + " --output " + p("sr4.png") +
                        " --scale 1 --kernel " + p("delta.txt") + " --noise known:0");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_GT(ikr::psnr(ikr::read_png(p("sr4.png")), ikr::read_png(p("hr4.png"))), 50.0);
}

TEST(Cli, OracleCheck) {
  CliRun r = ikr_cli("oracle-check");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  EXPECT_EQ(ikr_cli("oracle-check --scales 1 --trials 5").code, 0);
  r = ikr_cli("oracle-check --corrupt-block-avg --trials 3");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(ikr_cli("oracle-check --scales 3 --max-size 2").code, 2);
}

TEST(Cli, Kernels) {
  ASSERT_EQ(ikr_cli("kernels --out " + p("kernels")).code, 0);
  const auto ks = ikr::gen_test_kernels();
  for (const auto& k : ks)
    EXPECT_EQ(ikr::load_kernel_window(p("kernels/kernel_" + k.name + ".txt")), k.kernel.window());
  const ikr::Image sheet = ikr::read_png(p("kernels/kernels.png"));
  EXPECT_GT(sheet.width(), 4 * ikr::kKernelSize * 4);
}

TEST(Cli, Bench) {
  fs::create_directories(p("bench_hr"));
  ikr::write_png(synthetic_image(64, 64, 3, 5), p("bench_hr/a.png"));
  ikr::write_png(synthetic_image(64, 64, 3, 6), p("bench_hr/b.png"));
  const CliRun r = ikr_cli("bench --hr-dir " + p("bench_hr") + " --report " + p("bench.csv") +
                        " --scale 2 --iters 2 --jobs 2");
  ASSERT_EQ(r.code, 0) << r.out;
  const ikr::BenchReport rep = ikr::parse_report_csv(slurp(p("bench.csv")));
  EXPECT_EQ(rep.rows.size(), 24u);
  EXPECT_EQ(ikr_cli("bench --hr-dir " + p("bench_hr") + " --report " + p("x.csv") +
                    " --scale 2 --ablation --non-blind").code,
            1);
  EXPECT_EQ(ikr_cli("bench --hr-dir " + p("bench_hr") + " --report " + p("x.csv") +
                    " --scale 2 --sigma 0.2").code,
            1);
}
