#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "vibid/bench.hpp"

using namespace vibid;

namespace {

std::uint64_t wall_of(const std::vector<bench::Row>& rows, const std::string& component) {
  for (const auto& r : rows)
    if (r.component == component) return r.wall_ns;
  return 0;
}

}  // namespace

TEST(Bench, PipelineEmitsEveryStage) {
  bench::Options opt;
  opt.repeats = 1;
  const auto rows = bench::run_pipeline<float>({200, 8}, QrMethod::Givens, sequential_context(), opt);
  std::set<std::string> seen;
  for (const auto& r : rows) {
    seen.insert(r.component);
    EXPECT_EQ(r.method, "givens");
    EXPECT_EQ(r.size, "200x8");
    EXPECT_EQ(r.threads, 1u);
  }
  EXPECT_EQ(seen, (std::set<std::string>{"build", "qr", "solve", "psd", "detect"}));
  EXPECT_GT(rows[1].flops, 0u);
}

TEST(Bench, QrAndPsdDominate) {
  bench::Options opt;
  opt.repeats = 5;
  const auto rows = bench::run_pipeline<float>({480, 16}, QrMethod::Householder, sequential_context(), opt);
  std::uint64_t total = 0;
  for (const auto& r : rows) total += r.wall_ns;
  const double share = static_cast<double>(wall_of(rows, "qr") + wall_of(rows, "psd")) / static_cast<double>(total);
  EXPECT_GT(share, 0.6);
}

TEST(Bench, GramSchmidtFasterThanHouseholder) {
  bench::Options opt;
  opt.repeats = 7;
  const auto gs = bench::run_pipeline<float>({480, 16}, QrMethod::GramSchmidt, sequential_context(), opt);
  const auto hh = bench::run_pipeline<float>({480, 16}, QrMethod::Householder, sequential_context(), opt);
  EXPECT_LT(wall_of(gs, "qr"), wall_of(hh, "qr"));
}

TEST(Bench, PsdScalesWithWorkers) {
  if (std::thread::hardware_concurrency() < 8) GTEST_SKIP() << "needs at least 8 hardware threads";
  bench::Options opt;
  opt.repeats = 5;
  const ExecContext one(1), two(2), eight(8);
  const auto t1 = bench::run_psd_scaling<float>(2048 * 8, 16, one, opt).wall_ns;
  const auto t2 = bench::run_psd_scaling<float>(2048 * 8, 16, two, opt).wall_ns;
  const auto t8 = bench::run_psd_scaling<float>(2048 * 8, 16, eight, opt).wall_ns;
  EXPECT_GT(static_cast<double>(t1) / static_cast<double>(t8), static_cast<double>(t1) / static_cast<double>(t2));
}
