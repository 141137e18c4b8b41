#include <gtest/gtest.h>

#include <atomic>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "vibid/oracle.hpp"
#include "vibid/parallel.hpp"
#include "vibid/qr.hpp"
#include "vibid/sysid.hpp"

using namespace vibid;

namespace {

std::vector<std::pair<std::size_t, std::size_t>> as_pairs(const std::vector<IndexRange>& rs) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& r : rs) out.emplace_back(r.begin, r.end);
  return out;
}

template <class T>
bool bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

}  // namespace

TEST(Partition, BalancedContiguous) {
  using P = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(as_pairs(partition(10, 4)), (P{{0, 3}, {3, 6}, {6, 8}, {8, 10}}));
}

TEST(Partition, MoreWorkersThanItems) {
  const auto parts = partition(5, 8);
  ASSERT_EQ(parts.size(), 8u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(parts[i].size(), 1u);
  for (std::size_t i = 5; i < 8; ++i) EXPECT_TRUE(parts[i].empty());
}

TEST(Partition, EmptyRange) {
  for (std::size_t k : {1u, 3u, 8u}) {
    const auto parts = partition(0, k);
    ASSERT_EQ(parts.size(), k);
    for (const auto& r : parts) EXPECT_TRUE(r.empty());
  }
}

TEST(Partition, ZeroWorkersRejected) { EXPECT_THROW(partition(10, 0), Error); }

TEST(Partition, PropertyCoverageAndBalance) {
  for (std::size_t len = 0; len < 300; len += 7) {
    for (std::size_t w = 1; w <= 13; ++w) {
      const auto parts = partition(len, w);
      ASSERT_EQ(parts.size(), w);
      std::size_t expect_begin = 0;
      std::size_t lo = len, hi = 0;
      for (const auto& r : parts) {
        EXPECT_EQ(r.begin, expect_begin);
        EXPECT_LE(r.begin, r.end);
        expect_begin = r.end;
        lo = std::min(lo, r.size());
        hi = std::max(hi, r.size());
      }
      EXPECT_EQ(expect_begin, len);
      EXPECT_LE(hi - lo, 1u);
    }
  }
}

TEST(ExecContext, RejectsZeroWorkers) { EXPECT_THROW(ExecContext(0), Error); }

TEST(ExecContext, ReportsConfiguration) {
  const ExecContext ctx(4);
  EXPECT_EQ(ctx.worker_count(), 4u);
  EXPECT_TRUE(ctx.deterministic());
  EXPECT_EQ(ExecContext(32).physical_workers(), kLogicalPartitions);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (std::size_t threads : {1u, 2u, 4u, 8u}) {
    const ExecContext ctx(threads);
    std::vector<int> hits(1001, 0);
    parallel_for(ctx, hits.size(), [&](IndexRange r) {
      for (std::size_t i = r.begin; i < r.end; ++i) hits[i] += 1;
    });
    for (int h : hits) ASSERT_EQ(h, 1);
  }
}

TEST(ParallelFor, BarrierOnExitMakesWritesVisible) {
  const ExecContext ctx(4);
  std::vector<double> v(4096, 0.0);
  for (int round = 0; round < 50; ++round) {
    parallel_for(ctx, v.size(), [&](IndexRange r) {
      for (std::size_t i = r.begin; i < r.end; ++i) v[i] += 1.0;
    });
    for (double x : v) ASSERT_EQ(x, round + 1.0);
  }
}

TEST(ParallelFor, CountsOneBarrierPerRegion) {
  const ExecContext ctx(2);
  ctx.reset_barrier_count();
  for (int i = 0; i < 5; ++i) parallel_for(ctx, 10, [](IndexRange) {});
  EXPECT_EQ(ctx.barrier_count(), 5u);
}

TEST(ParallelFor, NestedRegionsRunInline) {
  const ExecContext ctx(4);
  std::atomic<int> total{0};
  parallel_for(ctx, 8, [&](IndexRange outer) {
    for (std::size_t i = outer.begin; i < outer.end; ++i)
      parallel_for(ctx, 10, [&](IndexRange inner) { total += static_cast<int>(inner.size()); });
  });
  EXPECT_EQ(total.load(), 80);
}

TEST(ParallelFor, PropagatesExceptions) {
  const ExecContext ctx(4);
  EXPECT_THROW(parallel_for(ctx, 100,
                            [](IndexRange r) {
                              if (r.begin == 0) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  // The pool stays usable afterwards.
  int sum = map_reduce(ctx, 10, 0, [](IndexRange r) { return static_cast<int>(r.size()); }, std::plus<>{});
  EXPECT_EQ(sum, 10);
}

TEST(MapReduce, IntegerSum) {
  for (std::size_t threads : {1u, 2u, 4u, 8u}) {
    const ExecContext ctx(threads);
    const long sum = map_reduce(
        ctx, 100, 0L,
        [](IndexRange r) {
          long s = 0;
          for (std::size_t i = r.begin; i < r.end; ++i) s += static_cast<long>(i + 1);
          return s;
        },
        std::plus<>{});
    EXPECT_EQ(sum, 5050);
  }
}

TEST(MapReduce, FloatingDotProductBitwiseAcrossThreadCounts) {
  oracle::Rng rng(7);
  std::vector<double> a(100003), b(100003);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  auto dot = [&](const ExecContext& ctx) {
    return map_reduce(
        ctx, a.size(), 0.0,
        [&](IndexRange r) {
          double s = 0.0;
          for (std::size_t i = r.begin; i < r.end; ++i) s += a[i] * b[i];
          return s;
        },
        std::plus<>{});
  };
  const double ref = dot(ExecContext(1));
  for (std::size_t threads : {2u, 4u, 8u}) {
    const double got = dot(ExecContext(threads));
    EXPECT_EQ(std::memcmp(&ref, &got, sizeof ref), 0) << threads;
  }
}

TEST(MapReduce, CombinesInAscendingPartitionOrder) {
  const ExecContext ctx(4);
  const std::vector<std::size_t> order = map_reduce(
      ctx, 64, std::vector<std::size_t>{},
      [](IndexRange r) { return std::vector<std::size_t>{r.begin}; },
      [](std::vector<std::size_t> acc, const std::vector<std::size_t>& p) {
        acc.insert(acc.end(), p.begin(), p.end());
        return acc;
      });
  EXPECT_TRUE(std::is_sorted(order.begin(), order.end()));
  EXPECT_EQ(order.size(), kLogicalPartitions);
}

TEST(Determinism, QtSMatchesSingleThreadBitwise) {
  oracle::Rng rng(99);
  const Matrix<double> a = oracle::random_matrix(480, 16, rng);
  std::vector<double> s(480);
  for (double& v : s) v = rng.normal();
  const RegressionProblem<double> prob{a, s, ModelSpec::ar(15, 480)};
  const auto ref = solve_regression(prob, QrMethod::GramSchmidt, ExecContext(1));
  for (std::size_t threads : {2u, 4u, 8u}) {
    const auto got = solve_regression(prob, QrMethod::GramSchmidt, ExecContext(threads));
    EXPECT_TRUE(bitwise_equal(ref.theta, got.theta)) << threads;
    EXPECT_EQ(std::memcmp(&ref.sigma2, &got.sigma2, sizeof ref.sigma2), 0);
  }
}

TEST(Determinism, BarrierCountStableRunToRun) {
  oracle::Rng rng(5);
  const Matrix<float> a = oracle::random_matrix(480, 16, rng).cast<float>();
  const ExecContext ctx(2);
  QrStats first, second;
  qr_factorize(a, QrMethod::GramSchmidt, ctx, &first);
  qr_factorize(a, QrMethod::GramSchmidt, ctx, &second);
  EXPECT_GT(first.barriers, 0u);
  EXPECT_EQ(first.barriers, second.barriers);
  EXPECT_EQ(first.flops, second.flops);
}
