#pragma once

// Wall-clock and flop measurements per pipeline stage.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vibid/detect.hpp"
#include "vibid/model.hpp"
#include "vibid/oracle.hpp"
#include "vibid/parallel.hpp"
#include "vibid/qr.hpp"
#include "vibid/spectrum.hpp"
#include "vibid/sysid.hpp"

namespace vibid::bench {

struct Size {
  std::size_t n;
  std::size_t np;
};

/// The light, medium and heavy regression shapes.
inline constexpr Size kStandardSizes[] = {{200, 8}, {480, 16}, {2520, 56}};

struct Row {
  std::string component;  // build, qr, solve, psd, detect
  std::string method;
  std::string size;  // "NxNp" or "L=<points>"
  std::size_t threads = 1;
  std::uint64_t wall_ns = 0;
  std::uint64_t flops = 0;
};

struct Options {
  std::size_t repeats = 5;
  std::size_t l_points = 2048;
  std::uint64_t seed = 1;
};

/// Minimum wall time over `repeats` runs of fn().
template <class F>
std::uint64_t time_min_ns(std::size_t repeats, F&& fn) {
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min<std::uint64_t>(best, std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
  }
  return best;
}

inline std::string size_label(Size s) { return std::to_string(s.n) + "x" + std::to_string(s.np); }

/// Times each stage of an AR pipeline with Np = size.np and N = size.n.
template <std::floating_point T>
std::vector<Row> run_pipeline(Size size, QrMethod method, const ExecContext& ctx, const Options& opt) {
  const std::vector<double> beta = oracle::ar2_from_pole(0.1, 0.95, 1.0);
  const TimeSeries ts = oracle::gen_ar_process(beta, 1.0, size.n + size.np + 64, opt.seed);
  const ModelSpec spec = ModelSpec::ar(size.np - 1, size.n);
  const std::string label = size_label(size);
  const std::string mname(to_string(method));
  const std::size_t threads = ctx.worker_count();
  std::vector<Row> rows;

  RegressionProblem<T> prob;
  rows.push_back({"build", mname, label, threads,
                  time_min_ns(opt.repeats, [&] { prob = build_ar_regression<T>(ts, spec); }), 0});

  QrStats stats;
  QrFactors<T> f;
  const std::uint64_t qr_ns = time_min_ns(opt.repeats, [&] {
    stats = {};
    f = qr_factorize(prob.psi, method, ctx, &stats);
  });
  rows.push_back({"qr", mname, label, threads, qr_ns, stats.flops});

  SysIdModel<T> model;
  model.spec = spec;
  const std::uint64_t solve_ns = time_min_ns(opt.repeats, [&] {
    // Q^T S, back substitution and residual, on already factorized input
    std::vector<T> qts(size.np, T{0});
    for (std::size_t i = 0; i < size.n; ++i)
      for (std::size_t j = 0; j < size.np; ++j) qts[j] += f.q(i, j) * prob.s_vec[i];
    model.theta = back_substitution(f.r, std::span<const T>(qts));
  });
  rows.push_back({"solve", mname, label, threads, solve_ns, 2ull * size.n * size.np + size.np * size.np});
  model.sigma2 = T{1};

  PsdOptions popt;
  popt.l_points = opt.l_points;
  Spectrum<T> spec_out;
  const TrigTable<T> table;
  rows.push_back({"psd", mname, label, threads, time_min_ns(opt.repeats, [&] {
                    spec_out = model_psd(model, ts.sample_rate_hz(), popt, &table, ctx);
                  }),
                  8ull * opt.l_points * size.np});

  PeakSet peaks;
  rows.push_back({"detect", mname, label, threads,
                  time_min_ns(opt.repeats, [&] { peaks = find_peaks(spec_out); }), 0});
  return rows;
}

/// PSD-only timing on an inflated grid, for thread scaling.
template <std::floating_point T>
Row run_psd_scaling(std::size_t l_points, std::size_t np, const ExecContext& ctx, const Options& opt) {
  oracle::Rng rng(opt.seed);
  std::vector<T> beta(np);
  for (T& b : beta) b = static_cast<T>(0.05 * rng.normal());
  PsdOptions popt;
  popt.l_points = l_points;
  const TrigTable<T> table;
  Spectrum<T> out;
  const std::uint64_t ns = time_min_ns(opt.repeats, [&] {
    out = psd_from_polynomials<T>(beta, {}, T{1}, 1.0, popt, &table, ctx);
  });
  return {"psd", "table", "L=" + std::to_string(l_points), ctx.worker_count(), ns, 8ull * l_points * np};
}

}  // namespace vibid::bench
