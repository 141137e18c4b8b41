#pragma once

// Output-only system identification: regression build, QR, coefficient solve
// and noise-variance estimate, with the two-pass procedure for ARMA models.

#include <cmath>
#include <concepts>
#include <span>
#include <vector>

#include "vibid/error.hpp"
#include "vibid/matrix.hpp"
#include "vibid/model.hpp"
#include "vibid/parallel.hpp"
#include "vibid/qr.hpp"

namespace vibid {

template <std::floating_point T>
struct RegressionSolution {
  std::vector<T> theta;
  T sigma2{0};
  T residual_norm{0};
};

struct FitDiagnostics {
  double residual_norm = 0.0;
  QrMethod qr_method = QrMethod::GramSchmidt;
  Precision precision = Precision::F64;
  QrStats qr_stats;
};

/// theta holds the regression coefficients: [theta_1 .. theta_Np] for AR
/// (weights of s[k-1] .. s[k-Np]) and [beta-block | alpha-block] for ARMA.
template <std::floating_point T>
struct SysIdModel {
  ModelSpec spec;
  std::vector<T> theta;
  T sigma2{0};
  FitDiagnostics diagnostics;

  /// Denominator polynomial 1 + sum_j beta_j z^-(j+1); beta_j = -theta_j.
  std::vector<T> ar_polynomial() const {
    const std::size_t len = spec.kind == ModelKind::AR ? theta.size() : spec.q;
    std::vector<T> beta(len);
    for (std::size_t j = 0; j < len; ++j) beta[j] = -theta[j];
    return beta;
  }

  /// Numerator polynomial 1 + sum_s alpha_s z^-s for s = 0..p. The weight
  /// fitted on e[k] already contains the leading unit term, so alpha_0 is that
  /// weight minus one. Empty for AR models.
  std::vector<T> ma_polynomial() const {
    if (spec.kind == ModelKind::AR) return {};
    std::vector<T> alpha(theta.begin() + static_cast<std::ptrdiff_t>(spec.q), theta.end());
    alpha[0] -= T{1};
    return alpha;
  }
};

/// theta = R^-1 Q^T S and sigma2 = ||S - Psi theta||^2 / (N - Np).
template <std::floating_point T>
RegressionSolution<T> solve_regression(const RegressionProblem<T>& prob, QrMethod method,
                                       const ExecContext& ctx = sequential_context(), QrStats* stats = nullptr) {
  const std::size_t n = prob.psi.rows();
  const std::size_t np = prob.psi.cols();
  if (prob.s_vec.size() != n) throw Error(ErrorCode::DimensionMismatch, "solve_regression: S length differs from rows");
  if (n <= np) throw Error(ErrorCode::InvalidArgument, "solve_regression: need N > Np");

  const QrFactors<T> f = qr_factorize(prob.psi, method, ctx, stats);

  // Q^T S, reduced over row partitions straight from Q's rows.
  std::vector<T> partials(kLogicalPartitions * np);
  std::vector<T> qts(np);
  for_each_partition(ctx, n, [&](std::size_t part, IndexRange rows) {
    T* acc = partials.data() + part * np;
    std::fill(acc, acc + np, T{0});
    for (std::size_t i = rows.begin; i < rows.end; ++i) {
      const auto qrow = f.q.row(i);
      const T si = prob.s_vec[i];
      for (std::size_t j = 0; j < np; ++j) acc[j] += qrow[j] * si;
    }
  });
  combine_partials<T>(std::span<const T>(partials), np, std::span<T>(qts));

  RegressionSolution<T> sol;
  sol.theta = back_substitution(f.r, std::span<const T>(qts));

  const T rss = map_reduce(
      ctx, n, T{0},
      [&](IndexRange rows) {
        T acc{0};
        for (std::size_t i = rows.begin; i < rows.end; ++i) {
          const auto prow = prob.psi.row(i);
          T pred{0};
          for (std::size_t j = 0; j < np; ++j) pred += prow[j] * sol.theta[j];
          const T e = prob.s_vec[i] - pred;
          acc += e * e;
        }
        return acc;
      },
      [](T x, T y) { return x + y; });
  sol.residual_norm = std::sqrt(rss);
  sol.sigma2 = rss / static_cast<T>(n - np);
  if (stats) stats->flops += 2ull * n * np + 2ull * n * np + 3ull * n;
  return sol;
}

/// One-step prediction residuals e[k] = s[k] - sum_j theta_j s[k-1-j]; the
/// first theta.size() entries cannot be formed and are marked invalid.
template <std::floating_point T>
ResidualSeries<T> ar_residuals(const TimeSeries& ts, std::span<const T> theta,
                               const ExecContext& ctx = sequential_context()) {
  const auto s = ts.samples();
  const std::size_t lags = theta.size();
  ResidualSeries<T> out{std::vector<T>(s.size(), T{0}), lags};
  if (lags >= s.size()) return out;
  parallel_for(ctx, s.size() - lags, [&](IndexRange r) {
    for (std::size_t idx = r.begin; idx < r.end; ++idx) {
      const std::size_t k = lags + idx;
      T pred{0};
      for (std::size_t j = 0; j < lags; ++j) pred += theta[j] * static_cast<T>(s[k - 1 - j]);
      out.values[k] = static_cast<T>(s[k]) - pred;
    }
  });
  return out;
}

template <std::floating_point T>
SysIdModel<T> fit(const TimeSeries& ts, const ModelSpec& spec, QrMethod method,
                  const ExecContext& ctx = sequential_context()) {
  spec.validate();
  if (spec.kind == ModelKind::ARMA && spec.p == 0)
    throw Error(ErrorCode::InvalidArgument, "ARMA model requires p >= 1; use an AR model instead");

  SysIdModel<T> model;
  model.spec = spec;
  model.diagnostics.qr_method = method;
  model.diagnostics.precision = precision_of<T>;

  RegressionSolution<T> sol;
  if (spec.kind == ModelKind::AR) {
    sol = solve_regression(build_ar_regression<T>(ts, spec), method, ctx, &model.diagnostics.qr_stats);
  } else {
    const ModelSpec stage1 = ModelSpec::ar(spec.stage1_order, spec.n_rows);
    const RegressionSolution<T> aux =
        solve_regression(build_ar_regression<T>(ts, stage1), method, ctx, &model.diagnostics.qr_stats);
    const ResidualSeries<T> resid = ar_residuals<T>(ts, aux.theta, ctx);
    sol = solve_regression(build_arma_stage2_regression<T>(ts, resid, spec), method, ctx,
                           &model.diagnostics.qr_stats);
  }
  model.theta = std::move(sol.theta);
  model.sigma2 = sol.sigma2;
  model.diagnostics.residual_norm = static_cast<double>(sol.residual_norm);
  return model;
}

}  // namespace vibid
