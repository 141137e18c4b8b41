#pragma once

// Regression problems S = Psi * Theta built from a sampled signal.
//
// Lag convention: an AR model of order q regresses s[k] on the q + 1 strictly
// past samples s[k-1] ... s[k-q-1]. An ARMA(q, p) model regresses s[k] on
// s[k-1] ... s[k-q] followed by the residual estimates e[k] ... e[k-p].
// Rows always use the most recent n_rows admissible targets; earlier samples
// only provide lag history.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vibid/error.hpp"
#include "vibid/matrix.hpp"

namespace vibid {

class TimeSeries {
 public:
  TimeSeries(std::vector<double> samples, double sample_rate_hz)
      : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
    if (samples_.size() < 2) throw Error(ErrorCode::SignalTooShort, "TimeSeries: need at least 2 samples");
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_))
      throw Error(ErrorCode::InvalidArgument, "TimeSeries: sample rate must be positive and finite");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (!std::isfinite(samples_[i]))
        throw Error(ErrorCode::NonFinite, "TimeSeries: non-finite sample at index " + std::to_string(i));
    }
  }

  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  double period() const noexcept { return 1.0 / sample_rate_hz_; }

 private:
  std::vector<double> samples_;
  double sample_rate_hz_;
};

enum class ModelKind { AR, ARMA };

inline std::string_view to_string(ModelKind k) noexcept { return k == ModelKind::AR ? "ar" : "arma"; }

struct ModelSpec {
  ModelKind kind = ModelKind::AR;
  std::size_t q = 1;
  std::size_t p = 0;
  std::size_t stage1_order = 0;
  std::size_t n_rows = 0;

  static ModelSpec ar(std::size_t q, std::size_t n_rows) { return {ModelKind::AR, q, 0, 0, n_rows}; }

  /// stage1_order == 0 selects the default auxiliary order.
  static ModelSpec arma(std::size_t q, std::size_t p, std::size_t n_rows, std::size_t stage1_order = 0) {
    ModelSpec s{ModelKind::ARMA, q, p, stage1_order, n_rows};
    if (stage1_order == 0) s.stage1_order = default_stage1_order(q + p + 1, n_rows, q + p);
    return s;
  }

  static std::size_t default_stage1_order(std::size_t np, std::size_t n_rows, std::size_t floor) {
    return std::max(floor, std::min(2 * np, n_rows / 4));
  }

  std::size_t param_count() const noexcept { return kind == ModelKind::AR ? q + 1 : q + p + 1; }

  /// Number of leading residuals the stage-1 predictor cannot produce.
  std::size_t stage1_lags() const noexcept { return stage1_order + 1; }

  void validate() const {
    if (q < 1) throw Error(ErrorCode::InvalidArgument, "model order q must be >= 1");
    if (kind == ModelKind::AR && p != 0) throw Error(ErrorCode::InvalidArgument, "AR model requires p = 0");
    if (kind == ModelKind::ARMA && stage1_order < q + p)
      throw Error(ErrorCode::InvalidArgument, "stage1_order must be >= q + p");
    if (n_rows <= param_count())
      throw Error(ErrorCode::InvalidArgument, "n_rows must exceed the parameter count");
    if (kind == ModelKind::ARMA && n_rows <= stage1_lags())
      throw Error(ErrorCode::InvalidArgument, "n_rows must exceed the stage-1 parameter count");
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

template <std::floating_point T>
struct RegressionProblem {
  Matrix<T> psi;
  std::vector<T> s_vec;
  ModelSpec spec;
};

/// Residual estimates aligned with a TimeSeries; entries before first_valid
/// are warm-up values and must not be used.
template <std::floating_point T>
struct ResidualSeries {
  std::vector<T> values;
  std::size_t first_valid = 0;
};

template <std::floating_point T>
RegressionProblem<T> build_ar_regression(const TimeSeries& ts, const ModelSpec& spec) {
  if (spec.kind != ModelKind::AR) throw Error(ErrorCode::InvalidArgument, "build_ar_regression: spec is not AR");
  spec.validate();
  const std::size_t np = spec.param_count();
  const std::size_t n = spec.n_rows;
  const auto s = ts.samples();
  if (s.size() < n + np)
    throw Error(ErrorCode::SignalTooShort, "signal has " + std::to_string(s.size()) + " samples, need " +
                                               std::to_string(n + np) + " for " + std::to_string(n) +
                                               " rows with " + std::to_string(np) + " lags");

  RegressionProblem<T> prob{Matrix<T>(n, np), std::vector<T>(n), spec};
  const std::size_t first_target = s.size() - n;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t k = first_target + r;
    prob.s_vec[r] = static_cast<T>(s[k]);
    auto row = prob.psi.row(r);
    for (std::size_t j = 0; j < np; ++j) row[j] = static_cast<T>(s[k - 1 - j]);
  }
  return prob;
}

template <std::floating_point T>
RegressionProblem<T> build_arma_stage2_regression(const TimeSeries& ts, const ResidualSeries<T>& residuals,
                                                  const ModelSpec& spec) {
  if (spec.kind != ModelKind::ARMA)
    throw Error(ErrorCode::InvalidArgument, "build_arma_stage2_regression: spec is not ARMA");
  if (spec.q < 1) throw Error(ErrorCode::InvalidArgument, "model order q must be >= 1");
  if (spec.n_rows <= spec.param_count())
    throw Error(ErrorCode::InvalidArgument, "n_rows must exceed the parameter count");
  const auto s = ts.samples();
  if (residuals.values.size() != s.size())
    throw Error(ErrorCode::DimensionMismatch, "residual series length differs from signal length");

  const std::size_t q = spec.q;
  const std::size_t p = spec.p;
  const std::size_t n = spec.n_rows;
  const std::size_t first_admissible = std::max(q, residuals.first_valid + p);
  if (first_admissible >= s.size() || s.size() - first_admissible < n)
    throw Error(ErrorCode::SignalTooShort, "not enough valid residuals for " + std::to_string(n) + " rows");

  RegressionProblem<T> prob{Matrix<T>(n, spec.param_count()), std::vector<T>(n), spec};
  const std::size_t first_target = s.size() - n;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t k = first_target + r;
    prob.s_vec[r] = static_cast<T>(s[k]);
    auto row = prob.psi.row(r);
    for (std::size_t i = 0; i < q; ++i) row[i] = static_cast<T>(s[k - 1 - i]);
    for (std::size_t m = 0; m <= p; ++m) {
      const T e = residuals.values[k - m];
      if (!std::isfinite(e)) throw Error(ErrorCode::NonFinite, "non-finite residual at index " + std::to_string(k - m));
      row[q + m] = e;
    }
  }
  return prob;
}

}  // namespace vibid
