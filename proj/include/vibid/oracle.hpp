#pragma once

// Double-precision reference implementations used to check the pipeline:
// Cholesky normal equations, complex-arithmetic PSD, an averaged periodogram,
// and reproducible synthetic AR / ARMA signal generators.
//
// Kept deliberately plain and single-threaded.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include "vibid/error.hpp"
#include "vibid/matrix.hpp"
#include "vibid/model.hpp"
#include "vibid/spectrum.hpp"
#include "vibid/sysid.hpp"

namespace vibid::oracle {

/// SplitMix64: a counter-based generator (state advances by a fixed odd
/// increment, output is a bijective mix of the state). Normal deviates use
/// the Box-Muller transform on pairs of 53-bit uniforms.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-boxmuller-v1";

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in (0, 1).
  double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Independent stream derived from this generator's next output.
  Rng split() noexcept { return Rng(next_u64()); }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Matrix<double> random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix<double> m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

/// True when all roots of z^q + beta_1 z^{q-1} + ... + beta_q lie strictly
/// inside the unit circle (Schur-Cohn step-down recursion).
inline bool is_stable(std::span<const double> beta) {
  std::vector<double> a(beta.begin(), beta.end());
  for (std::size_t m = a.size(); m > 0; --m) {
    const double k = a[m - 1];
    if (!(std::abs(k) < 1.0)) return false;
    const double denom = 1.0 - k * k;
    std::vector<double> next(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) next[i] = (a[i] - k * a[m - 2 - i]) / denom;
    a = std::move(next);
  }
  return true;
}

/// AR(2) polynomial with a conjugate pole pair at angle 2 pi f / fs and the given radius.
inline std::vector<double> ar2_from_pole(double freq_hz, double radius, double sample_rate_hz) {
  const double angle = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  return {-2.0 * radius * std::cos(angle), radius * radius};
}

/// s[k] = -sum beta_i s[k-i] + e[k] + sum_{s>=1} ma_s e[k-s], e ~ N(0, sigma^2).
/// 10 * order burn-in samples are generated and discarded.
inline TimeSeries gen_arma_process(std::span<const double> beta, std::span<const double> ma, double sigma,
                                   std::size_t n, std::uint64_t seed, double sample_rate_hz = 1.0) {
  if (!is_stable(beta)) throw Error(ErrorCode::UnstableCoefficients, "generator: AR polynomial is not stable");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "generator: sigma must be non-negative");
  const std::size_t order = std::max(beta.size(), ma.size());
  const std::size_t burn = 10 * order;
  const std::size_t total = burn + n;
  Rng rng(seed);
  std::vector<double> e(total);
  for (double& v : e) v = sigma * rng.normal();
  std::vector<double> s(total, 0.0);
  for (std::size_t k = 0; k < total; ++k) {
    double v = e[k];
    for (std::size_t i = 0; i < ma.size() && i < k; ++i) v += ma[i] * e[k - 1 - i];
    for (std::size_t i = 0; i < beta.size() && i < k; ++i) v -= beta[i] * s[k - 1 - i];
    s[k] = v;
  }
  return TimeSeries(std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(burn), s.end()), sample_rate_hz);
}

inline TimeSeries gen_ar_process(std::span<const double> beta, double sigma, std::size_t n, std::uint64_t seed,
                                 double sample_rate_hz = 1.0) {
  return gen_arma_process(beta, {}, sigma, n, seed, sample_rate_hz);
}

/// theta = (Psi^T Psi)^-1 Psi^T S by Cholesky, sigma2 from the same residual formula.
inline RegressionSolution<double> normal_equations_solve(const RegressionProblem<double>& prob) {
  const std::size_t n = prob.psi.rows();
  const std::size_t np = prob.psi.cols();
  if (n <= np || prob.s_vec.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "normal_equations_solve: need N > Np and |S| = N");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> psi(
      prob.psi.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(np));
  Eigen::Map<const Eigen::VectorXd> s(prob.s_vec.data(), static_cast<Eigen::Index>(n));
  const Eigen::MatrixXd gram = psi.transpose() * psi;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "normal_equations_solve: Gram matrix is not positive definite");
  const Eigen::VectorXd theta = llt.solve(psi.transpose() * s);
  const Eigen::VectorXd resid = s - psi * theta;

  RegressionSolution<double> sol;
  sol.theta.assign(theta.data(), theta.data() + theta.size());
  sol.residual_norm = resid.norm();
  sol.sigma2 = resid.squaredNorm() / static_cast<double>(n - np);
  return sol;
}

/// Double-precision two-pass identification with normal equations in place of QR.
inline SysIdModel<double> oracle_fit(const TimeSeries& ts, const ModelSpec& spec) {
  spec.validate();
  SysIdModel<double> model;
  model.spec = spec;
  model.diagnostics.precision = Precision::F64;
  RegressionSolution<double> sol;
  if (spec.kind == ModelKind::AR) {
    sol = normal_equations_solve(build_ar_regression<double>(ts, spec));
  } else {
    const RegressionSolution<double> aux =
        normal_equations_solve(build_ar_regression<double>(ts, ModelSpec::ar(spec.stage1_order, spec.n_rows)));
    const auto s = ts.samples();
    ResidualSeries<double> resid{std::vector<double>(s.size(), 0.0), aux.theta.size()};
    for (std::size_t k = aux.theta.size(); k < s.size(); ++k) {
      double pred = 0.0;
      for (std::size_t j = 0; j < aux.theta.size(); ++j) pred += aux.theta[j] * s[k - 1 - j];
      resid.values[k] = s[k] - pred;
    }
    sol = normal_equations_solve(build_arma_stage2_regression<double>(ts, resid, spec));
  }
  model.theta = std::move(sol.theta);
  model.sigma2 = sol.sigma2;
  model.diagnostics.residual_norm = sol.residual_norm;
  return model;
}

/// PSD on the standard grid evaluated with std::complex and library trig.
inline Spectrum<double> reference_psd(std::span<const double> ar, std::span<const double> ma, double sigma2,
                                      std::size_t l_points, double sample_rate_hz) {
  Spectrum<double> out;
  out.freqs = frequency_grid(l_points, sample_rate_hz);
  out.psd.resize(l_points);
  for (std::size_t i = 0; i < l_points; ++i) {
    const double w = 2.0 * std::numbers::pi * out.freqs[i] / sample_rate_hz;
    std::complex<double> den(1.0, 0.0);
    for (std::size_t j = 0; j < ar.size(); ++j) den += ar[j] * std::polar(1.0, -w * static_cast<double>(j + 1));
    std::complex<double> num(1.0, 0.0);
    for (std::size_t s = 0; s < ma.size(); ++s) num += ma[s] * std::polar(1.0, -w * static_cast<double>(s));
    out.psd[i] = sigma2 * std::norm(num) / std::norm(den);
  }
  return out;
}

inline Spectrum<double> reference_psd(const SysIdModel<double>& model, std::size_t l_points, double sample_rate_hz) {
  return reference_psd(model.ar_polynomial(), model.ma_polynomial(), model.sigma2, l_points, sample_rate_hz);
}

/// Averaged Hann-windowed periodogram over non-overlapping segments of 2L
/// samples, reported on the same L-point grid as the analytic PSD.
inline Spectrum<double> fft_psd_check(const TimeSeries& ts, std::size_t l_points) {
  const std::size_t seg = 2 * l_points;
  const auto s = ts.samples();
  if (l_points < 2 || s.size() < seg)
    throw Error(ErrorCode::SignalTooShort, "fft_psd_check: need at least 2L samples");
  const std::size_t segments = s.size() / seg;

  std::vector<double> window(seg);
  double wsum2 = 0.0;
  for (std::size_t i = 0; i < seg; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));
    wsum2 += window[i] * window[i];
  }

  Eigen::FFT<double> fft;
  std::vector<double> frame(seg);
  std::vector<std::complex<double>> spec;
  Spectrum<double> out;
  out.freqs = frequency_grid(l_points, ts.sample_rate_hz());
  out.psd.assign(l_points, 0.0);
  for (std::size_t m = 0; m < segments; ++m) {
    for (std::size_t i = 0; i < seg; ++i) frame[i] = s[m * seg + i] * window[i];
    fft.fwd(spec, frame);
    for (std::size_t i = 0; i < l_points; ++i) out.psd[i] += std::norm(spec[i]);
  }
  const double scale = 1.0 / (static_cast<double>(segments) * ts.sample_rate_hz() * wsum2);
  for (std::size_t i = 0; i < l_points; ++i) out.psd[i] *= scale * (i == 0 ? 1.0 : 2.0);
  return out;
}

}  // namespace vibid::oracle
