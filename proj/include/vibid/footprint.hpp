#pragma once

// Closed-form memory and operation-count models for the QR kernels and for
// the end-to-end pipeline buffers.

#include <cstddef>
#include <cstdint>

#include "vibid/error.hpp"
#include "vibid/qr.hpp"

namespace vibid {

struct ResourceEstimate {
  std::uint64_t working_words = 0;
  double flops_estimate = 0.0;
  std::uint64_t pipeline_bytes = 0;
};

/// Psi + Q + R + S + Theta storage: (2 N Np + Np^2 + N + Np) elements.
inline std::uint64_t estimate_pipeline_bytes(std::uint64_t n, std::uint64_t np, std::uint64_t elem_bytes) {
  return (2 * n * np + np * np + n + np) * elem_bytes;
}

/// Working storage (elements) and approximate flops of one N x Np factorization:
///   Givens        2 N Np + 4 N            (6 Np N^2 - Np^3) / 3
///   Gram-Schmidt  2 N Np + Np^2           Np N^2
///   Householder   Np + N + 5 N Np + N^2   (6 Np^2 N^2 + N^4 - 4 Np N^3) / 12
inline ResourceEstimate estimate_qr_footprint(QrMethod method, std::uint64_t n, std::uint64_t np,
                                              std::uint64_t elem_bytes = 4) {
  if (np < 1 || n < np) throw Error(ErrorCode::DimensionMismatch, "estimate_qr_footprint: need n >= np >= 1");
  const double dn = static_cast<double>(n);
  const double dp = static_cast<double>(np);
  ResourceEstimate est;
  switch (method) {
    case QrMethod::Givens:
      est.working_words = 2 * n * np + 4 * n;
      est.flops_estimate = (6.0 * dp * dn * dn - dp * dp * dp) / 3.0;
      break;
    case QrMethod::GramSchmidt:
      est.working_words = 2 * n * np + np * np;
      est.flops_estimate = dp * dn * dn;
      break;
    case QrMethod::Householder:
      est.working_words = np + n + 5 * n * np + n * n;
      est.flops_estimate = (6.0 * dp * dp * dn * dn + dn * dn * dn * dn - 4.0 * dp * dn * dn * dn) / 12.0;
      break;
  }
  est.pipeline_bytes = estimate_pipeline_bytes(n, np, elem_bytes);
  return est;
}

}  // namespace vibid
