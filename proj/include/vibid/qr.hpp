#pragma once

// Economy-size QR factorization of tall matrices (N >= Np) by Givens
// rotations, modified Gram-Schmidt and Householder reflections.
//
// All three kernels return Q (N x Np, orthonormal columns) and R (Np x Np,
// upper triangular) with a non-negative diagonal, so results of different
// methods are comparable entrywise. Work is split with the static-partition
// layer in parallel.hpp; row reductions use ordered combines and are
// therefore independent of the worker count.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vibid/error.hpp"
#include "vibid/matrix.hpp"
#include "vibid/parallel.hpp"

namespace vibid {

enum class QrMethod { Givens, GramSchmidt, Householder };

inline std::string_view to_string(QrMethod m) noexcept {
  switch (m) {
    case QrMethod::Givens: return "givens";
    case QrMethod::GramSchmidt: return "gs";
    case QrMethod::Householder: return "hh";
  }
  return "?";
}

template <std::floating_point T>
struct QrFactors {
  Matrix<T> q;
  Matrix<T> r;
  QrMethod method = QrMethod::GramSchmidt;
  Precision precision = precision_of<T>;
};

/// Instrumentation filled in by the kernels when a pointer is supplied.
struct QrStats {
  std::uint64_t flops = 0;
  std::uint64_t barriers = 0;
};

/// Rank threshold scale: sqrt(machine epsilon).
template <std::floating_point T>
constexpr T rank_tolerance_scale() {
  return static_cast<T>(std::sqrt(static_cast<double>(std::numeric_limits<T>::epsilon())));
}

namespace detail {

template <std::floating_point T>
void check_qr_input(const Matrix<T>& a, std::string_view who) {
  if (a.cols() == 0 || a.rows() < a.cols())
    throw Error(ErrorCode::DimensionMismatch, std::string(who) + ": need N >= Np >= 1, got " +
                                                  std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  if (!a.all_finite()) throw Error(ErrorCode::NonFinite, std::string(who) + ": non-finite input");
}

// Flip row k of R and column k of Q wherever R(k,k) < 0. Exact.
template <std::floating_point T>
void normalize_signs(Matrix<T>& q, Matrix<T>& r) {
  for (std::size_t k = 0; k < r.rows(); ++k) {
    if (!(r(k, k) < T{0})) continue;
    for (std::size_t j = k; j < r.cols(); ++j) r(k, j) = -r(k, j);
    for (std::size_t i = 0; i < q.rows(); ++i) q(i, k) = -q(i, k);
  }
}

template <std::floating_point T>
Matrix<T> upper_triangle(const Matrix<T>& w) {
  const std::size_t np = w.cols();
  Matrix<T> r(np, np);
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = i; j < np; ++j) r(i, j) = w(i, j);
  return r;
}

// Givens rotations are stored as a single number in the entry they annihilate.
// The generator guarantees c >= 0, which makes the encoding exact in sign.
template <std::floating_point T>
T encode_rotation(T c, T s) {
  if (c == T{0}) return s > T{0} ? T{1} : T{-1};
  if (std::abs(s) < c) return s / T{2};
  return std::copysign(T{2} / c, s);
}

template <std::floating_point T>
void decode_rotation(T rho, T& c, T& s) {
  const T mag = std::abs(rho);
  if (mag == T{1}) {
    c = T{0};
    s = rho;
  } else if (mag < T{1}) {
    s = T{2} * rho;
    c = std::sqrt(T{1} - s * s);
  } else {
    c = T{2} / mag;
    s = std::copysign(std::sqrt(T{1} - c * c), rho);
  }
}

struct StatsScope {
  StatsScope(const ExecContext& ctx, QrStats* stats) : ctx_(ctx), stats_(stats), start_(ctx.barrier_count()) {}
  ~StatsScope() {
    if (stats_) {
      stats_->flops += flops;
      stats_->barriers += ctx_.barrier_count() - start_;
    }
  }
  StatsScope(const StatsScope&) = delete;
  StatsScope& operator=(const StatsScope&) = delete;

  std::uint64_t flops = 0;

 private:
  const ExecContext& ctx_;
  QrStats* stats_;
  std::uint64_t start_;
};

}  // namespace detail

/// Modified Gram-Schmidt. Throws RankDeficient when a column's norm after
/// projection drops to sqrt(eps) times its original norm or below.
template <std::floating_point T>
QrFactors<T> gram_schmidt_qr(const Matrix<T>& a, const ExecContext& ctx = sequential_context(),
                             QrStats* stats = nullptr) {
  detail::check_qr_input(a, "gram_schmidt_qr");
  detail::StatsScope scope(ctx, stats);
  const std::size_t n = a.rows();
  const std::size_t np = a.cols();

  QrFactors<T> out{a, Matrix<T>(np, np), QrMethod::GramSchmidt, precision_of<T>};
  Matrix<T>& q = out.q;
  Matrix<T>& r = out.r;
  std::vector<T> partials(kLogicalPartitions * np);
  std::vector<T> sums(np);

  for_each_partition(ctx, n, [&](std::size_t part, IndexRange rows) {
    T* acc = partials.data() + part * np;
    std::fill(acc, acc + np, T{0});
    for (std::size_t i = rows.begin; i < rows.end; ++i) {
      const auto row = q.row(i);
      for (std::size_t j = 0; j < np; ++j) acc[j] += row[j] * row[j];
    }
  });
  combine_partials<T>(partials, np, sums);
  std::vector<T> rank_floor(np);
  for (std::size_t j = 0; j < np; ++j) rank_floor[j] = rank_tolerance_scale<T>() * std::sqrt(sums[j]);
  scope.flops += 2ull * n * np;

  for (std::size_t k = 0; k < np; ++k) {
    const T norm2 = map_reduce(
        ctx, n, T{0},
        [&](IndexRange rows) {
          T s{0};
          for (std::size_t i = rows.begin; i < rows.end; ++i) s += q(i, k) * q(i, k);
          return s;
        },
        [](T x, T y) { return x + y; });
    const T rkk = std::sqrt(norm2);
    if (!(rkk > rank_floor[k]))
      throw Error(ErrorCode::RankDeficient, "gram_schmidt_qr: column " + std::to_string(k) +
                                                " is numerically dependent on the preceding columns");
    r(k, k) = rkk;
    const std::size_t trailing = np - k - 1;
    scope.flops += 2ull * n + 1;

    // Normalize column k and accumulate its inner products with the trailing columns.
    for_each_partition(ctx, n, [&](std::size_t part, IndexRange rows) {
      T* acc = partials.data() + part * np;
      std::fill(acc, acc + trailing, T{0});
      for (std::size_t i = rows.begin; i < rows.end; ++i) {
        auto row = q.row(i);
        const T qik = row[k] / rkk;
        row[k] = qik;
        for (std::size_t t = 0; t < trailing; ++t) acc[t] += qik * row[k + 1 + t];
      }
    });
    scope.flops += n + 2ull * n * trailing;
    if (trailing == 0) continue;
    combine_partials<T>(std::span<const T>(partials), np, std::span<T>(sums));
    for (std::size_t t = 0; t < trailing; ++t) r(k, k + 1 + t) = sums[t];

    parallel_for(ctx, n, [&](IndexRange rows) {
      const T* rk = &r(k, k + 1);
      for (std::size_t i = rows.begin; i < rows.end; ++i) {
        auto row = q.row(i);
        const T qik = row[k];
        for (std::size_t t = 0; t < trailing; ++t) row[k + 1 + t] -= rk[t] * qik;
      }
    });
    scope.flops += 2ull * n * trailing;
  }
  return out;
}

/// Householder QR. Reflector vectors live below the diagonal of the working
/// matrix; the thin Q is formed afterwards by backward accumulation.
template <std::floating_point T>
QrFactors<T> householder_qr(const Matrix<T>& a, const ExecContext& ctx = sequential_context(),
                            QrStats* stats = nullptr) {
  detail::check_qr_input(a, "householder_qr");
  detail::StatsScope scope(ctx, stats);
  const std::size_t n = a.rows();
  const std::size_t np = a.cols();

  Matrix<T> w = a;
  std::vector<T> tau(np, T{0});
  std::vector<T> partials(kLogicalPartitions * np);
  std::vector<T> dots(np);

  for (std::size_t k = 0; k < np; ++k) {
    const std::size_t below = n - k - 1;
    const T below2 = map_reduce(
        ctx, below, T{0},
        [&](IndexRange rows) {
          T s{0};
          for (std::size_t i = rows.begin; i < rows.end; ++i) s += w(k + 1 + i, k) * w(k + 1 + i, k);
          return s;
        },
        [](T x, T y) { return x + y; });
    scope.flops += 2ull * below;
    if (below2 == T{0}) continue;  // already triangular in this column; H = I

    const T alpha = w(k, k);
    const T beta = -std::copysign(std::sqrt(alpha * alpha + below2), alpha);
    tau[k] = (beta - alpha) / beta;
    const T scale = T{1} / (alpha - beta);
    w(k, k) = beta;
    const std::size_t trailing = np - k - 1;

    // Scale the reflector in place and accumulate v^T W for the trailing columns.
    for_each_partition(ctx, below, [&](std::size_t part, IndexRange rows) {
      T* acc = partials.data() + part * np;
      std::fill(acc, acc + trailing, T{0});
      for (std::size_t i = rows.begin; i < rows.end; ++i) {
        auto row = w.row(k + 1 + i);
        const T v = row[k] * scale;
        row[k] = v;
        for (std::size_t t = 0; t < trailing; ++t) acc[t] += v * row[k + 1 + t];
      }
    });
    scope.flops += 6 + below + 2ull * below * trailing;
    if (trailing == 0) continue;
    combine_partials<T>(std::span<const T>(partials), np, std::span<T>(dots));
    for (std::size_t t = 0; t < trailing; ++t) dots[t] = tau[k] * (dots[t] + w(k, k + 1 + t));

    for (std::size_t t = 0; t < trailing; ++t) w(k, k + 1 + t) -= dots[t];
    parallel_for(ctx, below, [&](IndexRange rows) {
      for (std::size_t i = rows.begin; i < rows.end; ++i) {
        auto row = w.row(k + 1 + i);
        const T v = row[k];
        for (std::size_t t = 0; t < trailing; ++t) row[k + 1 + t] -= v * dots[t];
      }
    });
    scope.flops += 3ull * trailing + 2ull * below * trailing;
  }

  QrFactors<T> out{Matrix<T>(n, np), detail::upper_triangle(w), QrMethod::Householder, precision_of<T>};
  Matrix<T>& q = out.q;
  for (std::size_t j = 0; j < np; ++j) q(j, j) = T{1};

  for (std::size_t kk = np; kk-- > 0;) {
    if (tau[kk] == T{0}) continue;
    const std::size_t below = n - kk - 1;
    const std::size_t width = np - kk;
    for_each_partition(ctx, below, [&](std::size_t part, IndexRange rows) {
      T* acc = partials.data() + part * np;
      std::fill(acc, acc + width, T{0});
      for (std::size_t i = rows.begin; i < rows.end; ++i) {
        const T v = w(kk + 1 + i, kk);
        const auto qrow = q.row(kk + 1 + i);
        for (std::size_t t = 0; t < width; ++t) acc[t] += v * qrow[kk + t];
      }
    });
    combine_partials<T>(std::span<const T>(partials), np, std::span<T>(dots));
    for (std::size_t t = 0; t < width; ++t) dots[t] = tau[kk] * (dots[t] + q(kk, kk + t));
    for (std::size_t t = 0; t < width; ++t) q(kk, kk + t) -= dots[t];
    parallel_for(ctx, below, [&](IndexRange rows) {
      for (std::size_t i = rows.begin; i < rows.end; ++i) {
        const T v = w(kk + 1 + i, kk);
        auto qrow = q.row(kk + 1 + i);
        for (std::size_t t = 0; t < width; ++t) qrow[kk + t] -= v * dots[t];
      }
    });
    scope.flops += 4ull * below * width + 3ull * width;
  }

  detail::normalize_signs(out.q, out.r);
  return out;
}

/// Givens QR. Column k is annihilated below the diagonal by rotations against
/// pivot row k; the rotation sequence is generated sequentially and then
/// applied to the trailing columns in parallel. Each rotation is stored as
/// one number in the entry it zeroed, and the thin Q is formed afterwards by
/// applying the transposed rotations backwards to [I; 0].
template <std::floating_point T>
QrFactors<T> givens_qr(const Matrix<T>& a, const ExecContext& ctx = sequential_context(),
                       QrStats* stats = nullptr) {
  detail::check_qr_input(a, "givens_qr");
  detail::StatsScope scope(ctx, stats);
  const std::size_t n = a.rows();
  const std::size_t np = a.cols();

  Matrix<T> w = a;
  std::vector<T> cs(n);
  std::vector<T> sn(n);

  for (std::size_t k = 0; k < np; ++k) {
    T pivot = w(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const T b = w(i, k);
      T c{1};
      T s{0};
      if (b != T{0}) {
        const T rr = std::copysign(std::hypot(pivot, b), pivot == T{0} ? T{1} : pivot);
        c = pivot / rr;
        s = b / rr;
        pivot = rr;
      }
      cs[i] = c;
      sn[i] = s;
      w(i, k) = detail::encode_rotation(c, s);
    }
    w(k, k) = pivot;
    const std::size_t rotations = n - k - 1;
    const std::size_t trailing = np - k - 1;
    scope.flops += 6ull * rotations;

    parallel_for(ctx, trailing, [&](IndexRange cols) {
      for (std::size_t j = k + 1 + cols.begin; j < k + 1 + cols.end; ++j) {
        T top = w(k, j);
        for (std::size_t i = k + 1; i < n; ++i) {
          const T x = w(i, j);
          const T c = cs[i];
          const T s = sn[i];
          w(i, j) = c * x - s * top;
          top = c * top + s * x;
        }
        w(k, j) = top;
      }
    });
    scope.flops += 6ull * rotations * trailing;
  }

  QrFactors<T> out{Matrix<T>(n, np), detail::upper_triangle(w), QrMethod::Givens, precision_of<T>};
  Matrix<T>& q = out.q;
  for (std::size_t j = 0; j < np; ++j) q(j, j) = T{1};

  for (std::size_t kk = np; kk-- > 0;) {
    for (std::size_t i = kk + 1; i < n; ++i) detail::decode_rotation(w(i, kk), cs[i], sn[i]);
    const std::size_t width = np - kk;
    parallel_for(ctx, width, [&](IndexRange cols) {
      for (std::size_t j = kk + cols.begin; j < kk + cols.end; ++j) {
        T top = q(kk, j);
        for (std::size_t i = n; i-- > kk + 1;) {
          const T y = q(i, j);
          const T c = cs[i];
          const T s = sn[i];
          q(i, j) = s * top + c * y;
          top = c * top - s * y;
        }
        q(kk, j) = top;
      }
    });
    scope.flops += 4ull * (n - kk - 1) + 6ull * (n - kk - 1) * width;
  }

  detail::normalize_signs(out.q, out.r);
  return out;
}

template <std::floating_point T>
QrFactors<T> qr_factorize(const Matrix<T>& a, QrMethod method, const ExecContext& ctx = sequential_context(),
                          QrStats* stats = nullptr) {
  switch (method) {
    case QrMethod::Givens: return givens_qr(a, ctx, stats);
    case QrMethod::GramSchmidt: return gram_schmidt_qr(a, ctx, stats);
    case QrMethod::Householder: return householder_qr(a, ctx, stats);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown QR method");
}

/// Solves R x = rhs for upper-triangular R. Throws Singular when some
/// |R(i,i)| <= sqrt(eps) * ||R(:,i)||.
template <std::floating_point T>
std::vector<T> back_substitution(const Matrix<T>& r, std::span<const T> rhs) {
  const std::size_t np = r.rows();
  if (r.cols() != np || rhs.size() != np)
    throw Error(ErrorCode::DimensionMismatch, "back_substitution: need square R and matching rhs");
  for (std::size_t i = 0; i < np; ++i) {
    T col2{0};
    for (std::size_t k = 0; k <= i; ++k) col2 += r(k, i) * r(k, i);
    const T floor = rank_tolerance_scale<T>() * std::sqrt(col2);
    if (!(std::abs(r(i, i)) > floor) || !std::isfinite(r(i, i)))
      throw Error(ErrorCode::Singular, "back_substitution: diagonal entry " + std::to_string(i) + " is singular");
  }
  std::vector<T> x(np);
  for (std::size_t i = np; i-- > 0;) {
    T acc = rhs[i];
    for (std::size_t j = i + 1; j < np; ++j) acc -= r(i, j) * x[j];
    x[i] = acc / r(i, i);
  }
  return x;
}

}  // namespace vibid
