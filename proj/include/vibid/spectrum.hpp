#pragma once

// Analytic power spectral density of fitted AR / ARMA models.
//
// Grid: L points f_i = i * fs / (2L), i = 0 .. L-1, covering [0, fs/2).
// The phase of lag m at bin i is pi * (i*m mod 2L) / L, reduced in integer
// arithmetic so that no rounding accumulates along the grid.

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

#include "vibid/error.hpp"
#include "vibid/model.hpp"
#include "vibid/parallel.hpp"
#include "vibid/sysid.hpp"

namespace vibid {

enum class TrigMode { Reference, Nearest, Linear };

inline std::string_view to_string(TrigMode m) noexcept {
  switch (m) {
    case TrigMode::Reference: return "none";
    case TrigMode::Nearest: return "nearest";
    case TrigMode::Linear: return "linear";
  }
  return "?";
}

/// Quarter-period cosine table: entry(i) = cos(i * pi / (2T)) for i in [0, T].
/// Only the first T samples are stored; entry(T) is the exact zero at pi/2.
template <std::floating_point T>
class TrigTable {
 public:
  static constexpr std::size_t kDefaultResolution = 512;

  explicit TrigTable(std::size_t resolution = kDefaultResolution) : entries_(resolution) {
    if (resolution < 1) throw Error(ErrorCode::InvalidArgument, "TrigTable: resolution must be >= 1");
    const double step = std::numbers::pi / (2.0 * static_cast<double>(resolution));
    for (std::size_t i = 0; i < resolution; ++i) entries_[i] = static_cast<T>(std::cos(step * static_cast<double>(i)));
  }

  std::size_t resolution() const noexcept { return entries_.size(); }
  T entry(std::size_t i) const noexcept {
    if (i < entries_.size()) return entries_[i];
    return T{0};
  }
  std::span<const T> stored() const noexcept { return entries_; }
  std::size_t storage_bytes() const noexcept { return entries_.size() * sizeof(T); }

 private:
  std::vector<T> entries_;
};

template <std::floating_point T>
struct SinCos {
  T cos;
  T sin;
};

namespace detail {

// Table value at integer position idx on the full-period grid of 4T steps.
template <std::floating_point T>
SinCos<T> fold_quadrant(const TrigTable<T>& table, std::size_t idx) {
  const std::size_t quarter = table.resolution();
  idx %= 4 * quarter;
  const std::size_t quadrant = idx / quarter;
  const std::size_t r = idx % quarter;
  const T a = table.entry(r);
  const T b = table.entry(quarter - r);
  switch (quadrant) {
    case 0: return {a, b};
    case 1: return {-b, a};
    case 2: return {-a, -b};
    default: return {b, -a};
  }
}

}  // namespace detail

/// cos and sin of `phase` from the quarter-period table. Nearest mode rounds
/// to the closest grid phase; linear mode interpolates between neighbours.
/// Both are exact at grid phases.
template <std::floating_point T>
SinCos<T> trig_lookup(const TrigTable<T>& table, double phase, TrigMode mode = TrigMode::Nearest) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (mode == TrigMode::Reference) return {static_cast<T>(std::cos(phase)), static_cast<T>(std::sin(phase))};
  double reduced = std::fmod(phase, two_pi);
  if (reduced < 0.0) reduced += two_pi;
  const double steps = 4.0 * static_cast<double>(table.resolution());
  const double pos = reduced / two_pi * steps;
  if (mode == TrigMode::Nearest) return detail::fold_quadrant(table, static_cast<std::size_t>(std::llround(pos)));
  const double base = std::floor(pos);
  const T frac = static_cast<T>(pos - base);
  const auto i0 = static_cast<std::size_t>(base);
  const SinCos<T> lo = detail::fold_quadrant(table, i0);
  if (frac == T{0}) return lo;
  const SinCos<T> hi = detail::fold_quadrant(table, i0 + 1);
  return {lo.cos + frac * (hi.cos - lo.cos), lo.sin + frac * (hi.sin - lo.sin)};
}

template <std::floating_point T>
struct Spectrum {
  std::vector<T> psd;
  std::vector<double> freqs;
  std::size_t saturated_bins = 0;

  std::size_t l_points() const noexcept { return psd.size(); }
};

inline std::vector<double> frequency_grid(std::size_t l_points, double sample_rate_hz) {
  std::vector<double> f(l_points);
  for (std::size_t i = 0; i < l_points; ++i)
    f[i] = static_cast<double>(i) * sample_rate_hz / (2.0 * static_cast<double>(l_points));
  return f;
}

struct PsdOptions {
  std::size_t l_points = 2048;
  TrigMode trig = TrigMode::Linear;
  /// Bins whose denominator |A|^2 falls to 1/ratio or below are clamped to ratio * sigma2.
  double saturation_ratio = 1e12;
};

/// PSD(f) = sigma2 * |1 + sum_{s=0}^{p} alpha_s e^{-jws}|^2 / |1 + sum_{j} beta_j e^{-jw(j+1)}|^2.
/// An empty `ma` means a pure AR numerator of 1.
template <std::floating_point T>
Spectrum<T> psd_from_polynomials(std::span<const T> ar, std::span<const T> ma, T sigma2, double sample_rate_hz,
                                 const PsdOptions& opts = {}, std::type_identity_t<const TrigTable<T>*> table = nullptr,
                                 const ExecContext& ctx = sequential_context()) {
  const std::size_t l = opts.l_points;
  if (l < 2) throw Error(ErrorCode::InvalidArgument, "psd: l_points must be >= 2");
  if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "psd: sample rate must be positive");
  if (!(sigma2 >= T{0}) || !std::isfinite(sigma2)) throw Error(ErrorCode::NonFinite, "psd: invalid noise variance");

  std::optional<TrigTable<T>> owned;
  if (opts.trig != TrigMode::Reference && table == nullptr) table = &owned.emplace();

  Spectrum<T> spec;
  spec.psd.assign(l, T{0});
  spec.freqs = frequency_grid(l, sample_rate_hz);
  const std::size_t period = 2 * l;
  const double phase_step = std::numbers::pi / static_cast<double>(l);
  const T floor = static_cast<T>(1.0 / opts.saturation_ratio);
  const T ceiling = static_cast<T>(opts.saturation_ratio) * sigma2;

  auto unit = [&](std::size_t idx) -> SinCos<T> {
    const double phase = phase_step * static_cast<double>(idx);
    if (opts.trig == TrigMode::Reference) return {static_cast<T>(std::cos(phase)), static_cast<T>(std::sin(phase))};
    return trig_lookup(*table, phase, opts.trig);
  };

  std::array<std::size_t, kLogicalPartitions> saturated{};
  for_each_partition(ctx, l, [&](std::size_t part, IndexRange bins) {
    for (std::size_t i = bins.begin; i < bins.end; ++i) {
      // e^{-jwm} = cos - j sin
      T den_re{1};
      T den_im{0};
      for (std::size_t j = 0; j < ar.size(); ++j) {
        const SinCos<T> e = unit((i * (j + 1)) % period);
        den_re += ar[j] * e.cos;
        den_im -= ar[j] * e.sin;
      }
      T num2{1};
      if (!ma.empty()) {
        T num_re{1};
        T num_im{0};
        for (std::size_t s = 0; s < ma.size(); ++s) {
          const SinCos<T> e = unit((i * s) % period);
          num_re += ma[s] * e.cos;
          num_im -= ma[s] * e.sin;
        }
        num2 = num_re * num_re + num_im * num_im;
      }
      const T den2 = den_re * den_re + den_im * den_im;
      if (den2 <= floor) {
        spec.psd[i] = ceiling;
        ++saturated[part];
      } else {
        spec.psd[i] = sigma2 * num2 / den2;
      }
    }
  });
  for (std::size_t c : saturated) spec.saturated_bins += c;
  return spec;
}

template <std::floating_point T>
Spectrum<T> psd_ar(const SysIdModel<T>& model, double sample_rate_hz, const PsdOptions& opts = {},
                   std::type_identity_t<const TrigTable<T>*> table = nullptr, const ExecContext& ctx = sequential_context()) {
  if (model.spec.kind != ModelKind::AR) throw Error(ErrorCode::InvalidArgument, "psd_ar: model is not AR");
  const std::vector<T> beta = model.ar_polynomial();
  return psd_from_polynomials<T>(beta, {}, model.sigma2, sample_rate_hz, opts, table, ctx);
}

template <std::floating_point T>
Spectrum<T> psd_arma(const SysIdModel<T>& model, double sample_rate_hz, const PsdOptions& opts = {},
                     std::type_identity_t<const TrigTable<T>*> table = nullptr, const ExecContext& ctx = sequential_context()) {
  if (model.spec.kind != ModelKind::ARMA) throw Error(ErrorCode::InvalidArgument, "psd_arma: model is not ARMA");
  const std::vector<T> beta = model.ar_polynomial();
  const std::vector<T> alpha = model.ma_polynomial();
  return psd_from_polynomials<T>(beta, alpha, model.sigma2, sample_rate_hz, opts, table, ctx);
}

template <std::floating_point T>
Spectrum<T> model_psd(const SysIdModel<T>& model, double sample_rate_hz, const PsdOptions& opts = {},
                      std::type_identity_t<const TrigTable<T>*> table = nullptr, const ExecContext& ctx = sequential_context()) {
  return model.spec.kind == ModelKind::AR ? psd_ar(model, sample_rate_hz, opts, table, ctx)
                                          : psd_arma(model, sample_rate_hz, opts, table, ctx);
}

}  // namespace vibid
