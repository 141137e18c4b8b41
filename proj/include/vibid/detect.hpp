#pragma once

// Spectral damage detection: prominence-based peak picking, healthy/test
// peak matching, frequency-shift indicator and Itakura-Saito divergence.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <vector>

#include "vibid/error.hpp"
#include "vibid/spectrum.hpp"
#include "vibid/sysid.hpp"

namespace vibid {

struct Peak {
  std::size_t bin = 0;
  double freq_hz = 0.0;
  double magnitude = 0.0;
  double prominence = 0.0;
};

struct PeakSet {
  std::vector<Peak> peaks;  // ascending freq_hz
};

struct PeakConfig {
  double min_prominence_ratio = 0.05;
  std::size_t max_peaks = 8;
};

/// Height of bin i above the higher of its two flanking minima. Each flank
/// extends until a strictly higher bin or the edge of the spectrum.
template <class Seq>
double peak_prominence(const Seq& psd, std::size_t i) {
  const double h = static_cast<double>(psd[i]);
  double left_min = h;
  for (std::size_t j = i; j-- > 0;) {
    const double v = static_cast<double>(psd[j]);
    if (v > h) break;
    left_min = std::min(left_min, v);
  }
  double right_min = h;
  for (std::size_t j = i + 1; j < psd.size(); ++j) {
    const double v = static_cast<double>(psd[j]);
    if (v > h) break;
    right_min = std::min(right_min, v);
  }
  return h - std::max(left_min, right_min);
}

template <std::floating_point T>
PeakSet find_peaks(const Spectrum<T>& spec, const PeakConfig& cfg = {}) {
  PeakSet out;
  const auto& psd = spec.psd;
  if (psd.size() < 3 || cfg.max_peaks == 0) return out;
  const double global_max = static_cast<double>(*std::max_element(psd.begin(), psd.end()));
  const double min_prominence = cfg.min_prominence_ratio * global_max;

  std::vector<Peak> candidates;
  for (std::size_t i = 1; i + 1 < psd.size(); ++i) {
    if (!(psd[i] > psd[i - 1] && psd[i] > psd[i + 1])) continue;
    const double prom = peak_prominence(psd, i);
    if (prom > 0.0 && prom >= min_prominence)
      candidates.push_back({i, spec.freqs[i], static_cast<double>(psd[i]), prom});
  }
  if (candidates.size() > cfg.max_peaks) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Peak& a, const Peak& b) { return a.prominence > b.prominence; });
    candidates.resize(cfg.max_peaks);
    std::sort(candidates.begin(), candidates.end(), [](const Peak& a, const Peak& b) { return a.bin < b.bin; });
  }
  out.peaks = std::move(candidates);
  return out;
}

inline double delta_f_percent(double f_safe, double f_def) { return 100.0 * (1.0 - f_def / f_safe); }

struct PeakPair {
  Peak healthy;
  Peak test;
  double delta_f_percent = 0.0;
};

struct PeakMatching {
  std::vector<PeakPair> pairs;  // ascending healthy frequency
  std::vector<Peak> unmatched_healthy;
  std::vector<Peak> unmatched_test;
};

/// Greedy nearest-frequency matching: candidate pairs within the relative
/// window |f_test - f_healthy| <= max_rel_shift * f_healthy are accepted in
/// order of increasing distance, each peak used at most once.
inline PeakMatching match_peaks(const PeakSet& healthy, const PeakSet& test, double max_rel_shift = 0.25) {
  struct Candidate {
    double distance;
    std::size_t h;
    std::size_t t;
  };
  std::vector<Candidate> candidates;
  for (std::size_t h = 0; h < healthy.peaks.size(); ++h) {
    const double fh = healthy.peaks[h].freq_hz;
    for (std::size_t t = 0; t < test.peaks.size(); ++t) {
      const double d = std::abs(test.peaks[t].freq_hz - fh);
      if (d <= max_rel_shift * std::abs(fh)) candidates.push_back({d, h, t});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });

  std::vector<bool> used_h(healthy.peaks.size(), false);
  std::vector<bool> used_t(test.peaks.size(), false);
  PeakMatching out;
  for (const Candidate& c : candidates) {
    if (used_h[c.h] || used_t[c.t]) continue;
    used_h[c.h] = used_t[c.t] = true;
    const Peak& ph = healthy.peaks[c.h];
    const Peak& pt = test.peaks[c.t];
    out.pairs.push_back({ph, pt, delta_f_percent(ph.freq_hz, pt.freq_hz)});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const PeakPair& a, const PeakPair& b) { return a.healthy.freq_hz < b.healthy.freq_hz; });
  for (std::size_t h = 0; h < healthy.peaks.size(); ++h)
    if (!used_h[h]) out.unmatched_healthy.push_back(healthy.peaks[h]);
  for (std::size_t t = 0; t < test.peaks.size(); ++t)
    if (!used_t[t]) out.unmatched_test.push_back(test.peaks[t]);
  return out;
}

/// Itakura-Saito divergence (1/L) sum [r - ln r - 1], r = a/b. Not symmetric.
template <std::floating_point A, std::floating_point B>
double isd(const Spectrum<A>& a, const Spectrum<B>& b) {
  constexpr double kMinBin = 1e-30;
  if (a.psd.size() != b.psd.size() || a.freqs != b.freqs)
    throw Error(ErrorCode::GridMismatch, "isd: spectra are on different frequency grids");
  if (a.psd.empty()) throw Error(ErrorCode::GridMismatch, "isd: empty spectra");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.psd.size(); ++i) {
    const double x = static_cast<double>(a.psd[i]);
    const double y = static_cast<double>(b.psd[i]);
    if (!(x > kMinBin) || !(y > kMinBin) || !std::isfinite(x) || !std::isfinite(y))
      throw Error(ErrorCode::NonPositiveBin, "isd: bin " + std::to_string(i) + " is not strictly positive");
    const double r = x / y;
    acc += r - std::log(r) - 1.0;
  }
  return acc / static_cast<double>(a.psd.size());
}

enum class AlarmPolicy { ShiftOnly, ShiftOrMissing };

struct AssessConfig {
  PeakConfig peaks;
  double max_rel_shift = 0.25;
  double threshold_percent = 2.0;
  AlarmPolicy policy = AlarmPolicy::ShiftOrMissing;
  PsdOptions psd;
};

struct DamageReport {
  PeakMatching matching;
  double min_delta_f = 0.0;  // smallest |dF| over matched pairs
  double max_delta_f = 0.0;  // largest |dF| over matched pairs
  /// dF of the pair whose healthy peak is the most energetic matched one.
  double dominant_delta_f = 0.0;
  bool alarm = false;
  double threshold_percent = 2.0;
};

inline DamageReport assess_peaks(const PeakSet& healthy, const PeakSet& test, const AssessConfig& cfg) {
  DamageReport rep;
  rep.threshold_percent = cfg.threshold_percent;
  rep.matching = match_peaks(healthy, test, cfg.max_rel_shift);
  const auto& pairs = rep.matching.pairs;
  if (!pairs.empty()) {
    rep.min_delta_f = std::numeric_limits<double>::infinity();
    double best_mag = -1.0;
    for (const PeakPair& p : pairs) {
      const double d = std::abs(p.delta_f_percent);
      rep.min_delta_f = std::min(rep.min_delta_f, d);
      rep.max_delta_f = std::max(rep.max_delta_f, d);
      if (p.healthy.magnitude > best_mag) {
        best_mag = p.healthy.magnitude;
        rep.dominant_delta_f = p.delta_f_percent;
      }
    }
  }
  rep.alarm = !pairs.empty() && rep.max_delta_f >= cfg.threshold_percent;
  if (cfg.policy == AlarmPolicy::ShiftOrMissing && !rep.matching.unmatched_healthy.empty()) rep.alarm = true;
  return rep;
}

template <std::floating_point T>
DamageReport assess_spectra(const Spectrum<T>& healthy, const Spectrum<T>& test, const AssessConfig& cfg) {
  return assess_peaks(find_peaks(healthy, cfg.peaks), find_peaks(test, cfg.peaks), cfg);
}

template <std::floating_point T>
DamageReport assess(const SysIdModel<T>& healthy, const SysIdModel<T>& test, double sample_rate_hz,
                    const AssessConfig& cfg = {}, const ExecContext& ctx = sequential_context()) {
  if (healthy.spec.kind != test.spec.kind)
    throw Error(ErrorCode::InvalidArgument, "assess: models must be of the same kind");
  const Spectrum<T> a = model_psd(healthy, sample_rate_hz, cfg.psd, nullptr, ctx);
  const Spectrum<T> b = model_psd(test, sample_rate_hz, cfg.psd, nullptr, ctx);
  return assess_spectra(a, b, cfg);
}

}  // namespace vibid
