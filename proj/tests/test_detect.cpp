#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vibid/detect.hpp"
#include "vibid/oracle.hpp"

using namespace vibid;

namespace {

Spectrum<double> make_spectrum(std::vector<double> psd, double fs = 1.0) {
  Spectrum<double> s;
  s.freqs = frequency_grid(psd.size(), fs);
  s.psd = std::move(psd);
  return s;
}

PeakSet peaks_at(std::initializer_list<double> freqs) {
  PeakSet s;
  for (double f : freqs) s.peaks.push_back({0, f, 1.0, 1.0});
  return s;
}

SysIdModel<double> ar2_model(double f0, double radius, double fs) {
  SysIdModel<double> m;
  m.spec = ModelSpec::ar(1, 100);
  for (double b : oracle::ar2_from_pole(f0, radius, fs)) m.theta.push_back(-b);
  m.sigma2 = 1.0;
  return m;
}

// O(L^2) reference: every strict local maximum, prominence by scanning each
// side for the lowest point before a strictly higher bin.
std::vector<std::pair<std::size_t, double>> brute_force_peaks(const std::vector<double>& p, double ratio) {
  const double gmax = *std::max_element(p.begin(), p.end());
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    if (!(p[i] > p[i - 1] && p[i] > p[i + 1])) continue;
    double lmin = p[i];
    for (std::size_t j = 0; j < i; ++j) {
      bool blocked = false;
      for (std::size_t k = j + 1; k < i; ++k) blocked = blocked || p[k] > p[i];
      if (!blocked && !(p[j] > p[i])) lmin = std::min(lmin, p[j]);
    }
    double rmin = p[i];
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      bool blocked = false;
      for (std::size_t k = i + 1; k < j; ++k) blocked = blocked || p[k] > p[i];
      if (!blocked && !(p[j] > p[i])) rmin = std::min(rmin, p[j]);
    }
    const double prom = p[i] - std::max(lmin, rmin);
    if (prom > 0.0 && prom >= ratio * gmax) out.emplace_back(i, prom);
  }
  return out;
}

}  // namespace

TEST(FindPeaks, FlatSpectrumHasNone) {
  EXPECT_TRUE(find_peaks(make_spectrum(std::vector<double>(256, 3.0))).peaks.empty());
}

TEST(FindPeaks, SinglePoleSpectrum) {
  const double fs = 100.0;
  const auto spec = psd_ar(ar2_model(12.0, 0.95, fs), fs);
  const auto set = find_peaks(spec);
  ASSERT_EQ(set.peaks.size(), 1u);
  EXPECT_NEAR(set.peaks[0].freq_hz, 12.0, fs / 4096.0);
}

TEST(FindPeaks, ProminenceThresholdDropsSmallLobe) {
  std::vector<double> p(200, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = static_cast<double>(i);
    p[i] = 1e-3 + std::exp(-0.5 * std::pow((x - 50.0) / 4.0, 2)) + 0.3 * std::exp(-0.5 * std::pow((x - 140.0) / 4.0, 2));
  }
  const auto spec = make_spectrum(p);
  EXPECT_EQ(find_peaks(spec, {0.5, 8}).peaks.size(), 1u);
  EXPECT_EQ(find_peaks(spec, {0.05, 8}).peaks.size(), 2u);
}

TEST(FindPeaks, MaxPeaksKeepsMostProminent) {
  std::vector<double> p(100, 0.0);
  const double heights[] = {1.0, 5.0, 2.0, 4.0, 3.0};
  for (std::size_t k = 0; k < 5; ++k) p[10 + 20 * k] = heights[k];
  const auto set = find_peaks(make_spectrum(p), {0.0, 3});
  ASSERT_EQ(set.peaks.size(), 3u);
  EXPECT_EQ(set.peaks[0].bin, 30u);
  EXPECT_EQ(set.peaks[1].bin, 70u);
  EXPECT_EQ(set.peaks[2].bin, 90u);
}

TEST(FindPeaks, SortedAscendingAndStrictMaxima) {
  oracle::Rng rng(17);
  std::vector<double> p(300);
  for (double& v : p) v = 1.0 + rng.uniform();
  const auto spec = make_spectrum(p);
  const auto set = find_peaks(spec, {0.05, 1000});
  for (std::size_t k = 0; k < set.peaks.size(); ++k) {
    const std::size_t i = set.peaks[k].bin;
    EXPECT_GT(p[i], p[i - 1]);
    EXPECT_GT(p[i], p[i + 1]);
    if (k > 0) {
      EXPECT_LT(set.peaks[k - 1].freq_hz, set.peaks[k].freq_hz);
    }
  }
}

TEST(FindPeaks, MatchesBruteForce) {
  oracle::Rng rng(18);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t l = 16 + rng.next_u64() % 497;
    std::vector<double> p(l);
    for (double& v : p) v = std::exp(2.0 * rng.normal());
    const double ratio = trial % 2 ? 0.0 : 0.05;
    const auto set = find_peaks(make_spectrum(p), {ratio, 100000});
    const auto ref = brute_force_peaks(p, ratio);
    ASSERT_EQ(set.peaks.size(), ref.size()) << "L=" << l;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      EXPECT_EQ(set.peaks[k].bin, ref[k].first);
      EXPECT_DOUBLE_EQ(set.peaks[k].prominence, ref[k].second);
    }
  }
}

TEST(MatchPeaks, IdenticalSets) {
  const auto m = match_peaks(peaks_at({4.0, 8.0, 13.0}), peaks_at({4.0, 8.0, 13.0}));
  ASSERT_EQ(m.pairs.size(), 3u);
  for (const auto& p : m.pairs) EXPECT_EQ(p.delta_f_percent, 0.0);
  EXPECT_TRUE(m.unmatched_healthy.empty());
  EXPECT_TRUE(m.unmatched_test.empty());
}

TEST(MatchPeaks, ShiftedPeaks) {
  const auto m = match_peaks(peaks_at({4.0, 13.0}), peaks_at({3.96, 11.8}));
  ASSERT_EQ(m.pairs.size(), 2u);
  EXPECT_NEAR(m.pairs[0].delta_f_percent, 1.0, 1e-12);
  EXPECT_NEAR(m.pairs[1].delta_f_percent, 100.0 * (1.0 - 11.8 / 13.0), 1e-12);
  EXPECT_NEAR(m.pairs[1].delta_f_percent, 9.23, 0.01);
}

TEST(MatchPeaks, DisappearingPeakIsUnmatched) {
  const auto m = match_peaks(peaks_at({4.0, 8.0, 13.0}), peaks_at({4.0, 13.0}));
  ASSERT_EQ(m.pairs.size(), 2u);
  ASSERT_EQ(m.unmatched_healthy.size(), 1u);
  EXPECT_EQ(m.unmatched_healthy[0].freq_hz, 8.0);
}

TEST(MatchPeaks, GreedyPrefersClosest) {
  const auto m = match_peaks(peaks_at({10.0, 10.5}), peaks_at({10.4}));
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].healthy.freq_hz, 10.5);
}

TEST(DeltaF, Identity) {
  EXPECT_NEAR(delta_f_percent(10.0, 9.5), 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(delta_f_percent(10.0, 10.0), 0.0);
}

TEST(Isd, EqualSpectraGiveZero) {
  const auto a = make_spectrum({1.0, 2.0, 3.0});
  EXPECT_EQ(isd(a, a), 0.0);
}

TEST(Isd, ConstantRatio) {
  oracle::Rng rng(19);
  std::vector<double> p(1000);
  for (double& v : p) v = 0.01 + rng.uniform();
  std::vector<double> p2 = p;
  for (double& v : p2) v *= 2.0;
  EXPECT_NEAR(isd(make_spectrum(p2), make_spectrum(p)), 2.0 - std::log(2.0) - 1.0, 1e-12);
  EXPECT_NEAR(isd(make_spectrum(p2), make_spectrum(p)), 0.306853, 1e-6);
}

TEST(Isd, NonNegativeAndZeroOnlyWhenEqual) {
  oracle::Rng rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(128), b(128);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = 0.1 + rng.uniform();
      b[i] = a[i];
    }
    b[rng.next_u64() % b.size()] *= 1.0 + 1e-3 * (1.0 + rng.uniform());
    EXPECT_GT(isd(make_spectrum(a), make_spectrum(b)), 0.0);
    EXPECT_GT(isd(make_spectrum(b), make_spectrum(a)), 0.0);
  }
}

TEST(Isd, Asymmetric) {
  const auto a = make_spectrum({1.0, 4.0});
  const auto b = make_spectrum({2.0, 1.0});
  EXPECT_NE(isd(a, b), isd(b, a));
}

TEST(Isd, Errors) {
  const auto a = make_spectrum({1.0, 2.0});
  const auto b = make_spectrum({1.0, 2.0, 3.0});
  try {
    isd(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
  EXPECT_THROW(isd(make_spectrum({1.0, 2.0}, 1.0), make_spectrum({1.0, 2.0}, 2.0)), Error);
  try {
    isd(make_spectrum({1.0, 0.0}), a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveBin);
  }
  EXPECT_THROW(isd(make_spectrum({1.0, 1e-31}), a), Error);
}

TEST(Assess, SameModelNoAlarm) {
  const auto m = ar2_model(10.0, 0.95, 100.0);
  const auto rep = assess(m, m, 100.0);
  EXPECT_FALSE(rep.alarm);
  ASSERT_FALSE(rep.matching.pairs.empty());
  for (const auto& p : rep.matching.pairs) EXPECT_EQ(p.delta_f_percent, 0.0);
}

TEST(Assess, FivePercentPoleShift) {
  const double fs = 100.0;
  const auto rep = assess(ar2_model(10.0, 0.97, fs), ar2_model(9.5, 0.97, fs), fs);
  ASSERT_EQ(rep.matching.pairs.size(), 1u);
  const double bin_pct = 100.0 * (fs / 4096.0) / 10.0;
  EXPECT_NEAR(rep.max_delta_f, 5.0, 2 * bin_pct);
  EXPECT_TRUE(rep.alarm);
  EXPECT_EQ(rep.dominant_delta_f, rep.matching.pairs[0].delta_f_percent);
}

TEST(Assess, ThresholdOfHundredNeverAlarmsOnShift) {
  const double fs = 100.0;
  AssessConfig cfg;
  cfg.threshold_percent = 100.0;
  cfg.policy = AlarmPolicy::ShiftOnly;
  const auto rep = assess(ar2_model(10.0, 0.97, fs), ar2_model(8.0, 0.97, fs), fs, cfg);
  ASSERT_EQ(rep.matching.pairs.size(), 1u);
  EXPECT_FALSE(rep.alarm);
}

TEST(Assess, MissingPeakPolicy) {
  AssessConfig cfg;
  const auto h = peaks_at({4.0, 8.0});
  const auto t = peaks_at({4.0});
  EXPECT_TRUE(assess_peaks(h, t, cfg).alarm);
  cfg.policy = AlarmPolicy::ShiftOnly;
  EXPECT_FALSE(assess_peaks(h, t, cfg).alarm);
}

TEST(Assess, AlarmMatchesThresholdInvariant) {
  AssessConfig cfg;
  cfg.policy = AlarmPolicy::ShiftOnly;
  for (double shift : {0.0, 1.0, 1.99, 2.0, 3.0, 10.0}) {
    const auto rep = assess_peaks(peaks_at({10.0}), peaks_at({10.0 * (1.0 - shift / 100.0)}), cfg);
    EXPECT_EQ(rep.alarm, rep.max_delta_f >= cfg.threshold_percent) << shift;
  }
}

TEST(Assess, ScaleInvariance) {
  const double fs = 100.0;
  auto h = ar2_model(10.0, 0.97, fs);
  auto t = ar2_model(9.0, 0.97, fs);
  const auto base = assess(h, t, fs);
  h.sigma2 *= 7.0;
  t.sigma2 *= 7.0;
  const auto scaled = assess(h, t, fs);
  ASSERT_EQ(base.matching.pairs.size(), scaled.matching.pairs.size());
  for (std::size_t k = 0; k < base.matching.pairs.size(); ++k)
    EXPECT_EQ(base.matching.pairs[k].delta_f_percent, scaled.matching.pairs[k].delta_f_percent);
}

TEST(Assess, KindMismatchRejected) {
  SysIdModel<double> arma;
  arma.spec = ModelSpec::arma(2, 1, 100, 3);
  arma.theta = {0.1, 0.1, 1.0, 0.0};
  arma.sigma2 = 1.0;
  EXPECT_THROW(assess(ar2_model(10.0, 0.9, 100.0), arma, 100.0), Error);
}
