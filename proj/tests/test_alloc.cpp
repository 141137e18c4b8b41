#include <gtest/gtest.h>

#include "alloc_probe.hpp"
#include "vibid/footprint.hpp"
#include "vibid/oracle.hpp"
#include "vibid/qr.hpp"

using namespace vibid;

namespace {

struct Case {
  QrMethod method;
  std::size_t n;
  std::size_t np;
};

template <std::floating_point T>
std::size_t measured_peak(const Matrix<T>& a, QrMethod method) {
  const ExecContext& ctx = sequential_context();
  alloc_probe::Scope scope;
  {
    const QrFactors<T> f = qr_factorize(a, method, ctx);
    EXPECT_EQ(f.q.rows(), a.rows());
  }
  return scope.peak_growth();
}

}  // namespace

TEST(AllocProbe, TracksSimpleAllocation) {
  alloc_probe::Scope scope;
  { std::vector<char> v(100000); }
  EXPECT_GE(scope.peak_growth(), 100000u);
}

TEST(QrMemory, PeakWithinModelledFootprint) {
  const Case cases[] = {
      {QrMethod::Givens, 200, 8},       {QrMethod::GramSchmidt, 200, 8},   {QrMethod::Householder, 200, 8},
      {QrMethod::Givens, 480, 16},      {QrMethod::GramSchmidt, 480, 16},  {QrMethod::Householder, 480, 16},
      {QrMethod::Givens, 2520, 56},     {QrMethod::GramSchmidt, 2520, 56}, {QrMethod::Householder, 2520, 56},
  };
  oracle::Rng rng(3);
  for (const Case& c : cases) {
    const Matrix<float> a = oracle::random_matrix(c.n, c.np, rng).cast<float>();
    (void)sequential_context();
    const std::size_t peak = measured_peak(a, c.method);
    const double budget =
        static_cast<double>(estimate_qr_footprint(c.method, c.n, c.np).working_words) * sizeof(float) * 1.25;
    EXPECT_LE(static_cast<double>(peak), budget) << to_string(c.method) << " " << c.n << "x" << c.np;
    RecordProperty(std::string(to_string(c.method)) + "_" + std::to_string(c.n), static_cast<int>(peak));
  }
}

TEST(QrMemory, HouseholderNeverFormsSquareQ) {
  oracle::Rng rng(4);
  const Matrix<double> a = oracle::random_matrix(2000, 4, rng);
  const std::size_t peak = measured_peak(a, QrMethod::Householder);
  EXPECT_LT(peak, 2000u * 2000u * sizeof(double) / 4);
}
