#include <gtest/gtest.h>

#include <cmath>

#include "bootdelta/datagen.hpp"
#include "bootdelta/metrics.hpp"
#include "bootdelta/parallel.hpp"
#include "bootdelta/stats.hpp"

using namespace bootdelta;

TEST(Sample, Ar1WithZeroRhoIsStandardNormal) {
  Engine rng = make_stream(51);
  const auto x = sample(Ar1Model{0.0}, 10000, rng);
  const double ks = weighted_ks(ecdf(x), ModelCDF::normal(), WeightFunction(0.0)).value;
  EXPECT_LT(ks, ks_critical_value(0.01, 10000.0));
}

TEST(Sample, Ar1LagOneAutocorrelation) {
  Engine rng = make_stream(52);
  const auto x = sample(Ar1Model{0.5}, 100000, rng);
  const double m = mean(x);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    den += (x[t] - m) * (x[t] - m);
    if (t + 1 < x.size()) num += (x[t] - m) * (x[t + 1] - m);
  }
  EXPECT_NEAR(num / den, 0.5, 0.01);
}

TEST(Sample, Ar1StationaryVariance) {
  Engine rng = make_stream(53);
  const auto x = sample(Ar1Model{0.5}, 200000, rng);
  EXPECT_NEAR(sample_variance(x), 4.0 / 3.0, 0.02 * 4.0 / 3.0);
}

TEST(Sample, Ar1ExactStationarityAtStartAndLater) {
  const double rho = 0.7;
  const ModelCDF F = *true_cdf(Ar1Model{rho});
  std::vector<double> first(10000);
  std::vector<double> later(10000);
  for (std::size_t r = 0; r < first.size(); ++r) {
    Engine rng = make_stream(54, StreamTag::Data, r);
    const auto x = sample(Ar1Model{rho}, 1000, rng);
    first[r] = x.front();
    later[r] = x.back();
  }
  const double crit = ks_critical_value(0.01, 10000.0);
  EXPECT_LT(weighted_ks(ecdf(first), F, WeightFunction(0.0)).value, crit);
  EXPECT_LT(weighted_ks(ecdf(later), F, WeightFunction(0.0)).value, crit);
}

TEST(Sample, IidModelsMatchTheirLaws) {
  for (const auto& F : {ModelCDF::uniform(-1.0, 2.0), ModelCDF::student_t(3.0), ModelCDF::normal(1.0, 0.5)}) {
    Engine rng = make_stream(55);
    const auto x = sample(IidModel{F}, 10000, rng);
    EXPECT_LT(weighted_ks(ecdf(x), F, WeightFunction(0.0)).value, ks_critical_value(0.01, 10000.0)) << F.name();
  }
}

TEST(Sample, GarchUnconditionalVariance) {
  const Garch11Model g{0.1, 0.1, 0.8};
  Engine rng = make_stream(56);
  const auto x = sample(g, 200000, rng);
  EXPECT_NEAR(sample_variance(x), 1.0, 0.1);
}

TEST(Sample, InvalidParametersRejected) {
  Engine rng = make_stream(57);
  EXPECT_THROW(sample(Ar1Model{1.0}, 10, rng), Error);
  EXPECT_THROW(sample(Garch11Model{0.1, 0.5, 0.6}, 10, rng), Error);
  EXPECT_THROW(sample(Garch11Model{0.0, 0.1, 0.1}, 10, rng), Error);
  EXPECT_THROW(sample(IidModel{ModelCDF::normal()}, 0, rng), Error);
}

TEST(Sample, DeterministicPerStreamAcrossThreads) {
  const std::size_t reps = 16;
  std::vector<std::vector<double>> serial(reps);
  std::vector<std::vector<double>> threaded(reps);
  auto fill = [&](std::vector<std::vector<double>>& out, std::size_t threads) {
    parallel_for(reps, threads, [&](std::size_t r) {
      Engine rng = make_stream(58, StreamTag::Data, 100, r);
      out[r] = sample(Ar1Model{0.4}, 50, rng);
    });
  };
  fill(serial, 1);
  fill(threaded, 4);
  EXPECT_EQ(serial, threaded);
}

TEST(TrueCdf, Models) {
  EXPECT_EQ(*true_cdf(IidModel{ModelCDF::uniform(0.0, 1.0)}), ModelCDF::uniform(0.0, 1.0));
  const ModelCDF ar = *true_cdf(Ar1Model{0.6});
  EXPECT_DOUBLE_EQ(ar.variance(), 1.0 / 0.64);
  EXPECT_EQ(ar.mean(), 0.0);
  EXPECT_FALSE(true_cdf(Garch11Model{0.1, 0.1, 0.8}).has_value());
}

TEST(MomentCheck, NormalAlwaysFinite) {
  for (double lambda : {0.0, 1.0, 3.0}) {
    const auto r = moment_check(IidModel{ModelCDF::normal()}, WeightFunction(lambda), 2.0);
    EXPECT_TRUE(r.finite);
    EXPECT_TRUE(std::isfinite(r.value));
  }
  // E[(1 + |Z|)^2] = 1 + 2 sqrt(2/pi) + 1.
  const auto r = moment_check(IidModel{ModelCDF::normal()}, WeightFunction(1.0), 2.0);
  EXPECT_NEAR(r.value, 2.0 + 2.0 * std::sqrt(2.0 / std::numbers::pi), 1e-8);
}

TEST(MomentCheck, StudentTailExponentComparison) {
  EXPECT_FALSE(moment_check(IidModel{ModelCDF::student_t(3.0)}, WeightFunction(1.0), 4.0).finite);
  const auto r = moment_check(IidModel{ModelCDF::student_t(5.0)}, WeightFunction(1.0), 2.0);
  EXPECT_TRUE(r.finite);
  EXPECT_EQ(r.distribution_tail_exponent, 5.0);
  EXPECT_EQ(r.weight_tail_exponent, 2.0);
}

TEST(MomentCheck, GarchIsHeuristic) {
  const auto r = moment_check(Garch11Model{0.1, 0.1, 0.8}, WeightFunction(1.0), 2.0, 7, 20000);
  EXPECT_TRUE(r.heuristic);
  EXPECT_EQ(r.empirical_sample_size, 20000u);
  EXPECT_TRUE(r.finite);
}
