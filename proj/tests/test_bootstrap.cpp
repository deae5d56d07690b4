#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bootdelta/bootstrap.hpp"
#include "bootdelta/metrics.hpp"
#include "bootdelta/rng.hpp"

using namespace bootdelta;

namespace {

double sum_of(const WeightVector& w) { return std::accumulate(w.values.begin(), w.values.end(), 0.0); }

}  // namespace

TEST(EfronWeights, SingleCell) {
  Engine rng = make_stream(1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(efron_weights(1, rng).values, std::vector<double>{1.0});
}

TEST(EfronWeights, IntegerEntriesSummingToN) {
  Engine rng = make_stream(2);
  for (std::size_t n : {5u, 17u, 100u}) {
    for (int i = 0; i < 100; ++i) {
      const WeightVector w = efron_weights(n, rng);
      EXPECT_EQ(sum_of(w), static_cast<double>(n));
      for (double v : w.values) EXPECT_EQ(v, std::floor(v));
    }
  }
}

TEST(EfronWeights, RejectsZeroLength) {
  Engine rng = make_stream(3);
  EXPECT_THROW(efron_weights(0, rng), Error);
}

TEST(EfronWeights, FirstWeightHasUnitMean) {
  Engine rng = make_stream(4);
  double s = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) s += efron_weights(4, rng)[0];
  EXPECT_NEAR(s / draws, 1.0, 0.02);
}

TEST(BayesianWeights, SingleCell) {
  Engine rng = make_stream(5);
  for (int i = 0; i < 20; ++i) EXPECT_DOUBLE_EQ(bayesian_weights(1, rng)[0], 1.0);
}

TEST(BayesianWeights, SumIsN) {
  Engine rng = make_stream(6);
  for (int i = 0; i < 200; ++i) EXPECT_NEAR(sum_of(bayesian_weights(50, rng)), 50.0, 1e-9 * 50.0);
}

TEST(BayesianWeights, HalfOfFirstWeightIsUniformForTwoCells) {
  // Y1 / (Y1 + Y2) is U(0,1) for i.i.d. exponentials.
  Engine rng = make_stream(7);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = 0.5 * bayesian_weights(2, rng)[0];
  const double ks = weighted_ks(ecdf(draws), ModelCDF::uniform(0.0, 1.0), WeightFunction(0.0)).value;
  EXPECT_LT(ks, ks_critical_value(0.01, static_cast<double>(draws.size())));
}

TEST(CircularBlockWeights, ForcedStartsWithoutWrap) {
  const std::vector<std::size_t> starts{1, 3};
  EXPECT_EQ(circular_block_weights_from_starts(4, 2, starts).values, (std::vector<double>{1, 1, 1, 1}));
}

TEST(CircularBlockWeights, ForcedStartsWrapAround) {
  const std::vector<std::size_t> starts{4, 4};
  EXPECT_EQ(circular_block_weights_from_starts(4, 2, starts).values, (std::vector<double>{2, 0, 0, 2}));
}

TEST(CircularBlockWeights, SumIsBlocksTimesLength) {
  Engine rng = make_stream(8);
  for (std::size_t n : {7u, 10u, 33u, 200u})
    for (std::size_t ell : {1u, 2u, 3u, 6u}) {
      if (ell >= n) continue;
      for (int i = 0; i < 50; ++i) {
        const WeightVector w = circular_block_weights(n, ell, rng);
        EXPECT_EQ(sum_of(w), static_cast<double>((n / ell) * ell));
      }
    }
}

TEST(CircularBlockWeights, RejectsBadArguments) {
  Engine rng = make_stream(9);
  EXPECT_THROW(circular_block_weights(4, 4, rng), Error);
  EXPECT_THROW(circular_block_weights(4, 0, rng), Error);
  const std::vector<std::size_t> wrong_count{1};
  EXPECT_THROW(circular_block_weights_from_starts(4, 2, wrong_count), Error);
  const std::vector<std::size_t> out_of_range{0, 5};
  EXPECT_THROW(circular_block_weights_from_starts(4, 2, out_of_range), Error);
}

TEST(BootstrapScheme, BlockLengthRule) {
  EXPECT_EQ(BootstrapScheme::circular(0.2).block_length_for(800), static_cast<std::size_t>(std::ceil(std::pow(800.0, 0.2))));
  EXPECT_EQ(BootstrapScheme::circular(0.5).block_length_for(100), 10u);
  EXPECT_EQ(BootstrapScheme::circular_fixed(20).block_length_for(2000), 20u);
}

TEST(BootstrapScheme, MeanWeightPerPosition) {
  const std::size_t n = 10;
  const int draws = 20000;
  const std::vector<BootstrapScheme> schemes{BootstrapScheme::efron(), BootstrapScheme::bayesian(),
                                             BootstrapScheme::circular_fixed(3)};
  for (const auto& scheme : schemes) {
    Engine rng = make_stream(10, StreamTag::User, static_cast<std::uint64_t>(scheme.kind));
    std::vector<double> s(n, 0.0);
    std::vector<double> s2(n, 0.0);
    for (int d = 0; d < draws; ++d) {
      const WeightVector w = draw_weights(scheme, n, rng);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] += w[i];
        s2[i] += w[i] * w[i];
      }
    }
    const std::size_t ell = scheme.kind == SchemeKind::CircularBlock ? 3 : 1;
    const double expected = scheme.kind == SchemeKind::CircularBlock ? static_cast<double>((n / ell) * ell) / n : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mean = s[i] / draws;
      const double se = std::sqrt((s2[i] / draws - mean * mean) / draws);
      EXPECT_NEAR(mean, expected, 3.0 * se + 1e-12) << to_string(scheme.kind) << " position " << i;
    }
  }
}

TEST(BootstrapScheme, PairExchangeability) {
  // (W1, W2) and (W2, W1) have the same law; compare W1 - W2 with W2 - W1.
  const std::vector<BootstrapScheme> schemes{BootstrapScheme::efron(), BootstrapScheme::bayesian(),
                                             BootstrapScheme::circular_fixed(2)};
  for (const auto& scheme : schemes) {
    Engine a = make_stream(11, StreamTag::User, 1);
    Engine b = make_stream(11, StreamTag::User, 2);
    std::vector<double> forward(100000);
    std::vector<double> backward(100000);
    for (std::size_t i = 0; i < forward.size(); ++i) {
      const WeightVector wa = draw_weights(scheme, 6, a);
      const WeightVector wb = draw_weights(scheme, 6, b);
      forward[i] = wa[0] + 0.5 * wa[1];
      backward[i] = wb[1] + 0.5 * wb[0];
    }
    const double n_eff = forward.size() / 2.0;
    EXPECT_LT(two_sample_ks(forward, backward), ks_critical_value(0.01, n_eff)) << to_string(scheme.kind);
  }
}

TEST(BootstrapScheme, SameSeedSameWeights) {
  for (const auto& scheme : {BootstrapScheme::efron(), BootstrapScheme::bayesian(), BootstrapScheme::circular(0.3)}) {
    Engine a = make_stream(12, StreamTag::Bootstrap, 5, 7);
    Engine b = make_stream(12, StreamTag::Bootstrap, 5, 7);
    EXPECT_EQ(draw_weights(scheme, 50, a).values, draw_weights(scheme, 50, b).values);
  }
}

TEST(BootstrapEcdf, SinglePoint) {
  const std::vector<double> x{5.0};
  EXPECT_EQ(bootstrap_ecdf(x, WeightVector{{1.0}}), ecdf(x));
}

TEST(BootstrapEcdf, ResampleCollapse) {
  const std::vector<double> x{1.0, 2.0};
  const StepFunction F = bootstrap_ecdf(x, WeightVector{{2.0, 0.0}});
  EXPECT_EQ(F.knots(), std::vector<double>{1.0});
  EXPECT_EQ(F.levels(), std::vector<double>{1.0});
}

TEST(BootstrapEcdf, CircularWrapTrace) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const std::vector<std::size_t> starts{4, 4};
  const StepFunction F = bootstrap_ecdf(x, circular_block_weights_from_starts(4, 2, starts));
  EXPECT_EQ(F, StepFunction({1.0, 4.0}, {0.5, 1.0}, 0.0));
}

TEST(BootstrapEcdf, UnitWeightsReproduceEcdf) {
  Engine rng = make_stream(13);
  std::normal_distribution<double> z;
  std::vector<double> x(57);
  for (auto& v : x) v = z(rng);
  x[3] = x[10];
  EXPECT_EQ(bootstrap_ecdf(x, WeightVector{std::vector<double>(x.size(), 1.0)}), ecdf(x));
}

TEST(BootstrapEcdf, LengthMismatch) {
  const std::vector<double> x{1.0, 2.0};
  EXPECT_THROW(bootstrap_ecdf(x, WeightVector{{1.0}}), Error);
}

TEST(BootstrapEcdf, CircularMassDeficit) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
  const std::vector<std::size_t> starts{2, 5};
  const StepFunction F = bootstrap_ecdf(x, circular_block_weights_from_starts(5, 2, starts));
  EXPECT_DOUBLE_EQ(F.final_level(), 4.0 / 5.0);
}

TEST(ValidateCircularParams, AllConditionsHold) {
  const auto d = validate_circular_params(4.0, 3.0, 0.2);
  EXPECT_TRUE(d.passed());
  EXPECT_TRUE(d.mixing_ok);
  EXPECT_TRUE(d.block_ok);
}

TEST(ValidateCircularParams, MixingRateTooSlow) {
  const auto d = validate_circular_params(4.0, 1.5, 0.2);
  EXPECT_FALSE(d.passed());
  EXPECT_FALSE(d.mixing_ok);
  ASSERT_EQ(d.violations.size(), 1u);
  EXPECT_EQ(d.violations[0].rfind("(b)", 0), 0u);
  EXPECT_NE(d.violations[0].find("2"), std::string::npos);
}

TEST(ValidateCircularParams, BlockExponentTooLarge) {
  const auto d = validate_circular_params(3.0, 4.0, 0.3);
  EXPECT_FALSE(d.passed());
  EXPECT_FALSE(d.block_ok);
  ASSERT_EQ(d.violations.size(), 1u);
  EXPECT_EQ(d.violations[0].rfind("(c)", 0), 0u);
  EXPECT_NE(d.violations[0].find("0.25"), std::string::npos);
}

TEST(ValidateCircularParams, GeometricMixingAndRejectedMomentOrder) {
  EXPECT_TRUE(validate_circular_params(4.0, std::numeric_limits<double>::infinity(), 0.2).passed());
  EXPECT_THROW(validate_circular_params(2.0, 3.0, 0.1), Error);
}
