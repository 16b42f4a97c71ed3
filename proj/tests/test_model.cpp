#include "bflow/error.hpp"
#include "bflow/model.hpp"
#include "bflow/numerics.hpp"
#include "bflow/random.hpp"
#include "bflow/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

using namespace bflow;
namespace nm = bflow::numerics;

namespace {

// High-precision values of the continuous part at λ = 0.4, t0 = 2, summed
// over clump orders (tests/oracles/oracles.py).
struct DensityPoint {
    double y;
    double g;
};
constexpr DensityPoint density_oracle[] = {
    {3.0, 0.17973158564688864},    {4.5, 0.082821257009454045}, {5.0, 0.066669535569881612},
    {7.0, 0.01948049684315908},    {13.3, 0.00040025632087612067}, {25.0, 2.987003095410733e-7},
};

std::vector<double> knots_to(double t0, double top)
{
    std::vector<double> k;
    for (double y = t0; y < top; y += t0) {
        k.push_back(y);
    }
    k.push_back(top);
    return k;
}

SimRun long_dsl_run(double lambda, double t0, double horizon, std::uint64_t seed)
{
    return simulate_run({lambda, SegmentLaw::deterministic(t0), horizon}, RandomStream(seed, 0));
}

} // namespace

TEST(SegmentLaw, NormalWithZeroSdIsDeterministic)
{
    EXPECT_EQ(SegmentLaw::normal(5.0, 0.0), SegmentLaw::deterministic(5.0));
    EXPECT_THROW(SegmentLaw::deterministic(0.0), DomainError);
    EXPECT_THROW(SegmentLaw::normal(5.0, -1.0), DomainError);
    const auto law = SegmentLaw::normal(5.0, 1.0);
    EXPECT_NEAR(law.mean(), 5.00000148671994, 1e-12);
    EXPECT_NEAR(law.tail_integral(0.0), law.mean(), 1e-12);
}

TEST(ModelParams, Validation)
{
    EXPECT_THROW((ModelParams{0.0, SegmentLaw::deterministic(1.0), std::nullopt}.validate()), DomainError);
    EXPECT_THROW((ModelParams{0.1, SegmentLaw::deterministic(1.0), -5.0}.validate()), DomainError);
    EXPECT_NO_THROW((ModelParams{0.1, SegmentLaw::deterministic(1.0), 5.0}.validate()));
}

TEST(SingletonMass, Values)
{
    EXPECT_NEAR(singleton_mass(0.40, 2.00), 0.449328964117222, 1e-12);
    EXPECT_NEAR(singleton_mass(0.3, 5.0), 0.22313016014843, 1e-12);
    EXPECT_NEAR(singleton_mass(1e-12, 2.0), 1.0, 1e-11);
    EXPECT_EQ(singleton_mass(0.0, 2.0), 1.0);
}

TEST(DensityPiece, BoundaryConvention)
{
    EXPECT_EQ(density_piece(3.0, 2.0), 1);
    EXPECT_EQ(density_piece(4.0, 2.0), 1);
    EXPECT_EQ(density_piece(4.0 * (1 + 1e-14), 2.0), 1);
    EXPECT_EQ(density_piece(4.5, 2.0), 2);
    EXPECT_EQ(density_piece(6.0, 2.0), 2);
}

TEST(ClumpDensity, MatchesHighPrecisionOracle)
{
    const ClumpLengthDist dist(0.4, 2.0);
    for (const auto& p : density_oracle) {
        EXPECT_NEAR(clump_density(p.y, 0.4, 2.0) / p.g, 1.0, 1e-9) << "y = " << p.y;
        EXPECT_NEAR(dist.density(p.y) / p.g, 1.0, 1e-9) << "y = " << p.y;
    }
    EXPECT_NEAR(clump_density(30.0, 0.07, 4.45) / 4.133911387862184e-7, 1.0, 1e-8);
    EXPECT_NEAR(ClumpLengthDist(0.07, 4.45).density(30.0) / 4.133911387862184e-7, 1.0, 1e-8);
    EXPECT_NEAR(ClumpLengthDist(1.5, 1.0).density(60.0) / 4.8127523598277058e-17, 1.0, 1e-8);
}

TEST(ClumpDensity, ConditionalFormOnFirstPiece)
{
    const double expected = 0.4 * std::exp(-0.8) / -std::expm1(-0.8);
    EXPECT_NEAR(multi_clump_density(3.0, 0.4, 2.0), expected, 1e-14);
    EXPECT_NEAR(multi_clump_density(3.0, 0.4, 2.0), 0.32637, 5e-5);
    const auto r = nm::adaptive_quadrature([](double y) { return multi_clump_density(y, 0.4, 2.0); }, 2.0, 4.0, 1e-12);
    EXPECT_NEAR(r.value, 2.0 * expected, 1e-8);
    const auto g = nm::adaptive_quadrature([](double y) { return clump_density(y, 0.4, 2.0); }, 2.0, 4.0, 1e-12);
    EXPECT_NEAR(g.value, 2.0 * 0.4 * std::exp(-0.8), 1e-8);
}

TEST(ClumpDensity, UniformThenNonincreasing)
{
    const double height = 0.4 * std::exp(-0.8);
    for (double y = 2.01; y < 4.0; y += 0.07) {
        EXPECT_NEAR(clump_density(y, 0.4, 2.0), height, 1e-14);
    }
    for (double lambda : {0.1, 0.4, 1.0}) {
        const ClumpLengthDist dist(lambda, 2.0);
        double prev = clump_density(4.0, lambda, 2.0);
        for (double y = 4.05; y < 40.0; y += 0.05) {
            const double g = clump_density(y, lambda, 2.0);
            EXPECT_LE(g, prev + 1e-12) << "lambda " << lambda << " y " << y;
            EXPECT_NEAR(dist.density(y), g, 1e-8 * g);
            prev = g;
        }
    }
}

TEST(ClumpDensity, Errors)
{
    EXPECT_THROW(clump_density(2.0, 0.4, 2.0), DomainError);
    EXPECT_THROW(clump_density(1.0, 0.4, 2.0), DomainError);
    EXPECT_THROW(clump_density(std::nan(""), 0.4, 2.0), DomainError);
    EXPECT_THROW(clump_density(3.0, std::numeric_limits<double>::infinity(), 2.0), DomainError);
    EXPECT_THROW(clump_density(3.0, 0.4, -2.0), DomainError);
    EXPECT_EQ(clump_density(3.0, 0.0, 2.0), 0.0);
}

TEST(ClumpDensity, NormalizationByQuadrature)
{
    for (double lambda : {0.1, 0.2, 0.3, 0.4}) {
        for (double t0 : {2.0, 5.0}) {
            const ClumpLengthDist dist(lambda, t0);
            const double top = dist.quantile(1.0 - 1e-10);
            const auto knots = knots_to(t0, top);
            const auto g = [&](double y) { return clump_density(y, lambda, t0); };
            const double mass = nm::integrate_pieces(g, knots, 1e-10).value;
            EXPECT_NEAR(mass + singleton_mass(lambda, t0), 1.0, 1e-6) << lambda << ", " << t0;
        }
    }
}

TEST(ClumpDensity, MomentsByQuadrature)
{
    for (double lambda : {0.1, 0.2, 0.3, 0.4}) {
        for (double t0 : {2.0, 5.0}) {
            const ClumpLengthDist dist(lambda, t0);
            const double top = dist.quantile(1.0 - 1e-14);
            const auto knots = knots_to(t0, top);
            const double atom = dist.singleton_mass();
            const double m1 = atom * t0 +
                              nm::integrate_pieces([&](double y) { return y * dist.density(y); }, knots, 1e-11).value;
            const double m2 = atom * t0 * t0 +
                              nm::integrate_pieces([&](double y) { return y * y * dist.density(y); }, knots, 1e-10)
                                  .value;
            EXPECT_NEAR(m1, mean_clump_length(lambda, t0), 1e-5);
            EXPECT_NEAR(m2 - m1 * m1, var_clump_length_dsl(lambda, t0), 1e-4);
        }
    }
}

TEST(ClumpCdf, Values)
{
    EXPECT_NEAR(clump_cdf(4.0, 0.4, 2.0), 0.80879213541099885, 1e-9);
    EXPECT_NEAR(clump_cdf(11.0, 0.4, 2.0), 0.9973215420930095, 1e-9);
    EXPECT_LT(clump_cdf(4.0, 0.4, 2.0), 1.0);
    EXPECT_DOUBLE_EQ(clump_cdf(2.0, 0.4, 2.0), std::exp(-0.8));
    EXPECT_EQ(clump_cdf(1.9, 0.4, 2.0), 0.0);
    EXPECT_EQ(clump_cdf(std::numeric_limits<double>::infinity(), 0.4, 2.0), 1.0);

    const ClumpLengthDist dist(0.4, 2.0);
    EXPECT_NEAR(dist.cdf(4.0), 0.80879213541099885, 1e-12);
    EXPECT_NEAR(dist.cdf(11.0), 0.9973215420930095, 1e-12);
    EXPECT_EQ(dist.cdf_left(2.0), 0.0);
    EXPECT_DOUBLE_EQ(dist.cdf(2.0), std::exp(-0.8));
    double prev = 0.0;
    for (double y = 2.0; y < 30.0; y += 0.3) {
        const double f = clump_cdf(y, 0.4, 2.0);
        EXPECT_GE(f, prev);
        EXPECT_NEAR(dist.cdf(y), f, 1e-9);
        prev = f;
    }
}

TEST(ClumpLengthDist, QuantileInvertsCdf)
{
    const ClumpLengthDist dist(0.2, 5.0);
    EXPECT_EQ(dist.quantile(0.1), 5.0);
    for (double p : {0.5, 0.9, 0.999, 1.0 - 1e-9}) {
        EXPECT_NEAR(dist.cdf(dist.quantile(p)), p, 1e-10);
    }
}

TEST(ClumpLengthDist, TailRateIsTheNontrivialRoot)
{
    for (double a : {0.05, 0.5, 0.9, 1.0, 1.3, 4.0}) {
        const double t0 = 2.0;
        const double lambda = a / t0;
        const double r = clump_tail_rate(lambda, t0);
        EXPECT_NEAR(r, lambda * std::exp(-a) * std::exp(r * t0), 1e-12 * r);
        if (std::abs(a - 1.0) > 1e-3) {
            EXPECT_GT(std::abs(r - lambda), 1e-3 * lambda);
        }
        // far tail decays at that rate
        const ClumpLengthDist dist(lambda, t0);
        const double y = dist.upper() + 10.0 * t0;
        EXPECT_NEAR(dist.log_survival(y + t0) - dist.log_survival(y), -r * t0, 1e-9);
    }
}

TEST(ClumpLengthDist, SmallRateTailStaysAccurate)
{
    // λt0 small: the series oracle and the table agree far below 1e-10.
    for (double lambda : {0.01, 0.0333}) {
        const ClumpLengthDist dist(lambda, 2.0);
        for (double y : {9.0, 15.0, 23.7, 31.0}) {
            EXPECT_NEAR(dist.density(y) / clump_density(y, lambda, 2.0), 1.0, 1e-7) << lambda << " " << y;
        }
        EXPECT_TRUE(std::isfinite(dist.log_survival(5000.0)));
    }
}

TEST(ClumpLengthDist, MonteCarloAgreement)
{
    const double lambda = 0.2;
    const double t0 = 5.0;
    const auto run = long_dsl_run(lambda, t0, 1.36e7, 2024);
    const auto lengths = run.clump_lengths();
    ASSERT_GT(lengths.size(), 990000u);
    const ClumpLengthDist dist(lambda, t0);
    const double d = nm::ks_statistic(
        lengths, [&](double y) { return dist.cdf(y); }, [&](double y) { return dist.cdf_left(y); });
    EXPECT_LT(d, 0.005);

    const auto m = nm::sample_moments(lengths);
    const double n = static_cast<double>(m.n);
    EXPECT_NEAR(m.mean, mean_clump_length(lambda, t0), 3.0 * std::sqrt(m.variance / n));
    double m4 = 0.0;
    for (double y : lengths) {
        m4 += std::pow(y - m.mean, 4);
    }
    m4 /= n;
    EXPECT_NEAR(m.variance, var_clump_length_dsl(lambda, t0), 3.0 * std::sqrt((m4 - m.variance * m.variance) / n));
}

TEST(ClumpLengthDist, SmallAndLargeRateLimits)
{
    {
        const ClumpLengthDist dist(0.01, 2.0);
        const double continuous = 1.0 - dist.singleton_mass();
        const double first_piece = dist.cdf(4.0) - dist.singleton_mass();
        EXPECT_GT(first_piece / continuous, 0.99);
    }
    {
        // Above t0 the law is close to an exponential with the matched mean.
        const double lambda = 2.0;
        const double t0 = 2.0;
        const ClumpLengthDist dist(lambda, t0);
        const double excess_mean = mean_clump_length(lambda, t0) - t0;
        double worst = 0.0;
        for (double y = t0; y < 40.0 * excess_mean; y += excess_mean / 200.0) {
            const double expo = 1.0 - std::exp(-(y - t0) / excess_mean);
            worst = std::max({worst, std::abs(dist.cdf(y) - expo), std::abs(dist.cdf_left(y) - expo)});
        }
        EXPECT_LT(worst, 0.05);
    }
}

TEST(Moments, MeanClumpLength)
{
    EXPECT_NEAR(mean_clump_length(0.2, 5.0), 8.591409142295225, 1e-12);
    EXPECT_EQ(mean_clump_length(0.0, 5.0), 5.0);
    EXPECT_NEAR(mean_clump_length(1e-12, 5.0), 5.0, 1e-9);
    EXPECT_LT(mean_clump_length(-0.05, 5.0), 5.0);
    double prev = mean_clump_length(-0.5, 5.0);
    for (double l = -0.45; l < 1.0; l += 0.05) {
        const double m = mean_clump_length(l, 5.0);
        EXPECT_GT(m, prev);
        prev = m;
    }
}

TEST(Moments, RslMeanByMonteCarlo)
{
    const auto run = simulate_run({0.2, SegmentLaw::normal(5.0, 1.0), 1.36e7}, RandomStream(99, 0));
    const auto m = nm::sample_moments(run.clump_lengths());
    EXPECT_NEAR(m.mean, 8.591409142295225, 3.0 * std::sqrt(m.variance / static_cast<double>(m.n)));
}

TEST(Moments, DslVariance)
{
    const double e = std::exp(1.0);
    EXPECT_NEAR(var_clump_length_dsl(0.2, 5.0), 25.0 * (e * e - 2.0 * e - 1.0), 1e-11);
    EXPECT_NEAR(var_clump_length_dsl(0.2, 5.0), 23.8123110503, 1e-9);
    EXPECT_THROW(var_clump_length_dsl(0.0, 5.0), DomainError);
    EXPECT_THROW(var_clump_length_dsl(-0.1, 5.0), DomainError);
    // series branch against the closed form near its switch point
    EXPECT_NEAR(detail::dsl_variance_kernel(0.49), std::expm1(0.98) - 0.98 * std::exp(0.49), 1e-15);
    EXPECT_NEAR(detail::expm1_x_minus_one(0.49), std::exp(0.49) * (0.49 - 1.0) + 1.0, 1e-15);
    // λμ³/3 to leading order
    EXPECT_NEAR(var_clump_length_dsl(1e-6, 5.0) / (1e-6 * 125.0 / 3.0), 1.0, 1e-5);
}

TEST(Moments, RslVariance)
{
    EXPECT_NEAR(var_clump_length_rsl(0.2, SegmentLaw::deterministic(5.0)), var_clump_length_dsl(0.2, 5.0), 1e-6);
    EXPECT_NEAR(var_clump_length_rsl(0.2, SegmentLaw::normal(5.0, 0.0)), 23.8123110503, 1e-6);
    // Monte Carlo oracle: 26.742 with standard error 0.023 from 1.1e7 clumps.
    const double v = var_clump_length_rsl(0.2, SegmentLaw::normal(5.0, 1.0));
    EXPECT_NEAR(v, 26.742, 3.0 * 0.023);
    EXPECT_GT(v, var_clump_length_rsl(0.2, SegmentLaw::normal(5.0, 0.5)));
    EXPECT_GT(var_clump_length_rsl(0.2, SegmentLaw::normal(5.0, 0.5)), var_clump_length_dsl(0.2, 5.0));
}

TEST(LaplaceTransform, Properties)
{
    const auto law = SegmentLaw::normal(5.0, 0.5);
    EXPECT_NEAR(laplace_transform_clump(0.0, 0.2, law), 1.0, 1e-8);
    EXPECT_THROW(laplace_transform_clump(-0.1, 0.2, law), DomainError);
    const double h = 1e-4;
    const double slope =
        (4.0 * laplace_transform_clump(h, 0.2, law) - laplace_transform_clump(2.0 * h, 0.2, law) - 3.0) / (2.0 * h);
    EXPECT_NEAR(-slope, mean_clump_length(0.2, law.mean()), 1e-4);

    const auto dsl = SegmentLaw::deterministic(5.0);
    double prev = laplace_transform_clump(0.0, 0.2, dsl);
    for (double s = 0.05; s <= 1.0; s += 0.05) {
        const double g = laplace_transform_clump(s, 0.2, dsl);
        EXPECT_LT(g, prev);
        prev = g;
    }
    // deterministic segments: E e^{-sY} from the law itself
    const ClumpLengthDist dist(0.2, 5.0);
    const double s = 0.3;
    const double direct = dist.singleton_mass() * std::exp(-s * 5.0) +
                          nm::integrate_pieces([&](double y) { return std::exp(-s * y) * dist.density(y); },
                                               knots_to(5.0, dist.quantile(1.0 - 1e-14)), 1e-13)
                              .value;
    EXPECT_NEAR(laplace_transform_clump(s, 0.2, dsl), direct, 1e-9);
}

TEST(Renewal, MomentsAndCounts)
{
    const auto r = renewal_moments(0.1, 5.0);
    EXPECT_NEAR(r.mean, 16.487212707001282, 1e-10);
    EXPECT_NEAR(r.variance, 100.0 * (std::exp(1.0) - std::exp(0.5)), 1e-10);
    EXPECT_NEAR(expected_clump_count(0.1, 1000.0, 5.0), 60.653065971263345, 1e-10);
    EXPECT_NEAR(clump_count_variance(0.3, 10000.0, 5.0), 221.3, 0.05);
    EXPECT_NEAR(expected_clump_count(0.1, 1000.0, 5.0), 1000.0 / r.mean, 1e-10);
}

TEST(ClumpOrder, GeometricLaw)
{
    EXPECT_NEAR(clump_order_mean(0.3, 5.0), 4.4816890703380645, 1e-12);
    EXPECT_NEAR(clump_order_variance(0.3, 5.0), std::exp(3.0) - std::exp(1.5), 1e-10);
    EXPECT_DOUBLE_EQ(clump_order_pmf(1, 0.3, 5.0), singleton_mass(0.3, 5.0));
    nm::CompensatedSum<double> total;
    for (int k = 1; k <= 200; ++k) {
        total += clump_order_pmf(k, 0.3, 5.0);
    }
    EXPECT_NEAR(total.value(), 1.0, 1e-12);
    EXPECT_THROW(clump_order_pmf(0, 0.3, 5.0), DomainError);
}
