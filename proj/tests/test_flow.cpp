#include "bflow/error.hpp"
#include "bflow/estimate.hpp"
#include "bflow/flow.hpp"
#include "bflow/model.hpp"
#include "bflow/numerics.hpp"
#include "bflow/simulate.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace bflow;
namespace nm = bflow::numerics;

namespace {

// E(K | Y = y) and Pr(K = k | Y = 7) at λ = 0.4, t0 = 2, summed over clump
// orders at 50 digits (tests/oracles/oracles.py).
struct MeanPoint {
    double y;
    double mean;
};
constexpr MeanPoint mean_oracle[] = {
    {2.5, 2.2}, {4.0, 3.4527729767328754}, {7.0, 5.9340926784603377}, {13.3, 11.832767938453619}};
constexpr double pmf_y7[] = {0.0, 0.099890778950554319, 0.30633172211503326, 0.30633172211503328,
                             0.17921737620782122};

double mc_largest_division(int n, double u, std::size_t draws, std::mt19937_64& eng)
{
    std::uniform_real_distribution<double> unif;
    std::vector<double> pts(static_cast<std::size_t>(n));
    std::size_t hits = 0;
    for (std::size_t d = 0; d < draws; ++d) {
        for (double& p : pts) {
            p = unif(eng);
        }
        std::sort(pts.begin(), pts.end());
        double prev = 0.0;
        double widest = 0.0;
        for (double p : pts) {
            widest = std::max(widest, p - prev);
            prev = p;
        }
        widest = std::max(widest, 1.0 - prev);
        hits += widest <= u;
    }
    return static_cast<double>(hits) / static_cast<double>(draws);
}

} // namespace

TEST(TotalFlow, Simple)
{
    EXPECT_DOUBLE_EQ(expected_total_flow(0.3, 10000.0), 3000.0);
    EXPECT_EQ(expected_total_flow(0.0, 10000.0), 0.0);
    EXPECT_EQ(a_hat_1(0.0, 17, 5.0), 17.0);
    EXPECT_NEAR(a_hat_1(0.069916060352180223, 2958, 4.45), 4037.5571080435303, 1e-8);
    EXPECT_NEAR(a_hat_1(0.17643367217062953, 1821, 4.45), 3992.8914470735626, 1e-8);
    EXPECT_NEAR(a_hat_1(0.070, 2958, 4.45), 4040.0, 1.0);
    const auto s = ClumpSample::from_lengths({5.0, 7.0, 12.0}, 5.0);
    EXPECT_EQ(flow_from_lengths(0.0, s), 3.0);
    EXPECT_DOUBLE_EQ(flow_from_lengths(0.5, s), 0.5 * 24.0 + 3.0);
}

TEST(TotalFlow, EquivalenceAtTheMEstimate)
{
    for (const auto& s : {ClumpSample::from_summary(2958, 5.22, 3.07, 4.45),
                          ClumpSample::from_summary(1821, 6.76, 11.77, 4.45),
                          ClumpSample::from_lengths({5.0, 6.5, 13.2, 5.0, 8.8}, 5.0)}) {
        const double lambda = m_estimate(s).lambda_hat;
        const double n = static_cast<double>(s.n());
        const double a1 = a_hat_1(lambda, s.n(), s.mu());
        EXPECT_NEAR(a1 / (n * (1.0 + lambda * s.ybar())), 1.0, 1e-12);
        EXPECT_NEAR(a1 / flow_from_lengths(lambda, s), 1.0, 1e-12);
    }
}

TEST(TotalFlow, UnbiasedOverSimulation)
{
    double sum_true = 0.0;
    double sum_est = 0.0;
    for (std::uint64_t r = 0; r < 100; ++r) {
        const auto run = simulate_run({0.2, SegmentLaw::deterministic(5.0), 10000.0}, RandomStream(4, r));
        sum_true += static_cast<double>(run.total_arrivals);
        sum_est += a_hat_1(0.2, run.clumps.size(), 5.0);
    }
    EXPECT_NEAR(sum_true / 100.0, 2000.0, 3.0 * std::sqrt(2000.0 / 100.0));
    EXPECT_NEAR(sum_est / sum_true, 1.0, 0.01);
}

TEST(LargestDivision, ClosedValues)
{
    EXPECT_NEAR(largest_division_prob(1, 0.75), 0.5, 1e-14);
    EXPECT_NEAR(largest_division_prob(3, 0.4), 0.184, 1e-14);
    EXPECT_NEAR(largest_division_prob(5, 0.5), 0.8125, 1e-14);
    EXPECT_EQ(largest_division_prob(3, 0.2), 0.0);
    EXPECT_EQ(largest_division_prob(0, 0.5), 0.0);
    EXPECT_EQ(largest_division_prob(0, 1.0), 1.0);
    EXPECT_EQ(largest_division_prob(7, 1.5), 1.0);
    for (int n : {10, 40, 80, 150}) {
        double prev = 0.0;
        for (double u = 0.01; u < 1.0; u += 0.01) {
            const double p = largest_division_prob(n, u);
            EXPECT_GE(p, prev - 1e-12) << n << " " << u;
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
            prev = p;
        }
    }
}

TEST(LargestDivision, MonteCarlo)
{
    std::mt19937_64 eng(2718);
    const std::size_t draws = 1000000;
    for (auto [n, u] : {std::pair{1, 0.75}, std::pair{3, 0.4}, std::pair{5, 0.5}}) {
        const double p = largest_division_prob(n, u);
        const double hat = mc_largest_division(n, u, draws, eng);
        EXPECT_NEAR(hat, p, 3.0 * std::sqrt(p * (1.0 - p) / draws)) << n << " " << u;
    }
}

TEST(ConditionalOrder, Pmf)
{
    EXPECT_NEAR(conditional_order_pmf(2, 3.0, 0.4, 2.0), std::exp(-0.4), 1e-14);
    EXPECT_EQ(conditional_order_pmf(2, 4.5, 0.4, 2.0), 0.0);
    EXPECT_EQ(conditional_order_pmf(1, 2.0, 0.4, 2.0), 1.0);
    EXPECT_EQ(conditional_order_pmf(2, 2.0, 0.4, 2.0), 0.0);
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(conditional_order_pmf(3 + i, 7.0, 0.4, 2.0), pmf_y7[i], 1e-12);
    }
    EXPECT_THROW(conditional_order_pmf(0, 3.0, 0.4, 2.0), DomainError);
    EXPECT_THROW(conditional_order_pmf(2, 1.5, 0.4, 2.0), DomainError);

    for (double y : {3.0, 4.5, 7.0, 13.3, 25.1}) {
        nm::CompensatedSum<double> total;
        const int s = order_piece(y, 2.0);
        for (int k = 1; k < 400; ++k) {
            const double p = conditional_order_pmf(k, y, 0.4, 2.0);
            if (k <= s) {
                EXPECT_EQ(p, 0.0) << y << " " << k;
            }
            total += p;
        }
        EXPECT_NEAR(total.value(), 1.0, 1e-8) << y;
    }
}

TEST(ConditionalOrder, Mean)
{
    for (const auto& p : mean_oracle) {
        EXPECT_NEAR(conditional_order_mean(p.y, 0.4, 2.0), p.mean, 1e-10) << p.y;
    }
    EXPECT_EQ(conditional_order_mean(2.0, 0.4, 2.0), 1.0);
    EXPECT_NEAR(conditional_order_mean(3.0, 0.4, 2.0), 2.4, 1e-14);

    const double jump = 0.8 * std::exp(-0.8) / -std::expm1(-0.8);
    EXPECT_NEAR(jump, 0.6527, 1e-4);
    const double left = conditional_order_mean(4.0 - 1e-9, 0.4, 2.0);
    const double right = conditional_order_mean(4.0, 0.4, 2.0);
    EXPECT_NEAR(right - left, jump, 1e-8);

    const OrderMeanTable table(0.4, 2.0, 60.0);
    EXPECT_NEAR(table.on_piece(4.0, 1), 2.8, 1e-12);
    EXPECT_NEAR(table(4.0) - table.on_piece(4.0, 1), jump, 1e-10);
}

TEST(ConditionalOrder, TableMatchesSeries)
{
    for (double lambda : {0.05, 0.2, 0.4, 1.0}) {
        for (double t0 : {2.0, 5.0}) {
            const OrderMeanTable table(lambda, t0, 12.0 * t0);
            for (double y = t0; y < 14.0 * t0; y += 0.173 * t0) {
                const double exact = conditional_order_mean(y, lambda, t0);
                EXPECT_NEAR(table(y) / exact, 1.0, 1e-10) << lambda << " " << t0 << " " << y;
            }
        }
    }
}

TEST(ConditionalOrder, LawOfTotalExpectation)
{
    for (double lambda : {0.2, 0.4}) {
        for (double t0 : {2.0, 5.0}) {
            const ClumpLengthDist dist(lambda, t0);
            const double top = dist.quantile(1.0 - 1e-13);
            const OrderMeanTable table(lambda, t0, top);
            std::vector<double> knots;
            for (double y = t0; y < top; y += t0) {
                knots.push_back(y);
            }
            knots.push_back(top);
            // one piece at a time so the jump at each knot is respected
            nm::CompensatedSum<double> total(dist.singleton_mass());
            for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
                const int s = static_cast<int>(i) + 1;
                total += nm::adaptive_quadrature(
                             [&](double y) { return table.on_piece(y, s) * dist.density(y); }, knots[i],
                             knots[i + 1], 1e-12)
                             .value;
            }
            EXPECT_NEAR(total.value(), std::exp(lambda * t0), 1e-4) << lambda << " " << t0;
        }
    }
}

TEST(ConditionalOrder, MonteCarloBins)
{
    const double lambda = 0.3;
    const double t0 = 5.0;
    const auto run = simulate_run({lambda, SegmentLaw::deterministic(t0), 1e6}, RandomStream(77, 0));
    for (double center : {6.0, 8.5, 12.5, 17.5, 21.0}) {
        const double half = 0.05;
        std::vector<double> orders;
        for (const auto& c : run.clumps) {
            if (std::abs(c.length - center) <= half) {
                orders.push_back(static_cast<double>(c.order));
            }
        }
        ASSERT_GT(orders.size(), 50u) << center;
        const auto m = nm::sample_moments(orders);
        // bins are narrow but not points; allow for the slope across the bin
        const double slope = std::abs(conditional_order_mean(center + half, lambda, t0) -
                                      conditional_order_mean(center - half, lambda, t0));
        EXPECT_NEAR(m.mean, conditional_order_mean(center, lambda, t0),
                    3.0 * std::sqrt(m.variance / static_cast<double>(m.n)) + slope)
            << center;
    }
}

TEST(Interpolator, ExactWhereLinearAndAtKnots)
{
    const double step = 0.1;
    const ConditionalMeanInterpolator interp(0.4, 2.0, step, 20.0);
    for (double y = 2.0; y <= 4.0; y += 0.0137) {
        EXPECT_NEAR(interp(y), conditional_order_mean(y, 0.4, 2.0), 1e-12);
    }
    for (int i = 0; i <= 80; ++i) {
        const double y = 4.0 + i * step;
        EXPECT_NEAR(interp(y), conditional_order_mean(y, 0.4, 2.0), 1e-10) << y;
    }
    double worst = 0.0;
    for (double y = 4.0; y < 12.0; y += 0.001) {
        worst = std::max(worst, std::abs(interp(y) - conditional_order_mean(y, 0.4, 2.0)));
    }
    EXPECT_LT(worst, 0.01);
    // beyond the table the exact mean is used
    EXPECT_NEAR(interp(30.3), conditional_order_mean(30.3, 0.4, 2.0), 1e-10);
    EXPECT_NEAR(conditional_order_mean_interp(7.0, 0.4, 2.0, 0.1), 5.9340926784603377, 1e-3);
}

TEST(ABayes, Invariants)
{
    const auto singles = ClumpSample::from_lengths(std::vector<double>(25, 5.0), 5.0);
    EXPECT_EQ(a_hat_bayes(singles, 0.2, 5.0).a_hat_b, 25.0);
    const auto tiny = a_hat_bayes(singles, 1e-12, 5.0);
    EXPECT_NEAR(tiny.a_hat_b, tiny.a_hat_1, 1e-8);

    const auto run = simulate_run({0.2, SegmentLaw::deterministic(5.0), 10000.0}, RandomStream(3, 1));
    const auto sample = ClumpSample::from_lengths(run.clump_lengths(), 5.0);
    const auto report = a_hat_bayes(sample, 0.2, 5.0);
    EXPECT_GE(report.a_hat_b, static_cast<double>(sample.n()));
    ASSERT_EQ(report.per_clump_means.size(), sample.n());
    EXPECT_NEAR(report.a_hat_b, nm::compensated_total(report.per_clump_means), 1e-9);
    EXPECT_NEAR(report.a_hat_1, a_hat_1(0.2, sample.n(), 5.0), 1e-9);

    FlowOptions interp;
    interp.use_interp = true;
    const auto approx = a_hat_bayes(sample, 0.2, 5.0, interp);
    EXPECT_TRUE(approx.interpolated);
    EXPECT_NEAR(approx.a_hat_b / report.a_hat_b, 1.0, 1e-3);
}

TEST(ABayes, ShortClumps)
{
    const auto s = ClumpSample::from_lengths({4.7, 5.0, 7.0}, 5.0);
    EXPECT_THROW(a_hat_bayes(s, 0.2, 5.0), DataError);
    FlowOptions opt;
    opt.short_as_singleton = true;
    const auto r = a_hat_bayes(s, 0.2, 5.0, opt);
    EXPECT_EQ(r.short_clumps, 1u);
    EXPECT_NEAR(r.a_hat_b, 2.0 + conditional_order_mean(7.0, 0.2, 5.0), 1e-12);

    FlowOptions tol;
    tol.singleton_tol = 0.1;
    const auto t = a_hat_bayes(ClumpSample::from_lengths({5.3, 7.0}, 5.0), 0.2, 5.0, tol);
    EXPECT_NEAR(t.a_hat_b, 1.0 + conditional_order_mean(7.0, 0.2, 5.0), 1e-12);
    EXPECT_THROW(a_hat_bayes(ClumpSample::from_summary(3, 6.0, 1.0, 5.0), 0.2, 5.0), DomainError);
}

TEST(Accuracy, RrmseAndBias)
{
    const std::vector<double> truth{100.0, 200.0};
    EXPECT_EQ(rrmse(truth, truth), 0.0);
    EXPECT_EQ(relative_bias(truth, truth), 0.0);
    const std::vector<double> a{110.0};
    const std::vector<double> b{100.0};
    EXPECT_NEAR(rrmse(a, b), 0.1, 1e-15);
    EXPECT_NEAR(relative_bias(a, b), 0.1, 1e-15);
    const std::vector<double> est{90.0, 230.0};
    EXPECT_NEAR(relative_bias(est, truth), 20.0 / 300.0, 1e-15);
    EXPECT_NEAR(rrmse(est, truth), std::sqrt((100.0 + 900.0) / 2.0) / 150.0, 1e-15);
    EXPECT_THROW(rrmse(a, truth), DomainError);
}
