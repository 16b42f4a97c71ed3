#include "bflow/error.hpp"
#include "bflow/model.hpp"
#include "bflow/numerics.hpp"
#include "bflow/simulate.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

using namespace bflow;
namespace nm = bflow::numerics;

namespace {

std::int64_t order_total(const SimRun& run)
{
    std::int64_t total = run.residual_open ? run.residual_order : 0;
    for (const auto& c : run.clumps) {
        total += c.order;
    }
    return total;
}

} // namespace

TEST(ClumpSweep, WorkedExample)
{
    const std::vector<double> arrivals{1.9, 5.9, 6.8, 7.5, 11.6, 12.8, 17.1};
    const std::vector<double> segments(arrivals.size(), 2.0);
    const auto sweep = clump_from_arrivals(arrivals, segments, 20.0);

    ASSERT_EQ(sweep.clumps.size(), 4u);
    const std::vector<double> lengths{2.0, 3.6, 3.2, 2.0};
    const std::vector<double> spacings{1.9, 2.0, 2.1, 2.3};
    const std::vector<std::int64_t> orders{1, 3, 2, 1};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(sweep.clumps[i].length, lengths[i], 1e-12);
        EXPECT_NEAR(sweep.spacings[i], spacings[i], 1e-12);
        EXPECT_EQ(sweep.clumps[i].order, orders[i]);
    }
    EXPECT_EQ(sweep.clumps[0].length, 2.0);
    EXPECT_FALSE(sweep.residual_open);
}

TEST(ClumpSweep, ResidualClumpIsExcluded)
{
    const std::vector<double> arrivals{1.0, 18.5, 19.0};
    const std::vector<double> segments(3, 2.0);
    const auto sweep = clump_from_arrivals(arrivals, segments, 20.0);
    ASSERT_EQ(sweep.clumps.size(), 1u);
    EXPECT_EQ(sweep.spacings.size(), 1u);
    EXPECT_TRUE(sweep.residual_open);
    EXPECT_EQ(sweep.residual_order, 2);
}

TEST(ClumpSweep, SingleArrivalAndNesting)
{
    {
        const std::vector<double> a{3.0};
        const std::vector<double> s{1.5};
        const auto sweep = clump_from_arrivals(a, s, 10.0);
        ASSERT_EQ(sweep.clumps.size(), 1u);
        EXPECT_EQ(sweep.clumps[0], (Clump{3.0, 1.5, 1}));
        EXPECT_EQ(sweep.spacings[0], 3.0);
    }
    {
        const std::vector<double> a{1.0, 2.0};
        const std::vector<double> s{5.0, 1.0};
        const auto sweep = clump_from_arrivals(a, s, 10.0);
        ASSERT_EQ(sweep.clumps.size(), 1u);
        EXPECT_EQ(sweep.clumps[0].length, 5.0);
        EXPECT_EQ(sweep.clumps[0].order, 2);
    }
}

TEST(ClumpSweep, ZeroArrivals)
{
    const auto sweep = clump_from_arrivals({}, {}, 20.0);
    EXPECT_TRUE(sweep.clumps.empty());
    EXPECT_TRUE(sweep.spacings.empty());
    EXPECT_FALSE(sweep.residual_open);
}

TEST(ClumpSweep, InvalidInput)
{
    const std::vector<double> unsorted{2.0, 1.0};
    const std::vector<double> s2(2, 1.0);
    EXPECT_THROW(clump_from_arrivals(unsorted, s2, 10.0), DomainError);
    const std::vector<double> a{1.0};
    EXPECT_THROW(clump_from_arrivals(a, s2, 10.0), DomainError);
    const std::vector<double> zero{0.0};
    EXPECT_THROW(clump_from_arrivals(a, zero, 10.0), DomainError);
    const std::vector<double> late{11.0};
    const std::vector<double> s1{1.0};
    EXPECT_THROW(clump_from_arrivals(late, s1, 10.0), DomainError);
}

TEST(SimulateRun, RequiresHorizonAndPositiveRate)
{
    EXPECT_THROW(simulate_run({0.2, SegmentLaw::deterministic(5.0), std::nullopt}, RandomStream(1, 0)), DomainError);
    EXPECT_THROW(simulate_run({0.0, SegmentLaw::deterministic(5.0), 100.0}, RandomStream(1, 0)), DomainError);
}

TEST(SimulateRun, InvariantsOnManyRuns)
{
    for (std::uint64_t r = 0; r < 50; ++r) {
        for (double sigma : {0.0, 1.0}) {
            const auto run = simulate_run({0.3, SegmentLaw::normal(5.0, sigma), 1000.0}, RandomStream(17, r));
            EXPECT_EQ(order_total(run), run.total_arrivals);
            EXPECT_EQ(static_cast<std::int64_t>(run.arrivals.size()), run.total_arrivals);
            EXPECT_EQ(run.spacings.size(), run.clumps.size());
            EXPECT_TRUE(std::is_sorted(run.arrivals.begin(), run.arrivals.end()));
            for (std::size_t i = 1; i < run.clumps.size(); ++i) {
                EXPECT_GT(run.clumps[i].start, run.clumps[i - 1].start + run.clumps[i - 1].length);
            }
            // members are contiguous in arrival order
            std::size_t first = 0;
            for (const auto& c : run.clumps) {
                const auto last = first + static_cast<std::size_t>(c.order);
                double longest = 0.0;
                for (std::size_t i = first; i < last; ++i) {
                    longest = std::max(longest, run.segment_lengths[i]);
                }
                EXPECT_GE(c.length, longest);
                EXPECT_EQ(c.start, run.arrivals[first]);
                first = last;
            }
            if (sigma == 0.0) {
                for (const auto& c : run.clumps) {
                    EXPECT_EQ(c.length == 5.0, c.order == 1);
                }
            }
        }
    }
}

TEST(SimulateRun, Deterministic)
{
    const ModelParams p{0.2, SegmentLaw::normal(5.0, 0.5), 2000.0};
    const auto a = simulate_run(p, RandomStream(7, 3));
    const auto b = simulate_run(p, RandomStream(7, 3));
    EXPECT_EQ(a.arrivals, b.arrivals);
    EXPECT_EQ(a.clumps, b.clumps);
    const auto c = simulate_run(p, RandomStream(7, 4));
    EXPECT_NE(a.arrivals, c.arrivals);
}

TEST(SimulateRun, ArrivalsSharedAcrossSegmentLaws)
{
    const auto a = simulate_run({0.2, SegmentLaw::deterministic(5.0), 2000.0}, RandomStream(7, 3));
    const auto b = simulate_run({0.2, SegmentLaw::normal(5.0, 1.0), 2000.0}, RandomStream(7, 3));
    EXPECT_EQ(a.arrivals, b.arrivals);
    // a longer horizon extends the same stream
    const auto c = simulate_run({0.2, SegmentLaw::deterministic(5.0), 4000.0}, RandomStream(7, 3));
    ASSERT_GE(c.arrivals.size(), a.arrivals.size());
    EXPECT_TRUE(std::equal(a.arrivals.begin(), a.arrivals.end(), c.arrivals.begin()));
}

TEST(SimulateRun, OrderLawIsGeometric)
{
    const double lambda = 0.2;
    const double t0 = 5.0;
    const auto run = simulate_run({lambda, SegmentLaw::deterministic(t0), 1.5e6}, RandomStream(11, 0));
    const auto n = static_cast<double>(run.clumps.size());
    ASSERT_GT(n, 1e5);

    std::map<std::int64_t, double> counts;
    for (const auto& c : run.clumps) {
        counts[c.order] += 1.0;
    }
    const double p1 = singleton_mass(lambda, t0);
    EXPECT_NEAR(counts[1] / n, p1, 3.0 * std::sqrt(p1 * (1.0 - p1) / n));

    // pool the upper tail so every expected count is at least 5
    double chi2 = 0.0;
    int bins = 0;
    double tail_observed = n;
    double tail_expected = n;
    for (std::int64_t k = 1;; ++k) {
        const double expected = n * clump_order_pmf(static_cast<int>(k), lambda, t0);
        if (tail_expected - expected < 5.0) {
            break;
        }
        const double observed = counts[k];
        chi2 += (observed - expected) * (observed - expected) / expected;
        tail_observed -= observed;
        tail_expected -= expected;
        ++bins;
    }
    chi2 += (tail_observed - tail_expected) * (tail_observed - tail_expected) / tail_expected;
    ++bins;
    EXPECT_GT(nm::chi2_survival(chi2, bins - 1), 0.001);
}

TEST(SimulateRun, SpacingsAreExponential)
{
    const double lambda = 0.3;
    std::vector<double> pooled;
    for (std::uint64_t r = 0; r < 20; ++r) {
        const auto run = simulate_run({lambda, SegmentLaw::normal(5.0, 0.5), 10000.0}, RandomStream(5, r));
        pooled.insert(pooled.end(), run.spacings.begin(), run.spacings.end());
    }
    const double d = nm::ks_statistic(pooled, [&](double z) { return z <= 0.0 ? 0.0 : -std::expm1(-lambda * z); });
    EXPECT_LT(d, 1.63 / std::sqrt(static_cast<double>(pooled.size())));
}

TEST(SimulateRun, MeanClumpLengthBothModels)
{
    for (double sigma : {0.0, 1.0}) {
        const auto run = simulate_run({0.2, SegmentLaw::normal(5.0, sigma), 2e6}, RandomStream(23, 0));
        const auto m = nm::sample_moments(run.clump_lengths());
        const double expected = mean_clump_length(0.2, SegmentLaw::normal(5.0, sigma).mean());
        EXPECT_NEAR(m.mean, expected, 3.0 * std::sqrt(m.variance / static_cast<double>(m.n))) << sigma;
    }
}

TEST(Design, CrossedLayout)
{
    const auto design = ExperimentDesign::crossed(500, 1);
    const auto cells = design.cells();
    ASSERT_EQ(cells.size(), 18u);
    EXPECT_EQ(cells.front().sigma, 0.0);
    EXPECT_EQ(cells.front().horizon, 1000.0);
    EXPECT_EQ(cells.front().lambda, 0.1);
    EXPECT_EQ(cells[1].lambda, 0.2);
    EXPECT_EQ(cells[3].horizon, 10000.0);
    EXPECT_EQ(cells.back().sigma, 1.0);

    auto bad = design;
    bad.replicates = 0;
    EXPECT_THROW(bad.validate(), DomainError);
    bad = design;
    bad.sigmas.push_back(-0.1);
    EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Design, ResultsIndependentOfThreads)
{
    ExperimentDesign design;
    design.lambdas = {0.3};
    design.horizons = {1000.0};
    design.sigmas = {0.0, 0.5};
    design.replicates = 12;
    design.master_seed = 99;
    const auto a = run_design(design, 1);
    const auto b = run_design(design, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t c = 0; c < a.size(); ++c) {
        for (std::size_t r = 0; r < design.replicates; ++r) {
            const auto& x = a[c].replicates[r];
            const auto& y = b[c].replicates[r];
            EXPECT_EQ(x.total_arrivals, y.total_arrivals);
            EXPECT_TRUE(std::ranges::equal(x.sample.lengths(), y.sample.lengths()));
        }
    }
    // common random numbers: both σ cells see the same arrivals
    EXPECT_EQ(a[0].replicates[5].total_arrivals, a[1].replicates[5].total_arrivals);
}

TEST(Design, MeanClumpCount)
{
    ExperimentDesign design;
    design.lambdas = {0.3};
    design.horizons = {10000.0};
    design.sigmas = {0.0};
    design.replicates = 200;
    design.master_seed = 42;
    const auto cells = run_design(design, 4);
    double total = 0.0;
    for (const auto& r : cells[0].replicates) {
        total += static_cast<double>(r.sample.n());
    }
    const double mean = total / 200.0;
    // sd of N(t) is about 14.9, so 3 MC SEs is about 3.2
    EXPECT_NEAR(mean, expected_clump_count(0.3, 10000.0, 5.0), 3.5);
}
