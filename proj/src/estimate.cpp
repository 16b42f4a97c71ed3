#include "bflow/estimate.hpp"

#include "bflow/error.hpp"
#include "bflow/model.hpp"
#include "bflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

namespace bflow {

// ---------------------------------------------------------------------------
// ClumpSample

ClumpSample ClumpSample::from_lengths(std::vector<double> lengths, double mu, double singleton_tol,
                                      std::optional<std::vector<double>> spacings)
{
    detail::require(!lengths.empty(), "clump sample is empty");
    detail::require(std::isfinite(mu) && mu > 0.0, "mean segment length must be positive and finite");
    detail::require(std::isfinite(singleton_tol) && singleton_tol >= 0.0, "singleton tolerance must be non-negative");
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (!(std::isfinite(lengths[i]) && lengths[i] > 0.0)) {
            throw DomainError(fmt::format("clump length {} at index {} is not positive", lengths[i], i));
        }
    }
    if (spacings) {
        for (double z : *spacings) {
            detail::require(std::isfinite(z) && z >= 0.0, "spacings must be non-negative and finite");
        }
    }

    ClumpSample s;
    s.mu_ = mu;
    s.singleton_tol_ = singleton_tol;
    const auto moments = numerics::sample_moments(lengths);
    s.n_ = moments.n;
    s.ybar_ = moments.mean;
    s.s2y_ = moments.n > 1 ? moments.variance : 0.0;
    s.total_ = numerics::compensated_total(lengths);
    s.m1_ = static_cast<std::size_t>(
        std::count_if(lengths.begin(), lengths.end(), [&](double y) { return s.is_singleton(y); }));
    s.lengths_ = std::move(lengths);
    s.spacings_ = std::move(spacings);
    return s;
}

ClumpSample ClumpSample::from_summary(std::size_t n, double ybar, double s2y, double mu,
                                      std::optional<std::size_t> m1)
{
    detail::require(n >= 1, "clump sample is empty");
    detail::require(std::isfinite(ybar) && ybar > 0.0, "mean clump length must be positive");
    detail::require(std::isfinite(s2y) && s2y >= 0.0, "clump-length variance must be non-negative");
    detail::require(std::isfinite(mu) && mu > 0.0, "mean segment length must be positive and finite");
    detail::require(!m1 || *m1 <= n, "singleton count exceeds clump count");
    ClumpSample s;
    s.n_ = n;
    s.ybar_ = ybar;
    s.s2y_ = s2y;
    s.mu_ = mu;
    s.m1_ = m1;
    s.total_ = ybar * static_cast<double>(n);
    return s;
}

// ---------------------------------------------------------------------------
// M-estimator

std::string_view to_string(EstimateMethod method)
{
    switch (method) {
    case EstimateMethod::m_estimator:
        return "M";
    case EstimateMethod::mle:
        return "MLE";
    case EstimateMethod::singleton_mom:
        return "SingletonMOM";
    }
    return "unknown";
}

bool EstimateReport::has_diagnostic(std::string_view key) const
{
    return std::any_of(diagnostics.begin(), diagnostics.end(), [&](const auto& d) { return d.first == key; });
}

double solve_m_equation(double ybar, double mu)
{
    detail::require(std::isfinite(ybar) && ybar > 0.0, "mean clump length must be positive");
    detail::require(std::isfinite(mu) && mu > 0.0, "mean segment length must be positive and finite");
    if (ybar == mu) {
        return 0.0;
    }
    // log E(Y), kept finite when e^{λμ} overflows
    const numerics::ScalarFunction h = [&](double lambda) {
        const double log_mean = lambda > 0.0
                                    ? lambda * mu + std::log(-std::expm1(-lambda * mu)) - std::log(lambda)
                                    : std::log(mean_clump_length(lambda, mu));
        return log_mean - std::log(ybar);
    };
    const double start = (ybar - mu) / (2.0 * mu * mu);
    double lo = 0.0;
    double hi = 0.0;
    if (start > 0.0) {
        hi = start;
        for (int i = 0; h(hi) < 0.0; ++i) {
            if (i == 200) {
                throw NumericalError("M-estimator: no upper bracket");
            }
            lo = hi;
            hi *= 2.0;
        }
    } else {
        lo = start;
        for (int i = 0; h(lo) > 0.0; ++i) {
            if (i == 200) {
                throw NumericalError("M-estimator: no lower bracket");
            }
            hi = lo;
            lo *= 2.0;
        }
    }
    const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi));
    return numerics::find_root(h, numerics::RootBracket::make(h, lo, hi), tol);
}

EstimateReport m_estimate(const ClumpSample& sample)
{
    EstimateReport report;
    report.method = EstimateMethod::m_estimator;
    report.lambda_hat = solve_m_equation(sample.ybar(), sample.mu());
    if (report.lambda_hat < 0.0) {
        report.note("negative_estimate", "mean clump length is below the mean segment length");
    }
    if (report.lambda_hat > 0.0) {
        try {
            report.se_dsl = se_m_dsl(report.lambda_hat, sample.mu(), sample.n());
            report.se_g = se_m_general(report.lambda_hat, sample.mu(), sample.n(), sample.s2y());
        } catch (const NumericalError& e) {
            report.note("no_standard_error", e.what());
        }
    } else {
        report.note("no_standard_error", "variance formulas require a positive estimate");
    }
    return report;
}

SandwichComponents sandwich_components(double lambda, double mu)
{
    detail::require(std::isfinite(lambda) && lambda > 0.0, "flow intensity must be positive and finite");
    detail::require(std::isfinite(mu) && mu > 0.0, "mean segment length must be positive and finite");
    const double x = lambda * mu;
    return {detail::expm1_x_minus_one(x) / (lambda * lambda), var_clump_length_dsl(lambda, mu)};
}

namespace {

// λ²/(e^{λμ}(λμ - 1) + 1), formed without dividing by λ² twice.
double lambda2_over_b_numerator(double lambda, double mu)
{
    const double denom = detail::expm1_x_minus_one(lambda * mu);
    const double ratio = lambda * lambda / denom;
    if (!(denom > 0.0) || !std::isfinite(ratio) || ratio == 0.0) {
        throw NumericalError(fmt::format("standard error: λ = {} is too small for the sandwich ratio; use se_m_general",
                                         lambda));
    }
    return ratio;
}

} // namespace

double se_m_dsl(double lambda, double mu, std::size_t n)
{
    detail::require(std::isfinite(lambda) && lambda > 0.0, "flow intensity must be positive and finite");
    detail::require(std::isfinite(mu) && mu > 0.0, "mean segment length must be positive and finite");
    detail::require(n >= 1, "sample size must be positive");
    const double r = lambda2_over_b_numerator(lambda, mu);
    const double kernel = detail::dsl_variance_kernel(lambda * mu);
    // C/B² = λ⁴ (kernel/λ²) / e(x)² = (λ²/e(x))² · kernel / λ²
    const double value = r * r * kernel / (lambda * lambda) / static_cast<double>(n);
    if (!std::isfinite(value)) {
        throw NumericalError("se_m_dsl: variance ratio is not finite; use se_m_general");
    }
    return std::sqrt(value);
}

double se_m_general(double lambda, double mu, std::size_t n, double s2y)
{
    detail::require(std::isfinite(lambda) && lambda > 0.0, "flow intensity must be positive and finite");
    detail::require(std::isfinite(mu) && mu > 0.0, "mean segment length must be positive and finite");
    detail::require(n >= 1, "sample size must be positive");
    detail::require(std::isfinite(s2y) && s2y >= 0.0, "clump-length variance must be non-negative");
    const double r = lambda2_over_b_numerator(lambda, mu);
    return r * std::sqrt(s2y / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Maximum likelihood

namespace {

struct LikelihoodData {
    double t0;
    double singletons;
    std::vector<double> excess;   // y - t0 for multi-particle clumps
    double spacing_count{0.0};
    double spacing_total{0.0};
};

LikelihoodData likelihood_data(const ClumpSample& sample, bool use_spacings)
{
    if (!sample.has_lengths()) {
        throw DomainError("the likelihood needs individual clump lengths");
    }
    LikelihoodData d{sample.mu(), 0.0, {}};
    for (double y : sample.lengths()) {
        if (sample.is_singleton(y)) {
            d.singletons += 1.0;
        } else {
            d.excess.push_back(y - d.t0);
        }
    }
    if (use_spacings) {
        if (!sample.spacings()) {
            throw DomainError("spacings requested but the sample has none");
        }
        d.spacing_count = static_cast<double>(sample.spacings()->size());
        d.spacing_total = numerics::compensated_total(*sample.spacings());
    }
    return d;
}

// The multi-particle density is λe^{-λt0}·P(Y > y - t0), with the survival
// function taken from the tabulated law for the trial λ.
double log_likelihood(double lambda, const LikelihoodData& d)
{
    const ClumpLengthDist law(lambda, d.t0);
    const double multi = static_cast<double>(d.excess.size());
    numerics::CompensatedSum<double> acc{-(d.singletons + multi) * lambda * d.t0 + multi * std::log(lambda)};
    for (double x : d.excess) {
        acc += law.log_survival(x);
    }
    if (d.spacing_count > 0.0) {
        acc += d.spacing_count * std::log(lambda) - lambda * d.spacing_total;
    }
    return acc.value();
}

constexpr double lambda_floor = 1e-6;
constexpr int profile_points = 48;

std::vector<double> log_grid(double lo, double hi)
{
    std::vector<double> g(profile_points);
    const double step = std::log(hi / lo) / (profile_points - 1);
    for (int i = 0; i < profile_points; ++i) {
        g[i] = lo * std::exp(step * i);
    }
    g.back() = hi;
    return g;
}

} // namespace

double log_likelihood_dsl(double lambda, const ClumpSample& sample, bool use_spacings)
{
    detail::require(std::isfinite(lambda) && lambda > 0.0, "flow intensity must be positive and finite");
    return log_likelihood(lambda, likelihood_data(sample, use_spacings));
}

EstimateReport mle_dsl(const ClumpSample& sample, const MleOptions& options)
{
    detail::require(options.level > 0.0 && options.level < 1.0, "confidence level must lie in (0, 1)");
    const auto data = likelihood_data(sample, options.use_spacings);
    const auto ell = [&](double lambda) { return log_likelihood(lambda, data); };

    EstimateReport report;
    report.method = EstimateMethod::mle;

    double start = 0.0;
    try {
        start = solve_m_equation(sample.ybar(), sample.mu());
    } catch (const Error&) {
        start = 0.0;
    }
    if (!(start > 0.0)) {
        start = 0.1 / data.t0;
    }

    double lo = std::max(lambda_floor, start / 10.0);
    double hi = start * 10.0;
    std::vector<double> grid;
    std::vector<double> profile;
    int peak = 0;
    for (int widen = 0;; ++widen) {
        if (widen == 60) {
            throw NumericalError("MLE: the likelihood maximum could not be bracketed");
        }
        grid = log_grid(lo, hi);
        profile.resize(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            profile[i] = ell(grid[i]);
        }
        peak = static_cast<int>(std::max_element(profile.begin(), profile.end()) - profile.begin());
        if (peak == profile_points - 1) {
            hi *= 2.0;
            continue;
        }
        if (peak == 0 && lo > lambda_floor) {
            lo = std::max(lambda_floor, lo / 2.0);
            continue;
        }
        break;
    }

    // Unimodality: the slope of the profile may change sign once.
    double scale = 0.0;
    for (double v : profile) {
        scale = std::max(scale, std::abs(v));
    }
    int changes = 0;
    int last_sign = 0;
    for (std::size_t i = 1; i < profile.size(); ++i) {
        const double diff = profile[i] - profile[i - 1];
        if (std::abs(diff) <= 1e-10 * scale) {
            continue;
        }
        const int sign = diff > 0.0 ? 1 : -1;
        if (last_sign != 0 && sign != last_sign) {
            ++changes;
        }
        last_sign = sign;
    }
    if (changes > 1) {
        std::string dump;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            dump += fmt::format("\n  {:.8g}\t{:.12g}", grid[i], profile[i]);
        }
        throw NumericalError("MLE: log-likelihood profile is not unimodal (lambda, loglik):" + dump);
    }

    if (peak == 0) {
        report.lambda_hat = lambda_floor;
        report.note("boundary", "likelihood is maximised at the lower search bound");
    } else {
        const auto neg = [&](double lambda) { return -ell(lambda); };
        const auto [arg, value] = boost::math::tools::brent_find_minima(
            neg, grid[peak - 1], grid[peak + 1], std::numeric_limits<double>::digits / 2);
        (void)value;
        report.lambda_hat = arg;
    }

    const double best = ell(report.lambda_hat);
    const double half_crit = 0.5 * numerics::chi2_quantile_1df(options.level);
    const numerics::ScalarFunction drop = [&](double lambda) { return best - ell(lambda) - half_crit; };
    const double tol = 1e-10 * report.lambda_hat;

    double lower = lambda_floor;
    if (report.lambda_hat > lambda_floor && drop(lambda_floor) > 0.0) {
        double inner = report.lambda_hat;
        double outer = report.lambda_hat / 2.0;
        while (outer > lambda_floor && drop(outer) <= 0.0) {
            inner = outer;
            outer /= 2.0;
        }
        outer = std::max(outer, lambda_floor);
        lower = numerics::find_root(drop, numerics::RootBracket::make(drop, outer, inner), tol);
    } else {
        report.note("lrt_lower_at_floor", "likelihood-ratio interval reaches the lower search bound");
    }
    double inner = report.lambda_hat;
    double outer = report.lambda_hat * 2.0;
    for (int i = 0; drop(outer) <= 0.0; ++i) {
        if (i == 60) {
            throw NumericalError("MLE: upper likelihood-ratio limit not found");
        }
        inner = outer;
        outer *= 2.0;
    }
    const double upper = numerics::find_root(drop, numerics::RootBracket::make(drop, inner, outer), tol);
    report.ci_lrt = Interval{lower, upper};
    return report;
}

// ---------------------------------------------------------------------------
// Singleton moment estimator

EstimateReport singleton_mom(const ClumpSample& sample, double t0)
{
    detail::require(std::isfinite(t0) && t0 > 0.0, "segment length must be positive and finite");
    if (!sample.m1()) {
        throw DomainError("singleton count is unknown");
    }
    const auto m1 = *sample.m1();
    if (m1 == 0) {
        throw DomainError("no singletons: the singleton estimator is undefined");
    }
    const double frac = static_cast<double>(m1) / static_cast<double>(sample.n());
    EstimateReport report;
    report.method = EstimateMethod::singleton_mom;
    report.lambda_hat = -std::log(frac) / t0;
    report.se_dsl = std::sqrt((1.0 - frac) / static_cast<double>(m1)) / t0;
    return report;
}

Interval wald_interval(const EstimateReport& report, double level, SeKind which)
{
    detail::require(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
    const auto& se = which == SeKind::dsl ? report.se_dsl : report.se_g;
    if (!se) {
        throw DomainError(fmt::format("{} standard error is not available", which == SeKind::dsl ? "DSL" : "general"));
    }
    const double z = numerics::normal_quantile(0.5 * (1.0 + level));
    return {report.lambda_hat - z * *se, report.lambda_hat + z * *se};
}

} // namespace bflow
