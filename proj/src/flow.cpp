#include "bflow/flow.hpp"

#include "bflow/error.hpp"
#include "bflow/numerics.hpp"
#include "chebyshev.hpp"
#include "series.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <fmt/format.h>

namespace bflow {

namespace {

constexpr double boundary_tol = 1e-12;
constexpr int max_series_terms = 10000;

void check_rate(double lambda)
{
    detail::require(std::isfinite(lambda) && lambda > 0.0, "flow intensity must be positive and finite");
}

void check_length(double t0)
{
    detail::require(std::isfinite(t0) && t0 > 0.0, "segment length must be positive and finite");
}

bool at_t0(double y, double t0) { return std::abs(y - t0) <= boundary_tol * t0; }

// E(K | Y = y) using the density piece s explicitly, so that both one-sided
// limits at multiples of t0 are reachable.
double mean_on_piece(double y, double lambda, double t0, int s)
{
    const double x = y - t0;
    if (s <= 1) {
        return 2.0 + lambda * x;
    }
    const double bracket = detail::density_bracket(y, lambda, t0, s);
    const double abs_tol = 1e-13 * bracket;
    numerics::CompensatedSum<double> weight;
    numerics::CompensatedSum<double> weighted;
    double previous = 0.0;
    bool past_mode = false;
    for (int n = s - 1; n < s - 1 + max_series_terms; ++n) {
        const double q = detail::order_weight(n, x, lambda, t0, abs_tol);
        const double k = n + 2.0;
        weight += q;
        weighted += k * q;
        if (q < previous && n > lambda * x) {
            past_mode = true;
        }
        previous = q;
        if (past_mode && k * q < 1e-12 * weighted.value()) {
            return weighted.value() / weight.value();
        }
    }
    throw NumericalError(fmt::format("conditional order mean at y = {} did not converge in {} terms", y,
                                     max_series_terms),
                         weighted.value() / weight.value());
}

} // namespace

double expected_total_flow(double lambda, double t)
{
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "flow intensity must be non-negative and finite");
    detail::require(std::isfinite(t) && t > 0.0, "horizon must be positive and finite");
    return lambda * t;
}

double flow_from_lengths(double lambda, const ClumpSample& sample)
{
    detail::require(std::isfinite(lambda), "flow intensity must be finite");
    return lambda * sample.total_length() + static_cast<double>(sample.n());
}

double a_hat_1(double lambda, std::size_t n, double t0)
{
    detail::require(std::isfinite(lambda), "flow intensity must be finite");
    check_length(t0);
    return static_cast<double>(n) * std::exp(lambda * t0);
}

double largest_division_prob(int n, double u)
{
    detail::require(n >= 0, "number of points must be non-negative");
    detail::require(std::isfinite(u) && u > 0.0, "largest-division fraction must be positive");
    return detail::largest_division(n, u, 1e-14);
}

int order_piece(double y, double t0)
{
    detail::require(std::isfinite(y) && std::isfinite(t0) && t0 > 0.0, "order_piece: invalid arguments");
    const double ratio = y / t0;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= boundary_tol * std::abs(ratio)) {
        return static_cast<int>(nearest);
    }
    return static_cast<int>(std::floor(ratio));
}

double conditional_order_pmf(std::int64_t k, double y, double lambda, double t0)
{
    check_rate(lambda);
    check_length(t0);
    detail::require(std::isfinite(y), "clump length must be finite");
    if (k < 1) {
        throw DomainError(fmt::format("clump order must be at least 1 (got {})", k));
    }
    if (at_t0(y, t0)) {
        return k == 1 ? 1.0 : 0.0;
    }
    if (y < t0) {
        throw DomainError(fmt::format("clump length {} is below t0 = {}", y, t0));
    }
    const int s = order_piece(y, t0);
    if (k <= s) {
        return 0.0;
    }
    const double bracket = detail::density_bracket(y, lambda, t0, s);
    const auto n = static_cast<int>(k - 2);
    return detail::order_weight(n, y - t0, lambda, t0, 1e-13 * bracket) / bracket;
}

double conditional_order_mean(double y, double lambda, double t0)
{
    check_rate(lambda);
    check_length(t0);
    detail::require(std::isfinite(y), "clump length must be finite");
    if (at_t0(y, t0)) {
        return 1.0;
    }
    if (y < t0) {
        throw DomainError(fmt::format("clump length {} is below t0 = {}", y, t0));
    }
    return mean_on_piece(y, lambda, t0, order_piece(y, t0));
}

static_assert(detail::cheb_order == 20, "OrderMeanTable stores 20-term series");

OrderMeanTable::OrderMeanTable(double lambda, double t0, double y_max)
    : lambda_(lambda), t0_(t0)
{
    check_rate(lambda);
    check_length(t0);
    detail::require(std::isfinite(y_max), "table range must be finite");
    const double p = std::exp(-lambda * t0);
    const double half = 0.5 * t0;
    const int pieces = std::max(1, static_cast<int>(std::ceil((y_max - t0) / t0)));

    // As for the clump-length survival, rounding feeds the e^{-λx} mode,
    // which outgrows W and M when λt0 < 1. On x ≥ t0 the functional
    //   Φf(x) = f(x) - λe^{-λt0} ∫_{x-t0}^{x} e^{λ(u - x + t0)} f(u) du
    // is 0 for W and equals W(x) for M; each new piece is corrected so that
    // both hold at its right end.
    const double a = lambda * t0;
    const bool project = a < 0.99;
    const double c = lambda * p * half;
    detail::ChebSeries mode{};
    detail::ChebSeries moments{};
    if (project) {
        mode = detail::cheb_fit([a](double tau) { return std::exp(0.5 * a * (1.0 - tau)); });
        moments = detail::cheb_moments(detail::cheb_fit([a](double tau) { return std::exp(0.5 * a * (1.0 + tau)); }));
    }
    const auto clean = [&](detail::ChebSeries& f, double target) {
        if (!project) {
            return;
        }
        double weighted = 0.0;
        for (std::size_t k = 0; k < detail::cheb_order; ++k) {
            weighted += moments[k] * f[k];
        }
        const double excess = (detail::cheb_at_one(f) - c * weighted - target) / (1.0 - a);
        for (std::size_t k = 0; k < detail::cheb_order; ++k) {
            f[k] -= excess * mode[k];
        }
    };

    detail::ChebSeries w{};
    detail::ChebSeries m{};
    w[0] = 1.0;
    m[0] = lambda * half;
    m[1] = lambda * half;
    for (int i = 1; i <= pieces; ++i) {
        const double w_start = i == 1 ? 1.0 - p : detail::cheb_at_one(w);
        const double m_start = detail::cheb_at_one(m);

        auto w_next = detail::cheb_integral(w);
        for (double& v : w_next) {
            v *= -lambda * p * half;
        }
        w_next[0] += w_start;
        clean(w_next, 0.0);

        detail::ChebSeries slope{};
        for (std::size_t k = 0; k < detail::cheb_order; ++k) {
            slope[k] = lambda * w_next[k] - lambda * p * (m[k] + w[k]);
        }
        auto m_next = detail::cheb_integral(slope);
        for (double& v : m_next) {
            v *= half;
        }
        m_next[0] += m_start;
        clean(m_next, detail::cheb_at_one(w_next));

        w = w_next;
        m = m_next;
        w_.push_back(w);
        m_.push_back(m);
    }
}

double OrderMeanTable::on_piece(double y, int s) const
{
    const double x = y - t0_;
    if (s <= 1) {
        return 2.0 + lambda_ * x;
    }
    const auto i = static_cast<std::size_t>(s - 1);
    if (i > w_.size()) {
        return mean_on_piece(y, lambda_, t0_, s);
    }
    const double tau = std::clamp(2.0 * (x / t0_ - static_cast<double>(i)) - 1.0, -1.0, 1.0);
    const double w = detail::cheb_eval(w_[i - 1], tau);
    const double m = detail::cheb_eval(m_[i - 1], tau);
    if (!(w > 0.0) || !(m > 0.0)) {
        return mean_on_piece(y, lambda_, t0_, s);
    }
    return 2.0 + m / w;
}

double OrderMeanTable::operator()(double y) const
{
    if (at_t0(y, t0_)) {
        return 1.0;
    }
    if (!(y > t0_)) {
        throw DomainError(fmt::format("clump length {} is below t0 = {}", y, t0_));
    }
    return on_piece(y, order_piece(y, t0_));
}

ConditionalMeanInterpolator::ConditionalMeanInterpolator(double lambda, double t0, double grid_step,
                                                         double y_max)
    : lambda_(lambda), t0_(t0), per_piece_(1)
{
    check_rate(lambda);
    check_length(t0);
    detail::require(std::isfinite(grid_step) && grid_step > 0.0, "grid step must be positive");
    detail::require(std::isfinite(y_max), "interpolation range must be finite");
    per_piece_ = std::max(1, static_cast<int>(std::ceil(t0 / grid_step - 1e-9)));
    const int last_piece = y_max > t0 ? order_piece(y_max, t0) : 1;
    const OrderMeanTable table(lambda, t0, (last_piece + 1) * t0);
    for (int j = 2; j <= last_piece; ++j) {
        for (int i = 0; i <= per_piece_; ++i) {
            const double y = t0 * (j + static_cast<double>(i) / per_piece_);
            knots_.push_back(table.on_piece(y, j));
        }
    }
}

double ConditionalMeanInterpolator::operator()(double y) const
{
    if (at_t0(y, t0_)) {
        return 1.0;
    }
    if (!(y > t0_)) {
        throw DomainError(fmt::format("clump length {} is below t0 = {}", y, t0_));
    }
    const int s = order_piece(y, t0_);
    if (s <= 1) {
        return 2.0 + lambda_ * (y - t0_);
    }
    const std::size_t stride = static_cast<std::size_t>(per_piece_) + 1;
    const std::size_t piece = static_cast<std::size_t>(s - 2);
    if ((piece + 1) * stride > knots_.size()) {
        return mean_on_piece(y, lambda_, t0_, s);
    }
    const double local = std::clamp((y / t0_ - s) * per_piece_, 0.0, static_cast<double>(per_piece_));
    const int i = std::min(static_cast<int>(local), per_piece_ - 1);
    const double w = local - i;
    const double* v = knots_.data() + piece * stride;
    return (1.0 - w) * v[i] + w * v[i + 1];
}

double conditional_order_mean_interp(double y, double lambda, double t0, double grid_step)
{
    return ConditionalMeanInterpolator(lambda, t0, grid_step, y)(y);
}

FlowReport a_hat_bayes(const ClumpSample& sample, double lambda, double t0, const FlowOptions& options)
{
    check_rate(lambda);
    check_length(t0);
    detail::require(std::isfinite(options.singleton_tol) && options.singleton_tol >= 0.0,
                    "singleton tolerance must be non-negative");
    if (!sample.has_lengths()) {
        throw DomainError("the Bayes flow estimator needs individual clump lengths");
    }
    const double lo = t0 * (1.0 - options.singleton_tol);
    const double hi = t0 * (1.0 + options.singleton_tol);

    FlowReport report;
    report.lambda_used = lambda;
    report.interpolated = options.use_interp;
    report.a_hat_1 = a_hat_1(lambda, sample.n(), t0);

    const auto lengths = sample.lengths();
    const double y_max = *std::max_element(lengths.begin(), lengths.end());
    std::optional<ConditionalMeanInterpolator> interp;
    std::optional<OrderMeanTable> table;
    if (options.use_interp) {
        const double step = options.grid_step > 0.0 ? options.grid_step : t0 / 20.0;
        interp.emplace(lambda, t0, step, y_max);
    } else {
        table.emplace(lambda, t0, y_max);
    }

    report.per_clump_means.reserve(sample.n());
    numerics::CompensatedSum<double> total;
    for (double y : sample.lengths()) {
        double mean = 1.0;
        if (y < lo && !at_t0(y, t0)) {
            if (!options.short_as_singleton) {
                throw DataError(fmt::format("clump length {} is shorter than t0 = {}", y, t0));
            }
            ++report.short_clumps;
        } else if (y > hi && !at_t0(y, t0)) {
            mean = interp ? (*interp)(y) : (*table)(y);
        }
        report.per_clump_means.push_back(mean);
        total += mean;
    }
    report.a_hat_b = total.value();
    return report;
}

double rrmse(std::span<const double> estimates, std::span<const double> truths)
{
    if (estimates.size() != truths.size()) {
        throw DomainError(fmt::format("{} estimates but {} true values", estimates.size(), truths.size()));
    }
    detail::require(!truths.empty(), "rrmse needs at least one replicate");
    const double mean_truth = numerics::compensated_total(truths) / static_cast<double>(truths.size());
    detail::require(mean_truth > 0.0, "mean true flow must be positive");
    numerics::CompensatedSum<double> sq;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const double d = estimates[i] - truths[i];
        sq += d * d;
    }
    return std::sqrt(sq.value() / static_cast<double>(truths.size())) / mean_truth;
}

double relative_bias(std::span<const double> estimates, std::span<const double> truths)
{
    if (estimates.size() != truths.size()) {
        throw DomainError(fmt::format("{} estimates but {} true values", estimates.size(), truths.size()));
    }
    detail::require(!truths.empty(), "relative bias needs at least one replicate");
    const double mean_truth = numerics::compensated_total(truths) / static_cast<double>(truths.size());
    detail::require(mean_truth > 0.0, "mean true flow must be positive");
    const double mean_est = numerics::compensated_total(estimates) / static_cast<double>(estimates.size());
    return (mean_est - mean_truth) / mean_truth;
}

} // namespace bflow
