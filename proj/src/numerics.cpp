#include "bflow/numerics.hpp"

#include "bflow/error.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

namespace bflow::numerics {

RootBracket RootBracket::make(const ScalarFunction& f, double lo, double hi)
{
    if (!(lo < hi)) {
        throw DomainError(fmt::format("root bracket requires lo < hi (got [{}, {}])", lo, hi));
    }
    RootBracket b{lo, hi, f(lo), f(hi)};
    if (!std::isfinite(b.f_lo) || !std::isfinite(b.f_hi)) {
        throw DomainError("root bracket: function is not finite at an endpoint");
    }
    if (std::signbit(b.f_lo) == std::signbit(b.f_hi) && b.f_lo != 0.0 && b.f_hi != 0.0) {
        throw DomainError(fmt::format("root bracket [{}, {}] has no sign change (f = {}, {})",
                                      lo, hi, b.f_lo, b.f_hi));
    }
    return b;
}

double find_root(const ScalarFunction& f, const RootBracket& bracket, double tol)
{
    if (!(tol > 0.0)) {
        throw DomainError("find_root: tolerance must be positive");
    }
    if (!(bracket.lo < bracket.hi)) {
        throw DomainError("find_root: bracket requires lo < hi");
    }
    if (bracket.f_lo == 0.0) {
        return bracket.lo;
    }
    if (bracket.f_hi == 0.0) {
        return bracket.hi;
    }
    if (std::signbit(bracket.f_lo) == std::signbit(bracket.f_hi)) {
        throw DomainError("find_root: no sign change over the bracket");
    }

    constexpr std::uintmax_t max_iterations = 200;
    std::uintmax_t iterations = max_iterations;
    const auto done = [tol](double a, double b) { return std::abs(b - a) <= tol; };
    const auto [a, b] = boost::math::tools::toms748_solve(
        f, bracket.lo, bracket.hi, bracket.f_lo, bracket.f_hi, done, iterations);
    if (iterations >= max_iterations && !done(a, b)) {
        throw NumericalError("find_root: iteration cap reached", 0.5 * (a + b), std::abs(b - a));
    }
    return 0.5 * (a + b);
}

namespace {

struct Panel {
    double a;
    double b;
    double value;
    double error;

    bool operator<(const Panel& other) const { return error < other.error; }
};

Panel gk21(const ScalarFunction& f, double a, double b)
{
    double error = 0.0;
    const double v =
        boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, 0, 0.0, &error);
    return {a, b, v, error};
}

} // namespace

QuadratureResult adaptive_quadrature(const ScalarFunction& f, double a, double b,
                                     double abs_tol, int max_subintervals)
{
    if (!(a < b)) {
        throw DomainError(fmt::format("adaptive_quadrature requires a < b (got [{}, {}])", a, b));
    }
    if (!(abs_tol > 0.0)) {
        throw DomainError("adaptive_quadrature: tolerance must be positive");
    }

    std::priority_queue<Panel> panels;
    panels.push(gk21(f, a, b));
    double total_error = panels.top().error;
    int count = 1;

    while (total_error > abs_tol) {
        if (count >= max_subintervals) {
            CompensatedSum<double> value;
            std::priority_queue<Panel> copy = panels;
            while (!copy.empty()) {
                value += copy.top().value;
                copy.pop();
            }
            throw NumericalError(
                fmt::format("adaptive_quadrature: subdivision limit {} reached on [{}, {}]",
                            max_subintervals, a, b),
                value.value(), total_error);
        }
        const Panel worst = panels.top();
        panels.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            // Interval cannot be split further in double precision.
            panels.push(Panel{worst.a, worst.b, worst.value, 0.0});
            total_error -= worst.error;
            continue;
        }
        const Panel left = gk21(f, worst.a, mid);
        const Panel right = gk21(f, mid, worst.b);
        total_error += left.error + right.error - worst.error;
        panels.push(left);
        panels.push(right);
        ++count;

        // Guard the running total against drift from repeated updates.
        if (count % 64 == 0) {
            CompensatedSum<double> e;
            std::priority_queue<Panel> copy = panels;
            while (!copy.empty()) {
                e += copy.top().error;
                copy.pop();
            }
            total_error = e.value();
        }
    }

    CompensatedSum<double> value;
    CompensatedSum<double> error;
    while (!panels.empty()) {
        value += panels.top().value;
        error += panels.top().error;
        panels.pop();
    }
    return {value.value(), error.value(), count};
}

QuadratureResult integrate_pieces(const ScalarFunction& f, std::span<const double> knots,
                                  double abs_tol)
{
    if (knots.size() < 2) {
        throw DomainError("integrate_pieces needs at least two knots");
    }
    const double piece_tol = abs_tol / static_cast<double>(knots.size() - 1);
    CompensatedSum<double> value;
    double error = 0.0;
    int count = 0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        if (!(knots[i] < knots[i + 1])) {
            continue;
        }
        const auto r = adaptive_quadrature(f, knots[i], knots[i + 1], piece_tol);
        value += r.value;
        error += r.error;
        count += r.subintervals;
    }
    return {value.value(), error, count};
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError(fmt::format("normal_quantile requires 0 < p < 1 (got {})", p));
    }
    return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

double chi2_quantile_1df(double p)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError(fmt::format("chi2_quantile_1df requires 0 < p < 1 (got {})", p));
    }
    const double z = normal_quantile(0.5 * (1.0 + p));
    return z * z;
}

double chi2_survival(double x, double df)
{
    if (!(df > 0.0)) {
        throw DomainError("chi2_survival: degrees of freedom must be positive");
    }
    if (x <= 0.0) {
        return 1.0;
    }
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>{df}, x));
}

double ks_statistic(std::span<const double> sample, const ScalarFunction& cdf,
                    const ScalarFunction& cdf_left)
{
    if (sample.empty()) {
        throw DomainError("ks_statistic: empty sample");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());

    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double x = sorted[i];
        const double f = cdf(x);
        const double f_left = cdf_left ? cdf_left(x) : f;
        const double above = static_cast<double>(i + 1) / n - f;
        const double below = f_left - static_cast<double>(i) / n;
        d = std::max({d, above, below});
    }
    return d;
}

double ks_pvalue(double statistic, std::size_t n)
{
    if (n == 0) {
        throw DomainError("ks_pvalue: empty sample");
    }
    const double rn = std::sqrt(static_cast<double>(n));
    const double lambda = (rn + 0.12 + 0.11 / rn) * statistic;
    if (lambda < 0.2) {
        return 1.0;
    }
    CompensatedSum<double> q;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        q += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-18) {
            break;
        }
    }
    return std::clamp(q.value(), 0.0, 1.0);
}

Moments sample_moments(std::span<const double> values)
{
    Moments m;
    double m2 = 0.0;
    for (double x : values) {
        ++m.n;
        const double delta = x - m.mean;
        m.mean += delta / static_cast<double>(m.n);
        m2 += delta * (x - m.mean);
    }
    m.variance = m.n > 1 ? m2 / static_cast<double>(m.n - 1) : 0.0;
    return m;
}

} // namespace bflow::numerics
