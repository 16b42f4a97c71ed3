#include "bflow/model.hpp"

#include "bflow/error.hpp"
#include "bflow/numerics.hpp"
#include "chebyshev.hpp"
#include "series.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace bflow {

namespace {

constexpr double inv_sqrt2 = 0.70710678118654752440;
constexpr double inv_sqrt2pi = 0.39894228040143267794;

double upper_normal(double z) { return 0.5 * std::erfc(z * inv_sqrt2); }
double normal_density(double z) { return inv_sqrt2pi * std::exp(-0.5 * z * z); }

void check_rate(double lambda)
{
    detail::require(std::isfinite(lambda) && lambda > 0.0, "flow intensity must be positive and finite");
}

void check_length(double t0)
{
    detail::require(std::isfinite(t0) && t0 > 0.0, "segment length must be positive and finite");
}

// ∫_0^∞ e^{-st} (exp[λ ∫_t^∞ (1 - G)] - 1) dt, truncated where the integrand
// drops below 1e-10.
double kernel_integral(double lambda, const SegmentLaw& law, double s)
{
    const auto integrand = [&](double t) {
        return std::exp(-s * t) * std::expm1(lambda * law.tail_integral(t));
    };
    double upper = std::max(law.location(), law.mean());
    for (int doubling = 0; integrand(upper) >= 1e-10; ++doubling) {
        if (doubling == 60) {
            throw NumericalError("clump-length integral: no truncation point found");
        }
        upper *= 2.0;
    }
    std::vector<double> knots{0.0};
    if (law.location() < upper) {
        knots.push_back(law.location());
    }
    knots.push_back(upper);

    const double scale = std::max(1.0, law.mean() * std::expm1(lambda * law.mean()));
    return numerics::integrate_pieces(integrand, knots, 1e-12 * scale).value;
}

} // namespace

// ---------------------------------------------------------------------------
// SegmentLaw

SegmentLaw::SegmentLaw(Kind kind, double location, double sigma)
    : kind_(kind), location_(location), sigma_(sigma), mean_(location), normalizer_(1.0)
{
    if (kind_ == Kind::normal) {
        const double alpha = location_ / sigma_;
        normalizer_ = upper_normal(-alpha);
        mean_ = location_ + sigma_ * normal_density(alpha) / normalizer_;
    }
}

SegmentLaw SegmentLaw::deterministic(double t0)
{
    check_length(t0);
    return SegmentLaw(Kind::deterministic, t0, 0.0);
}

SegmentLaw SegmentLaw::normal(double mu, double sigma)
{
    check_length(mu);
    detail::require(std::isfinite(sigma) && sigma >= 0.0, "segment sd must be non-negative and finite");
    if (sigma == 0.0) {
        return deterministic(mu);
    }
    return SegmentLaw(Kind::normal, mu, sigma);
}

double SegmentLaw::survival(double x) const
{
    if (kind_ == Kind::deterministic) {
        return x < location_ ? 1.0 : 0.0;
    }
    if (x <= 0.0) {
        return 1.0;
    }
    return upper_normal((x - location_) / sigma_) / normalizer_;
}

double SegmentLaw::tail_integral(double t) const
{
    if (kind_ == Kind::deterministic) {
        return std::max(location_ - t, 0.0);
    }
    if (t <= 0.0) {
        return mean_ - t;
    }
    const double z = (t - location_) / sigma_;
    const double v = sigma_ * (normal_density(z) - z * upper_normal(z)) / normalizer_;
    return std::max(v, 0.0);
}

void ModelParams::validate() const
{
    check_rate(lambda);
    if (horizon) {
        detail::require(std::isfinite(*horizon) && *horizon > 0.0, "horizon must be positive and finite");
    }
}

// ---------------------------------------------------------------------------
// DSL clump-length law

int density_piece(double y, double t0)
{
    detail::require(std::isfinite(y) && std::isfinite(t0) && t0 > 0.0, "density_piece: invalid arguments");
    const double ratio = y / t0;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-12 * std::abs(ratio)) {
        return static_cast<int>(nearest) - 1;
    }
    return static_cast<int>(std::floor(ratio));
}

double singleton_mass(double lambda, double t0)
{
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "flow intensity must be non-negative and finite");
    check_length(t0);
    return std::exp(-lambda * t0);
}

double clump_density(double y, double lambda, double t0)
{
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "flow intensity must be non-negative and finite");
    check_length(t0);
    detail::require(std::isfinite(y), "clump length must be finite");
    const int s = density_piece(y, t0);
    if (!(y > t0) || s < 1) {
        throw DomainError(fmt::format("clump_density: y = {} is not above t0 = {}; use singleton_mass", y, t0));
    }
    if (lambda == 0.0) {
        return 0.0;
    }
    const double bracket = detail::density_bracket(y, lambda, t0, s);
    return std::max(0.0, lambda * std::exp(-lambda * t0) * bracket);
}

double multi_clump_density(double y, double lambda, double t0)
{
    check_rate(lambda);
    return clump_density(y, lambda, t0) / -std::expm1(-lambda * t0);
}

double clump_cdf(double y, double lambda, double t0)
{
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "flow intensity must be non-negative and finite");
    check_length(t0);
    detail::require(!std::isnan(y), "clump length must not be NaN");
    if (y < t0) {
        return 0.0;
    }
    if (std::isinf(y)) {
        return 1.0;
    }
    const double atom = std::exp(-lambda * t0);
    const double height = lambda * atom;
    double total = atom + height * (std::min(y, 2.0 * t0) - t0);
    if (y <= 2.0 * t0) {
        return std::min(total, 1.0);
    }

    const auto pieces = static_cast<int>(std::ceil(y / t0)) - 2;
    const double tol = 1e-9 / pieces;
    const auto density = [&](double u) { return clump_density(u, lambda, t0); };
    numerics::CompensatedSum<double> acc{total};
    for (int j = 2; j * t0 < y; ++j) {
        const double a = j * t0;
        const double b = std::min(y, (j + 1) * t0);
        acc += numerics::adaptive_quadrature(density, a, b, tol).value;
    }
    return std::clamp(acc.value(), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Moments

namespace detail {

double expm1_x_minus_one(double x)
{
    if (std::abs(x) < 0.5) {
        // Σ_{n≥2} x^n (n-1)/n!
        double term = x;   // x^n / n!, starting at n = 1
        double sum = 0.0;
        for (int n = 2; n < 40; ++n) {
            term *= x / n;
            const double add = term * (n - 1);
            sum += add;
            if (std::abs(add) < 1e-17 * std::abs(sum)) {
                break;
            }
        }
        return sum;
    }
    return std::exp(x) * (x - 1.0) + 1.0;
}

double dsl_variance_kernel(double x)
{
    if (std::abs(x) < 0.5) {
        // Σ_{n≥3} x^n (2^n - 2n)/n!
        double term = 1.0;   // x^n / n!
        double pow2 = 1.0;
        double sum = 0.0;
        for (int n = 1; n < 60; ++n) {
            term *= x / n;
            pow2 *= 2.0;
            if (n < 3) {
                continue;
            }
            const double add = term * (pow2 - 2.0 * n);
            sum += add;
            if (std::abs(add) < 1e-17 * std::abs(sum)) {
                break;
            }
        }
        return sum;
    }
    return std::expm1(2.0 * x) - 2.0 * x * std::exp(x);
}

} // namespace detail

double mean_clump_length(double lambda, double mu)
{
    detail::require(std::isfinite(lambda), "flow intensity must be finite");
    check_length(mu);
    if (lambda == 0.0) {
        return mu;
    }
    return std::expm1(lambda * mu) / lambda;
}

double var_clump_length_dsl(double lambda, double mu)
{
    check_rate(lambda);
    check_length(mu);
    return detail::dsl_variance_kernel(lambda * mu) / (lambda * lambda);
}

double var_clump_length_rsl(double lambda, const SegmentLaw& law)
{
    check_rate(lambda);
    const double m = law.mean();
    const double integral = kernel_integral(lambda, law, 0.0);
    const double mean = std::expm1(lambda * m) / lambda;
    return 2.0 / lambda * std::exp(lambda * m) * integral - mean * mean;
}

double laplace_transform_clump(double s, double lambda, const SegmentLaw& law)
{
    check_rate(lambda);
    detail::require(std::isfinite(s) && s >= 0.0, "Laplace argument must be non-negative and finite");
    if (s == 0.0) {
        return 1.0;
    }
    const double integral = kernel_integral(lambda, law, s);
    return 1.0 + s / lambda * (1.0 - std::exp(lambda * law.mean()) / (1.0 + s * integral));
}

RenewalMoments renewal_moments(double lambda, double t0)
{
    check_rate(lambda);
    check_length(t0);
    const double x = lambda * t0;
    return {std::exp(x) / lambda, (detail::dsl_variance_kernel(x) + 1.0) / (lambda * lambda)};
}

double expected_clump_count(double lambda, double t, double t0)
{
    check_rate(lambda);
    check_length(t0);
    detail::require(std::isfinite(t) && t > 0.0, "horizon must be positive and finite");
    return lambda * t * std::exp(-lambda * t0);
}

double clump_count_variance(double lambda, double t, double t0)
{
    check_rate(lambda);
    check_length(t0);
    detail::require(std::isfinite(t) && t > 0.0, "horizon must be positive and finite");
    const double x = lambda * t0;
    return lambda * t * (std::exp(-x) - 2.0 * x * std::exp(-2.0 * x));
}

double clump_order_pmf(int k, double lambda, double t0)
{
    check_rate(lambda);
    check_length(t0);
    if (k < 1) {
        throw DomainError(fmt::format("clump order must be at least 1 (got {})", k));
    }
    const double x = lambda * t0;
    return std::exp(-x + (k - 1) * std::log(-std::expm1(-x)));
}

double clump_order_mean(double lambda, double t0)
{
    check_rate(lambda);
    check_length(t0);
    return std::exp(lambda * t0);
}

double clump_order_variance(double lambda, double t0)
{
    check_rate(lambda);
    check_length(t0);
    const double e = std::exp(lambda * t0);
    return e * (e - 1.0);
}

// ---------------------------------------------------------------------------
// ClumpLengthDist
//
// The survival S(y) = P(Y > y) obeys S'(y) = -λe^{-λt0} S(y - t0) for y > t0,
// with S = 1 below t0 and S(t0) = 1 - e^{-λt0}. On each piece [j·t0, (j+1)t0]
// S is stored as a Chebyshev series in τ ∈ [-1, 1]; the next piece follows by
// integrating the previous series term by term.

namespace {

constexpr std::size_t max_pieces = 1u << 15;
static_assert(detail::cheb_order == 20, "ClumpLengthDist stores 20-term series");

// start - c ∫_{-1}^{τ} f
detail::ChebSeries next_piece(const detail::ChebSeries& f, double start, double c)
{
    auto out = detail::cheb_integral(f);
    for (double& v : out) {
        v *= -c;
    }
    out[0] += start;
    return out;
}

} // namespace

ClumpLengthDist::ClumpLengthDist(double lambda, double t0)
    : lambda_(lambda), t0_(t0), atom_(0.0)
{
    check_rate(lambda);
    check_length(t0);
    atom_ = std::exp(-lambda * t0);
    const double height = lambda * atom_;
    const double c = 0.5 * height * t0;
    tail_rate_ = clump_tail_rate(lambda, t0);
    const double tail_ratio = std::exp(-tail_rate_ * t0);

    // Rounding excites the r = λ mode of the delay equation, which outlives
    // the true solution when λt0 < 1. The functional
    //   Ψ(y) = S(y) - λe^{-λt0} ∫_{y-t0}^{y} e^{λ(u - y + t0)} S(u) du
    // vanishes on the exact S and sees only that mode, so each piece has the
    // mode e^{-λ(u - y)} removed in proportion Ψ(y)/(1 - λt0).
    const double a = lambda * t0;
    const bool project = a < 0.99;
    detail::ChebSeries mode{};
    detail::ChebSeries moments{};
    if (project) {
        mode = detail::cheb_fit([a](double tau) { return std::exp(0.5 * a * (1.0 - tau)); });
        moments = detail::cheb_moments(detail::cheb_fit([a](double tau) { return std::exp(0.5 * a * (1.0 + tau)); }));
    }
    const auto clean = [&](detail::ChebSeries& s) {
        if (!project) {
            return;
        }
        double weighted = 0.0;
        for (std::size_t k = 0; k < detail::cheb_order; ++k) {
            weighted += moments[k] * s[k];
        }
        const double excess = (detail::cheb_at_one(s) - c * weighted) / (1.0 - a);
        for (std::size_t k = 0; k < detail::cheb_order; ++k) {
            s[k] -= excess * mode[k];
        }
    };

    detail::ChebSeries piece{};
    piece[0] = -std::expm1(-a) - c;
    piece[1] = -c;
    pieces_.push_back(piece);
    double survival = detail::cheb_at_one(piece);
    // Stop near underflow or once the piece-to-piece ratio has settled on
    // the dominant exponential.
    while (survival > 1e-280 && pieces_.size() < max_pieces) {
        auto next = next_piece(piece, survival, c);
        clean(next);
        const double end = detail::cheb_at_one(next);
        if (!(end > 0.0)) {
            break;
        }
        pieces_.push_back(next);
        piece = next;
        const bool settled = std::abs(end / survival - tail_ratio) <= 1e-13 * tail_ratio;
        survival = end;
        if (settled && pieces_.size() >= 3) {
            break;
        }
    }
    anchor_ = std::max(survival, std::numeric_limits<double>::min());
}

double clump_tail_rate(double lambda, double t0)
{
    check_rate(lambda);
    check_length(t0);
    // Roots of r = λe^{-λt0}e^{r·t0} straddle r* where the right side has
    // slope 1. One root is always r = λ, a mode S does not contain; the decay
    // rate is the other one.
    const double a = lambda * t0;
    const double height = lambda * std::exp(-a);
    const double r_star = (a - std::log(a)) / t0;
    const numerics::ScalarFunction h = [&](double r) { return r - height * std::exp(r * t0); };
    if (!(h(r_star) > 0.0)) {
        return r_star;   // double root, λt0 = 1 to rounding
    }
    if (a > 1.0) {
        return numerics::find_root(h, numerics::RootBracket::make(h, 0.0, r_star), 1e-15 * r_star);
    }
    double hi = 2.0 * r_star;
    while (h(hi) > 0.0) {
        hi *= 2.0;
    }
    return numerics::find_root(h, numerics::RootBracket::make(h, r_star, hi), 1e-15 * hi);
}

double ClumpLengthDist::survival(double y) const
{
    if (std::isnan(y)) {
        throw DomainError("clump length must not be NaN");
    }
    if (y < t0_) {
        return 1.0;
    }
    const double ratio = y / t0_;
    const auto j = static_cast<std::size_t>(std::floor(ratio));   // piece index, ≥ 1
    if (j > pieces_.size()) {
        return anchor_ * std::exp(-tail_rate_ * (y - upper()));
    }
    const double tau = std::clamp(2.0 * (ratio - static_cast<double>(j)) - 1.0, -1.0, 1.0);
    return std::clamp(detail::cheb_eval(pieces_[j - 1], tau), 0.0, 1.0);
}

double ClumpLengthDist::log_survival(double y) const
{
    if (!std::isnan(y) && y / t0_ > static_cast<double>(pieces_.size() + 1)) {
        return std::log(anchor_) - tail_rate_ * (y - upper());
    }
    return std::log(survival(y));
}

double ClumpLengthDist::cdf(double y) const
{
    return 1.0 - survival(y);
}

double ClumpLengthDist::cdf_left(double y) const
{
    if (std::isnan(y)) {
        throw DomainError("clump length must not be NaN");
    }
    return y <= t0_ ? 0.0 : cdf(y);
}

double ClumpLengthDist::density(double y) const
{
    if (!(y > t0_)) {
        throw DomainError(fmt::format("density: y = {} is not above t0 = {}", y, t0_));
    }
    return lambda_ * atom_ * survival(y - t0_);
}

double ClumpLengthDist::quantile(double p) const
{
    detail::require(p >= 0.0 && p < 1.0, "quantile level must lie in [0, 1)");
    if (p <= atom_) {
        return t0_;
    }
    double hi = 2.0 * t0_;
    while (cdf(hi) < p) {
        hi *= 2.0;
    }
    const numerics::ScalarFunction f = [&](double y) { return cdf(y) - p; };
    return numerics::find_root(f, numerics::RootBracket::make(f, t0_, hi), 1e-12 * hi);
}

} // namespace bflow
