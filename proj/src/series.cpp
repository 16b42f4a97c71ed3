#include "series.hpp"

#include "bflow/error.hpp"
#include "bflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <fmt/format.h>

namespace bflow::detail {

namespace {

using Quad = boost::multiprecision::cpp_bin_float_quad;
using Wide = boost::multiprecision::cpp_bin_float_100;

template <typename Real>
struct Partial {
    Real sum;
    Real bound;   // Σ |t_i| (1 + |log-magnitude pieces of t_i|)
};

template <typename Real>
Real log_gamma(const Real& x)
{
    if constexpr (std::is_same_v<Real, double>) {
        return std::lgamma(x);
    } else {
        return boost::math::lgamma(x);
    }
}

template <typename Real>
double to_double(const Real& x)
{
    if constexpr (std::is_same_v<Real, double>) {
        return x;
    } else {
        return x.template convert_to<double>();
    }
}

// Runs `eval` at increasing precision until `accept(value, error_bound)`.
template <typename Eval, typename Accept>
double escalate(Eval&& eval, Accept&& accept, const char* what)
{
    double value = 0.0;
    double bound = 0.0;
    auto attempt = [&]<typename Real>(Partial<Real> p) {
        value = to_double(p.sum);
        bound = to_double(p.bound * std::numeric_limits<Real>::epsilon());
        return accept(value, bound);
    };
    if (attempt(eval.template operator()<double>())) {
        return value;
    }
    if (attempt(eval.template operator()<Quad>())) {
        return value;
    }
    if (attempt(eval.template operator()<Wide>())) {
        return value;
    }
    throw NumericalError(fmt::format("{}: cancellation exceeds 332-bit working precision", what),
                         value, bound);
}

template <typename Real>
Partial<Real> bracket_terms(double y_in, double lambda_in, double t0_in, int s)
{
    using std::abs;
    using std::exp;
    using std::log;
    const Real y = y_in;
    const Real lambda = lambda_in;
    const Real t0 = t0_in;

    numerics::CompensatedSum<Real> sum{Real(1)};
    Real bound = 1;
    Real log_factorial = 0;
    for (int j = 1; j < s; ++j) {
        log_factorial += log(Real(j));
        Real a = lambda * (y - Real(j + 1) * t0);
        if (a < 0) {
            a = 0;
        }
        if (a == 0 && j > 1) {
            continue;
        }
        const Real power = j > 1 ? Real(j - 1) * log(a) : Real(0);
        const Real decay = Real(j) * lambda * t0;
        const Real linear = log(a + Real(j));
        const Real magnitude = exp(power - log_factorial - decay + linear);
        sum += (j % 2 == 0) ? magnitude : Real(-magnitude);
        bound += magnitude * (Real(1) + abs(power) + log_factorial + decay + abs(linear));
    }
    return {sum.value(), bound};
}

template <typename Real>
Partial<Real> division_terms(int n, double u_in)
{
    using std::abs;
    using std::exp;
    using std::log;
    const Real u = u_in;
    numerics::CompensatedSum<Real> sum;
    Real bound = 0;
    Real log_binom = 0;
    for (int j = 0; j <= n + 1; ++j) {
        if (j > 0) {
            log_binom += log(Real(n + 2 - j)) - log(Real(j));
        }
        const Real base = Real(1) - Real(j) * u;
        if (!(base > 0)) {
            break;
        }
        const Real power = n > 0 ? Real(n) * log(base) : Real(0);
        const Real magnitude = exp(log_binom + power);
        sum += (j % 2 == 0) ? magnitude : Real(-magnitude);
        bound += magnitude * (Real(1) + abs(log_binom) + abs(power));
    }
    return {sum.value(), bound};
}

template <typename Real>
Partial<Real> weight_terms(int n, double x_in, double lambda_in, double t0_in)
{
    using std::abs;
    using std::exp;
    using std::log;
    const Real x = x_in;
    const Real lambda = lambda_in;
    const Real t0 = t0_in;
    const Real log_nfact = log_gamma(Real(n + 1));
    const Real decay = lambda * x;

    numerics::CompensatedSum<Real> sum;
    Real bound = 0;
    Real log_binom = 0;
    for (int j = 0; j <= n + 1; ++j) {
        if (j > 0) {
            log_binom += log(Real(n + 2 - j)) - log(Real(j));
        }
        const Real gap = x - Real(j) * t0;
        if (!(gap > 0)) {
            break;
        }
        const Real power = Real(n) * log(lambda * gap);
        const Real magnitude = exp(power - decay - log_nfact + log_binom);
        sum += (j % 2 == 0) ? magnitude : Real(-magnitude);
        bound += magnitude * (Real(1) + abs(power) + decay + log_nfact + abs(log_binom));
    }
    return {sum.value(), bound};
}

} // namespace

double density_bracket(double y, double lambda, double t0, int s)
{
    if (s <= 1) {
        return 1.0;
    }
    auto eval = [&]<typename Real>() { return bracket_terms<Real>(y, lambda, t0, s); };
    auto accept = [](double v, double err) { return v > 0.0 && err <= 1e-8 * v; };
    return escalate(eval, accept, "clump-length density");
}

double largest_division(int n, double u, double abs_tol)
{
    if (u >= 1.0) {
        return 1.0;
    }
    if (u * (n + 1.0) < 1.0) {
        return 0.0;   // n + 1 gaps cannot all be shorter than 1/(n + 1)
    }
    auto eval = [&]<typename Real>() { return division_terms<Real>(n, u); };
    auto accept = [abs_tol](double v, double err) {
        return err <= std::max(1e-10 * std::abs(v), abs_tol);
    };
    return std::clamp(escalate(eval, accept, "largest-division probability"), 0.0, 1.0);
}

double order_weight(int n, double x, double lambda, double t0, double abs_tol)
{
    if (n == 0) {
        return x <= t0 ? std::exp(-lambda * x) : 0.0;
    }
    if (x <= t0) {
        // Every gap is at most x ≤ t0, so p_n = 1 and q_n is a Poisson weight.
        return std::exp(n * std::log(lambda * x) - lambda * x - std::lgamma(n + 1.0));
    }
    auto eval = [&]<typename Real>() { return weight_terms<Real>(n, x, lambda, t0); };
    auto accept = [abs_tol](double v, double err) {
        return err <= std::max(1e-10 * std::abs(v), abs_tol);
    };
    return std::max(escalate(eval, accept, "clump-order weight"), 0.0);
}

} // namespace bflow::detail
