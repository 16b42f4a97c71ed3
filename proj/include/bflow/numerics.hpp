#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bflow::numerics {

/// Neumaier's variant of Kahan summation. The compensation also survives
/// additions whose magnitude exceeds the running sum.
template <typename Real = double>
class CompensatedSum {
public:
    CompensatedSum() = default;
    explicit CompensatedSum(Real initial) : sum_(initial) {}

    CompensatedSum& operator+=(Real value)
    {
        const Real t = sum_ + value;
        using std::abs;
        if (abs(sum_) >= abs(value)) {
            compensation_ += (sum_ - t) + value;
        } else {
            compensation_ += (value - t) + sum_;
        }
        sum_ = t;
        return *this;
    }

    CompensatedSum& operator-=(Real value) { return *this += -value; }

    Real value() const { return sum_ + compensation_; }

private:
    Real sum_{0};
    Real compensation_{0};
};

/// Sums a range with compensation, in iteration order.
template <typename Range>
double compensated_total(const Range& values)
{
    CompensatedSum<double> acc;
    for (double v : values) {
        acc += v;
    }
    return acc.value();
}

using ScalarFunction = std::function<double(double)>;

/// An interval known to contain a sign change of some function.
struct RootBracket {
    double lo;
    double hi;
    double f_lo;
    double f_hi;

    /// Evaluates `f` at both ends. Throws DomainError unless lo < hi and the
    /// end values have opposite signs (or one of them is zero).
    static RootBracket make(const ScalarFunction& f, double lo, double hi);
};

/// Locates a root inside `bracket` with a Brent-class method (TOMS 748).
/// The returned point lies in a final bracket of width at most `tol`.
/// Throws DomainError on an invalid bracket and NumericalError if 200
/// iterations do not suffice.
double find_root(const ScalarFunction& f, const RootBracket& bracket, double tol);

struct QuadratureResult {
    double value;
    double error;       // estimated absolute error
    int subintervals;
};

/// Globally adaptive Gauss-Kronrod (21-point) quadrature on [a, b] to an
/// absolute tolerance. Throws NumericalError, with the best estimate and its
/// error attached, when `max_subintervals` is reached first.
QuadratureResult adaptive_quadrature(const ScalarFunction& f, double a, double b,
                                     double abs_tol, int max_subintervals = 4000);

/// Integrates over consecutive pieces [k0,k1], [k1,k2], ... splitting the
/// tolerance between pieces. Use when `f` has kinks or jumps at the knots.
QuadratureResult integrate_pieces(const ScalarFunction& f, std::span<const double> knots,
                                  double abs_tol);

/// Standard normal CDF and its inverse.
double normal_cdf(double x);
double normal_quantile(double p);

/// Quantile of the chi-square law on one degree of freedom, (Φ⁻¹((1+p)/2))².
double chi2_quantile_1df(double p);

/// Upper tail probability of the chi-square law with `df` degrees of freedom.
double chi2_survival(double x, double df);

/// sup_x |F_n(x) - F(x)| evaluated at the sample points. `cdf_left`, when
/// given, supplies F(x-) for laws with atoms; otherwise F is taken continuous.
/// Throws DomainError on an empty sample.
double ks_statistic(std::span<const double> sample, const ScalarFunction& cdf,
                    const ScalarFunction& cdf_left = {});

/// Asymptotic p-value of the one-sample KS statistic (Kolmogorov limit law
/// with Stephens' small-sample correction).
double ks_pvalue(double statistic, std::size_t n);

/// Mean and unbiased (n-1) variance by Welford's update.
struct Moments {
    std::size_t n{0};
    double mean{0.0};
    double variance{0.0};
};
Moments sample_moments(std::span<const double> values);

} // namespace bflow::numerics
