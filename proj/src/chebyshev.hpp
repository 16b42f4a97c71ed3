#pragma once

// Chebyshev series on [-1, 1] with full-weight coefficients,
// f(τ) = Σ_k a_k T_k(τ). Used to carry solutions of delay equations across
// pieces of length t0.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

namespace bflow::detail {

inline constexpr std::size_t cheb_order = 20;
using ChebSeries = std::array<double, cheb_order>;

inline double cheb_eval(const ChebSeries& a, double tau)
{
    double b1 = 0.0;
    double b2 = 0.0;
    for (std::size_t k = cheb_order; k-- > 1;) {
        const double b0 = 2.0 * tau * b1 - b2 + a[k];
        b2 = b1;
        b1 = b0;
    }
    return tau * b1 - b2 + a[0];
}

inline double cheb_at_one(const ChebSeries& a)
{
    double sum = 0.0;
    for (double v : a) {
        sum += v;
    }
    return sum;
}

// Coefficients of ∫_{-1}^{τ} f(σ) dσ, truncated to cheb_order terms.
inline ChebSeries cheb_integral(const ChebSeries& a)
{
    ChebSeries out{};
    for (std::size_t k = 1; k < cheb_order; ++k) {
        const double prev = k == 1 ? 2.0 * a[0] : a[k - 1];
        const double next = k + 1 < cheb_order ? a[k + 1] : 0.0;
        out[k] = (prev - next) / (2.0 * static_cast<double>(k));
    }
    double at_minus_one = 0.0;
    for (std::size_t k = 1; k < cheb_order; ++k) {
        at_minus_one += (k % 2 == 0 ? 1.0 : -1.0) * out[k];
    }
    out[0] = -at_minus_one;
    return out;
}

// cos(πk(j + ½)/n) for the interpolation nodes; row k = 1 holds the nodes.
inline const std::array<ChebSeries, cheb_order>& cheb_cosines()
{
    static const auto table = [] {
        constexpr auto n = static_cast<double>(cheb_order);
        std::array<ChebSeries, cheb_order> t{};
        for (std::size_t k = 0; k < cheb_order; ++k) {
            for (std::size_t j = 0; j < cheb_order; ++j) {
                t[k][j] = std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(j) + 0.5) / n);
            }
        }
        return t;
    }();
    return table;
}

// Interpolant through the cheb_order Chebyshev points of the first kind.
template <class F>
ChebSeries cheb_fit(F f)
{
    const auto& cosines = cheb_cosines();
    constexpr auto n = static_cast<double>(cheb_order);
    ChebSeries values{};
    for (std::size_t j = 0; j < cheb_order; ++j) {
        values[j] = f(cosines[1][j]);
    }
    ChebSeries out{};
    for (std::size_t k = 0; k < cheb_order; ++k) {
        double sum = 0.0;
        for (std::size_t j = 0; j < cheb_order; ++j) {
            sum += values[j] * cosines[k][j];
        }
        out[k] = (k == 0 ? 1.0 : 2.0) * sum / n;
    }
    return out;
}

// m_k = ∫_{-1}^{1} w(τ) T_k(τ) dτ for w given by its series, so that
// ∫ w f = Σ m_k a_k. Uses T_i T_k = (T_{i+k} + T_{|i-k|})/2.
inline ChebSeries cheb_moments(const ChebSeries& w)
{
    const auto integral = [](std::size_t n) { return n % 2 == 1 ? 0.0 : 2.0 / (1.0 - static_cast<double>(n * n)); };
    ChebSeries out{};
    for (std::size_t k = 0; k < cheb_order; ++k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < cheb_order; ++i) {
            const std::size_t diff = i > k ? i - k : k - i;
            sum += 0.5 * w[i] * (integral(i + k) + integral(diff));
        }
        out[k] = sum;
    }
    return out;
}

} // namespace bflow::detail
