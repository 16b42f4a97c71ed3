#pragma once

// Alternating finite sums that appear in the clump-length law and in the
// conditional clump-order law. Each is evaluated from log-magnitude/sign
// terms with compensated summation, first in double; when the rounding bound
// (machine epsilon times the magnitude-weighted term sum) is too large for
// the result, the sum is recomputed in 113-bit and then 332-bit binary
// floating point.

namespace bflow::detail {

/// 1 + Σ_{j=1}^{s-1} (-1)^j/j! a_j^{j-1} e^{-jλt0} (a_j + j), a_j = λ(y-(j+1)t0).
/// The continuous clump-length density is λe^{-λt0} times this bracket.
/// Accurate to 1e-8 relative. Throws NumericalError if no tier achieves it.
double density_bracket(double y, double lambda, double t0, int s);

/// p_n(u) = Σ_{j≥0, ju<1} (-1)^j C(n+1, j)(1-ju)^n, the probability that the
/// largest of the n+1 gaps cut by n uniform points is at most u (u ≤ 1).
/// Error at most max(1e-10·|p|, abs_tol).
double largest_division(int n, double u, double abs_tol);

/// q_n(x) = e^{-λx}(λx)^n/n! · p_n(t0/x): Poisson weight of n interior
/// arrivals in (0, x) with every gap at most t0. Error at most
/// max(1e-10·|q|, abs_tol).
double order_weight(int n, double x, double lambda, double t0, double abs_tol);

} // namespace bflow::detail
