#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <vector>

namespace bflow {

/// Law of the time a single particle occupies the sensor.
///
/// Deterministic(t0) is the equal-passage-time model. Normal(mu, sigma) is
/// the normal law truncated to (0, inf): draws at or below zero are redrawn,
/// and every moment below refers to that truncated law. For sigma ≤ mu/5 the
/// truncation moves the mean by less than 1e-5·sigma.
class SegmentLaw {
public:
    enum class Kind { deterministic, normal };

    static SegmentLaw deterministic(double t0);
    /// sigma == 0 yields the deterministic law at mu.
    static SegmentLaw normal(double mu, double sigma);

    Kind kind() const noexcept { return kind_; }
    bool is_deterministic() const noexcept { return kind_ == Kind::deterministic; }

    /// t0, or the location mu of the untruncated normal.
    double location() const noexcept { return location_; }
    double sigma() const noexcept { return sigma_; }
    double mean() const noexcept { return mean_; }

    /// P(S > x)
    double survival(double x) const;
    /// ∫_t^∞ P(S > x) dx, in closed form.
    double tail_integral(double t) const;

    template <typename Engine>
    double sample(Engine& engine) const
    {
        if (kind_ == Kind::deterministic) {
            return location_;
        }
        std::normal_distribution<double> draw(location_, sigma_);
        for (;;) {
            const double s = draw(engine);
            if (s > 0.0) {
                return s;
            }
        }
    }

    bool operator==(const SegmentLaw&) const = default;

private:
    SegmentLaw(Kind kind, double location, double sigma);

    Kind kind_;
    double location_;
    double sigma_;
    double mean_;
    double normalizer_;   // P(untruncated normal > 0); 1 for deterministic
};

struct ModelParams {
    double lambda;
    SegmentLaw segments;
    std::optional<double> horizon;

    /// Throws DomainError unless lambda > 0 and any horizon is positive.
    void validate() const;
};

/// Index s of the density piece containing y: the largest integer with
/// t0 < y/s. Ratios within 1e-12 (relative) of an integer count as that
/// integer, so y = j·t0 belongs to the piece ((j-1)t0, j·t0].
int density_piece(double y, double t0);

/// Probability e^{-λt0} that a clump is a single particle (the atom at y = t0).
double singleton_mass(double lambda, double t0);

/// Density of the continuous part of the clump-length law at y > t0 under
/// deterministic segments:
///   λe^{-λt0} [1 + Σ_{j=1}^{s-1} (-1)^j/j! a_j^{j-1} e^{-jλt0}(a_j + j)],
/// a_j = λ(y - (j+1)t0), s = density_piece(y, t0). It integrates to
/// 1 - e^{-λt0}; the atom is reported by singleton_mass. Equal to λe^{-λt0}
/// on (t0, 2t0]. Throws DomainError for y ≤ t0 or invalid parameters.
double clump_density(double y, double lambda, double t0);

/// Density of Y given Y > t0, i.e. clump_density / (1 - e^{-λt0}).
double multi_clump_density(double y, double lambda, double t0);

/// P(Y ≤ y): the atom plus the integral of clump_density from t0 to y,
/// by Gauss-Kronrod quadrature on each piece [j·t0, (j+1)t0]. 0 for y < t0.
double clump_cdf(double y, double lambda, double t0);

/// E(Y) = (e^{λμ} - 1)/λ for any segment law with mean μ; μ at λ = 0.
/// Defined for negative λ as well.
double mean_clump_length(double lambda, double mu);

/// Var(Y) = λ^{-2}(e^{2λμ} - 2λμe^{λμ} - 1) for deterministic segments. λ > 0.
double var_clump_length_dsl(double lambda, double mu);

/// Var(Y) for a general segment law:
///   2λ^{-1}e^{λm} ∫_0^∞ (exp[λ∫_t^∞(1 - G)] - 1) dt - λ^{-2}(e^{λm} - 1)²,
/// with m the law's mean. The outer integral is truncated where its integrand
/// falls below 1e-10. Throws NumericalError if the quadrature fails.
double var_clump_length_rsl(double lambda, const SegmentLaw& law);

/// Laplace transform of the clump length,
///   γ(s) = 1 + s/λ - (λ ∫_0^∞ exp{-st - λ∫_0^t (1 - G)} dt)^{-1},
/// evaluated in the form 1 + (s/λ)[1 - e^{λm}/(1 + s∫_0^∞ e^{-st}(exp[λ∫_t^∞(1-G)] - 1)dt)]
/// so that γ(0) = 1 holds exactly.
double laplace_transform_clump(double s, double lambda, const SegmentLaw& law);

/// Mean and variance of a renewal period (spacing + clump), DSL.
struct RenewalMoments {
    double mean;
    double variance;
};
RenewalMoments renewal_moments(double lambda, double t0);

/// Large-t approximations E[N(t)] ≈ λt e^{-λt0} and
/// Var[N(t)] ≈ λt(e^{-λt0} - 2λt0 e^{-2λt0}).
double expected_clump_count(double lambda, double t, double t0);
double clump_count_variance(double lambda, double t, double t0);

/// Geometric law of the clump order: (1 - e^{-λt0})^{k-1} e^{-λt0}, k ≥ 1.
double clump_order_pmf(int k, double lambda, double t0);
double clump_order_mean(double lambda, double t0);
double clump_order_variance(double lambda, double t0);

/// Exponential decay rate of P(Y > y) under deterministic segments: the root
/// r ≠ λ of r = λe^{-λt0}e^{r·t0} (r = λ when λt0 = 1).
double clump_tail_rate(double lambda, double t0);

/// Full clump-length law for one (λ, t0), built from the delay equation
/// F'(y) = λe^{-λt0}(1 - F(y - t0)), y > t0, which the continuous part of
/// the density satisfies. The survival function is stored as a Chebyshev
/// series on every piece [j·t0, (j+1)t0] until it drops below 1e-280, its
/// piece-to-piece ratio settles on e^{-r·t0} (r = clump_tail_rate), or 32768
/// pieces are built; beyond that it decays exactly at rate r. Immutable after
/// construction and safe to share between threads.
class ClumpLengthDist {
public:
    ClumpLengthDist(double lambda, double t0);

    double lambda() const noexcept { return lambda_; }
    double t0() const noexcept { return t0_; }

    double singleton_mass() const noexcept { return atom_; }
    /// Continuous part, equal to clump_density(y, λ, t0). Requires y > t0.
    double density(double y) const;
    /// P(Y > y)
    double survival(double y) const;
    /// log P(Y > y), finite far into the tail where P(Y > y) underflows.
    double log_survival(double y) const;
    /// P(Y ≤ y)
    double cdf(double y) const;
    /// P(Y < y)
    double cdf_left(double y) const;
    /// Smallest y with P(Y ≤ y) ≥ p, for p in [0, 1).
    double quantile(double p) const;
    double mean() const { return mean_clump_length(lambda_, t0_); }
    double variance() const { return var_clump_length_dsl(lambda_, t0_); }

    /// End of the tabulated range.
    double upper() const noexcept { return t0_ * static_cast<double>(pieces_.size() + 1); }
    double tail_rate() const noexcept { return tail_rate_; }

private:
    double lambda_;
    double t0_;
    double atom_;
    double tail_rate_{0.0};
    double anchor_{0.0};   // S(upper())
    std::vector<std::array<double, 20>> pieces_;   // pieces_[j-1] covers [j·t0, (j+1)t0]
};

namespace detail {

// Stable e^x(x - 1) + 1 and e^{2x} - 2xe^x - 1 near x = 0.
double expm1_x_minus_one(double x);
double dsl_variance_kernel(double x);

} // namespace detail

} // namespace bflow
