#pragma once

#include "bflow/sample.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bflow {

enum class EstimateMethod { m_estimator, mle, singleton_mom };

std::string_view to_string(EstimateMethod method);

struct Interval {
    double lo;
    double hi;

    bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

struct EstimateReport {
    EstimateMethod method{EstimateMethod::m_estimator};
    double lambda_hat{0.0};
    std::optional<double> se_dsl;
    std::optional<double> se_g;
    std::optional<Interval> ci_wald;
    std::optional<Interval> ci_lrt;
    std::vector<std::pair<std::string, std::string>> diagnostics;

    bool has_diagnostic(std::string_view key) const;
    void note(std::string key, std::string value) { diagnostics.emplace_back(std::move(key), std::move(value)); }
};

/// M-estimator: the root of ȳ = (e^{λμ} - 1)/λ. The search starts from
/// λ0 = (ȳ - μ)/(2μ²) and widens until it brackets the root. ȳ < μ gives
/// the negative root and a "negative_estimate" diagnostic; ȳ = μ gives 0.
/// For λ̃ > 0 both standard errors are filled in; otherwise they are left
/// empty with a "no_standard_error" diagnostic. Throws DomainError if ȳ ≤ 0.
EstimateReport m_estimate(const ClumpSample& sample);

/// Root of the estimating equation alone.
double solve_m_equation(double ybar, double mu);

/// √(n⁻¹ C/B²) with C the DSL clump-length variance. Throws NumericalError
/// when λ is too small for the ratio to be formed (use se_m_general).
double se_m_dsl(double lambda, double mu, std::size_t n);

/// √(n⁻¹ λ⁴ s_y² / (e^{λμ}(λμ - 1) + 1)²), with the sample variance in place of C.
double se_m_general(double lambda, double mu, std::size_t n, double s2y);

struct SandwichComponents {
    double b;       // (e^{λμ}(λμ - 1) + 1)/λ²
    double c_dsl;   // Var(Y) under deterministic segments
};
SandwichComponents sandwich_components(double lambda, double mu);

struct MleOptions {
    bool use_spacings{false};
    double level{0.95};
};

/// Log partial likelihood under deterministic segments of length t0 = μ:
///   -m₁λt0 + Σ_{multi} log f(y_i; λ, t0)  [+ N log λ - λΣz_i with spacings].
double log_likelihood_dsl(double lambda, const ClumpSample& sample, bool use_spacings);

/// Maximum likelihood under deterministic segments (t0 = μ), with the
/// likelihood-ratio interval {λ : 2(ℓ(λ̂) - ℓ(λ)) ≤ χ²₁(level)}.
///
/// A 48-point log-spaced profile over [max(1e-6, λ0/10), 10λ0] (λ0 from the
/// M-estimator, widened while the maximum sits on an edge) locates the peak;
/// Brent's method refines it. A profile whose slope changes sign more than
/// once raises NumericalError carrying the profile. An optimum at the 1e-6
/// floor is returned with a "boundary" diagnostic. Requires individual lengths.
EstimateReport mle_dsl(const ClumpSample& sample, const MleOptions& options = {});

/// λ̃_S = -log(M₁/N)/t0, with the delta-method standard error
/// √((1 - M₁/N)/M₁)/t0 stored as se_dsl. Throws DomainError if M₁ = 0 or
/// is unknown.
EstimateReport singleton_mom(const ClumpSample& sample, double t0);

enum class SeKind { dsl, general };

/// λ̂ ± z_{(1+level)/2}·SE. Throws DomainError when the requested SE is absent.
Interval wald_interval(const EstimateReport& report, double level, SeKind which);

} // namespace bflow
