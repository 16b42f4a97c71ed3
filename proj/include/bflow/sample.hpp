#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace bflow {

/// Observed clump data for one run: what every estimator consumes.
///
/// Built either from individual clump lengths or, when only summary
/// statistics are known, from (n, ȳ, s_y²). A clump counts as a singleton
/// when its length is at most mu·(1 + singleton_tol); under random segment
/// lengths this also sweeps in clumps shorter than mu.
class ClumpSample {
public:
    /// Throws DomainError on an empty sample, a nonpositive or nonfinite
    /// length, mu ≤ 0 or a negative tolerance.
    static ClumpSample from_lengths(std::vector<double> lengths, double mu,
                                    double singleton_tol = 1e-6,
                                    std::optional<std::vector<double>> spacings = std::nullopt);

    /// Summary-only sample. Estimators that need individual lengths (the
    /// MLE and the Bayes flow estimator) reject it.
    static ClumpSample from_summary(std::size_t n, double ybar, double s2y, double mu,
                                    std::optional<std::size_t> m1 = std::nullopt);

    bool has_lengths() const noexcept { return !lengths_.empty(); }
    std::span<const double> lengths() const noexcept { return lengths_; }
    const std::optional<std::vector<double>>& spacings() const noexcept { return spacings_; }

    std::size_t n() const noexcept { return n_; }
    /// Singleton count; absent for a summary-only sample without one.
    std::optional<std::size_t> m1() const noexcept { return m1_; }
    double ybar() const noexcept { return ybar_; }
    /// Unbiased sample variance (n - 1 divisor); 0 when n = 1.
    double s2y() const noexcept { return s2y_; }
    double mu() const noexcept { return mu_; }
    double singleton_tol() const noexcept { return singleton_tol_; }
    /// Sum of the lengths, n·ȳ.
    double total_length() const noexcept { return total_; }

    bool is_singleton(double y) const noexcept { return y <= mu_ * (1.0 + singleton_tol_); }

private:
    ClumpSample() = default;

    std::vector<double> lengths_;
    std::optional<std::vector<double>> spacings_;
    std::size_t n_{0};
    std::optional<std::size_t> m1_;
    double ybar_{0.0};
    double s2y_{0.0};
    double mu_{0.0};
    double singleton_tol_{0.0};
    double total_{0.0};
};

} // namespace bflow
