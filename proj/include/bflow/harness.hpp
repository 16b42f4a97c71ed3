#pragma once

#include "bflow/estimate.hpp"
#include "bflow/flow.hpp"
#include "bflow/ingest.hpp"
#include "bflow/simulate.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace bflow {

/// Per-replicate estimates behind both simulation tables.
struct ReplicateEstimates {
    std::size_t n{0};
    std::int64_t total_arrivals{0};
    double lambda_m{0.0};
    std::optional<Interval> wald_dsl;
    std::optional<Interval> wald_g;
    std::optional<double> lambda_mle;   // absent when the MLE failed
    std::optional<Interval> lrt;
    double a_hat_1{0.0};
    double a_hat_b{0.0};
};

/// M-estimate with both Wald intervals and, when `with_mle`, the DSL MLE with
/// its likelihood-ratio interval; Â₁ and Â_B at λ̃ when `with_flow`. Â_B uses
/// max(λ̃, 1e-9) and counts clumps shorter than μ as singletons.
ReplicateEstimates estimate_replicate(const ClumpSample& sample, std::int64_t total_arrivals, bool with_mle,
                                      bool with_flow, bool use_interp = false);

struct Table1Row {
    double sigma{0.0};
    double t{0.0};
    double lambda{0.0};
    std::size_t reps{0};
    double expected_n{0.0};    // λt e^{-λμ}
    double mean_n{0.0};
    double rel_bias_m{0.0};
    double rel_bias_mle{0.0};
    double var_m{0.0};
    double var_mle{0.0};
    double mse_m{0.0};
    double mse_mle{0.0};
    double rel_eff_mle_vs_m{0.0};   // var(MLE)/var(M)
    double rel_eff_m_vs_mle{0.0};   // var(M)/var(MLE)
    double rel_eff_mse{0.0};        // MSE(MLE)/MSE(M), the table's "Rel. Eff." column
    double coverage_lrt{0.0};
    double coverage_se{0.0};
    double coverage_se_g{0.0};
    std::size_t negative_m{0};
    std::size_t mle_failures{0};
};

struct Table2Row {
    double sigma{0.0};
    double t{0.0};
    double lambda{0.0};
    std::size_t reps{0};
    double mean_a{0.0};
    double rel_bias_a1{0.0};
    double rel_bias_ab{0.0};
    double rrmse_a1{0.0};
    double rrmse_ab{0.0};
};

/// Intervals that are missing (non-positive λ̃, failed MLE) count as not
/// covering. Bias, variance and MSE of the MLE are over successful fits.
std::vector<Table1Row> table1(const ExperimentDesign& design, unsigned threads);
std::vector<Table2Row> table2(const ExperimentDesign& design, unsigned threads, bool use_interp = false);

struct HistogramBin {
    double lo;
    double hi;
    std::size_t count;
    double density;   // count / (n · width)
};

/// Fixed-width bins on the grid t0 + k·width covering all data.
std::vector<HistogramBin> histogram(std::span<const double> values, double t0, double width);

struct CurvePoint {
    double y;
    double density;
};

struct AnalyzeOptions {
    Domain domain{Domain::physical};
    double d0_m{0.00445};
    double min_frac{0.5};
    double singleton_tol{0.0};   // for the MLE and Â_B on measured lengths
    bool with_mle{true};
    double bin_width{0.0};       // 0 selects t0/4
    int curve_points{200};
};

struct AnalyzeReport {
    RunSummary summary;
    std::size_t rejected_rows{0};
    std::vector<std::pair<std::string, std::size_t>> removed_by_reason;
    EstimateReport m;
    std::optional<EstimateReport> mle;
    std::optional<FlowReport> flow;   // per-clump means cleared
    double flow_from_lengths{0.0};
    double mu{0.0};
    std::vector<HistogramBin> histogram;
    double fitted_singleton_mass{0.0};
    std::vector<CurvePoint> fitted_density;
    std::optional<double> ks_fitted;   // KS distance of the lengths to the fitted law
};

/// Full pipeline for one run: clean, build the sample, estimate, and emit the
/// histogram with the density fitted at λ̃ (t0 = d0 in the run's unit).
AnalyzeReport analyze_run(const ParseResult& parsed, const std::string& run_id, const AnalyzeOptions& options);

/// Estimates from summary statistics only (n, ȳ, s_y², μ).
AnalyzeReport analyze_summary(std::size_t n, double ybar, double s2y, double mu);

struct NormalityCheck {
    std::string quantity;
    std::size_t n{0};
    double ks{0.0};
    double p_value{1.0};
    bool degenerate{false};
    std::vector<std::pair<double, double>> qq;   // (normal quantile, standardized value)
};

struct ClumpFitCheck {
    std::size_t n{0};
    double lambda{0.0};
    double ks{0.0};
    double critical_99{0.0};   // 1.63/√n
    double p_value{1.0};
};

struct GofReport {
    DesignCell cell{};
    std::size_t reps{0};
    std::vector<NormalityCheck> normality;   // lambda_m, N, a_hat_1
    ClumpFitCheck clump_fit;
    std::vector<std::string> warnings;
};

/// Standardizes `values` by their mean and sd and compares them with the
/// standard normal. All-equal values give KS = 0.5 and `degenerate`.
NormalityCheck normality_check(std::string quantity, std::span<const double> values);

/// Replicates of the first cell of `design`: normality of λ̃, N and Â₁, and
/// the first replicate's clump lengths against the law fitted at its λ̃.
GofReport gof(const ExperimentDesign& design, unsigned threads);

} // namespace bflow
