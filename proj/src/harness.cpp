#include "bflow/harness.hpp"

#include "bflow/error.hpp"
#include "bflow/model.hpp"
#include "bflow/numerics.hpp"
#include "bflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

namespace bflow {

namespace {

constexpr double level = 0.95;
constexpr double min_flow_lambda = 1e-9;

std::string cell_context(const DesignCell& cell, std::size_t r)
{
    return fmt::format("cell (lambda={}, t={}, sigma={}) replicate {}", cell.lambda, cell.horizon, cell.sigma, r);
}

template <class Body>
std::vector<ReplicateEstimates> run_cells(const ExperimentDesign& design, std::span<const DesignCell> cells,
                                          unsigned threads, Body body)
{
    const std::size_t reps = design.replicates;
    std::vector<ReplicateEstimates> slots(cells.size() * reps);
    parallel_for(slots.size(), threads, [&](std::size_t index) {
        const auto& cell = cells[index / reps];
        const std::size_t r = index % reps;
        try {
            const auto rep = simulate_replicate(design, cell, r);
            slots[index] = body(rep);
        } catch (...) {
            detail::rethrow_with_context(cell_context(cell, r));
        }
    });
    return slots;
}

double mean_of(std::span<const double> v)
{
    return v.empty() ? 0.0 : numerics::compensated_total(v) / static_cast<double>(v.size());
}

double mse_about(std::span<const double> v, double truth)
{
    if (v.empty()) {
        return 0.0;
    }
    numerics::CompensatedSum<double> sum;
    for (double x : v) {
        sum += (x - truth) * (x - truth);
    }
    return sum.value() / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v)
{
    return v.size() > 1 ? numerics::sample_moments(v).variance : 0.0;
}

double ratio_or_nan(double num, double den)
{
    return den > 0.0 ? num / den : std::nan("");
}

} // namespace

ReplicateEstimates estimate_replicate(const ClumpSample& sample, std::int64_t total_arrivals, bool with_mle,
                                      bool with_flow, bool use_interp)
{
    ReplicateEstimates out;
    out.n = sample.n();
    out.total_arrivals = total_arrivals;

    const auto m = m_estimate(sample);
    out.lambda_m = m.lambda_hat;
    if (m.se_dsl) {
        out.wald_dsl = wald_interval(m, level, SeKind::dsl);
    }
    if (m.se_g) {
        out.wald_g = wald_interval(m, level, SeKind::general);
    }
    out.a_hat_1 = a_hat_1(m.lambda_hat, sample.n(), sample.mu());

    if (with_mle) {
        try {
            const auto mle = mle_dsl(sample, {false, level});
            out.lambda_mle = mle.lambda_hat;
            out.lrt = mle.ci_lrt;
        } catch (const NumericalError&) {
            // counted as a failure by the caller
        }
    }
    if (with_flow) {
        FlowOptions options;
        options.use_interp = use_interp;
        options.singleton_tol = sample.singleton_tol();
        options.short_as_singleton = true;
        out.a_hat_b = a_hat_bayes(sample, std::max(m.lambda_hat, min_flow_lambda), sample.mu(), options).a_hat_b;
    }
    return out;
}

std::vector<Table1Row> table1(const ExperimentDesign& design, unsigned threads)
{
    design.validate();
    const auto cells = design.cells();
    const auto slots = run_cells(design, cells, threads, [](const ReplicateResult& rep) {
        return estimate_replicate(rep.sample, rep.total_arrivals, true, false);
    });

    const std::size_t reps = design.replicates;
    std::vector<Table1Row> rows;
    rows.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        const double lambda = cell.lambda;
        Table1Row row;
        row.sigma = cell.sigma;
        row.t = cell.horizon;
        row.lambda = lambda;
        row.reps = reps;
        row.expected_n = lambda * cell.horizon * std::exp(-lambda * design.mu);

        std::vector<double> ns, lm, lmle;
        std::size_t cover_lrt = 0, cover_se = 0, cover_g = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& e = slots[c * reps + r];
            ns.push_back(static_cast<double>(e.n));
            lm.push_back(e.lambda_m);
            if (e.lambda_m <= 0.0) {
                ++row.negative_m;
            }
            if (e.wald_dsl && e.wald_dsl->contains(lambda)) {
                ++cover_se;
            }
            if (e.wald_g && e.wald_g->contains(lambda)) {
                ++cover_g;
            }
            if (e.lambda_mle) {
                lmle.push_back(*e.lambda_mle);
                if (e.lrt && e.lrt->contains(lambda)) {
                    ++cover_lrt;
                }
            } else {
                ++row.mle_failures;
            }
        }
        const double dreps = static_cast<double>(reps);
        row.mean_n = mean_of(ns);
        row.rel_bias_m = (mean_of(lm) - lambda) / lambda;
        row.rel_bias_mle = lmle.empty() ? std::nan("") : (mean_of(lmle) - lambda) / lambda;
        row.var_m = variance_of(lm);
        row.var_mle = variance_of(lmle);
        row.mse_m = mse_about(lm, lambda);
        row.mse_mle = lmle.empty() ? std::nan("") : mse_about(lmle, lambda);
        row.rel_eff_mle_vs_m = ratio_or_nan(row.var_mle, row.var_m);
        row.rel_eff_m_vs_mle = ratio_or_nan(row.var_m, row.var_mle);
        row.rel_eff_mse = ratio_or_nan(row.mse_mle, row.mse_m);
        row.coverage_lrt = static_cast<double>(cover_lrt) / dreps;
        row.coverage_se = static_cast<double>(cover_se) / dreps;
        row.coverage_se_g = static_cast<double>(cover_g) / dreps;
        rows.push_back(row);
    }
    return rows;
}

std::vector<Table2Row> table2(const ExperimentDesign& design, unsigned threads, bool use_interp)
{
    design.validate();
    const auto cells = design.cells();
    const auto slots = run_cells(design, cells, threads, [use_interp](const ReplicateResult& rep) {
        return estimate_replicate(rep.sample, rep.total_arrivals, false, true, use_interp);
    });

    const std::size_t reps = design.replicates;
    std::vector<Table2Row> rows;
    rows.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> truth, a1, ab;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& e = slots[c * reps + r];
            truth.push_back(static_cast<double>(e.total_arrivals));
            a1.push_back(e.a_hat_1);
            ab.push_back(e.a_hat_b);
        }
        Table2Row row;
        row.sigma = cells[c].sigma;
        row.t = cells[c].horizon;
        row.lambda = cells[c].lambda;
        row.reps = reps;
        row.mean_a = mean_of(truth);
        row.rel_bias_a1 = relative_bias(a1, truth);
        row.rel_bias_ab = relative_bias(ab, truth);
        row.rrmse_a1 = rrmse(a1, truth);
        row.rrmse_ab = rrmse(ab, truth);
        rows.push_back(row);
    }
    return rows;
}

std::vector<HistogramBin> histogram(std::span<const double> values, double t0, double width)
{
    detail::require(!values.empty(), "histogram of an empty sample");
    detail::require(std::isfinite(t0) && std::isfinite(width) && width > 0.0, "bin width must be positive");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double k_lo = std::floor((*lo_it - t0) / width);
    const double k_hi = std::floor((*hi_it - t0) / width);
    if (k_hi - k_lo >= 1e6) {
        throw DomainError(fmt::format("bin width {} gives more than 10^6 bins", width));
    }
    const auto bins = static_cast<std::size_t>(k_hi - k_lo) + 1;
    std::vector<HistogramBin> out(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        out[i].lo = t0 + (k_lo + static_cast<double>(i)) * width;
        out[i].hi = out[i].lo + width;
        out[i].count = 0;
    }
    for (double v : values) {
        const double k = std::floor((v - t0) / width) - k_lo;
        const auto i = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, k)));
        ++out[i].count;
    }
    const double scale = 1.0 / (static_cast<double>(values.size()) * width);
    for (auto& b : out) {
        b.density = static_cast<double>(b.count) * scale;
    }
    return out;
}

namespace {

void fill_estimates(AnalyzeReport& report, const ClumpSample& sample, const AnalyzeOptions& options)
{
    report.mu = sample.mu();
    report.m = m_estimate(sample);
    const double lambda = report.m.lambda_hat;
    if (report.m.se_g) {
        report.m.ci_wald = wald_interval(report.m, level, SeKind::general);
        report.m.note("ci_wald", "general standard error");
    }
    report.flow_from_lengths = flow_from_lengths(lambda, sample);

    FlowReport flow;
    flow.a_hat_1 = a_hat_1(lambda, sample.n(), sample.mu());
    flow.lambda_used = lambda;
    if (sample.has_lengths() && lambda > 0.0) {
        FlowOptions fo;
        fo.singleton_tol = options.singleton_tol;
        fo.short_as_singleton = true;
        flow = a_hat_bayes(sample, lambda, sample.mu(), fo);
        flow.per_clump_means.clear();
    }
    report.flow = std::move(flow);

    if (!sample.has_lengths()) {
        return;
    }
    if (options.with_mle) {
        try {
            auto mle = mle_dsl(sample, {false, level});
            mle.note("model", "deterministic segments; misspecified when segment lengths vary");
            report.mle = std::move(mle);
        } catch (const NumericalError& e) {
            report.m.note("mle_failed", e.what());
        }
    }

    const double width = options.bin_width > 0.0 ? options.bin_width : sample.mu() / 4.0;
    report.histogram = histogram(sample.lengths(), sample.mu(), width);
    if (lambda > 0.0) {
        const ClumpLengthDist dist(lambda, sample.mu());
        report.fitted_singleton_mass = dist.singleton_mass();
        const double top = std::max(*std::max_element(sample.lengths().begin(), sample.lengths().end()),
                                    2.0 * sample.mu());
        const int points = std::max(options.curve_points, 2);
        for (int i = 1; i <= points; ++i) {
            const double y = sample.mu() + (top - sample.mu()) * i / points;
            report.fitted_density.push_back({y, dist.density(y)});
        }
        report.ks_fitted = numerics::ks_statistic(
            sample.lengths(), [&](double y) { return dist.cdf(y); }, [&](double y) { return dist.cdf_left(y); });
    }
}

} // namespace

AnalyzeReport analyze_run(const ParseResult& parsed, const std::string& run_id, const AnalyzeOptions& options)
{
    if (parsed.records.empty()) {
        throw DataError(fmt::format("run '{}': no data rows", run_id));
    }
    auto prepared = prepare_run(run_id, parsed.records, options.d0_m, options.min_frac, options.domain);

    AnalyzeReport report;
    report.summary = prepared.summary;
    report.rejected_rows = parsed.rejects.size();
    std::map<std::string, std::size_t> removed;
    for (const auto& r : prepared.removed) {
        ++removed[r.reason];
    }
    report.removed_by_reason.assign(removed.begin(), removed.end());

    const auto sample = build_sample(std::move(prepared.lengths), prepared.mu, options.singleton_tol);
    fill_estimates(report, sample, options);
    if (report.summary.removal_warning) {
        report.m.note("removal_warning", fmt::format("{} of {} records removed", report.summary.n_removed,
                                                     report.summary.n_raw));
    }
    return report;
}

AnalyzeReport analyze_summary(std::size_t n, double ybar, double s2y, double mu)
{
    const auto sample = ClumpSample::from_summary(n, ybar, s2y, mu);
    AnalyzeReport report;
    report.summary.run_id = "summary";
    report.summary.n_raw = n;
    report.summary.n = n;
    report.summary.ybar = ybar;
    report.summary.s2y = s2y;
    fill_estimates(report, sample, {});
    return report;
}

NormalityCheck normality_check(std::string quantity, std::span<const double> values)
{
    detail::require(!values.empty(), "normality check of an empty sample");
    NormalityCheck out;
    out.quantity = std::move(quantity);
    out.n = values.size();
    const auto moments = numerics::sample_moments(values);
    const double sd = std::sqrt(moments.variance);
    out.degenerate = !(sd > 0.0);

    std::vector<double> z(values.begin(), values.end());
    for (double& v : z) {
        v = out.degenerate ? 0.0 : (v - moments.mean) / sd;
    }
    std::sort(z.begin(), z.end());
    out.ks = numerics::ks_statistic(z, [](double x) { return numerics::normal_cdf(x); });
    out.p_value = numerics::ks_pvalue(out.ks, out.n);
    const double dn = static_cast<double>(out.n);
    out.qq.reserve(out.n);
    for (std::size_t i = 0; i < out.n; ++i) {
        out.qq.emplace_back(numerics::normal_quantile((static_cast<double>(i) + 0.5) / dn), z[i]);
    }
    return out;
}

GofReport gof(const ExperimentDesign& design, unsigned threads)
{
    design.validate();
    const auto cells = design.cells();
    const std::span<const DesignCell> first(cells.data(), 1);
    const auto slots = run_cells(design, first, threads, [](const ReplicateResult& rep) {
        return estimate_replicate(rep.sample, rep.total_arrivals, false, false);
    });

    GofReport report;
    report.cell = cells.front();
    report.reps = design.replicates;
    if (report.reps < 10) {
        report.warnings.push_back(fmt::format("only {} replicates; normality checks are unreliable", report.reps));
    }

    std::vector<double> lm, ns, a1;
    for (const auto& e : slots) {
        lm.push_back(e.lambda_m);
        ns.push_back(static_cast<double>(e.n));
        a1.push_back(e.a_hat_1);
    }
    report.normality.push_back(normality_check("lambda_m", lm));
    report.normality.push_back(normality_check("N", ns));
    report.normality.push_back(normality_check("a_hat_1", a1));
    for (const auto& check : report.normality) {
        if (check.degenerate) {
            report.warnings.push_back(fmt::format("{} is constant across replicates", check.quantity));
        }
    }

    const auto rep = simulate_replicate(design, report.cell, 0);
    auto& fit = report.clump_fit;
    fit.n = rep.sample.n();
    fit.lambda = slots.front().lambda_m;
    fit.critical_99 = 1.63 / std::sqrt(static_cast<double>(fit.n));
    if (fit.lambda > 0.0) {
        const ClumpLengthDist dist(fit.lambda, design.mu);
        fit.ks = numerics::ks_statistic(
            rep.sample.lengths(), [&](double y) { return dist.cdf(y); }, [&](double y) { return dist.cdf_left(y); });
        fit.p_value = numerics::ks_pvalue(fit.ks, fit.n);
    } else {
        report.warnings.push_back("non-positive rate estimate; clump-length fit skipped");
    }
    if (report.cell.sigma > 0.0) {
        report.warnings.push_back("segment lengths vary; the fitted clump-length law assumes fixed segments");
    }
    return report;
}

} // namespace bflow
