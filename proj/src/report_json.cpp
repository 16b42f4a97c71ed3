#include "bflow/report.hpp"

#include "json.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace bflow {

namespace {

using nlohmann::ordered_json;

// NaN has no JSON spelling; it becomes null.
ordered_json number(double v)
{
    return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

ordered_json optional_number(const std::optional<double>& v)
{
    return v ? number(*v) : ordered_json(nullptr);
}

ordered_json interval(const std::optional<Interval>& v)
{
    if (!v) {
        return nullptr;
    }
    return ordered_json::array({number(v->lo), number(v->hi)});
}

ordered_json metadata(const RunMetadata& meta)
{
    ordered_json config = ordered_json::object();
    for (const auto& [k, v] : meta.config) {
        config[k] = v;
    }
    return {{"command", meta.command}, {"seed", meta.seed}, {"config", config}};
}

void emit(std::ostream& out, ordered_json payload, const RunMetadata& meta)
{
    ordered_json doc;
    doc["schema_version"] = schema_version;
    doc["metadata"] = metadata(meta);
    for (auto& [k, v] : payload.items()) {
        doc[k] = std::move(v);
    }
    out << doc.dump(2) << '\n';
}

void csv_preamble(std::ostream& out, const RunMetadata& meta)
{
    out << fmt::format("# command={} schema_version={} seed={}", meta.command, schema_version, meta.seed);
    for (const auto& [k, v] : meta.config) {
        out << ' ' << k << '=' << v;
    }
    out << '\n';
}

std::string cell(double v)
{
    return std::isfinite(v) ? fmt::format("{:.10g}", v) : std::string("NA");
}

ordered_json estimate_json(const EstimateReport& r)
{
    ordered_json diag = ordered_json::object();
    for (const auto& [k, v] : r.diagnostics) {
        diag[k] = v;
    }
    return {{"method", std::string(to_string(r.method))},
            {"lambda_hat", number(r.lambda_hat)},
            {"se_dsl", optional_number(r.se_dsl)},
            {"se_g", optional_number(r.se_g)},
            {"ci_wald", interval(r.ci_wald)},
            {"ci_lrt", interval(r.ci_lrt)},
            {"diagnostics", diag}};
}

ordered_json table1_json(const Table1Row& r)
{
    return {{"sigma", r.sigma},
            {"t", r.t},
            {"lambda", r.lambda},
            {"reps", r.reps},
            {"expected_n", number(r.expected_n)},
            {"mean_n", number(r.mean_n)},
            {"rel_bias_m", number(r.rel_bias_m)},
            {"rel_bias_mle", number(r.rel_bias_mle)},
            {"var_m", number(r.var_m)},
            {"var_mle", number(r.var_mle)},
            {"mse_m", number(r.mse_m)},
            {"mse_mle", number(r.mse_mle)},
            {"rel_eff_mle_vs_m", number(r.rel_eff_mle_vs_m)},
            {"rel_eff_m_vs_mle", number(r.rel_eff_m_vs_mle)},
            {"rel_eff", number(r.rel_eff_mse)},
            {"coverage_lrt", number(r.coverage_lrt)},
            {"coverage_se", number(r.coverage_se)},
            {"coverage_se_g", number(r.coverage_se_g)},
            {"negative_m", r.negative_m},
            {"mle_failures", r.mle_failures}};
}

ordered_json table2_json(const Table2Row& r)
{
    return {{"sigma", r.sigma},
            {"t", r.t},
            {"lambda", r.lambda},
            {"reps", r.reps},
            {"mean_a", number(r.mean_a)},
            {"rel_bias_a1", number(r.rel_bias_a1)},
            {"rel_bias_ab", number(r.rel_bias_ab)},
            {"rrmse_a1", number(r.rrmse_a1)},
            {"rrmse_ab", number(r.rrmse_ab)}};
}

} // namespace

void write_table1_csv(std::ostream& out, std::span<const Table1Row> rows, const RunMetadata& meta)
{
    csv_preamble(out, meta);
    out << "sigma,t,lambda,reps,expected_n,mean_n,rel_bias_m,rel_bias_mle,var_m,var_mle,mse_m,mse_mle,"
           "rel_eff_mle_vs_m,rel_eff_m_vs_mle,rel_eff,coverage_lrt,coverage_se,coverage_se_g,negative_m,"
           "mle_failures\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", cell(r.sigma), cell(r.t),
                           cell(r.lambda), r.reps, cell(r.expected_n), cell(r.mean_n), cell(r.rel_bias_m),
                           cell(r.rel_bias_mle), cell(r.var_m), cell(r.var_mle), cell(r.mse_m), cell(r.mse_mle),
                           cell(r.rel_eff_mle_vs_m), cell(r.rel_eff_m_vs_mle), cell(r.rel_eff_mse),
                           cell(r.coverage_lrt), cell(r.coverage_se), cell(r.coverage_se_g), r.negative_m,
                           r.mle_failures);
    }
}

void write_table2_csv(std::ostream& out, std::span<const Table2Row> rows, const RunMetadata& meta)
{
    csv_preamble(out, meta);
    out << "sigma,t,lambda,reps,mean_a,rel_bias_a1,rel_bias_ab,rrmse_a1,rrmse_ab\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{},{},{},{},{}\n", cell(r.sigma), cell(r.t), cell(r.lambda), r.reps,
                           cell(r.mean_a), cell(r.rel_bias_a1), cell(r.rel_bias_ab), cell(r.rrmse_a1),
                           cell(r.rrmse_ab));
    }
}

void write_clumps_csv(std::ostream& out, std::span<const Clump> clumps, const RunMetadata& meta)
{
    csv_preamble(out, meta);
    out << "start,length,order\n";
    for (const auto& c : clumps) {
        out << fmt::format("{:.17g},{:.17g},{}\n", c.start, c.length, c.order);
    }
}

void write_table1_json(std::ostream& out, std::span<const Table1Row> rows, const RunMetadata& meta)
{
    ordered_json list = ordered_json::array();
    for (const auto& r : rows) {
        list.push_back(table1_json(r));
    }
    emit(out, {{"rows", list}}, meta);
}

void write_table2_json(std::ostream& out, std::span<const Table2Row> rows, const RunMetadata& meta)
{
    ordered_json list = ordered_json::array();
    for (const auto& r : rows) {
        list.push_back(table2_json(r));
    }
    emit(out, {{"rows", list}}, meta);
}

void write_analyze_json(std::ostream& out, const AnalyzeReport& report, const RunMetadata& meta)
{
    const auto& s = report.summary;
    ordered_json removed = ordered_json::object();
    for (const auto& [reason, count] : report.removed_by_reason) {
        removed[reason] = count;
    }
    ordered_json payload;
    payload["run"] = {{"run_id", s.run_id},
                      {"domain", std::string(to_string(s.domain))},
                      {"n_raw", s.n_raw},
                      {"rejected_rows", report.rejected_rows},
                      {"n_removed", s.n_removed},
                      {"removed_by_reason", removed},
                      {"removal_warning", s.removal_warning},
                      {"n", s.n},
                      {"ybar", number(s.ybar)},
                      {"s2y", number(s.s2y)},
                      {"vbar", s.vbar > 0.0 ? number(s.vbar) : nlohmann::ordered_json()},   // unknown in summary mode
                      {"mu", number(report.mu)}};
    payload["m_estimate"] = estimate_json(report.m);
    payload["mle"] = report.mle ? estimate_json(*report.mle) : ordered_json(nullptr);
    if (report.flow) {
        payload["flow"] = {{"lambda_used", number(report.flow->lambda_used)},
                           {"a_hat_1", number(report.flow->a_hat_1)},
                           {"a_hat_b", report.flow->a_hat_b > 0.0 ? number(report.flow->a_hat_b) : nullptr},
                           {"short_clumps", report.flow->short_clumps},
                           {"from_lengths", number(report.flow_from_lengths)}};
    }
    ordered_json bins = ordered_json::array();
    for (const auto& b : report.histogram) {
        bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"density", b.density}});
    }
    ordered_json curve = ordered_json::array();
    for (const auto& p : report.fitted_density) {
        curve.push_back({number(p.y), number(p.density)});
    }
    payload["histogram"] = bins;
    payload["fitted"] = {{"singleton_mass", number(report.fitted_singleton_mass)},
                         {"density", curve},
                         {"ks", optional_number(report.ks_fitted)}};
    emit(out, std::move(payload), meta);
}

void write_gof_json(std::ostream& out, const GofReport& report, const RunMetadata& meta)
{
    ordered_json checks = ordered_json::array();
    for (const auto& c : report.normality) {
        ordered_json qq = ordered_json::array();
        for (const auto& [q, z] : c.qq) {
            qq.push_back({number(q), number(z)});
        }
        checks.push_back({{"quantity", c.quantity},
                          {"n", c.n},
                          {"ks", number(c.ks)},
                          {"p_value", number(c.p_value)},
                          {"degenerate", c.degenerate},
                          {"qq", qq}});
    }
    const auto& f = report.clump_fit;
    ordered_json payload;
    payload["cell"] = {{"lambda", report.cell.lambda}, {"t", report.cell.horizon}, {"sigma", report.cell.sigma}};
    payload["reps"] = report.reps;
    payload["normality"] = checks;
    payload["clump_fit"] = {{"n", f.n},
                            {"lambda", number(f.lambda)},
                            {"ks", number(f.ks)},
                            {"critical_99", number(f.critical_99)},
                            {"p_value", number(f.p_value)}};
    payload["warnings"] = report.warnings;
    emit(out, std::move(payload), meta);
}

void write_simulate_json(std::ostream& out, const SimulateSummary& summary, const RunMetadata& meta)
{
    ordered_json reps = ordered_json::array();
    for (std::size_t r = 0; r < summary.n_per_rep.size(); ++r) {
        reps.push_back({{"replicate", r},
                        {"n", summary.n_per_rep[r]},
                        {"arrivals", summary.arrivals_per_rep[r]},
                        {"residual_open", static_cast<bool>(summary.residual_open[r])}});
    }
    ordered_json payload;
    payload["cell"] = {{"lambda", summary.cell.lambda},
                       {"t", summary.cell.horizon},
                       {"mu", summary.mu},
                       {"sigma", summary.cell.sigma}};
    payload["reps"] = summary.reps;
    payload["mean_n"] = number(summary.mean_n);
    payload["expected_n"] = number(summary.expected_n);
    payload["mean_arrivals"] = number(summary.mean_arrivals);
    payload["replicates"] = reps;
    emit(out, std::move(payload), meta);
}

} // namespace bflow
