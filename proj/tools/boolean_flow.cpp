// boolean-flow: simulation tables, run analysis and goodness-of-fit checks.

#include "bflow/error.hpp"
#include "bflow/harness.hpp"
#include "bflow/ingest.hpp"
#include "bflow/numerics.hpp"
#include "bflow/parallel.hpp"
#include "bflow/report.hpp"
#include "bflow/simulate.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace {

enum Exit : int { ok = 0, usage = 2, data = 3, numerical = 4 };

using bflow::RunMetadata;

std::string num(double v)
{
    return fmt::format("{}", v);
}

std::ofstream open_output(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw bflow::DataError(fmt::format("cannot write '{}'", path.string()));
    }
    return out;
}

struct CellSpec {
    double sigma;
    double t;
    double lambda;
};

// "sigma:t:lambda[,sigma:t:lambda...]"
std::vector<CellSpec> parse_cells(const std::string& text)
{
    std::vector<CellSpec> out;
    std::stringstream list(text);
    std::string item;
    while (std::getline(list, item, ',')) {
        CellSpec c{};
        char a = 0, b = 0;
        std::istringstream in(item);
        if (!(in >> c.sigma >> a >> c.t >> b >> c.lambda) || a != ':' || b != ':' || !(in >> std::ws).eof()) {
            throw bflow::DomainError(fmt::format("bad cell '{}' (expected sigma:t:lambda)", item));
        }
        out.push_back(c);
    }
    if (out.empty()) {
        throw bflow::DomainError("--cells lists no cells");
    }
    return out;
}

std::vector<bflow::ExperimentDesign> designs_for(const std::string& cells, double mu, std::size_t reps,
                                                 std::uint64_t seed)
{
    if (cells.empty() || cells == "all") {
        auto d = bflow::ExperimentDesign::crossed(reps, seed);
        d.mu = mu;
        return {d};
    }
    // Replicate r draws the same stream in every cell, so splitting the design
    // per cell leaves the results unchanged.
    std::vector<bflow::ExperimentDesign> out;
    for (const auto& c : parse_cells(cells)) {
        out.push_back({{c.lambda}, {c.t}, {c.sigma}, mu, reps, seed});
    }
    return out;
}

struct TableFlags {
    std::size_t reps{500};
    std::uint64_t seed{42};
    std::string cells{"all"};
    double mu{5.0};
    std::string out;
    bool interp{false};
};

void add_table_flags(CLI::App* cmd, TableFlags& f)
{
    cmd->add_option("--reps", f.reps, "replicates per cell")->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--cells", f.cells, "'all' or sigma:t:lambda,... ");
    cmd->add_option("--mu", f.mu, "mean segment length")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, "output prefix; writes <out>.csv and <out>.json (CSV to stdout if absent)");
}

RunMetadata table_meta(const std::string& command, const TableFlags& f)
{
    return {command, f.seed, {{"reps", std::to_string(f.reps)}, {"cells", f.cells}, {"mu", num(f.mu)}}};
}

int run_table1(const TableFlags& f)
{
    std::vector<bflow::Table1Row> rows;
    for (const auto& d : designs_for(f.cells, f.mu, f.reps, f.seed)) {
        auto part = bflow::table1(d, bflow::default_thread_count());
        rows.insert(rows.end(), part.begin(), part.end());
    }
    const auto meta = table_meta("table1", f);
    if (f.out.empty()) {
        bflow::write_table1_csv(std::cout, rows, meta);
        return ok;
    }
    auto csv = open_output(f.out + ".csv");
    bflow::write_table1_csv(csv, rows, meta);
    auto json = open_output(f.out + ".json");
    bflow::write_table1_json(json, rows, meta);
    return ok;
}

int run_table2(const TableFlags& f)
{
    std::vector<bflow::Table2Row> rows;
    for (const auto& d : designs_for(f.cells, f.mu, f.reps, f.seed)) {
        auto part = bflow::table2(d, bflow::default_thread_count(), f.interp);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    auto meta = table_meta("table2", f);
    meta.config.emplace_back("interp", f.interp ? "true" : "false");
    if (f.out.empty()) {
        bflow::write_table2_csv(std::cout, rows, meta);
        return ok;
    }
    auto csv = open_output(f.out + ".csv");
    bflow::write_table2_csv(csv, rows, meta);
    auto json = open_output(f.out + ".json");
    bflow::write_table2_json(json, rows, meta);
    return ok;
}

struct CellFlags {
    double lambda{0.2};
    double t{10000.0};
    double mu{5.0};
    double sigma{0.0};
    std::size_t reps{1};
    std::uint64_t seed{42};
    std::string out;
};

void add_cell_flags(CLI::App* cmd, CellFlags& f)
{
    cmd->add_option("--lambda", f.lambda, "arrival rate")->check(CLI::PositiveNumber);
    cmd->add_option("--t", f.t, "observation horizon")->check(CLI::PositiveNumber);
    cmd->add_option("--mu", f.mu, "mean segment length")->check(CLI::PositiveNumber);
    cmd->add_option("--sigma", f.sigma, "segment length sd")->check(CLI::NonNegativeNumber);
    cmd->add_option("--reps", f.reps, "replicates")->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
    cmd->add_option("--seed", f.seed, "master seed");
}

RunMetadata cell_meta(const std::string& command, const CellFlags& f)
{
    return {command,
            f.seed,
            {{"lambda", num(f.lambda)},
             {"t", num(f.t)},
             {"mu", num(f.mu)},
             {"sigma", num(f.sigma)},
             {"reps", std::to_string(f.reps)}}};
}

int run_simulate(const CellFlags& f)
{
    const std::filesystem::path dir = f.out;
    const bflow::ModelParams params{f.lambda, bflow::SegmentLaw::normal(f.mu, f.sigma), f.t};
    const auto meta = cell_meta("simulate", f);

    std::vector<bflow::SimRun> runs(f.reps);
    bflow::parallel_for(f.reps, bflow::default_thread_count(), [&](std::size_t r) {
        runs[r] = bflow::simulate_run(params, bflow::RandomStream(f.seed, r));
    });

    bflow::SimulateSummary summary;
    summary.cell = {f.lambda, f.t, f.sigma};
    summary.mu = f.mu;
    summary.reps = f.reps;
    summary.expected_n = f.lambda * f.t * std::exp(-f.lambda * f.mu);
    std::vector<double> ns, arrivals;
    for (std::size_t r = 0; r < f.reps; ++r) {
        const auto& run = runs[r];
        auto csv = open_output(dir / fmt::format("clumps_{:04d}.csv", r));
        auto rep_meta = meta;
        rep_meta.config.emplace_back("replicate", std::to_string(r));
        bflow::write_clumps_csv(csv, run.clumps, rep_meta);
        summary.n_per_rep.push_back(run.clumps.size());
        summary.arrivals_per_rep.push_back(run.total_arrivals);
        summary.residual_open.push_back(run.residual_open);
        ns.push_back(static_cast<double>(run.clumps.size()));
        arrivals.push_back(static_cast<double>(run.total_arrivals));
    }
    summary.mean_n = bflow::numerics::compensated_total(ns) / static_cast<double>(f.reps);
    summary.mean_arrivals = bflow::numerics::compensated_total(arrivals) / static_cast<double>(f.reps);
    auto json = open_output(dir / "summary.json");
    bflow::write_simulate_json(json, summary, meta);
    std::cout << fmt::format("{} replicates written to {}; mean clumps {:.2f} (expected {:.2f})\n", f.reps,
                             dir.string(), summary.mean_n, summary.expected_n);
    return ok;
}

int run_gof(const CellFlags& f)
{
    const bflow::ExperimentDesign design{{f.lambda}, {f.t}, {f.sigma}, f.mu, f.reps, f.seed};
    const auto report = bflow::gof(design, bflow::default_thread_count());
    for (const auto& w : report.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    const auto meta = cell_meta("gof", f);
    if (f.out.empty()) {
        bflow::write_gof_json(std::cout, report, meta);
    } else {
        auto json = open_output(f.out);
        bflow::write_gof_json(json, report, meta);
    }
    return ok;
}

struct AnalyzeFlags {
    std::string input;
    std::string schema{"v_cl"};
    double mu{4.45};
    std::string domain{"physical"};
    double min_frac{0.5};
    std::string out;
    std::string rejects;
    bool no_mle{false};
    std::optional<std::size_t> n;
    std::optional<double> ybar;
    std::optional<double> s2y;
};

int run_analyze(const AnalyzeFlags& f)
{
    RunMetadata meta{"analyze", 0, {{"mu", num(f.mu)}, {"domain", f.domain}, {"min_frac", num(f.min_frac)}}};
    bflow::AnalyzeReport report;
    if (f.input.empty()) {
        if (!f.n || !f.ybar || !f.s2y) {
            throw bflow::DomainError("give --input, or all of --n, --ybar and --s2y");
        }
        meta.config.emplace_back("n", std::to_string(*f.n));
        meta.config.emplace_back("ybar", num(*f.ybar));
        meta.config.emplace_back("s2y", num(*f.s2y));
        report = bflow::analyze_summary(*f.n, *f.ybar, *f.s2y, f.mu);
    } else {
        meta.config.emplace_back("input", f.input);
        meta.config.emplace_back("schema", f.schema);
        const auto parsed = bflow::parse_counter_csv(std::filesystem::path(f.input), bflow::parse_schema(f.schema));
        if (!f.rejects.empty()) {
            auto rej = open_output(f.rejects);
            bflow::write_rejects_csv(rej, parsed.rejects);
        }
        bflow::AnalyzeOptions options;
        options.domain = bflow::parse_domain(f.domain);
        options.d0_m = f.mu / 1000.0;
        options.min_frac = f.min_frac;
        options.with_mle = !f.no_mle;
        try {
            report = bflow::analyze_run(parsed, std::filesystem::path(f.input).stem().string(), options);
        } catch (...) {
            bflow::detail::rethrow_with_context(f.input);
        }
        if (report.summary.removal_warning) {
            std::cerr << fmt::format("warning: {} of {} records removed during cleaning\n", report.summary.n_removed,
                                     report.summary.n_raw);
        }
    }
    if (f.out.empty()) {
        bflow::write_analyze_json(std::cout, report, meta);
    } else {
        auto json = open_output(f.out);
        bflow::write_analyze_json(json, report, meta);
    }
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Particle flow estimation from type II counter clump lengths"};
    app.name("boolean-flow");
    app.require_subcommand(1);

    CellFlags sim;
    auto* simulate = app.add_subcommand("simulate", "simulate replicates of one cell");
    add_cell_flags(simulate, sim);
    simulate->add_option("--out", sim.out, "output directory")->required();

    TableFlags t1;
    auto* table1 = app.add_subcommand("table1", "bias, efficiency and coverage of the rate estimators");
    add_table_flags(table1, t1);

    TableFlags t2;
    auto* table2 = app.add_subcommand("table2", "error of the total flow estimators");
    add_table_flags(table2, t2);
    table2->add_flag("--interp", t2.interp, "interpolate conditional mean orders");

    AnalyzeFlags an;
    auto* analyze = app.add_subcommand("analyze", "estimate rate and flow for one counter run");
    analyze->add_option("--input", an.input, "counter CSV");
    analyze->add_option("--schema", an.schema, "dtf_dtb or v_cl");
    analyze->add_option("--mu", an.mu, "particle diameter in mm")->check(CLI::PositiveNumber);
    analyze->add_option("--domain", an.domain, "physical or time");
    analyze->add_option("--min-frac", an.min_frac, "drop clumps shorter than this fraction of the diameter")
        ->check(CLI::Range(0.0, 0.999999));
    analyze->add_option("--out", an.out, "JSON report path (stdout if absent)");
    analyze->add_option("--rejects", an.rejects, "write rejected rows here");
    analyze->add_flag("--no-mle", an.no_mle, "skip the fixed-segment likelihood fit");
    analyze->add_option("--n", an.n, "summary mode: clump count")->check(CLI::PositiveNumber);
    analyze->add_option("--ybar", an.ybar, "summary mode: mean clump length")->check(CLI::PositiveNumber);
    analyze->add_option("--s2y", an.s2y, "summary mode: clump length variance")->check(CLI::NonNegativeNumber);

    CellFlags gf;
    gf.reps = 500;
    auto* gof = app.add_subcommand("gof", "normality and fit diagnostics over replicates");
    add_cell_flags(gof, gf);
    gof->add_option("--out", gf.out, "JSON report path (stdout if absent)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        if (*simulate) {
            return run_simulate(sim);
        }
        if (*table1) {
            return run_table1(t1);
        }
        if (*table2) {
            return run_table2(t2);
        }
        if (*analyze) {
            return run_analyze(an);
        }
        return run_gof(gf);
    } catch (const bflow::DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const bflow::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return data;
    } catch (const bflow::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return data;
    }
}
