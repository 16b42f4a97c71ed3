#include "bflow/simulate.hpp"

#include "bflow/error.hpp"
#include "bflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include <fmt/format.h>

namespace bflow {

ClumpSweep clump_from_arrivals(std::span<const double> arrivals, std::span<const double> segments,
                               double horizon)
{
    if (arrivals.size() != segments.size()) {
        throw DomainError(fmt::format("{} arrivals but {} segment lengths", arrivals.size(), segments.size()));
    }
    detail::require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive and finite");

    ClumpSweep out;
    double start = 0.0;
    double extent = 0.0;   // max(a_i - start + s_i) over the open clump
    double previous_end = 0.0;
    std::int64_t order = 0;

    const auto close = [&] {
        out.spacings.push_back(start - previous_end);
        out.clumps.push_back({start, extent, order});
        previous_end = start + extent;
    };

    for (std::size_t i = 0; i < arrivals.size(); ++i) {
        const double a = arrivals[i];
        const double s = segments[i];
        if (!(a >= 0.0 && a <= horizon)) {
            throw DomainError(fmt::format("arrival {} at {} lies outside [0, {}]", i, a, horizon));
        }
        if (i > 0 && a < arrivals[i - 1]) {
            throw DomainError(fmt::format("arrivals are not sorted at index {}", i));
        }
        if (!(std::isfinite(s) && s > 0.0)) {
            throw DomainError(fmt::format("segment length {} at index {} is not positive", s, i));
        }
        if (order > 0 && a <= start + extent) {
            extent = std::max(extent, a - start + s);
            ++order;
            continue;
        }
        if (order > 0) {
            close();
        }
        start = a;
        extent = s;
        order = 1;
    }
    if (order > 0) {
        if (start + extent > horizon) {
            out.residual_open = true;
            out.residual_order = order;
        } else {
            close();
        }
    }
    return out;
}

std::vector<double> SimRun::clump_lengths() const
{
    std::vector<double> out;
    out.reserve(clumps.size());
    for (const auto& c : clumps) {
        out.push_back(c.length);
    }
    return out;
}

SimRun simulate_run(const ModelParams& params, const RandomStream& stream)
{
    params.validate();
    if (!params.horizon) {
        throw DomainError("simulate_run requires a horizon");
    }
    const double horizon = *params.horizon;

    SimRun run;
    auto arrival_engine = stream.engine(RandomStream::Substream::arrivals);
    std::exponential_distribution<double> unit_gap(1.0);
    for (double t = unit_gap(arrival_engine) / params.lambda; t <= horizon;
         t += unit_gap(arrival_engine) / params.lambda) {
        run.arrivals.push_back(t);
    }

    auto segment_engine = stream.engine(RandomStream::Substream::segments);
    run.segment_lengths.reserve(run.arrivals.size());
    for (std::size_t i = 0; i < run.arrivals.size(); ++i) {
        run.segment_lengths.push_back(params.segments.sample(segment_engine));
    }

    auto sweep = clump_from_arrivals(run.arrivals, run.segment_lengths, horizon);
    run.clumps = std::move(sweep.clumps);
    run.spacings = std::move(sweep.spacings);
    run.residual_open = sweep.residual_open;
    run.residual_order = sweep.residual_order;
    run.total_arrivals = static_cast<std::int64_t>(run.arrivals.size());
    return run;
}

ExperimentDesign ExperimentDesign::crossed(std::size_t replicates, std::uint64_t seed)
{
    return {{0.1, 0.2, 0.3}, {1000.0, 10000.0}, {0.0, 0.5, 1.0}, 5.0, replicates, seed};
}

void ExperimentDesign::validate() const
{
    detail::require(replicates >= 1, "design needs at least one replicate");
    detail::require(!lambdas.empty() && !horizons.empty() && !sigmas.empty(), "design has an empty factor");
    detail::require(std::isfinite(mu) && mu > 0.0, "mean segment length must be positive");
    for (double v : lambdas) {
        detail::require(std::isfinite(v) && v > 0.0, "design rates must be positive");
    }
    for (double v : horizons) {
        detail::require(std::isfinite(v) && v > 0.0, "design horizons must be positive");
    }
    for (double v : sigmas) {
        detail::require(std::isfinite(v) && v >= 0.0, "design segment sds must be non-negative");
    }
}

std::vector<DesignCell> ExperimentDesign::cells() const
{
    std::vector<DesignCell> out;
    for (double sigma : sigmas) {
        for (double t : horizons) {
            for (double lambda : lambdas) {
                out.push_back({lambda, t, sigma});
            }
        }
    }
    return out;
}

ReplicateResult simulate_replicate(const ExperimentDesign& design, const DesignCell& cell, std::size_t r)
{
    const ModelParams params{cell.lambda, SegmentLaw::normal(design.mu, cell.sigma), cell.horizon};
    auto run = simulate_run(params, RandomStream(design.master_seed, r));
    if (run.clumps.empty()) {
        throw DataError("no complete clumps observed");
    }
    return {ClumpSample::from_lengths(run.clump_lengths(), design.mu, 1e-6, std::move(run.spacings)),
            run.total_arrivals, run.residual_open};
}

std::vector<CellResult> run_design(const ExperimentDesign& design, unsigned threads)
{
    design.validate();
    const auto cells = design.cells();
    const std::size_t reps = design.replicates;

    std::vector<std::optional<ReplicateResult>> slots(cells.size() * reps);
    parallel_for(slots.size(), threads, [&](std::size_t index) {
        const auto& cell = cells[index / reps];
        const std::size_t r = index % reps;
        try {
            slots[index] = simulate_replicate(design, cell, r);
        } catch (...) {
            detail::rethrow_with_context(fmt::format("cell (lambda={}, t={}, sigma={}) replicate {}",
                                                     cell.lambda, cell.horizon, cell.sigma, r));
        }
    });

    std::vector<CellResult> out;
    out.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        CellResult result{cells[c], {}};
        result.replicates.reserve(reps);
        for (std::size_t r = 0; r < reps; ++r) {
            result.replicates.push_back(std::move(*slots[c * reps + r]));
        }
        out.push_back(std::move(result));
    }
    return out;
}

} // namespace bflow
