#pragma once

#include "bflow/model.hpp"
#include "bflow/random.hpp"
#include "bflow/sample.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace bflow {

struct Clump {
    double start;
    double length;
    std::int64_t order;

    bool operator==(const Clump&) const = default;
};

/// Result of sweeping arrivals into clumps.
struct ClumpSweep {
    std::vector<Clump> clumps;       // complete clumps only
    std::vector<double> spacings;    // idle gap before each complete clump
    bool residual_open{false};       // a clump was still in progress at the horizon
    std::int64_t residual_order{0};
};

/// Groups occupation intervals [a_i, a_i + s_i] into clumps. A new clump
/// starts at a_j iff a_j lies beyond the current clump's end. Lengths are
/// max(a_i - start + s_i) over members, so a singleton's length is exactly
/// its segment. The first spacing is measured from time 0. A clump whose end
/// exceeds the horizon is flagged residual and left out of clumps/spacings.
/// Throws DomainError for unsorted or out-of-range arrivals, nonpositive
/// segments, or mismatched sizes.
ClumpSweep clump_from_arrivals(std::span<const double> arrivals, std::span<const double> segments,
                               double horizon);

struct SimRun {
    std::vector<double> arrivals;
    std::vector<double> segment_lengths;
    std::vector<Clump> clumps;
    std::vector<double> spacings;
    bool residual_open{false};
    std::int64_t residual_order{0};
    std::int64_t total_arrivals{0};   // A(t)

    std::vector<double> clump_lengths() const;
};

/// One realisation on [0, t]: arrivals by accumulating unit exponentials
/// scaled by 1/λ (arrivals substream), segment lengths drawn in arrival
/// order (segments substream). Requires a horizon.
SimRun simulate_run(const ModelParams& params, const RandomStream& stream);

struct DesignCell {
    double lambda;
    double horizon;
    double sigma;
};

struct ExperimentDesign {
    std::vector<double> lambdas;
    std::vector<double> horizons;
    std::vector<double> sigmas;
    double mu{5.0};
    std::size_t replicates{500};
    std::uint64_t master_seed{0};

    /// 3 x 2 x 3 layout: λ ∈ {0.1, 0.2, 0.3}, t ∈ {1000, 10000}, σ ∈ {0, 0.5, 1}, μ = 5.
    static ExperimentDesign crossed(std::size_t replicates, std::uint64_t seed);

    void validate() const;
    /// Cells ordered by σ, then t, then λ.
    std::vector<DesignCell> cells() const;
};

struct ReplicateResult {
    ClumpSample sample;
    std::int64_t total_arrivals;
    bool residual_open;
};

struct CellResult {
    DesignCell cell;
    std::vector<ReplicateResult> replicates;
};

/// Replicate r of one cell, drawn from RandomStream(design.master_seed, r),
/// reduced to its complete-clump sample (spacings attached). Throws
/// DataError when no clump completes.
ReplicateResult simulate_replicate(const ExperimentDesign& design, const DesignCell& cell, std::size_t r);

/// Runs every cell. Replicate r of every cell draws from
/// RandomStream(master_seed, r), so cells share arrival streams. Singletons
/// are classified with tolerance 1e-6. Results do not depend on `threads`.
/// Errors are rethrown with the cell and replicate named.
std::vector<CellResult> run_design(const ExperimentDesign& design, unsigned threads);

} // namespace bflow
