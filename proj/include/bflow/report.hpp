#pragma once

#include "bflow/harness.hpp"
#include "bflow/simulate.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bflow {

inline constexpr int schema_version = 1;

/// Provenance written with every output: the command, its seed and the
/// configuration it ran with. Thread counts are left out on purpose so
/// outputs do not depend on them.
struct RunMetadata {
    std::string command;
    std::uint64_t seed{0};
    std::vector<std::pair<std::string, std::string>> config;
};

/// CSV with one leading `# ` comment line holding the schema version, seed
/// and config, then a header row.
void write_table1_csv(std::ostream& out, std::span<const Table1Row> rows, const RunMetadata& meta);
void write_table2_csv(std::ostream& out, std::span<const Table2Row> rows, const RunMetadata& meta);
/// `start,length,order` per complete clump.
void write_clumps_csv(std::ostream& out, std::span<const Clump> clumps, const RunMetadata& meta);

/// JSON documents: {"schema_version", "metadata", ...payload}.
void write_table1_json(std::ostream& out, std::span<const Table1Row> rows, const RunMetadata& meta);
void write_table2_json(std::ostream& out, std::span<const Table2Row> rows, const RunMetadata& meta);
void write_analyze_json(std::ostream& out, const AnalyzeReport& report, const RunMetadata& meta);
void write_gof_json(std::ostream& out, const GofReport& report, const RunMetadata& meta);

struct SimulateSummary {
    DesignCell cell{};
    double mu{0.0};
    std::size_t reps{0};
    double mean_n{0.0};
    double mean_arrivals{0.0};
    double expected_n{0.0};
    std::vector<std::size_t> n_per_rep;
    std::vector<std::int64_t> arrivals_per_rep;
    std::vector<bool> residual_open;
};

void write_simulate_json(std::ostream& out, const SimulateSummary& summary, const RunMetadata& meta);

} // namespace bflow
