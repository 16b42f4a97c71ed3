#pragma once

#include "bflow/sample.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bflow {

/// Distance between the two sensor arrays, in metres.
inline constexpr double sensor_gap_m = 0.00078;

/// Input layouts. `dtf_dtb`: header `dt_f_s,dt_b_s`, the array-to-array
/// transit time and the total blocked time in seconds. `v_cl`: header
/// `v_m_s,cl_m`, velocity in m/s and clump length in metres.
enum class CounterSchema { dtf_dtb, v_cl };

/// Accepts "dtf_dtb" or "v_cl"; throws DomainError otherwise.
CounterSchema parse_schema(std::string_view name);

struct CounterRecord {
    std::size_t line;   // 1-based line in the source file
    double v;           // m/s
    double cl;          // m
};

struct RejectedRow {
    std::size_t line;
    std::string reason;
    std::string raw;
};

struct ParseResult {
    std::vector<CounterRecord> records;
    std::vector<RejectedRow> rejects;
};

/// One record per data row: v = 0.00078/Δt_f and CL = v·Δt_b for
/// `dtf_dtb`. Rows with the wrong field count, unparsable or nonfinite
/// numbers, or Δt_f = 0 go to the rejects list. Blank lines are skipped; an
/// empty input yields no records. Throws DataError on a header that does
/// not match the schema and when the file cannot be read.
ParseResult parse_counter_csv(std::istream& in, CounterSchema schema);
ParseResult parse_counter_csv(const std::filesystem::path& path, CounterSchema schema);

/// Writes `row,reason,raw`.
void write_rejects_csv(std::ostream& out, std::span<const RejectedRow> rejects);

struct RemovedRecord {
    CounterRecord record;
    std::string reason;   // "negative velocity", "negative length" or "short clump"
};

struct CleanResult {
    std::vector<CounterRecord> kept;
    std::vector<RemovedRecord> removed;

    double removed_fraction() const;
};

/// Drops records with v ≤ 0, cl ≤ 0, or cl < min_frac·d0 (d0 in metres),
/// checked in that order. Requires d0 > 0 and 0 ≤ min_frac < 1.
CleanResult clean_records(std::span<const CounterRecord> records, double d0_m, double min_frac = 0.5);

/// Length in msec = length in mm / v̄ (mm/msec, numerically equal to m/s).
std::vector<double> to_time_domain(std::span<const double> lengths_mm, double vbar);
std::vector<double> from_time_domain(std::span<const double> lengths_ms, double vbar);
/// A rate per mm becomes a rate per msec on multiplying by v̄.
double rate_to_time_domain(double lambda_per_mm, double vbar);
double rate_from_time_domain(double lambda_per_ms, double vbar);

/// ClumpSample with n - 1 variance and singletons counted within
/// mu·(1 + singleton_tol). Throws DomainError on an empty input or a
/// nonpositive length.
ClumpSample build_sample(std::vector<double> lengths, double mu, double singleton_tol = 1e-6);

enum class Domain { physical, time };

std::string_view to_string(Domain domain);
/// Accepts "physical"/"mm" or "time"/"msec"; throws DomainError otherwise.
Domain parse_domain(std::string_view name);

struct RunSummary {
    std::string run_id;
    std::size_t n_raw{0};
    std::size_t n_removed{0};
    std::size_t n{0};
    double ybar{0.0};
    double s2y{0.0};
    double vbar{0.0};     // mm/msec
    Domain domain{Domain::physical};
    bool removal_warning{false};   // more than 1% of records removed
};

/// Cleaned data of one run, ready for estimation.
struct PreparedRun {
    RunSummary summary;
    std::vector<double> lengths;   // mm or msec, per domain
    double mu{0.0};                // d0 in the same unit
    std::vector<RemovedRecord> removed;
};

/// Cleans `records`, converts lengths to mm, and moves them to the time
/// domain when asked. Throws DataError when nothing survives cleaning.
PreparedRun prepare_run(std::string run_id, std::span<const CounterRecord> records, double d0_m,
                        double min_frac, Domain domain);

} // namespace bflow
