#include "bflow/ingest.hpp"

#include "bflow/error.hpp"
#include "bflow/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

#include <fmt/format.h>

namespace bflow {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(std::string_view field)
{
    field = trim(field);
    if (!field.empty() && field.front() == '+') {
        field.remove_prefix(1);
    }
    double value = 0.0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || end != field.data() + field.size() || field.empty()) {
        return std::nullopt;
    }
    return value;
}

std::string csv_quote(std::string_view s)
{
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

} // namespace

CounterSchema parse_schema(std::string_view name)
{
    if (name == "dtf_dtb") {
        return CounterSchema::dtf_dtb;
    }
    if (name == "v_cl") {
        return CounterSchema::v_cl;
    }
    throw DomainError(fmt::format("unknown schema '{}' (expected dtf_dtb or v_cl)", name));
}

ParseResult parse_counter_csv(std::istream& in, CounterSchema schema)
{
    const std::string_view expected = schema == CounterSchema::dtf_dtb ? "dt_f_s,dt_b_s" : "v_m_s,cl_m";
    ParseResult out;
    std::string line;
    std::size_t number = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++number;
        const auto text = trim(line);
        if (text.empty()) {
            continue;
        }
        if (!header_seen) {
            std::string compact;
            for (char c : text) {
                if (c != ' ' && c != '\t') {
                    compact += c;
                }
            }
            if (compact != expected) {
                throw DataError(fmt::format("line {}: header '{}' does not match schema '{}'", number, text, expected));
            }
            header_seen = true;
            continue;
        }
        const auto comma = text.find(',');
        if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos) {
            out.rejects.push_back({number, "wrong field count", std::string(text)});
            continue;
        }
        const auto a = parse_number(text.substr(0, comma));
        const auto b = parse_number(text.substr(comma + 1));
        if (!a || !b) {
            out.rejects.push_back({number, "not a number", std::string(text)});
            continue;
        }
        if (!std::isfinite(*a) || !std::isfinite(*b)) {
            out.rejects.push_back({number, "non-finite value", std::string(text)});
            continue;
        }
        if (schema == CounterSchema::dtf_dtb) {
            if (*a == 0.0) {
                out.rejects.push_back({number, "zero transit time", std::string(text)});
                continue;
            }
            const double v = sensor_gap_m / *a;
            out.records.push_back({number, v, v * *b});
        } else {
            out.records.push_back({number, *a, *b});
        }
    }
    if (in.bad()) {
        throw DataError("read error while parsing counter data");
    }
    return out;
}

ParseResult parse_counter_csv(const std::filesystem::path& path, CounterSchema schema)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open '{}'", path.string()));
    }
    try {
        return parse_counter_csv(in, schema);
    } catch (...) {
        detail::rethrow_with_context(path.string());
    }
}

void write_rejects_csv(std::ostream& out, std::span<const RejectedRow> rejects)
{
    out << "row,reason,raw\n";
    for (const auto& r : rejects) {
        out << r.line << ',' << csv_quote(r.reason) << ',' << csv_quote(r.raw) << '\n';
    }
}

double CleanResult::removed_fraction() const
{
    const auto total = kept.size() + removed.size();
    return total == 0 ? 0.0 : static_cast<double>(removed.size()) / static_cast<double>(total);
}

CleanResult clean_records(std::span<const CounterRecord> records, double d0_m, double min_frac)
{
    detail::require(std::isfinite(d0_m) && d0_m > 0.0, "particle diameter must be positive");
    detail::require(min_frac >= 0.0 && min_frac < 1.0, "minimum length fraction must lie in [0, 1)");
    CleanResult out;
    for (const auto& r : records) {
        if (!(r.v > 0.0)) {
            out.removed.push_back({r, "negative velocity"});
        } else if (!(r.cl > 0.0)) {
            out.removed.push_back({r, "negative length"});
        } else if (r.cl < min_frac * d0_m) {
            out.removed.push_back({r, "short clump"});
        } else {
            out.kept.push_back(r);
        }
    }
    return out;
}

std::vector<double> to_time_domain(std::span<const double> lengths_mm, double vbar)
{
    detail::require(std::isfinite(vbar) && vbar > 0.0, "mean velocity must be positive");
    std::vector<double> out(lengths_mm.begin(), lengths_mm.end());
    for (double& v : out) {
        v /= vbar;
    }
    return out;
}

std::vector<double> from_time_domain(std::span<const double> lengths_ms, double vbar)
{
    detail::require(std::isfinite(vbar) && vbar > 0.0, "mean velocity must be positive");
    std::vector<double> out(lengths_ms.begin(), lengths_ms.end());
    for (double& v : out) {
        v *= vbar;
    }
    return out;
}

double rate_to_time_domain(double lambda_per_mm, double vbar)
{
    detail::require(std::isfinite(vbar) && vbar > 0.0, "mean velocity must be positive");
    return lambda_per_mm * vbar;
}

double rate_from_time_domain(double lambda_per_ms, double vbar)
{
    detail::require(std::isfinite(vbar) && vbar > 0.0, "mean velocity must be positive");
    return lambda_per_ms / vbar;
}

ClumpSample build_sample(std::vector<double> lengths, double mu, double singleton_tol)
{
    return ClumpSample::from_lengths(std::move(lengths), mu, singleton_tol);
}

std::string_view to_string(Domain domain)
{
    return domain == Domain::physical ? "physical" : "time";
}

Domain parse_domain(std::string_view name)
{
    if (name == "physical" || name == "mm") {
        return Domain::physical;
    }
    if (name == "time" || name == "msec") {
        return Domain::time;
    }
    throw DomainError(fmt::format("unknown domain '{}' (expected physical or time)", name));
}

PreparedRun prepare_run(std::string run_id, std::span<const CounterRecord> records, double d0_m,
                        double min_frac, Domain domain)
{
    auto cleaned = clean_records(records, d0_m, min_frac);
    if (cleaned.kept.empty()) {
        throw DataError(fmt::format("run '{}': no records left after cleaning", run_id));
    }

    PreparedRun run;
    std::vector<double> velocities;
    velocities.reserve(cleaned.kept.size());
    run.lengths.reserve(cleaned.kept.size());
    for (const auto& r : cleaned.kept) {
        velocities.push_back(r.v);
        run.lengths.push_back(r.cl * 1000.0);
    }
    const double vbar = numerics::compensated_total(velocities) / static_cast<double>(velocities.size());
    run.mu = d0_m * 1000.0;
    if (domain == Domain::time) {
        run.lengths = to_time_domain(run.lengths, vbar);
        run.mu /= vbar;
    }
    const auto moments = numerics::sample_moments(run.lengths);

    run.summary.run_id = std::move(run_id);
    run.summary.n_raw = records.size();
    run.summary.n_removed = cleaned.removed.size();
    run.summary.n = moments.n;
    run.summary.ybar = moments.mean;
    run.summary.s2y = moments.n > 1 ? moments.variance : 0.0;
    run.summary.vbar = vbar;
    run.summary.domain = domain;
    run.summary.removal_warning = cleaned.removed_fraction() > 0.01;
    run.removed = std::move(cleaned.removed);
    return run;
}

} // namespace bflow
