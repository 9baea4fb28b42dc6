#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mobres/csv.hpp"
#include "mobres/ingest.hpp"
#include "mobres/iso_codes.hpp"
#include "mobres/measures.hpp"
#include "mobres/rankstats.hpp"
#include "mobres/stats.hpp"
#include "mobres/types.hpp"

namespace mobres {

// ---------------------------------------------------------------------------
// Index tables
// ---------------------------------------------------------------------------

enum class HigherIs { Better, Worse, Neutral };

inline constexpr std::string_view higher_is_name(HigherIs h) {
    switch (h) {
        case HigherIs::Better: return "better";
        case HigherIs::Worse: return "worse";
        case HigherIs::Neutral: return "neutral";
    }
    return "?";
}

inline std::optional<HigherIs> parse_higher_is(std::string_view s) {
    if (s == "better") return HigherIs::Better;
    if (s == "worse") return HigherIs::Worse;
    if (s == "neutral") return HigherIs::Neutral;
    return std::nullopt;
}

/// One country-level attribute (population, HDI, ...) keyed by iso_code.
/// higher_is is descriptive metadata only; it never flips values.
struct IndexTable {
    std::string name;
    std::map<std::string, double> values;
    HigherIs higher_is = HigherIs::Neutral;
};

/// Two-column (iso_code, value) CSV. Codes may be alpha-2 or alpha-3; the
/// shared mapping table normalizes them to alpha-2. Duplicate codes after
/// normalization and non-finite values are data errors; unknown codes are
/// skipped and reported.
inline IndexTable load_index_csv(std::istream& in, std::string name, const CountryCodeMap& codes,
                                 ParseReport& report, HigherIs higher_is = HigherIs::Neutral) {
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw DataError("index '" + name + "': empty file");
    detail::HeaderIndex hdr(row, "index '" + name + "'");
    const std::size_t c_code = hdr.require("iso_code");
    const std::size_t c_value = hdr.require("value");

    IndexTable table{std::move(name), {}, higher_is};
    while (reader.next(row)) {
        ++report.rows_read;
        if (row.size() <= std::max(c_code, c_value)) {
            ++report.rows_skipped;
            report.warn("index '" + table.name + "': short row skipped");
            continue;
        }
        std::string code = row[c_code];
        std::transform(code.begin(), code.end(), code.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        if (code.size() == 3) {
            auto a2 = codes.alpha2(code);
            if (!a2) {
                ++report.rows_skipped;
                report.warn("index '" + table.name + "': unknown alpha-3 code " + code);
                continue;
            }
            code = *a2;
        } else if (code.size() != 2) {
            ++report.rows_skipped;
            report.warn("index '" + table.name + "': malformed code '" + code + "'");
            continue;
        }
        auto value = csv::parse_double(row[c_value]);
        if (!value) {
            ++report.rows_skipped;
            report.warn("index '" + table.name + "': unparsable value for " + code);
            continue;
        }
        if (!std::isfinite(*value))
            throw DataError("index '" + table.name + "': non-finite value for " + code);
        if (!table.values.emplace(code, *value).second)
            throw DataError("index '" + table.name + "': duplicate code " + code);
    }
    return table;
}

struct IndexManifestEntry {
    std::string name;
    std::string file;
    HigherIs higher_is = HigherIs::Neutral;
};

/// JSON array of {"name", "file", "higher_is"} entries naming the index
/// CSVs to load.
inline std::vector<IndexManifestEntry> load_indices_manifest(std::istream& in) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("indices manifest: parse failure: ") + e.what());
    }
    if (!doc.is_array()) throw DataError("indices manifest: expected a JSON array");
    std::vector<IndexManifestEntry> entries;
    std::set<std::string> seen;
    for (const auto& item : doc) {
        IndexManifestEntry e;
        if (!item.contains("name") || !item.contains("file"))
            throw DataError("indices manifest: entry missing name or file");
        e.name = item["name"].get<std::string>();
        e.file = item["file"].get<std::string>();
        if (item.contains("higher_is")) {
            auto h = parse_higher_is(item["higher_is"].get<std::string>());
            if (!h)
                throw DataError("indices manifest: bad higher_is for '" + e.name + "'");
            e.higher_is = *h;
        }
        if (!seen.insert(e.name).second)
            throw DataError("indices manifest: duplicate index name '" + e.name + "'");
        entries.push_back(std::move(e));
    }
    return entries;
}

inline double per_capita(double value, double population) {
    if (population <= 0) throw DataError("per_capita: population must be positive");
    return value / population;
}

// ---------------------------------------------------------------------------
// Measure-index correlation
// ---------------------------------------------------------------------------

inline std::string significance_stars(double p) {
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.1) return "*";
    return "";
}

struct CorrelationRow {
    std::string measure;
    std::string index;
    double tau = 0;
    double p = 1;
    std::size_t n = 0;
    std::string stars;
    bool insufficient_data = false;
};

/// Kendall tau-b of every (measure, index) combination over the inner join
/// of their country sets. Joins smaller than min_join produce a flagged row
/// instead of a statistic.
inline std::vector<CorrelationRow> correlate_measures_with_indices(
    const std::vector<MeasureTable>& measures, const std::vector<IndexTable>& indices,
    std::size_t min_join = 10) {
    std::vector<CorrelationRow> rows;
    for (const auto& m : measures) {
        for (const auto& idx : indices) {
            CorrelationRow row;
            row.measure = m.name;
            row.index = idx.name;
            std::vector<double> xs, ys;
            for (const auto& [iso, x] : m.values) {
                auto it = idx.values.find(iso);
                if (it == idx.values.end()) continue;
                xs.push_back(x);
                ys.push_back(it->second);
            }
            row.n = xs.size();
            std::optional<TauResult> tau;
            if (row.n >= std::max<std::size_t>(min_join, 3)) tau = kendall_tau_b(xs, ys);
            if (row.n < min_join || !tau) {
                row.insufficient_data = true;
            } else {
                row.tau = tau->tau;
                row.p = tau->p_value;
                row.stars = significance_stars(row.p);
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Activity vs outcome time-series comparison
// ---------------------------------------------------------------------------

struct OutcomeComparison {
    std::string outcome;     // stringency | confirmed_cases | confirmed_deaths
    double mean_tau = 0;
    std::size_t n_countries = 0;
    std::size_t n_undefined = 0;  // degenerate taus excluded from the mean
};

/// Per-country Kendall tau between the mean inverted non-Parks activity
/// series and each outcome series over the window, averaged across
/// countries. Outcome series pass through the same gap repair as activity;
/// countries whose outcome series cannot be repaired or whose tau is
/// degenerate are excluded and counted.
inline std::vector<OutcomeComparison> stringency_vs_outcomes(
    const Dataset& data, const AnalysisWindow& window, const AlignParams& params,
    const std::map<std::string, std::vector<AnalysisWindow>>& masks = {}) {
    struct Acc {
        double sum = 0;
        std::size_t n = 0;
        std::size_t undefined = 0;
    };
    std::map<std::string, Acc> acc{{"stringency", {}}, {"confirmed_cases", {}},
                                   {"confirmed_deaths", {}}};

    for (const auto& [iso, record] : data.countries) {
        std::vector<AnalysisWindow> country_masks;
        if (auto it = masks.find(iso); it != masks.end()) country_masks = it->second;
        auto aligned = align(record, window, params, country_masks);
        if (aligned.pairs.empty()) continue;
        auto activity = mean_activity_vector(aligned.pairs, {ActivityCategory::Parks});
        if (!activity) continue;

        auto compare = [&](const std::string& key, const DailySeries& series) {
            auto repaired = repair_to_window(series, window, params, {});
            auto* values = std::get_if<std::vector<double>>(&repaired);
            Acc& a = acc[key];
            if (!values) {
                ++a.undefined;
                return;
            }
            auto tau = kendall_tau_b(*activity, *values);
            if (!tau) {
                ++a.undefined;
                return;
            }
            a.sum += tau->tau;
            ++a.n;
        };
        compare("stringency", record.stringency);
        compare("confirmed_cases", record.confirmed_cases);
        compare("confirmed_deaths", record.deaths);
    }

    std::vector<OutcomeComparison> out;
    for (const auto& key : {"stringency", "confirmed_cases", "confirmed_deaths"}) {
        const Acc& a = acc[key];
        out.push_back({key, a.n > 0 ? a.sum / static_cast<double>(a.n) : 0.0, a.n, a.undefined});
    }
    return out;
}

} // namespace mobres
