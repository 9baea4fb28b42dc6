#pragma once

#include <algorithm>
#include <array>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "mobres/csv.hpp"
#include "mobres/iso_codes.hpp"
#include "mobres/types.hpp"

namespace mobres {

// ---------------------------------------------------------------------------
// Parse bookkeeping
// ---------------------------------------------------------------------------

struct ParseReport {
    static constexpr std::size_t kMaxMessages = 50;

    std::size_t rows_read = 0;
    std::size_t rows_skipped = 0;
    std::size_t deeper_level_rows = 0;  // sub_region_2 rows, not used
    std::size_t warnings = 0;
    std::vector<std::string> messages;

    void warn(std::string msg) {
        ++warnings;
        if (messages.size() < kMaxMessages) messages.push_back(std::move(msg));
    }
};

namespace detail {

class HeaderIndex {
public:
    HeaderIndex(const std::vector<std::string>& header, std::string file_kind)
        : kind_(std::move(file_kind)) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            std::string name = header[i];
            if (i == 0 && name.size() >= 3 && static_cast<unsigned char>(name[0]) == 0xEF)
                name.erase(0, 3);  // UTF-8 BOM
            index_.emplace(std::move(name), i);
        }
    }

    std::size_t require(const std::string& column) const {
        auto it = index_.find(column);
        if (it == index_.end())
            throw DataError(kind_ + ": missing column '" + column + "'");
        return it->second;
    }

private:
    std::string kind_;
    std::map<std::string, std::size_t> index_;
};

inline const std::string& cell(const std::vector<std::string>& row, std::size_t i) {
    static const std::string empty;
    return i < row.size() ? row[i] : empty;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Community-mobility CSV
// ---------------------------------------------------------------------------

/// Parses the global community-mobility CSV into partial country records
/// (activity series only). National rows have empty sub_region fields;
/// first-level subregion rows have sub_region_1 set and sub_region_2 empty.
/// Rows below the first subregion level are ignored. Blank percent cells
/// become explicit missing markers; unparseable rows are skipped and counted.
inline std::map<std::string, CountryRecord> parse_mobility(std::istream& in, ParseReport& report) {
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw DataError("mobility csv: empty input");
    detail::HeaderIndex header(row, "mobility csv");

    const std::size_t col_code = header.require("country_region_code");
    const std::size_t col_name = header.require("country_region");
    const std::size_t col_sub1 = header.require("sub_region_1");
    const std::size_t col_sub2 = header.require("sub_region_2");
    const std::size_t col_date = header.require("date");
    std::array<std::size_t, 6> col_cat{};
    for (std::size_t i = 0; i < kAllCategories.size(); ++i)
        col_cat[i] = header.require(std::string(category_csv_column(kAllCategories[i])));

    std::map<std::string, CountryRecord> records;
    std::set<std::tuple<std::string, std::string, Date>> seen;

    std::size_t line = 1;
    while (reader.next(row)) {
        ++line;
        ++report.rows_read;
        const std::string& code = detail::cell(row, col_code);
        if (code.empty()) {
            ++report.rows_skipped;
            report.warn("mobility csv row " + std::to_string(line) + ": empty country code");
            continue;
        }
        if (!detail::cell(row, col_sub2).empty()) {
            ++report.deeper_level_rows;
            continue;
        }
        auto date = Date::parse_iso(detail::cell(row, col_date));
        if (!date) {
            ++report.rows_skipped;
            report.warn("mobility csv row " + std::to_string(line) + ": bad date '" +
                        detail::cell(row, col_date) + "'");
            continue;
        }

        std::array<std::optional<double>, 6> values;
        bool bad = false;
        for (std::size_t i = 0; i < kAllCategories.size(); ++i) {
            const std::string& text = detail::cell(row, col_cat[i]);
            if (text.empty()) continue;  // documented missing-data convention
            auto v = csv::parse_double(text);
            if (!v || *v < -100.0) {  // a 100% drop is the floor
                bad = true;
                report.warn("mobility csv row " + std::to_string(line) + ": bad value '" + text +
                            "' in " + std::string(category_csv_column(kAllCategories[i])));
                break;
            }
            values[i] = *v;
        }
        if (bad) {
            ++report.rows_skipped;
            continue;
        }

        const std::string& sub1 = detail::cell(row, col_sub1);
        if (!seen.emplace(code, sub1, *date).second) {
            ++report.rows_skipped;
            report.warn("mobility csv row " + std::to_string(line) + ": duplicate row for " + code +
                        (sub1.empty() ? "" : "/" + sub1) + " on " + date->to_iso());
            continue;
        }

        CountryRecord& rec = records[code];
        if (rec.iso_code.empty()) {
            rec.iso_code = code;
            rec.name = detail::cell(row, col_name);
        }
        CategorySeries& target = sub1.empty() ? rec.national : rec.subregions[sub1];
        for (std::size_t i = 0; i < kAllCategories.size(); ++i)
            target[kAllCategories[i]].set(*date, values[i]);
    }
    return records;
}

/// Re-emits parsed mobility records in the upstream column layout.
/// parse_mobility(write_mobility(x)) == x.
inline void write_mobility(std::ostream& out, const std::map<std::string, CountryRecord>& records) {
    std::vector<std::string> row = {"country_region_code", "country_region", "sub_region_1",
                                    "sub_region_2", "date"};
    for (ActivityCategory c : kAllCategories) row.emplace_back(category_csv_column(c));
    csv::write_row(out, row);

    auto emit_region = [&](const CountryRecord& rec, const std::string& sub1,
                           const CategorySeries& series) {
        Date lo, hi;
        bool any = false;
        for (const auto& [cat, s] : series) {
            if (s.empty()) continue;
            lo = any ? std::min(lo, s.start_date()) : s.start_date();
            hi = any ? std::max(hi, s.end_date()) : s.end_date();
            any = true;
        }
        if (!any) return;
        for (Date d = lo; d <= hi; ++d) {
            row = {rec.iso_code, rec.name, sub1, "", d.to_iso()};
            for (ActivityCategory c : kAllCategories) {
                auto it = series.find(c);
                auto v = it != series.end() ? it->second.at(d) : std::nullopt;
                row.push_back(v ? csv::format_double(*v) : "");
            }
            csv::write_row(out, row);
        }
    };

    for (const auto& [code, rec] : records) {
        emit_region(rec, "", rec.national);
        for (const auto& [sub, series] : rec.subregions) emit_region(rec, sub, series);
    }
}

// ---------------------------------------------------------------------------
// Government-response CSV
// ---------------------------------------------------------------------------

struct StringencyRecord {
    std::string name;
    DailySeries stringency;
    DailySeries cases;
    DailySeries deaths;

    bool operator==(const StringencyRecord&) const = default;
};

/// Parses the government-response tracker CSV (one row per country-day,
/// alpha-3 codes, compact dates). Stringency outside [0,100] and duplicate
/// (country, date) rows are fatal; non-monotonic cumulative counts only warn,
/// since upstream revisions happen.
inline std::map<std::string, StringencyRecord> parse_stringency(std::istream& in,
                                                                ParseReport& report) {
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw DataError("stringency csv: empty input");
    detail::HeaderIndex header(row, "stringency csv");

    const std::size_t col_name = header.require("CountryName");
    const std::size_t col_code = header.require("CountryCode");
    const std::size_t col_date = header.require("Date");
    const std::size_t col_idx = header.require("StringencyIndex");
    const std::size_t col_cases = header.require("ConfirmedCases");
    const std::size_t col_deaths = header.require("ConfirmedDeaths");

    std::map<std::string, StringencyRecord> records;
    std::set<std::pair<std::string, Date>> seen;

    std::size_t line = 1;
    while (reader.next(row)) {
        ++line;
        ++report.rows_read;
        const std::string& code = detail::cell(row, col_code);
        auto date = Date::parse_compact(detail::cell(row, col_date));
        if (code.empty() || !date) {
            ++report.rows_skipped;
            report.warn("stringency csv row " + std::to_string(line) + ": bad code or date");
            continue;
        }
        if (!seen.emplace(code, *date).second)
            throw DataError("stringency csv row " + std::to_string(line) + ": duplicate entry for " +
                            code + " on " + date->to_iso());

        auto parse_cell = [&](std::size_t col) -> std::optional<double> {
            return csv::parse_double(detail::cell(row, col));
        };
        std::optional<double> stringency = parse_cell(col_idx);
        if (!detail::cell(row, col_idx).empty() && !stringency) {
            ++report.rows_skipped;
            report.warn("stringency csv row " + std::to_string(line) + ": bad stringency value");
            continue;
        }
        if (stringency && (*stringency < 0.0 || *stringency > 100.0))
            throw DataError("stringency csv row " + std::to_string(line) + ": stringency " +
                            csv::format_double(*stringency) + " outside [0,100] for " + code);

        StringencyRecord& rec = records[code];
        if (rec.name.empty()) rec.name = detail::cell(row, col_name);
        rec.stringency.set(*date, stringency);
        rec.cases.set(*date, parse_cell(col_cases));
        rec.deaths.set(*date, parse_cell(col_deaths));
    }

    for (const auto& [code, rec] : records) {
        for (const auto* series : {&rec.cases, &rec.deaths}) {
            std::optional<double> prev;
            for (Date d = series->start_date(); d <= series->end_date(); ++d) {
                auto v = series->at(d);
                if (v && prev && *v < *prev)
                    report.warn("stringency csv: cumulative count decreases for " + code + " on " +
                                d.to_iso());
                if (v) prev = v;
            }
        }
    }
    return records;
}

/// parse_stringency(write_stringency(x)) == x.
inline void write_stringency(std::ostream& out,
                             const std::map<std::string, StringencyRecord>& records) {
    std::vector<std::string> row = {"CountryName", "CountryCode",    "Date",
                                    "StringencyIndex", "ConfirmedCases", "ConfirmedDeaths"};
    csv::write_row(out, row);
    for (const auto& [code, rec] : records) {
        Date lo, hi;
        bool any = false;
        for (const auto* s : {&rec.stringency, &rec.cases, &rec.deaths}) {
            if (s->empty()) continue;
            lo = any ? std::min(lo, s->start_date()) : s->start_date();
            hi = any ? std::max(hi, s->end_date()) : s->end_date();
            any = true;
        }
        if (!any) continue;
        for (Date d = lo; d <= hi; ++d) {
            auto fmt = [&](const DailySeries& s) {
                auto v = s.at(d);
                return v ? csv::format_double(*v) : std::string();
            };
            row = {rec.name, code, d.to_compact(), fmt(rec.stringency), fmt(rec.cases),
                   fmt(rec.deaths)};
            csv::write_row(out, row);
        }
    }
}

// ---------------------------------------------------------------------------
// Auxiliary tables
// ---------------------------------------------------------------------------

inline std::map<std::string, Continent> parse_continents(std::istream& in) {
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw DataError("continents csv: empty input");
    detail::HeaderIndex header(row, "continents csv");
    const std::size_t col_code = header.require("iso_code");
    const std::size_t col_cont = header.require("continent");

    std::map<std::string, Continent> out;
    std::size_t line = 1;
    while (reader.next(row)) {
        ++line;
        auto c = parse_continent(detail::cell(row, col_cont));
        if (!c)
            throw DataError("continents csv row " + std::to_string(line) + ": unknown continent '" +
                            detail::cell(row, col_cont) + "'");
        out[detail::cell(row, col_code)] = *c;
    }
    return out;
}

struct CountryInfo {
    double population = 0;
    double area_km2 = 0;
};

inline std::map<std::string, CountryInfo> parse_country_info(std::istream& in) {
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw DataError("country info csv: empty input");
    detail::HeaderIndex header(row, "country info csv");
    const std::size_t col_code = header.require("iso_code");
    const std::size_t col_pop = header.require("population");
    const std::size_t col_area = header.require("area_km2");

    std::map<std::string, CountryInfo> out;
    std::size_t line = 1;
    while (reader.next(row)) {
        ++line;
        auto pop = csv::parse_double(detail::cell(row, col_pop));
        auto area = csv::parse_double(detail::cell(row, col_area));
        if (!pop || !area)
            throw DataError("country info csv row " + std::to_string(line) + ": bad number");
        out[detail::cell(row, col_code)] = {*pop, *area};
    }
    return out;
}

/// One row per border pair; the relation is symmetrized on load.
inline std::map<std::string, std::set<std::string>> parse_neighbors(std::istream& in) {
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw DataError("neighbors csv: empty input");
    detail::HeaderIndex header(row, "neighbors csv");
    const std::size_t col_a = header.require("iso_code");
    const std::size_t col_b = header.require("neighbor_iso_code");

    std::map<std::string, std::set<std::string>> out;
    while (reader.next(row)) {
        const std::string& a = detail::cell(row, col_a);
        const std::string& b = detail::cell(row, col_b);
        if (a.empty() || b.empty() || a == b) continue;
        out[a].insert(b);
        out[b].insert(a);
    }
    return out;
}

/// Extra alpha-2 -> alpha-3 pairs overriding the built-in table.
inline void parse_code_map(std::istream& in, CountryCodeMap& map) {
    csv::Reader reader(in);
    std::vector<std::string> row;
    if (!reader.next(row)) throw DataError("code map csv: empty input");
    detail::HeaderIndex header(row, "code map csv");
    const std::size_t col_a2 = header.require("alpha2");
    const std::size_t col_a3 = header.require("alpha3");
    while (reader.next(row))
        map.add(detail::cell(row, col_a2), detail::cell(row, col_a3));
}

// ---------------------------------------------------------------------------
// Merge
// ---------------------------------------------------------------------------

struct MergeResult {
    Dataset dataset;
    std::vector<std::string> unmatched_mobility;    // alpha-2 codes dropped
    std::vector<std::string> unmatched_stringency;  // alpha-3 codes without activity data
};

/// Joins activity records (alpha-2) with government-response records
/// (alpha-3) and attaches auxiliary attributes. Codes that cannot be
/// bridged are dropped and reported.
inline MergeResult merge_dataset(std::map<std::string, CountryRecord> mobility,
                                 const std::map<std::string, StringencyRecord>& stringency,
                                 const CountryCodeMap& codes,
                                 const std::map<std::string, Continent>& continents = {},
                                 const std::map<std::string, CountryInfo>& info = {}) {
    MergeResult result;
    std::set<std::string> used_a3;
    for (auto& [a2, rec] : mobility) {
        auto a3 = codes.alpha3(a2);
        auto it = a3 ? stringency.find(*a3) : stringency.end();
        if (!a3 || it == stringency.end()) {
            result.unmatched_mobility.push_back(a2);
            continue;
        }
        used_a3.insert(*a3);
        rec.stringency = it->second.stringency;
        rec.confirmed_cases = it->second.cases;
        rec.deaths = it->second.deaths;
        if (auto c = continents.find(a2); c != continents.end()) rec.continent = c->second;
        if (auto i = info.find(a2); i != info.end()) {
            rec.population = i->second.population;
            rec.area_km2 = i->second.area_km2;
        }
        result.dataset.countries.emplace(a2, std::move(rec));
    }
    for (const auto& [a3, _] : stringency)
        if (!used_a3.contains(a3)) result.unmatched_stringency.push_back(a3);
    return result;
}

// ---------------------------------------------------------------------------
// Windowing, gap repair, alignment
// ---------------------------------------------------------------------------

struct AlignParams {
    double min_coverage = 0.9;   // observed (non-interpolated) fraction of window days
    int max_interior_gap = 3;    // longer interior gaps reject the series
};

using RepairResult = std::variant<std::vector<double>, ExclusionReason>;

/// Cuts `series` to the window and repairs it to a dense vector: interior
/// gaps up to `max_interior_gap` days are linearly interpolated; a gap at
/// either window edge, a longer interior gap, or observed coverage below
/// `min_coverage` rejects the series.
inline RepairResult repair_to_window(const DailySeries& series, const AnalysisWindow& window,
                                     const AlignParams& params,
                                     const std::vector<AnalysisWindow>& masks = {}) {
    const int n = window.days();
    std::vector<std::optional<double>> slots(static_cast<std::size_t>(n));
    int observed = 0;
    for (int i = 0; i < n; ++i) {
        Date d = window.start + i;
        bool masked = std::any_of(masks.begin(), masks.end(),
                                  [&](const AnalysisWindow& m) { return m.contains(d); });
        if (masked) continue;
        slots[static_cast<std::size_t>(i)] = series.at(d);
        if (slots[static_cast<std::size_t>(i)]) ++observed;
    }

    if (observed == 0) return ExclusionReason::LowCoverage;
    if (!slots.front() || !slots.back()) return ExclusionReason::EdgeGap;

    // interior gap runs
    int i = 0;
    while (i < n) {
        if (slots[static_cast<std::size_t>(i)]) {
            ++i;
            continue;
        }
        int j = i;
        while (j < n && !slots[static_cast<std::size_t>(j)]) ++j;
        if (j - i > params.max_interior_gap) return ExclusionReason::LongInteriorGap;
        i = j;
    }
    if (static_cast<double>(observed) < params.min_coverage * n)
        return ExclusionReason::LowCoverage;

    std::vector<double> out(static_cast<std::size_t>(n));
    i = 0;
    while (i < n) {
        if (slots[static_cast<std::size_t>(i)]) {
            out[static_cast<std::size_t>(i)] = *slots[static_cast<std::size_t>(i)];
            ++i;
            continue;
        }
        int lo = i - 1, hi = i;
        while (!slots[static_cast<std::size_t>(hi)]) ++hi;
        const double va = *slots[static_cast<std::size_t>(lo)];
        const double vb = *slots[static_cast<std::size_t>(hi)];
        for (int k = lo + 1; k < hi; ++k)
            out[static_cast<std::size_t>(k)] =
                va + (vb - va) * static_cast<double>(k - lo) / static_cast<double>(hi - lo);
        i = hi;
    }
    return out;
}

struct AlignmentResult {
    std::map<ActivityCategory, AlignedPair> pairs;
    std::map<ActivityCategory, ExclusionReason> rejected_categories;
    std::optional<ExclusionReason> country_rejection;  // stringency-side failure
};

/// Produces dense, co-registered (stringency, activity) vectors per category
/// over the window. Activity is negated for every category except
/// Residential so that stronger policy and reduced activity point the same
/// way. Masked dates are treated as missing before repair.
inline AlignmentResult align(const CountryRecord& record, const AnalysisWindow& window,
                             const AlignParams& params,
                             const std::vector<AnalysisWindow>& masks = {}) {
    AlignmentResult result;
    if (record.stringency.empty() || record.stringency.end_date() < window.start ||
        record.stringency.start_date() > window.end) {
        result.country_rejection = ExclusionReason::NoStringencyOverlap;
        return result;
    }
    RepairResult stringency = repair_to_window(record.stringency, window, params);
    if (std::holds_alternative<ExclusionReason>(stringency)) {
        result.country_rejection = ExclusionReason::StringencyGap;
        return result;
    }
    const std::vector<double>& svec = std::get<std::vector<double>>(stringency);

    for (const auto& [cat, series] : record.national) {
        RepairResult repaired = repair_to_window(series, window, params, masks);
        if (std::holds_alternative<ExclusionReason>(repaired)) {
            result.rejected_categories[cat] = std::get<ExclusionReason>(repaired);
            continue;
        }
        std::vector<double> activity = std::get<std::vector<double>>(std::move(repaired));
        if (category_is_inverted(cat))
            for (double& v : activity) v = -v;
        result.pairs.emplace(cat, AlignedPair{cat, svec, std::move(activity)});
    }
    return result;
}

} // namespace mobres
