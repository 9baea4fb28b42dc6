#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mobres/date.hpp"

namespace mobres {

/// Recoverable problem in the input data (bad value, duplicate row, ...).
/// The CLI maps this to exit code 1.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration (bad flag value, missing file). Exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Activity categories
// ---------------------------------------------------------------------------

enum class ActivityCategory {
    RetailRecreation,
    GroceryPharmacy,
    Parks,
    TransitStations,
    Workplaces,
    Residential,
};

inline constexpr std::array<ActivityCategory, 6> kAllCategories = {
    ActivityCategory::RetailRecreation, ActivityCategory::GroceryPharmacy,
    ActivityCategory::Parks,            ActivityCategory::TransitStations,
    ActivityCategory::Workplaces,       ActivityCategory::Residential,
};

inline constexpr std::string_view category_name(ActivityCategory c) {
    switch (c) {
        case ActivityCategory::RetailRecreation: return "retail_recreation";
        case ActivityCategory::GroceryPharmacy: return "grocery_pharmacy";
        case ActivityCategory::Parks: return "parks";
        case ActivityCategory::TransitStations: return "transit_stations";
        case ActivityCategory::Workplaces: return "workplaces";
        case ActivityCategory::Residential: return "residential";
    }
    return "?";
}

/// Column holding this category in the community-mobility CSV.
inline constexpr std::string_view category_csv_column(ActivityCategory c) {
    switch (c) {
        case ActivityCategory::RetailRecreation: return "retail_and_recreation_percent_change_from_baseline";
        case ActivityCategory::GroceryPharmacy: return "grocery_and_pharmacy_percent_change_from_baseline";
        case ActivityCategory::Parks: return "parks_percent_change_from_baseline";
        case ActivityCategory::TransitStations: return "transit_stations_percent_change_from_baseline";
        case ActivityCategory::Workplaces: return "workplaces_percent_change_from_baseline";
        case ActivityCategory::Residential: return "residential_percent_change_from_baseline";
    }
    return "?";
}

inline std::optional<ActivityCategory> parse_category(std::string_view name) {
    for (ActivityCategory c : kAllCategories)
        if (category_name(c) == name) return c;
    return std::nullopt;
}

/// Residential activity rises under restrictions; every other category falls
/// and is negated before similarity computation.
inline constexpr bool category_is_inverted(ActivityCategory c) {
    return c != ActivityCategory::Residential;
}

// ---------------------------------------------------------------------------
// Continents
// ---------------------------------------------------------------------------

enum class Continent { Africa, Asia, Europe, NorthAmerica, Oceania, SouthAmerica };

inline constexpr std::array<Continent, 6> kAllContinents = {
    Continent::Africa, Continent::Asia,    Continent::Europe,
    Continent::NorthAmerica, Continent::Oceania, Continent::SouthAmerica,
};

inline constexpr std::string_view continent_name(Continent c) {
    switch (c) {
        case Continent::Africa: return "Africa";
        case Continent::Asia: return "Asia";
        case Continent::Europe: return "Europe";
        case Continent::NorthAmerica: return "North America";
        case Continent::Oceania: return "Oceania";
        case Continent::SouthAmerica: return "South America";
    }
    return "?";
}

inline std::optional<Continent> parse_continent(std::string_view name) {
    for (Continent c : kAllContinents)
        if (continent_name(c) == name) return c;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Time series
// ---------------------------------------------------------------------------

/// Date-indexed daily signal with explicit missing slots. One slot per
/// consecutive calendar day starting at `start`.
class DailySeries {
public:
    DailySeries() = default;
    DailySeries(Date start, std::vector<std::optional<double>> values)
        : start_(start), values_(std::move(values)) {}

    bool empty() const { return values_.empty(); }
    std::size_t size() const { return values_.size(); }
    Date start_date() const { return start_; }
    Date end_date() const { return start_ + static_cast<int>(values_.size()) - 1; }

    const std::vector<std::optional<double>>& values() const { return values_; }

    std::optional<double> at(Date d) const {
        if (empty() || d < start_ || d > end_date()) return std::nullopt;
        return values_[static_cast<std::size_t>(d - start_)];
    }

    /// Inserts a value, growing the covered range with missing slots as needed.
    void set(Date d, std::optional<double> v) {
        if (empty()) {
            start_ = d;
            values_.push_back(v);
            return;
        }
        if (d < start_) {
            values_.insert(values_.begin(), static_cast<std::size_t>(start_ - d), std::nullopt);
            start_ = d;
        } else if (d > end_date()) {
            values_.resize(values_.size() + static_cast<std::size_t>(d - end_date()), std::nullopt);
        }
        values_[static_cast<std::size_t>(d - start_)] = v;
    }

    bool operator==(const DailySeries& other) const = default;

private:
    Date start_;
    std::vector<std::optional<double>> values_;
};

/// Inclusive date range of the analysis. Defaults to the eight-week
/// 2020-02-15 .. 2020-04-11 span.
struct AnalysisWindow {
    Date start = Date::from_ymd(2020, 2, 15);
    Date end = Date::from_ymd(2020, 4, 11);

    AnalysisWindow() = default;
    AnalysisWindow(Date s, Date e) : start(s), end(e) {
        if (end < start) throw std::invalid_argument("window end precedes start");
    }

    int days() const { return end - start + 1; }
    bool contains(Date d) const { return start <= d && d <= end; }
};

// ---------------------------------------------------------------------------
// Country data
// ---------------------------------------------------------------------------

using CategorySeries = std::map<ActivityCategory, DailySeries>;

struct CountryRecord {
    std::string iso_code;  // 2-letter
    std::string name;
    std::optional<Continent> continent;
    CategorySeries national;
    std::map<std::string, CategorySeries> subregions;
    std::optional<double> population;
    std::optional<double> area_km2;
    DailySeries stringency;       // index points, 0..100
    DailySeries confirmed_cases;  // cumulative
    DailySeries deaths;           // cumulative

    bool operator==(const CountryRecord&) const = default;
};

/// Immutable after ingestion; safe to share across parallel readers.
struct Dataset {
    std::map<std::string, CountryRecord> countries;  // keyed by 2-letter code
};

/// Co-registered stringency/activity vectors over one window, dense and
/// equal-length, inversion already applied to the activity side.
struct AlignedPair {
    ActivityCategory category{};
    std::vector<double> stringency;
    std::vector<double> activity;

    std::size_t n() const { return stringency.size(); }
};

// ---------------------------------------------------------------------------
// Exclusion bookkeeping
// ---------------------------------------------------------------------------

enum class ExclusionReason {
    NoStringencyOverlap,
    StringencyGap,
    LowCoverage,
    EdgeGap,
    LongInteriorGap,
    UndefinedSimilarity,
    NoSignificantLag,
    NoUsableCategory,
    TooFewSubregions,
    UnmappedCountryCode,
    MissingCategory,
    InsufficientJoin,
    UndefinedCorrelation,
};

inline constexpr std::string_view exclusion_reason_code(ExclusionReason r) {
    switch (r) {
        case ExclusionReason::NoStringencyOverlap: return "no_stringency_overlap";
        case ExclusionReason::StringencyGap: return "stringency_gap";
        case ExclusionReason::LowCoverage: return "low_coverage";
        case ExclusionReason::EdgeGap: return "edge_gap";
        case ExclusionReason::LongInteriorGap: return "long_interior_gap";
        case ExclusionReason::UndefinedSimilarity: return "undefined_similarity";
        case ExclusionReason::NoSignificantLag: return "no_significant_lag";
        case ExclusionReason::NoUsableCategory: return "no_usable_category";
        case ExclusionReason::TooFewSubregions: return "too_few_subregions";
        case ExclusionReason::UnmappedCountryCode: return "unmapped_country_code";
        case ExclusionReason::MissingCategory: return "missing_category";
        case ExclusionReason::InsufficientJoin: return "insufficient_join";
        case ExclusionReason::UndefinedCorrelation: return "undefined_correlation";
    }
    return "?";
}

} // namespace mobres
