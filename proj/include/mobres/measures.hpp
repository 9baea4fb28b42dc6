#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mobres/ingest.hpp"
#include "mobres/stats.hpp"
#include "mobres/types.hpp"

namespace mobres {

// ---------------------------------------------------------------------------
// Vector statistics
// ---------------------------------------------------------------------------

/// dot(a,b) / (|a||b|), in [-1,1]. Undefined when either vector has zero
/// norm. Rounding spillover beyond +/-1 is clamped back in.
inline std::optional<double> cosine_similarity(std::span<const double> a,
                                               std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("cosine: need length >= 2");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return std::nullopt;
    double v = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(v, -1.0, 1.0);
}

/// Centered cosine. Undefined when either vector has zero variance.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
    if (a.size() < 3) throw std::invalid_argument("pearson: need length >= 3");
    const double ma = stats::mean(a), mb = stats::mean(b);
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return std::nullopt;
    double v = cov / (std::sqrt(va) * std::sqrt(vb));
    return std::clamp(v, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Lag response
// ---------------------------------------------------------------------------

struct LagParams {
    double threshold = 0.5;  // correlation significance cut
    int max_lag = 21;        // days, each side
    int min_overlap = 10;    // days remaining after the shift
};

/// Correlation between stringency advanced by `k` days and activity over the
/// overlapping range: pairs (stringency[t+k], activity[t]). If
/// activity(t) = stringency(t-d) with d > 0 the maximum sits at k = -d, so a
/// negative k means the policy change precedes the activity change.
/// Undefined when the overlap is shorter than `min_overlap` days or has zero
/// variance on either side.
inline std::optional<double> normalized_xcorr(std::span<const double> stringency,
                                              std::span<const double> activity, int k,
                                              int min_overlap = 10) {
    if (stringency.size() != activity.size())
        throw std::invalid_argument("xcorr: length mismatch");
    const int n = static_cast<int>(stringency.size());
    const int overlap = n - std::abs(k);
    if (overlap < std::max(min_overlap, 3)) return std::nullopt;
    std::vector<double> s, a;
    s.reserve(static_cast<std::size_t>(overlap));
    a.reserve(static_cast<std::size_t>(overlap));
    const int t0 = std::max(0, -k);
    for (int t = t0; t < t0 + overlap; ++t) {
        s.push_back(stringency[static_cast<std::size_t>(t + k)]);
        a.push_back(activity[static_cast<std::size_t>(t)]);
    }
    return pearson(s, a);
}

/// Signed lag-day statistic N_pos - N_neg: the count of positive shifts with
/// correlation at or above the threshold minus the count of negative ones;
/// k = 0 belongs to neither side. Returns nullopt when no shift in
/// [-max_lag, max_lag] reaches the threshold.
inline std::optional<int> lag_days(std::span<const double> stringency,
                                   std::span<const double> activity,
                                   const LagParams& params = {}) {
    int n_pos = 0, n_neg = 0;
    bool any = false;
    for (int k = -params.max_lag; k <= params.max_lag; ++k) {
        auto r = normalized_xcorr(stringency, activity, k, params.min_overlap);
        if (!r || *r < params.threshold) continue;
        any = true;
        if (k > 0) ++n_pos;
        else if (k < 0) ++n_neg;
    }
    if (!any) return std::nullopt;
    return n_pos - n_neg;
}

// ---------------------------------------------------------------------------
// Per-country measures
// ---------------------------------------------------------------------------

struct CategorySimilarity {
    std::optional<double> cosine;
    std::optional<double> pearson;
};

struct SimilarityScore {
    std::string iso_code;
    std::map<ActivityCategory, CategorySimilarity> per_category;
    double mean_cosine = 0;   // over non-excluded categories present
    double mean_pearson = 0;
    std::vector<ActivityCategory> omitted;  // undefined similarity, left out of means
};

/// Per-category cosine and Pearson versus stringency plus country means.
/// Parks is reported per-category but excluded from the means (volatile,
/// weather-dependent); the exclusion set is configurable. Returns nullopt
/// when no non-excluded category is usable.
inline std::optional<SimilarityScore> country_similarity(
    const std::string& iso_code, const std::map<ActivityCategory, AlignedPair>& pairs,
    const std::set<ActivityCategory>& excluded_from_means = {ActivityCategory::Parks}) {
    SimilarityScore score;
    score.iso_code = iso_code;
    std::vector<double> cosines, pearsons;
    for (const auto& [cat, pair] : pairs) {
        CategorySimilarity sim;
        sim.cosine = cosine_similarity(pair.stringency, pair.activity);
        sim.pearson = pearson(pair.stringency, pair.activity);
        score.per_category[cat] = sim;
        if (excluded_from_means.contains(cat)) continue;
        if (!sim.cosine || !sim.pearson) {
            score.omitted.push_back(cat);
            continue;
        }
        cosines.push_back(*sim.cosine);
        pearsons.push_back(*sim.pearson);
    }
    if (cosines.empty()) return std::nullopt;
    score.mean_cosine = stats::mean(cosines);
    score.mean_pearson = stats::mean(pearsons);
    return score;
}

struct LagProfile {
    std::string iso_code;
    std::map<ActivityCategory, int> per_category;           // defined lags only
    std::map<ActivityCategory, ExclusionReason> undefined;  // no significant lag
    double mean_lag = 0;  // over non-excluded categories with a defined lag
};

/// Mean signed lag across categories, excluding Parks from the mean by
/// default. Returns nullopt when every non-excluded category lacks a
/// significant lag.
inline std::optional<LagProfile> country_lag(
    const std::string& iso_code, const std::map<ActivityCategory, AlignedPair>& pairs,
    const LagParams& params = {},
    const std::set<ActivityCategory>& excluded_from_means = {ActivityCategory::Parks}) {
    LagProfile profile;
    profile.iso_code = iso_code;
    std::vector<double> lags;
    for (const auto& [cat, pair] : pairs) {
        auto lag = lag_days(pair.stringency, pair.activity, params);
        if (!lag) {
            profile.undefined[cat] = ExclusionReason::NoSignificantLag;
            continue;
        }
        profile.per_category[cat] = *lag;
        if (!excluded_from_means.contains(cat)) lags.push_back(static_cast<double>(*lag));
    }
    if (lags.empty()) return std::nullopt;
    profile.mean_lag = stats::mean(lags);
    return profile;
}

// ---------------------------------------------------------------------------
// Subregional variability
// ---------------------------------------------------------------------------

struct SubregionVariation {
    std::string iso_code;
    std::map<ActivityCategory, double> per_category_sd;
    double mean_sd = 0;
    std::size_t n_subregions = 0;
    bool low_confidence = false;  // some category rests on a single pair
};

/// Spread of within-country response: per category, the standard deviation
/// of the strictly-upper-triangle entries of the subregion-by-subregion
/// cosine matrix (raw activity on both sides, no inversion). The country
/// value is the mean of per-category SDs. Needs at least two subregions with
/// usable series in some category.
inline std::optional<SubregionVariation> subregion_variation(
    const CountryRecord& record, const AnalysisWindow& window, const AlignParams& params,
    const std::vector<AnalysisWindow>& masks = {}) {
    // repaired series per category, keyed by subregion name
    std::map<ActivityCategory, std::map<std::string, std::vector<double>>> usable;
    std::set<std::string> used_subregions;
    for (const auto& [name, series_map] : record.subregions) {
        for (const auto& [cat, series] : series_map) {
            RepairResult repaired = repair_to_window(series, window, params, masks);
            if (std::holds_alternative<ExclusionReason>(repaired)) continue;
            auto vec = std::get<std::vector<double>>(std::move(repaired));
            usable[cat].emplace(name, std::move(vec));
        }
    }

    SubregionVariation result;
    result.iso_code = record.iso_code;
    std::vector<double> sds;
    for (const auto& [cat, by_subregion] : usable) {
        if (by_subregion.size() < 2) continue;
        std::vector<const std::vector<double>*> rows;
        for (const auto& [name, vec] : by_subregion) {
            rows.push_back(&vec);
            used_subregions.insert(name);
        }
        std::vector<double> sims;
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = i + 1; j < rows.size(); ++j)
                if (auto c = cosine_similarity(*rows[i], *rows[j])) sims.push_back(*c);
        if (sims.empty()) continue;
        if (sims.size() == 1) result.low_confidence = true;
        const double sd = stats::stddev(sims);  // population SD: one pair gives 0
        result.per_category_sd[cat] = sd;
        sds.push_back(sd);
    }
    if (sds.empty()) return std::nullopt;
    result.mean_sd = stats::mean(sds);
    result.n_subregions = used_subregions.size();
    return result;
}

// ---------------------------------------------------------------------------
// Cross-country aggregation
// ---------------------------------------------------------------------------

struct CategoryAggregate {
    ActivityCategory category{};
    double mean = 0;
    double median = 0;
    double sd = 0;
    std::size_t n = 0;
};

/// Mean/median/SD of a per-country per-category value across countries,
/// one row per category (the shape of the category summary artifacts).
template <typename Row, typename Getter>
std::vector<CategoryAggregate> aggregate_by_category(const std::map<std::string, Row>& rows,
                                                     Getter&& get) {
    std::vector<CategoryAggregate> out;
    for (ActivityCategory cat : kAllCategories) {
        std::vector<double> values;
        for (const auto& [iso, row] : rows)
            if (auto v = get(row, cat)) values.push_back(*v);
        if (values.empty()) continue;
        out.push_back({cat, stats::mean(values), stats::median(values), stats::stddev(values),
                       values.size()});
    }
    return out;
}

/// Elementwise mean of the aligned (inverted) activity vectors over the
/// non-excluded categories; the country-level activity curve used for
/// outcome comparisons.
inline std::optional<std::vector<double>> mean_activity_vector(
    const std::map<ActivityCategory, AlignedPair>& pairs,
    const std::set<ActivityCategory>& excluded = {ActivityCategory::Parks}) {
    std::vector<double> acc;
    std::size_t count = 0;
    for (const auto& [cat, pair] : pairs) {
        if (excluded.contains(cat)) continue;
        if (acc.empty()) acc.assign(pair.activity.size(), 0.0);
        if (pair.activity.size() != acc.size())
            throw std::invalid_argument("mean_activity_vector: length mismatch");
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += pair.activity[i];
        ++count;
    }
    if (count == 0) return std::nullopt;
    for (double& v : acc) v /= static_cast<double>(count);
    return acc;
}

} // namespace mobres
