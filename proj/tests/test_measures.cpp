#include <cmath>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "mobres/measures.hpp"
#include "testdata.hpp"

using namespace mobres;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> logistic_curve(int n, double center, double scale = 4.0) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t)
        out[static_cast<std::size_t>(t)] = 1.0 / (1.0 + std::exp(-(t - center) / scale));
    return out;
}

std::vector<double> step_curve(int n, int rise_at) {
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int t = rise_at; t < n; ++t) out[static_cast<std::size_t>(t)] = 1.0;
    return out;
}

// From-scratch reimplementation of the signed lag statistic, formulated over
// "all t with both indices in range" instead of an explicit overlap window.
std::optional<int> oracle_lag(const std::vector<double>& s, const std::vector<double>& a,
                              const LagParams& p) {
    const int n = static_cast<int>(s.size());
    auto corr_at = [&](int k) -> std::optional<double> {
        std::vector<double> xs, ys;
        for (int t = 0; t < n; ++t) {
            int u = t + k;
            if (u < 0 || u >= n) continue;
            xs.push_back(s[static_cast<std::size_t>(u)]);
            ys.push_back(a[static_cast<std::size_t>(t)]);
        }
        if (static_cast<int>(xs.size()) < std::max(p.min_overlap, 3)) return std::nullopt;
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= static_cast<double>(xs.size());
        my /= static_cast<double>(ys.size());
        double sxy = 0, sxx = 0, syy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
            syy += (ys[i] - my) * (ys[i] - my);
        }
        if (sxx == 0 || syy == 0) return std::nullopt;
        return sxy / std::sqrt(sxx * syy);
    };
    int pos = 0, neg = 0;
    bool any = false;
    for (int k = -p.max_lag; k <= p.max_lag; ++k) {
        auto r = corr_at(k);
        if (!r || *r < p.threshold) continue;
        any = true;
        if (k > 0) ++pos;
        if (k < 0) ++neg;
    }
    if (!any) return std::nullopt;
    return pos - neg;
}

} // namespace

TEST_CASE("cosine similarity matches frozen reference values") {
    std::vector<double> e1{1.0, 0.0}, diag{1.0, 1.0};
    CHECK_THAT(*cosine_similarity(e1, diag), WithinRel(0.7071067811865475, 1e-14));
    std::vector<double> a{1.0, 2.0, 3.0};
    std::vector<double> b{2.0, 4.0, 6.0};
    CHECK(*cosine_similarity(a, b) == 1.0);
    std::vector<double> c{-1.0, -2.0, -3.0};
    CHECK(*cosine_similarity(a, c) == -1.0);
    std::vector<double> x{1.0, 0.0}, y{0.0, 1.0};
    CHECK_THAT(*cosine_similarity(x, y), WithinAbs(0.0, 1e-15));
}

TEST_CASE("cosine similarity is undefined for zero vectors and checked for shape") {
    std::vector<double> z{0.0, 0.0}, a{1.0, 2.0};
    CHECK_FALSE(cosine_similarity(z, a));
    CHECK_FALSE(cosine_similarity(a, z));
    std::vector<double> short_vec{1.0};
    CHECK_THROWS_AS(cosine_similarity(short_vec, short_vec), std::invalid_argument);
    std::vector<double> three{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(cosine_similarity(a, three), std::invalid_argument);
}

TEST_CASE("pearson matches frozen reference value") {
    std::vector<double> a{1.0, 2.0, 3.0, 4.0};
    std::vector<double> b{2.0, 4.0, 5.0, 9.0};
    CHECK_THAT(*pearson(a, b), WithinRel(0.9647638212377322, 1e-14));
    std::vector<double> lin{3.0, 5.0, 7.0, 9.0};
    CHECK_THAT(*pearson(a, lin), WithinRel(1.0, 1e-14));
    std::vector<double> neg{9.0, 7.0, 5.0, 3.0};
    CHECK_THAT(*pearson(a, neg), WithinRel(-1.0, 1e-14));
}

TEST_CASE("pearson is undefined for constant series") {
    std::vector<double> a{1.0, 2.0, 3.0}, flat{5.0, 5.0, 5.0};
    CHECK_FALSE(pearson(a, flat));
    CHECK_FALSE(pearson(flat, a));
    std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(pearson(two, two), std::invalid_argument);
}

TEST_CASE("xcorr at zero shift equals plain correlation") {
    auto s = logistic_curve(30, 14.0);
    std::vector<double> a(s.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = s[i] * 0.8 + 0.01 * static_cast<double>(i);
    CHECK_THAT(*normalized_xcorr(s, a, 0), WithinRel(*pearson(s, a), 1e-14));
}

TEST_CASE("xcorr orientation: delayed activity peaks at negative shift") {
    const int d = 3;
    auto s = logistic_curve(57, 28.0);
    auto a = logistic_curve(57, 28.0 + d);  // activity trails policy by d days
    CHECK_THAT(*normalized_xcorr(s, a, -d), WithinRel(1.0, 1e-12));
    CHECK(*normalized_xcorr(s, a, -d) > *normalized_xcorr(s, a, d));
}

TEST_CASE("xcorr enforces the overlap floor") {
    auto s = logistic_curve(20, 10.0);
    auto a = logistic_curve(20, 11.0);
    CHECK(normalized_xcorr(s, a, 10, 10));
    CHECK_FALSE(normalized_xcorr(s, a, 11, 10));   // overlap 9 < 10
    CHECK_FALSE(normalized_xcorr(s, a, -11, 10));
    // the floor never drops below three points even if asked to
    auto s4 = logistic_curve(4, 2.0);
    CHECK_FALSE(normalized_xcorr(s4, s4, 2, 1));   // overlap 2
    CHECK(normalized_xcorr(s4, s4, 1, 1));         // overlap 3
}

TEST_CASE("lag statistic of an unshifted pair is zero") {
    auto s = logistic_curve(57, 28.0);
    auto lag = lag_days(s, s);
    REQUIRE(lag);
    CHECK(*lag == 0);
}

TEST_CASE("lag statistic is negative and monotone in a planted step delay") {
    // A sharp transition decorrelates once the shift misses it, so the band
    // of above-threshold shifts is centered near -d and the count difference
    // tracks the delay. Smooth monotone curves stay correlated at every
    // shift and legitimately score near zero; see the sign test below.
    auto s = step_curve(57, 28);
    int prev = 1;
    for (int d = 1; d <= 6; ++d) {
        auto a = step_curve(57, 28 + d);
        auto lag = lag_days(s, a);
        REQUIRE(lag);
        CHECK(*lag < 0);
        CHECK(*lag < prev);
        prev = *lag;
    }
}

TEST_CASE("lag statistic sign is never wrong for noiseless monotone ramps") {
    auto s = logistic_curve(57, 25.0);
    for (int d = 1; d <= 6; ++d) {
        auto delayed = logistic_curve(57, 25.0 + d);
        auto advanced = logistic_curve(57, 25.0 - d);
        REQUIRE(lag_days(s, delayed));
        CHECK(*lag_days(s, delayed) <= 0);
        REQUIRE(lag_days(s, advanced));
        CHECK(*lag_days(s, advanced) >= 0);
    }
}

TEST_CASE("lag statistic matches a from-scratch oracle on random series") {
    std::mt19937 rng(404);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    LagParams params;
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + trial % 8;
        auto s = logistic_curve(57, 20.0 + trial % 10);
        auto a = logistic_curve(57, 20.0 + trial % 10 + d);
        for (auto& v : s) v += 0.05 * noise(rng);
        for (auto& v : a) v += 0.05 * noise(rng);
        auto got = lag_days(s, a, params);
        auto want = oracle_lag(s, a, params);
        REQUIRE(got.has_value() == want.has_value());
        if (want) CHECK(*got == *want);
    }
}

TEST_CASE("lag statistic is nullopt when nothing clears the threshold") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    std::vector<double> s(57), a(57);
    for (auto& v : s) v = noise(rng);
    for (auto& v : a) v = noise(rng);
    LagParams strict;
    strict.threshold = 0.99;
    CHECK_FALSE(lag_days(s, a, strict));
}

TEST_CASE("country similarity reports parks but keeps it out of the means") {
    std::map<ActivityCategory, AlignedPair> pairs;
    auto s = logistic_curve(57, 28.0);
    auto near = logistic_curve(57, 29.0);
    auto far = logistic_curve(57, 40.0);
    std::vector<double> wiggle(57);
    for (int t = 0; t < 57; ++t) wiggle[static_cast<std::size_t>(t)] = std::sin(t * 0.9);
    pairs[ActivityCategory::RetailRecreation] = {ActivityCategory::RetailRecreation, s, near};
    pairs[ActivityCategory::Workplaces] = {ActivityCategory::Workplaces, s, far};
    pairs[ActivityCategory::Parks] = {ActivityCategory::Parks, s, wiggle};

    auto score = country_similarity("OM", pairs);
    REQUIRE(score);
    CHECK(score->per_category.size() == 3);
    CHECK(score->per_category.at(ActivityCategory::Parks).cosine.has_value());
    const double want_mean =
        (*cosine_similarity(s, near) + *cosine_similarity(s, far)) / 2.0;
    CHECK_THAT(score->mean_cosine, WithinRel(want_mean, 1e-14));
    const double want_pearson = (*pearson(s, near) + *pearson(s, far)) / 2.0;
    CHECK_THAT(score->mean_pearson, WithinRel(want_pearson, 1e-14));
}

TEST_CASE("country similarity omits undefined categories and can come up empty") {
    std::map<ActivityCategory, AlignedPair> pairs;
    auto s = logistic_curve(57, 28.0);
    std::vector<double> flat(57, 4.0);
    pairs[ActivityCategory::RetailRecreation] = {ActivityCategory::RetailRecreation, s, flat};
    pairs[ActivityCategory::Workplaces] = {ActivityCategory::Workplaces, s, s};

    auto score = country_similarity("OM", pairs);
    REQUIRE(score);
    // flat activity has a defined cosine but no pearson, so the category is omitted
    CHECK(score->omitted == std::vector<ActivityCategory>{ActivityCategory::RetailRecreation});
    CHECK_THAT(score->mean_cosine, WithinRel(1.0, 1e-12));

    std::map<ActivityCategory, AlignedPair> parks_only;
    parks_only[ActivityCategory::Parks] = {ActivityCategory::Parks, s, s};
    CHECK_FALSE(country_similarity("OM", parks_only));
}

TEST_CASE("country lag averages defined categories and skips parks") {
    std::map<ActivityCategory, AlignedPair> pairs;
    auto s = step_curve(57, 24);
    pairs[ActivityCategory::RetailRecreation] = {ActivityCategory::RetailRecreation, s,
                                                 step_curve(57, 26)};
    pairs[ActivityCategory::Workplaces] = {ActivityCategory::Workplaces, s,
                                           step_curve(57, 28)};
    // parks gets a large, clearly different delay; if it leaked into the mean
    // the two-category average below would not match
    pairs[ActivityCategory::Parks] = {ActivityCategory::Parks, s, step_curve(57, 38)};

    auto profile = country_lag("OM", pairs);
    REQUIRE(profile);
    REQUIRE(profile->per_category.count(ActivityCategory::RetailRecreation) == 1);
    REQUIRE(profile->per_category.count(ActivityCategory::Workplaces) == 1);
    const double want = (profile->per_category.at(ActivityCategory::RetailRecreation) +
                         profile->per_category.at(ActivityCategory::Workplaces)) /
                        2.0;
    CHECK_THAT(profile->mean_lag, WithinAbs(want, 1e-14));
    CHECK(profile->mean_lag < 0);

    std::map<ActivityCategory, AlignedPair> hopeless;
    std::vector<double> flat(57, 1.0);
    hopeless[ActivityCategory::RetailRecreation] = {ActivityCategory::RetailRecreation, s, flat};
    auto empty = country_lag("OM", hopeless);
    CHECK_FALSE(empty);
}

TEST_CASE("subregion variation matches a hand-computed oracle") {
    const Date start = *Date::parse_iso("2020-02-15");
    AnalysisWindow w{start, start + 9};
    AlignParams params;

    CountryRecord rec;
    rec.iso_code = "OM";
    std::vector<std::vector<double>> curves = {
        logistic_curve(10, 4.0, 1.5),
        logistic_curve(10, 5.0, 1.5),
        logistic_curve(10, 7.0, 1.5),
    };
    for (std::size_t r = 0; r < curves.size(); ++r) {
        DailySeries s;
        for (int t = 0; t < 10; ++t) s.set(start + t, curves[r][static_cast<std::size_t>(t)]);
        rec.subregions["Region " + std::to_string(r)][ActivityCategory::RetailRecreation] = s;
    }

    auto result = subregion_variation(rec, w, params);
    REQUIRE(result);
    CHECK(result->n_subregions == 3);
    CHECK_FALSE(result->low_confidence);

    std::vector<double> sims = {*cosine_similarity(curves[0], curves[1]),
                                *cosine_similarity(curves[0], curves[2]),
                                *cosine_similarity(curves[1], curves[2])};
    const double m = (sims[0] + sims[1] + sims[2]) / 3.0;
    double var = 0;
    for (double v : sims) var += (v - m) * (v - m);
    const double want_sd = std::sqrt(var / 3.0);  // population SD over the three pairs
    CHECK_THAT(result->per_category_sd.at(ActivityCategory::RetailRecreation),
               WithinAbs(want_sd, 1e-14));
    CHECK_THAT(result->mean_sd, WithinAbs(want_sd, 1e-14));
}

TEST_CASE("subregion variation flags single-pair categories and needs two regions") {
    const Date start = *Date::parse_iso("2020-02-15");
    AnalysisWindow w{start, start + 9};
    AlignParams params;

    CountryRecord rec;
    rec.iso_code = "OM";
    for (int r = 0; r < 2; ++r) {
        DailySeries s;
        for (int t = 0; t < 10; ++t) s.set(start + t, std::sin(0.3 * t + r));
        rec.subregions["Region " + std::to_string(r)][ActivityCategory::Parks] = s;
    }
    auto result = subregion_variation(rec, w, params);
    REQUIRE(result);
    CHECK(result->low_confidence);
    CHECK(result->per_category_sd.at(ActivityCategory::Parks) == 0.0);  // one pair, zero spread

    CountryRecord lone;
    lone.iso_code = "OM";
    DailySeries s;
    for (int t = 0; t < 10; ++t) s.set(start + t, std::sin(0.3 * t));
    lone.subregions["Only"][ActivityCategory::Parks] = s;
    CHECK_FALSE(subregion_variation(lone, w, params));
}

TEST_CASE("category aggregation takes mean, median, and SD across countries") {
    struct Row {
        std::map<ActivityCategory, double> values;
    };
    std::map<std::string, Row> rows;
    rows["AA"].values[ActivityCategory::Parks] = 1.0;
    rows["BB"].values[ActivityCategory::Parks] = 3.0;
    rows["AA"].values[ActivityCategory::Workplaces] = 5.0;

    auto got = aggregate_by_category(rows, [](const Row& r, ActivityCategory c) {
        auto it = r.values.find(c);
        return it == r.values.end() ? std::optional<double>{} : std::optional<double>{it->second};
    });
    REQUIRE(got.size() == 2);  // categories with no data do not appear
    CHECK(got[0].category == ActivityCategory::Parks);
    CHECK(got[0].mean == 2.0);
    CHECK(got[0].median == 2.0);
    CHECK(got[0].sd == 1.0);
    CHECK(got[0].n == 2);
    CHECK(got[1].category == ActivityCategory::Workplaces);
    CHECK(got[1].n == 1);
    CHECK(got[1].sd == 0.0);
}

TEST_CASE("mean activity vector averages the non-excluded categories elementwise") {
    std::map<ActivityCategory, AlignedPair> pairs;
    pairs[ActivityCategory::RetailRecreation] = {
        ActivityCategory::RetailRecreation, {0, 0, 0}, {1.0, 2.0, 3.0}};
    pairs[ActivityCategory::Workplaces] = {
        ActivityCategory::Workplaces, {0, 0, 0}, {3.0, 2.0, 1.0}};
    pairs[ActivityCategory::Parks] = {ActivityCategory::Parks, {0, 0, 0}, {99.0, 99.0, 99.0}};

    auto v = mean_activity_vector(pairs);
    REQUIRE(v);
    CHECK(*v == std::vector<double>{2.0, 2.0, 2.0});

    std::map<ActivityCategory, AlignedPair> parks_only;
    parks_only[ActivityCategory::Parks] = {ActivityCategory::Parks, {0, 0}, {1.0, 2.0}};
    CHECK_FALSE(mean_activity_vector(parks_only));

    pairs[ActivityCategory::Workplaces].activity.pop_back();
    CHECK_THROWS_AS(mean_activity_vector(pairs), std::invalid_argument);
}
