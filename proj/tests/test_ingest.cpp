#include <sstream>

#include <catch_amalgamated.hpp>

#include "mobres/ingest.hpp"
#include "testdata.hpp"

using namespace mobres;

namespace {

const std::string kMobilityHeader =
    "country_region_code,country_region,sub_region_1,sub_region_2,date,"
    "retail_and_recreation_percent_change_from_baseline,"
    "grocery_and_pharmacy_percent_change_from_baseline,"
    "parks_percent_change_from_baseline,"
    "transit_stations_percent_change_from_baseline,"
    "workplaces_percent_change_from_baseline,"
    "residential_percent_change_from_baseline\n";

std::map<std::string, CountryRecord> parse_mob(const std::string& text, ParseReport& report) {
    std::istringstream in(text);
    return parse_mobility(in, report);
}

std::map<std::string, StringencyRecord> parse_str(const std::string& text, ParseReport& report) {
    std::istringstream in(text);
    return parse_stringency(in, report);
}

DailySeries series_from(Date start, std::vector<std::optional<double>> values) {
    return DailySeries(start, std::move(values));
}

const Date kStart = *Date::parse_iso("2020-02-15");

} // namespace

TEST_CASE("mobility rows route to national or subregion series") {
    ParseReport report;
    auto records = parse_mob(kMobilityHeader +
                                 "OM,Oman,,,2020-02-15,-1,-2,3,-4,-5,6\n"
                                 "OM,Oman,Muscat,,2020-02-15,-10,-20,30,-40,-50,60\n"
                                 "OM,Oman,Muscat,Some City,2020-02-15,-9,-9,-9,-9,-9,-9\n",
                             report);
    REQUIRE(records.count("OM") == 1);
    const CountryRecord& om = records.at("OM");
    CHECK(om.name == "Oman");
    CHECK(om.national.at(ActivityCategory::RetailRecreation).at(kStart) == -1.0);
    CHECK(om.national.at(ActivityCategory::Residential).at(kStart) == 6.0);
    REQUIRE(om.subregions.count("Muscat") == 1);
    CHECK(om.subregions.at("Muscat").at(ActivityCategory::Parks).at(kStart) == 30.0);
    CHECK(report.deeper_level_rows == 1);
    CHECK(report.rows_skipped == 0);
}

TEST_CASE("blank mobility cells become explicit missing values") {
    ParseReport report;
    auto records = parse_mob(kMobilityHeader + "OM,Oman,,,2020-02-15,-1,,3,-4,-5,6\n", report);
    const auto& national = records.at("OM").national;
    CHECK_FALSE(national.at(ActivityCategory::GroceryPharmacy).at(kStart));
    CHECK(national.at(ActivityCategory::Parks).at(kStart) == 3.0);
}

TEST_CASE("mobility rows with bad dates, bad numbers, or sub -100 values are skipped") {
    ParseReport report;
    auto records = parse_mob(kMobilityHeader +
                                 "OM,Oman,,,2020-02-30,-1,-2,3,-4,-5,6\n"
                                 "OM,Oman,,,2020-02-16,x,-2,3,-4,-5,6\n"
                                 "OM,Oman,,,2020-02-17,-101,-2,3,-4,-5,6\n"
                                 "OM,Oman,,,2020-02-18,-100,-2,3,-4,-5,6\n",
                             report);
    CHECK(report.rows_skipped == 3);
    CHECK(records.at("OM").national.at(ActivityCategory::RetailRecreation).size() == 1);
    CHECK(records.at("OM")
              .national.at(ActivityCategory::RetailRecreation)
              .at(*Date::parse_iso("2020-02-18")) == -100.0);
}

TEST_CASE("duplicate mobility rows keep the first value") {
    ParseReport report;
    auto records = parse_mob(kMobilityHeader +
                                 "OM,Oman,,,2020-02-15,-1,-2,3,-4,-5,6\n"
                                 "OM,Oman,,,2020-02-15,-9,-9,-9,-9,-9,-9\n",
                             report);
    CHECK(report.rows_skipped == 1);
    CHECK(records.at("OM").national.at(ActivityCategory::RetailRecreation).at(kStart) == -1.0);
}

TEST_CASE("missing mobility column is a data error naming the column") {
    ParseReport report;
    std::istringstream in("country_region_code,country_region,sub_region_1,sub_region_2,date\n");
    try {
        parse_mobility(in, report);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("retail_and_recreation_percent_change_from_baseline") !=
              std::string::npos);
    }
}

TEST_CASE("utf-8 BOM before the first header cell is tolerated") {
    ParseReport report;
    auto records =
        parse_mob("\xEF\xBB\xBF" + kMobilityHeader + "OM,Oman,,,2020-02-15,-1,-2,3,-4,-5,6\n",
                  report);
    CHECK(records.count("OM") == 1);
}

TEST_CASE("extra columns in the mobility header are ignored") {
    ParseReport report;
    auto records = parse_mob(
        "country_region_code,country_region,sub_region_1,sub_region_2,metro_area,"
        "iso_3166_2_code,census_fips_code,date,"
        "retail_and_recreation_percent_change_from_baseline,"
        "grocery_and_pharmacy_percent_change_from_baseline,"
        "parks_percent_change_from_baseline,"
        "transit_stations_percent_change_from_baseline,"
        "workplaces_percent_change_from_baseline,"
        "residential_percent_change_from_baseline\n"
        "OM,Oman,,,,,,2020-02-15,-1,-2,3,-4,-5,6\n",
        report);
    CHECK(records.at("OM").national.at(ActivityCategory::Workplaces).at(kStart) == -5.0);
}

TEST_CASE("mobility write/parse round-trip preserves records exactly") {
    ParseReport report;
    auto world = testdata::default_world();
    auto original = parse_mob(testdata::mobility_csv(world, AnalysisWindow{}), report);
    std::ostringstream out;
    write_mobility(out, original);
    ParseReport report2;
    auto reparsed = parse_mob(out.str(), report2);
    CHECK(reparsed == original);
    CHECK(report2.rows_skipped == 0);
}

TEST_CASE("mobility round-trip preserves explicit missing cells and day gaps") {
    ParseReport report;
    auto original = parse_mob(kMobilityHeader +
                                  "OM,Oman,,,2020-02-15,-1,,3,-4,-5,6\n"
                                  "OM,Oman,,,2020-02-17,-2,-3,,-5,-6,7\n",
                              report);
    std::ostringstream out;
    write_mobility(out, original);
    ParseReport report2;
    CHECK(parse_mob(out.str(), report2) == original);
}

TEST_CASE("stringency parse reads compact dates and all three series") {
    ParseReport report;
    auto records = parse_str(
        "CountryName,CountryCode,Date,StringencyIndex,ConfirmedCases,ConfirmedDeaths\n"
        "Oman,OMN,20200215,11.1,5,1\n"
        "Oman,OMN,20200216,,6,1\n",
        report);
    const auto& om = records.at("OMN");
    CHECK(om.name == "Oman");
    CHECK(om.stringency.at(kStart) == 11.1);
    CHECK_FALSE(om.stringency.at(kStart + 1));
    CHECK(om.cases.at(kStart + 1) == 6.0);
    CHECK(report.rows_skipped == 0);
}

TEST_CASE("stringency outside [0,100] is fatal") {
    ParseReport report;
    CHECK_THROWS_AS(
        parse_str("CountryName,CountryCode,Date,StringencyIndex,ConfirmedCases,ConfirmedDeaths\n"
                  "Oman,OMN,20200215,100.5,5,1\n",
                  report),
        DataError);
    CHECK_THROWS_AS(
        parse_str("CountryName,CountryCode,Date,StringencyIndex,ConfirmedCases,ConfirmedDeaths\n"
                  "Oman,OMN,20200215,-0.1,5,1\n",
                  report),
        DataError);
}

TEST_CASE("duplicate stringency country-day is fatal") {
    ParseReport report;
    CHECK_THROWS_AS(
        parse_str("CountryName,CountryCode,Date,StringencyIndex,ConfirmedCases,ConfirmedDeaths\n"
                  "Oman,OMN,20200215,10,5,1\n"
                  "Oman,OMN,20200215,11,6,1\n",
                  report),
        DataError);
}

TEST_CASE("non-monotone cumulative counts warn but do not fail") {
    ParseReport report;
    auto records = parse_str(
        "CountryName,CountryCode,Date,StringencyIndex,ConfirmedCases,ConfirmedDeaths\n"
        "Oman,OMN,20200215,10,9,1\n"
        "Oman,OMN,20200216,11,7,1\n",
        report);
    CHECK(records.at("OMN").cases.at(kStart + 1) == 7.0);
    CHECK(report.warnings >= 1);
}

TEST_CASE("stringency write/parse round-trip preserves records exactly") {
    ParseReport report;
    auto original = parse_str(
        testdata::stringency_csv(testdata::default_world(), AnalysisWindow{}), report);
    std::ostringstream out;
    write_stringency(out, original);
    ParseReport report2;
    CHECK(parse_str(out.str(), report2) == original);
}

TEST_CASE("auxiliary tables parse and neighbors are symmetric") {
    {
        std::istringstream in("iso_code,continent\nOM,Asia\nDE,Europe\n");
        auto continents = parse_continents(in);
        CHECK(continents.at("OM") == Continent::Asia);
        CHECK(continents.at("DE") == Continent::Europe);
    }
    {
        std::istringstream in("iso_code,population,area_km2\nOM,5000000,309500\n");
        auto info = parse_country_info(in);
        CHECK(info.at("OM").population == 5000000.0);
        CHECK(info.at("OM").area_km2 == 309500.0);
    }
    {
        std::istringstream in("iso_code,neighbor_iso_code\nOM,AE\n");
        auto neighbors = parse_neighbors(in);
        CHECK(neighbors.at("OM").contains("AE"));
        CHECK(neighbors.at("AE").contains("OM"));
    }
    {
        std::istringstream in("alpha2,alpha3\nZZ,ZZZ\n");
        CountryCodeMap codes;
        parse_code_map(in, codes);
        CHECK(codes.alpha3("ZZ") == "ZZZ");
        CHECK(codes.alpha2("ZZZ") == "ZZ");
        CHECK(codes.alpha3("OM") == "OMN");  // built-ins still present
    }
}

TEST_CASE("merge joins alpha-2 activity with alpha-3 policy data") {
    ParseReport report;
    auto mobility = parse_mob(kMobilityHeader +
                                  "OM,Oman,,,2020-02-15,-1,-2,3,-4,-5,6\n"
                                  "ZQ,Nowhere,,,2020-02-15,-1,-2,3,-4,-5,6\n",
                              report);
    auto stringency = parse_str(
        "CountryName,CountryCode,Date,StringencyIndex,ConfirmedCases,ConfirmedDeaths\n"
        "Oman,OMN,20200215,10,5,1\n"
        "Germany,DEU,20200215,20,50,2\n",
        report);
    CountryCodeMap codes;
    auto merged = merge_dataset(std::move(mobility), stringency, codes, {{"OM", Continent::Asia}},
                                {{"OM", CountryInfo{5e6, 309500.0}}});
    REQUIRE(merged.dataset.countries.count("OM") == 1);
    const auto& om = merged.dataset.countries.at("OM");
    CHECK(om.stringency.at(kStart) == 10.0);
    CHECK(om.continent == Continent::Asia);
    CHECK(om.population == 5e6);
    CHECK(merged.unmatched_mobility == std::vector<std::string>{"ZQ"});
    CHECK(merged.unmatched_stringency == std::vector<std::string>{"DEU"});
}

TEST_CASE("repair interpolates short interior gaps linearly") {
    AnalysisWindow w{kStart, kStart + 9};
    DailySeries s = series_from(
        kStart, {1.0, 2.0, std::nullopt, std::nullopt, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0});
    AlignParams params;
    params.min_coverage = 0.5;
    auto result = repair_to_window(s, w, params);
    auto* values = std::get_if<std::vector<double>>(&result);
    REQUIRE(values);
    CHECK((*values)[2] == Catch::Approx(3.0));
    CHECK((*values)[3] == Catch::Approx(4.0));
    CHECK((*values)[9] == 10.0);
}

TEST_CASE("repair rejects long interior gaps, edge gaps, and low coverage") {
    AnalysisWindow w{kStart, kStart + 9};
    AlignParams params;  // coverage 0.9, max gap 3

    DailySeries long_gap = series_from(
        kStart, {1.0, 2.0, std::nullopt, std::nullopt, std::nullopt, std::nullopt, 7.0, 8.0, 9.0,
                 10.0});
    CHECK(std::get<ExclusionReason>(repair_to_window(long_gap, w, params)) ==
          ExclusionReason::LongInteriorGap);

    DailySeries leading = series_from(kStart + 1, {2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0});
    CHECK(std::get<ExclusionReason>(repair_to_window(leading, w, params)) ==
          ExclusionReason::EdgeGap);

    DailySeries trailing = series_from(kStart, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0});
    CHECK(std::get<ExclusionReason>(repair_to_window(trailing, w, params)) ==
          ExclusionReason::EdgeGap);

    DailySeries sparse = series_from(
        kStart, {1.0, std::nullopt, std::nullopt, 4.0, std::nullopt, std::nullopt, 7.0,
                 std::nullopt, std::nullopt, 10.0});
    CHECK(std::get<ExclusionReason>(repair_to_window(sparse, w, params)) ==
          ExclusionReason::LowCoverage);

    DailySeries empty;
    CHECK(std::get<ExclusionReason>(repair_to_window(empty, w, params)) ==
          ExclusionReason::LowCoverage);
}

TEST_CASE("coverage boundary: exactly 90 percent observed passes") {
    AnalysisWindow w{kStart, kStart + 9};
    AlignParams params;  // 0.9 of 10 days = 9 observed required
    DailySeries nine = series_from(
        kStart, {1.0, 2.0, 3.0, 4.0, std::nullopt, 6.0, 7.0, 8.0, 9.0, 10.0});
    CHECK(std::holds_alternative<std::vector<double>>(repair_to_window(nine, w, params)));
    DailySeries eight = series_from(
        kStart, {1.0, 2.0, 3.0, std::nullopt, std::nullopt, 6.0, 7.0, 8.0, 9.0, 10.0});
    CHECK(std::get<ExclusionReason>(repair_to_window(eight, w, params)) ==
          ExclusionReason::LowCoverage);
}

TEST_CASE("repair is idempotent on its own output") {
    AnalysisWindow w{kStart, kStart + 9};
    AlignParams params;
    params.min_coverage = 0.5;
    DailySeries s = series_from(
        kStart, {1.0, 2.0, std::nullopt, std::nullopt, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0});
    auto first = std::get<std::vector<double>>(repair_to_window(s, w, params));
    DailySeries repaired(w.start, std::vector<std::optional<double>>(first.begin(), first.end()));
    auto second = std::get<std::vector<double>>(repair_to_window(repaired, w, params));
    CHECK(first == second);
}

TEST_CASE("masks hide days before repair") {
    AnalysisWindow w{kStart, kStart + 9};
    AlignParams params;
    params.min_coverage = 0.5;
    DailySeries s = series_from(kStart, {1.0, 2.0, 3.0, 40.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0});
    std::vector<AnalysisWindow> masks{{kStart + 3, kStart + 3}};
    auto values = std::get<std::vector<double>>(repair_to_window(s, w, params, masks));
    CHECK(values[3] == Catch::Approx(4.0));  // interpolated across the masked spike

    // masking an edge day rejects the series outright
    std::vector<AnalysisWindow> edge{{kStart, kStart}};
    CHECK(std::get<ExclusionReason>(repair_to_window(s, w, params, edge)) ==
          ExclusionReason::EdgeGap);
}

TEST_CASE("align inverts every category except residential and repairs both sides") {
    AnalysisWindow w{kStart, kStart + 9};
    AlignParams params;
    params.min_coverage = 0.5;
    CountryRecord rec;
    rec.iso_code = "OM";
    for (int t = 0; t < 10; ++t) {
        rec.stringency.set(kStart + t, 5.0 * t);
        rec.national[ActivityCategory::RetailRecreation].set(kStart + t, -2.0 * t);
        rec.national[ActivityCategory::Residential].set(kStart + t, 1.0 * t);
    }
    auto result = align(rec, w, params);
    REQUIRE_FALSE(result.country_rejection);
    REQUIRE(result.pairs.count(ActivityCategory::RetailRecreation) == 1);
    const auto& retail = result.pairs.at(ActivityCategory::RetailRecreation);
    CHECK(retail.activity[3] == 6.0);  // negated
    CHECK(retail.stringency[3] == 15.0);
    const auto& res = result.pairs.at(ActivityCategory::Residential);
    CHECK(res.activity[3] == 3.0);  // untouched
}

TEST_CASE("align reports stringency-side failures as country rejections") {
    AnalysisWindow w{kStart, kStart + 9};
    CountryRecord rec;
    rec.iso_code = "OM";
    for (int t = 0; t < 10; ++t)
        rec.national[ActivityCategory::RetailRecreation].set(kStart + t, -2.0 * t);

    auto no_overlap = align(rec, w, AlignParams{});
    CHECK(no_overlap.country_rejection == ExclusionReason::NoStringencyOverlap);

    for (int t = 2; t < 10; ++t) rec.stringency.set(kStart + t, 5.0 * t);
    auto gap = align(rec, w, AlignParams{});
    CHECK(gap.country_rejection == ExclusionReason::StringencyGap);
}

TEST_CASE("align rejects unusable categories individually") {
    AnalysisWindow w{kStart, kStart + 9};
    AlignParams params;
    params.min_coverage = 0.5;
    CountryRecord rec;
    rec.iso_code = "OM";
    for (int t = 0; t < 10; ++t) {
        rec.stringency.set(kStart + t, 5.0 * t);
        rec.national[ActivityCategory::RetailRecreation].set(kStart + t, -2.0 * t);
    }
    // parks data starts late: edge gap
    for (int t = 4; t < 10; ++t) rec.national[ActivityCategory::Parks].set(kStart + t, 1.0 * t);

    auto result = align(rec, w, params);
    CHECK(result.pairs.count(ActivityCategory::RetailRecreation) == 1);
    CHECK(result.rejected_categories.at(ActivityCategory::Parks) == ExclusionReason::EdgeGap);
}

TEST_CASE("masks apply to activity but never to stringency") {
    AnalysisWindow w{kStart, kStart + 9};
    AlignParams params;
    params.min_coverage = 0.5;
    CountryRecord rec;
    rec.iso_code = "OM";
    for (int t = 0; t < 10; ++t) {
        rec.stringency.set(kStart + t, 5.0 * t);
        rec.national[ActivityCategory::RetailRecreation].set(kStart + t, -2.0 * t);
    }
    std::vector<AnalysisWindow> masks{{kStart + 4, kStart + 5}};
    auto result = align(rec, w, params, masks);
    const auto& retail = result.pairs.at(ActivityCategory::RetailRecreation);
    CHECK(retail.stringency[4] == 20.0);                // stringency untouched
    CHECK(retail.activity[4] == Catch::Approx(8.0));    // interpolated (negated) activity
}
