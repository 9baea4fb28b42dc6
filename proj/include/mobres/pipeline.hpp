#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mobres/embed.hpp"
#include "mobres/hashing.hpp"
#include "mobres/indices.hpp"
#include "mobres/ingest.hpp"
#include "mobres/measures.hpp"
#include "mobres/rankstats.hpp"
#include "mobres/spatial.hpp"
#include "mobres/types.hpp"

namespace mobres {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class OutputFormat { Csv, Json };

inline constexpr std::string_view output_format_name(OutputFormat f) {
    return f == OutputFormat::Csv ? "csv" : "json";
}

inline std::optional<OutputFormat> parse_output_format(std::string_view s) {
    if (s == "csv") return OutputFormat::Csv;
    if (s == "json") return OutputFormat::Json;
    return std::nullopt;
}

struct RunPaths {
    std::string mobility;          // required
    std::string stringency;        // required
    std::string continents;        // optional auxiliaries below
    std::string country_info;
    std::string neighbors;
    std::string boundaries;
    std::string code_map;          // overrides for the built-in alpha-2/alpha-3 table
    std::string indices_manifest;
};

struct RunConfig {
    AnalysisWindow window{};
    RunPaths paths;
    AlignParams align{};
    LagParams lag{};
    std::set<ActivityCategory> excluded_from_means{ActivityCategory::Parks};
    std::map<std::string, std::vector<AnalysisWindow>> masks;  // iso_code → masked ranges
    std::string out_dir = "mobres-out";
    OutputFormat format = OutputFormat::Csv;
    std::uint64_t perm_seed = 12345;  // label shuffle for the geography null check
    bool include_parks_in_vectors = true;  // 6-dim response vectors; false → 5-dim
    LinkageMethod linkage = LinkageMethod::Average;
    std::size_t min_join = 10;  // smallest measure-index join that yields a statistic
};

/// Config sanity; violations are usage errors, not data errors.
inline void validate(const RunConfig& config) {
    if (config.paths.mobility.empty() || config.paths.stringency.empty())
        throw ConfigError("config: mobility and stringency paths are required");
    for (const std::string* p :
         {&config.paths.mobility, &config.paths.stringency, &config.paths.continents,
          &config.paths.country_info, &config.paths.neighbors, &config.paths.boundaries,
          &config.paths.code_map, &config.paths.indices_manifest}) {
        if (!p->empty() && !std::filesystem::exists(*p))
            throw ConfigError("config: path does not exist: " + *p);
    }
    if (!(config.lag.threshold > 0.0 && config.lag.threshold < 1.0))
        throw ConfigError("config: xcorr threshold must lie in (0,1)");
    if (config.lag.max_lag < 1 || config.lag.max_lag > config.window.days() / 2)
        throw ConfigError("config: max lag must lie in [1, window/2]");
    if (config.lag.min_overlap < 3)
        throw ConfigError("config: min overlap must be at least 3");
    if (!(config.align.min_coverage > 0.0 && config.align.min_coverage <= 1.0))
        throw ConfigError("config: coverage threshold must lie in (0,1]");
    if (config.align.max_interior_gap < 0)
        throw ConfigError("config: max interior gap must be nonnegative");
}

/// Canonical key=value serialization; hashed into the run manifest so any
/// config change changes the manifest.
inline std::string canonical_config(const RunConfig& c) {
    std::ostringstream os;
    os << "window=" << c.window.start.to_iso() << ".." << c.window.end.to_iso() << '\n'
       << "mobility=" << c.paths.mobility << '\n'
       << "stringency=" << c.paths.stringency << '\n'
       << "continents=" << c.paths.continents << '\n'
       << "country_info=" << c.paths.country_info << '\n'
       << "neighbors=" << c.paths.neighbors << '\n'
       << "boundaries=" << c.paths.boundaries << '\n'
       << "code_map=" << c.paths.code_map << '\n'
       << "indices_manifest=" << c.paths.indices_manifest << '\n'
       << "min_coverage=" << c.align.min_coverage << '\n'
       << "max_interior_gap=" << c.align.max_interior_gap << '\n'
       << "xcorr_threshold=" << c.lag.threshold << '\n'
       << "max_lag=" << c.lag.max_lag << '\n'
       << "min_overlap=" << c.lag.min_overlap << '\n';
    os << "excluded=";
    for (ActivityCategory cat : c.excluded_from_means) os << category_name(cat) << ',';
    os << '\n' << "masks=";
    for (const auto& [iso, windows] : c.masks)
        for (const auto& w : windows)
            os << iso << ':' << w.start.to_iso() << ".." << w.end.to_iso() << ',';
    os << '\n'
       << "format=" << output_format_name(c.format) << '\n'
       << "perm_seed=" << c.perm_seed << '\n'
       << "include_parks_in_vectors=" << (c.include_parks_in_vectors ? 1 : 0) << '\n'
       << "linkage=" << linkage_name(c.linkage) << '\n'
       << "min_join=" << c.min_join << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

struct InputFileInfo {
    std::string path;
    std::string checksum;  // fnv-1a 64, hex
    std::size_t rows = 0;
};

struct LoadedInputs {
    Dataset dataset;
    CountryCodeMap codes;
    std::map<std::string, Continent> continents;
    std::map<std::string, std::set<std::string>> neighbors;
    std::map<std::string, CountryGeometry> boundaries;
    std::vector<IndexTable> index_tables;  // manifest-listed external indices
    ParseReport report;
    std::vector<std::string> unmatched_mobility;
    std::vector<std::string> unmatched_stringency;
    std::size_t mobility_countries = 0;    // before the join
    std::size_t stringency_countries = 0;
    std::vector<InputFileInfo> files;
};

namespace detail {

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input file: " + path);
    return in;
}

inline std::string checksum_file(const std::string& path) {
    auto in = open_input(path);
    return hex64(fnv1a64_stream(in));
}

} // namespace detail

inline LoadedInputs load_inputs(const RunConfig& config) {
    LoadedInputs loaded;

    auto record_file = [&](const std::string& path, std::size_t rows) {
        loaded.files.push_back({path, detail::checksum_file(path), rows});
    };

    if (!config.paths.code_map.empty()) {
        auto in = detail::open_input(config.paths.code_map);
        parse_code_map(in, loaded.codes);
        record_file(config.paths.code_map, 0);
    }

    std::map<std::string, CountryRecord> mobility;
    {
        auto in = detail::open_input(config.paths.mobility);
        const std::size_t before = loaded.report.rows_read;
        mobility = parse_mobility(in, loaded.report);
        record_file(config.paths.mobility, loaded.report.rows_read - before);
    }
    std::map<std::string, StringencyRecord> stringency;
    {
        auto in = detail::open_input(config.paths.stringency);
        const std::size_t before = loaded.report.rows_read;
        stringency = parse_stringency(in, loaded.report);
        record_file(config.paths.stringency, loaded.report.rows_read - before);
    }
    loaded.mobility_countries = mobility.size();
    loaded.stringency_countries = stringency.size();

    std::map<std::string, CountryInfo> info;
    if (!config.paths.continents.empty()) {
        auto in = detail::open_input(config.paths.continents);
        loaded.continents = parse_continents(in);
        record_file(config.paths.continents, loaded.continents.size());
    }
    if (!config.paths.country_info.empty()) {
        auto in = detail::open_input(config.paths.country_info);
        info = parse_country_info(in);
        record_file(config.paths.country_info, info.size());
    }
    if (!config.paths.neighbors.empty()) {
        auto in = detail::open_input(config.paths.neighbors);
        loaded.neighbors = parse_neighbors(in);
        // The adjacency map stores each pair twice; count it once.
        std::size_t adjacency_pairs = 0;
        for (const auto& [iso, set] : loaded.neighbors) adjacency_pairs += set.size();
        record_file(config.paths.neighbors, adjacency_pairs / 2);
    }
    if (!config.paths.boundaries.empty()) {
        auto in = detail::open_input(config.paths.boundaries);
        loaded.boundaries = load_boundaries(in);
        record_file(config.paths.boundaries, loaded.boundaries.size());
    }
    if (!config.paths.indices_manifest.empty()) {
        auto in = detail::open_input(config.paths.indices_manifest);
        auto entries = load_indices_manifest(in);
        record_file(config.paths.indices_manifest, entries.size());
        const std::filesystem::path base =
            std::filesystem::path(config.paths.indices_manifest).parent_path();
        for (const auto& e : entries) {
            const std::string path = (base / e.file).string();
            auto file = detail::open_input(path);
            loaded.index_tables.push_back(
                load_index_csv(file, e.name, loaded.codes, loaded.report, e.higher_is));
            record_file(path, loaded.index_tables.back().values.size());
        }
    }

    MergeResult merged =
        merge_dataset(std::move(mobility), stringency, loaded.codes, loaded.continents, info);
    loaded.dataset = std::move(merged.dataset);
    loaded.unmatched_mobility = std::move(merged.unmatched_mobility);
    loaded.unmatched_stringency = std::move(merged.unmatched_stringency);
    return loaded;
}

// ---------------------------------------------------------------------------
// Analysis results
// ---------------------------------------------------------------------------

struct ExclusionRow {
    std::string iso_code;
    std::string scope;   // dataset | similarity | lag | subregion_variation
    std::string reason;  // machine-readable code
};

struct CountryOutputs {
    std::map<ActivityCategory, AlignedPair> pairs;
    std::map<ActivityCategory, ExclusionReason> rejected_categories;
    std::optional<SimilarityScore> similarity;
    std::optional<LagProfile> lag;
    std::optional<SubregionVariation> subregion;
};

struct SpatialBlock {
    std::string measure;  // cosine | lag | subregion_sd
    std::optional<DistanceMatrix> distances;
    std::vector<std::string> dropped;  // aligned countries absent from the matrix
    ContinentSummary continents;
    BorderSplit borders;
    std::optional<TauResult> geography_tau;     // response vs geodesic distance
    std::optional<double> permuted_tau;         // null check after label shuffle
    std::size_t geography_n = 0;                // countries entering the comparison
};

struct AnalysisResults {
    RunConfig config;
    LoadedInputs inputs;

    std::map<std::string, CountryOutputs> countries;  // aligned countries
    std::vector<ExclusionRow> exclusions;

    std::vector<CategoryAggregate> cosine_by_category;
    std::vector<CategoryAggregate> pearson_by_category;
    std::vector<CategoryAggregate> lag_by_category;
    std::vector<CategoryAggregate> subregion_sd_by_category;
    double mean_country_lag = 0;
    std::size_t mean_country_lag_n = 0;

    std::map<std::string, MeasureTable> measures;           // keyed by measure name
    std::map<std::string, std::vector<RankedEntry>> rankings;
    std::optional<ConcordanceResult> cosine_vs_pearson;
    std::optional<ConcordanceResult> subregion_vs_similarity;

    std::vector<SpatialBlock> spatial;

    std::optional<Embedding2D> embedding;
    std::vector<std::string> embedding_dropped;
    std::string embedding_features;
    std::optional<Dendrogram> dendrogram;
    std::vector<std::string> dendrogram_dropped;
    std::string dendrogram_features;

    std::vector<IndexTable> all_indices;  // derived attribute tables + external ones
    std::vector<CorrelationRow> correlations;
    std::vector<OutcomeComparison> outcomes;
};

namespace detail {

/// Portable Fisher-Yates; std::shuffle's draw sequence is
/// implementation-defined, this is not.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t draw = rng();
        while (draw >= limit) draw = rng();
        std::swap(items[i - 1], items[draw % bound]);
    }
}

inline std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Aligns every country and computes the three per-country measures;
/// populates countries and the exclusion report.
inline void compute_country_measures(AnalysisResults& r) {
    const RunConfig& config = r.config;
    for (const auto& iso : r.inputs.unmatched_mobility) {
        const bool unmapped = !r.inputs.codes.alpha3(iso).has_value();
        r.exclusions.push_back(
            {iso, "dataset",
             std::string(exclusion_reason_code(unmapped ? ExclusionReason::UnmappedCountryCode
                                                        : ExclusionReason::NoStringencyOverlap))});
    }

    for (const auto& [iso, record] : r.inputs.dataset.countries) {
        std::vector<AnalysisWindow> masks;
        if (auto it = config.masks.find(iso); it != config.masks.end()) masks = it->second;

        AlignmentResult aligned = align(record, config.window, config.align, masks);
        if (aligned.country_rejection) {
            r.exclusions.push_back(
                {iso, "dataset", std::string(exclusion_reason_code(*aligned.country_rejection))});
            continue;
        }
        if (aligned.pairs.empty()) {
            r.exclusions.push_back(
                {iso, "dataset",
                 std::string(exclusion_reason_code(ExclusionReason::NoUsableCategory))});
            continue;
        }

        CountryOutputs out;
        out.pairs = std::move(aligned.pairs);
        out.rejected_categories = std::move(aligned.rejected_categories);

        out.similarity = country_similarity(iso, out.pairs, config.excluded_from_means);
        if (!out.similarity)
            r.exclusions.push_back(
                {iso, "similarity",
                 std::string(exclusion_reason_code(ExclusionReason::UndefinedSimilarity))});

        out.lag = country_lag(iso, out.pairs, config.lag, config.excluded_from_means);
        if (!out.lag)
            r.exclusions.push_back(
                {iso, "lag", std::string(exclusion_reason_code(ExclusionReason::NoSignificantLag))});

        if (record.subregions.size() < 2) {
            r.exclusions.push_back(
                {iso, "subregion_variation",
                 std::string(exclusion_reason_code(ExclusionReason::TooFewSubregions))});
        } else {
            out.subregion = subregion_variation(record, config.window, config.align, masks);
            if (!out.subregion)
                r.exclusions.push_back(
                    {iso, "subregion_variation",
                     std::string(exclusion_reason_code(ExclusionReason::TooFewSubregions))});
        }
        r.countries.emplace(iso, std::move(out));
    }
}

inline void compute_aggregates(AnalysisResults& r) {
    r.cosine_by_category = aggregate_by_category(
        r.countries, [](const CountryOutputs& c, ActivityCategory cat) -> std::optional<double> {
            if (!c.similarity) return std::nullopt;
            auto it = c.similarity->per_category.find(cat);
            return it == c.similarity->per_category.end() ? std::nullopt : it->second.cosine;
        });
    r.pearson_by_category = aggregate_by_category(
        r.countries, [](const CountryOutputs& c, ActivityCategory cat) -> std::optional<double> {
            if (!c.similarity) return std::nullopt;
            auto it = c.similarity->per_category.find(cat);
            return it == c.similarity->per_category.end() ? std::nullopt : it->second.pearson;
        });
    r.lag_by_category = aggregate_by_category(
        r.countries, [](const CountryOutputs& c, ActivityCategory cat) -> std::optional<double> {
            if (!c.lag) return std::nullopt;
            auto it = c.lag->per_category.find(cat);
            if (it == c.lag->per_category.end()) return std::nullopt;
            return static_cast<double>(it->second);
        });
    r.subregion_sd_by_category = aggregate_by_category(
        r.countries, [](const CountryOutputs& c, ActivityCategory cat) -> std::optional<double> {
            if (!c.subregion) return std::nullopt;
            auto it = c.subregion->per_category_sd.find(cat);
            return it == c.subregion->per_category_sd.end()
                       ? std::nullopt
                       : std::optional<double>(it->second);
        });

    std::vector<double> lag_means;
    for (const auto& [iso, c] : r.countries)
        if (c.lag) lag_means.push_back(c.lag->mean_lag);
    r.mean_country_lag_n = lag_means.size();
    r.mean_country_lag = lag_means.empty() ? 0.0 : stats::mean(lag_means);
}

inline void compute_rankings(AnalysisResults& r) {
    MeasureTable cosine{"mean_cosine", {}}, pears{"mean_pearson", {}}, lag{"mean_lag", {}},
        subr{"subregion_variation", {}};
    for (const auto& [iso, c] : r.countries) {
        if (c.similarity) {
            cosine.values[iso] = c.similarity->mean_cosine;
            pears.values[iso] = c.similarity->mean_pearson;
        }
        if (c.lag) lag.values[iso] = c.lag->mean_lag;
        if (c.subregion) subr.values[iso] = c.subregion->mean_sd;
    }
    r.rankings["mean_cosine"] = rank_countries(cosine, RankOrder::Descending);
    r.rankings["mean_pearson"] = rank_countries(pears, RankOrder::Descending);
    r.rankings["mean_lag"] = rank_countries(lag, RankOrder::Ascending);
    r.rankings["subregion_variation"] = rank_countries(subr, RankOrder::Descending);

    r.cosine_vs_pearson = concordance(cosine, pears);
    r.subregion_vs_similarity = concordance(subr, cosine);

    r.measures.emplace(cosine.name, std::move(cosine));
    r.measures.emplace(pears.name, std::move(pears));
    r.measures.emplace(lag.name, std::move(lag));
    r.measures.emplace(subr.name, std::move(subr));
}

namespace detail {

inline std::map<std::string, std::map<ActivityCategory, double>> per_category_values(
    const std::map<std::string, CountryOutputs>& countries, ResponseMeasure measure) {
    std::map<std::string, std::map<ActivityCategory, double>> out;
    for (const auto& [iso, c] : countries) {
        std::map<ActivityCategory, double> values;
        switch (measure) {
            case ResponseMeasure::Cosine:
                if (!c.similarity) continue;
                for (const auto& [cat, sim] : c.similarity->per_category)
                    if (sim.cosine) values[cat] = *sim.cosine;
                break;
            case ResponseMeasure::Lag:
                if (!c.lag) continue;
                for (const auto& [cat, days] : c.lag->per_category)
                    values[cat] = static_cast<double>(days);
                break;
            case ResponseMeasure::SubregionSd:
                if (!c.subregion) continue;
                values = c.subregion->per_category_sd;
                break;
        }
        if (!values.empty()) out.emplace(iso, std::move(values));
    }
    return out;
}

/// Restricts response vectors to labels with boundary geometry and computes
/// the rank concordance between response distance and geodesic distance,
/// plus a label-shuffled null statistic.
inline void geography_comparison(SpatialBlock& block,
                                 const std::vector<CountryResponseVector>& vectors,
                                 const std::map<std::string, CountryGeometry>& boundaries,
                                 std::uint64_t perm_seed) {
    std::vector<CountryResponseVector> with_geometry;
    for (const auto& v : vectors)
        if (boundaries.contains(v.iso_code)) with_geometry.push_back(v);
    block.geography_n = with_geometry.size();
    if (with_geometry.size() < 3) return;

    DistanceMatrix response = response_distance_matrix(with_geometry);
    DistanceMatrix geo = geographic_distance_matrix(boundaries, response.labels());
    if (auto tau = geography_concordance(response, geo)) block.geography_tau = *tau;

    std::vector<std::string> shuffled = response.labels();
    deterministic_shuffle(shuffled, perm_seed);
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < response.labels().size(); ++i)
        position[response.labels()[i]] = i;
    const std::size_t n = shuffled.size();
    std::vector<double> permuted(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            permuted[i * n + j] = response.at(position[shuffled[i]], position[shuffled[j]]);
    DistanceMatrix permuted_response(response.labels(), std::move(permuted));
    if (auto tau = geography_concordance(permuted_response, geo))
        block.permuted_tau = tau->tau;
}

} // namespace detail

inline void compute_spatial(AnalysisResults& r) {
    for (ResponseMeasure measure :
         {ResponseMeasure::Cosine, ResponseMeasure::Lag, ResponseMeasure::SubregionSd}) {
        SpatialBlock block;
        block.measure = std::string(response_measure_name(measure));

        auto values = detail::per_category_values(r.countries, measure);
        auto vectors =
            build_response_vectors(values, measure, r.config.include_parks_in_vectors).first;
        // Dropped covers incomplete vectors and countries with no values for
        // this measure at all, mirroring the embedding and dendrogram stages.
        std::set<std::string> kept;
        for (const auto& v : vectors) kept.insert(v.iso_code);
        for (const auto& [iso, c] : r.countries)
            if (!kept.contains(iso)) block.dropped.push_back(iso);
        if (vectors.size() >= 2) {
            block.distances = response_distance_matrix(vectors);
            block.continents = continent_summary(*block.distances, r.inputs.continents);
            block.borders = border_distance_split(*block.distances, r.inputs.neighbors);
            if (!r.inputs.boundaries.empty())
                detail::geography_comparison(block, vectors, r.inputs.boundaries,
                                             r.config.perm_seed);
        }
        r.spatial.push_back(std::move(block));
    }
}

inline void compute_embedding(AnalysisResults& r) {
    // Joint features: per-category cosine next to per-category lag,
    // z-scored per dimension because the units are incomparable.
    auto cosine = detail::per_category_values(r.countries, ResponseMeasure::Cosine);
    auto lag = detail::per_category_values(r.countries, ResponseMeasure::Lag);
    auto [cvecs, cdropped] =
        build_response_vectors(cosine, ResponseMeasure::Cosine, r.config.include_parks_in_vectors);
    auto [lvecs, ldropped] =
        build_response_vectors(lag, ResponseMeasure::Lag, r.config.include_parks_in_vectors);

    std::map<std::string, const CountryResponseVector*> lag_by_iso;
    for (const auto& v : lvecs) lag_by_iso[v.iso_code] = &v;

    std::vector<CountryResponseVector> joint;
    std::set<std::string> joint_isos;
    for (const auto& cv : cvecs) {
        auto it = lag_by_iso.find(cv.iso_code);
        if (it == lag_by_iso.end()) continue;
        CountryResponseVector v{cv.iso_code, ResponseMeasure::Cosine, cv.values};
        v.values.insert(v.values.end(), it->second->values.begin(), it->second->values.end());
        joint.push_back(std::move(v));
        joint_isos.insert(cv.iso_code);
    }
    for (const auto& [iso, c] : r.countries)
        if (!joint_isos.contains(iso)) r.embedding_dropped.push_back(iso);

    r.embedding_features = std::string("per-category cosine similarity and lag response, ") +
                           (r.config.include_parks_in_vectors ? "6" : "5") +
                           " categories each, z-scored per dimension";
    if (joint.size() < 3) return;
    standardize_dimensions(joint);
    r.embedding = classical_mds(response_distance_matrix(joint));
}

inline void compute_dendrogram(AnalysisResults& r) {
    auto values = detail::per_category_values(r.countries, ResponseMeasure::SubregionSd);
    auto [vectors, dropped] = build_response_vectors(values, ResponseMeasure::SubregionSd,
                                                     r.config.include_parks_in_vectors);
    for (const auto& [iso, c] : r.countries) {
        bool present = false;
        for (const auto& v : vectors) present = present || v.iso_code == iso;
        if (!present) r.dendrogram_dropped.push_back(iso);
    }
    r.dendrogram_features = std::string("per-category subregion-variation SD, ") +
                            (r.config.include_parks_in_vectors ? "6" : "5") + " categories";
    if (vectors.size() < 2) return;
    r.dendrogram = agglomerative_cluster(response_distance_matrix(vectors), r.config.linkage);
}

inline void compute_correlations(AnalysisResults& r) {
    // Derived attribute tables from the merged dataset.
    IndexTable population{"population", {}, HigherIs::Neutral};
    IndexTable area{"area_km2", {}, HigherIs::Neutral};
    IndexTable density{"population_density", {}, HigherIs::Neutral};
    IndexTable cases_pc{"cases_per_capita", {}, HigherIs::Worse};
    IndexTable deaths_pc{"deaths_per_capita", {}, HigherIs::Worse};
    for (const auto& [iso, record] : r.inputs.dataset.countries) {
        if (record.population && *record.population > 0) {
            population.values[iso] = *record.population;
            if (auto cases = record.confirmed_cases.at(r.config.window.end))
                cases_pc.values[iso] = per_capita(*cases, *record.population);
            if (auto deaths = record.deaths.at(r.config.window.end))
                deaths_pc.values[iso] = per_capita(*deaths, *record.population);
        }
        if (record.area_km2 && *record.area_km2 > 0) {
            area.values[iso] = *record.area_km2;
            if (record.population && *record.population > 0)
                density.values[iso] = *record.population / *record.area_km2;
        }
    }
    r.all_indices = {std::move(population), std::move(area),    std::move(density),
                     std::move(cases_pc),   std::move(deaths_pc)};
    for (const auto& t : r.inputs.index_tables) r.all_indices.push_back(t);

    std::vector<MeasureTable> measures;
    for (const auto& [name, table] : r.measures) measures.push_back(table);
    r.correlations = correlate_measures_with_indices(measures, r.all_indices, r.config.min_join);

    r.outcomes =
        stringency_vs_outcomes(r.inputs.dataset, r.config.window, r.config.align, r.config.masks);
}

/// Full pipeline: load, align, measure, rank, relate to geography, embed,
/// cluster, correlate. Artifact writing lives in report.hpp.
inline AnalysisResults run_analysis(RunConfig config) {
    validate(config);
    AnalysisResults results;
    results.config = std::move(config);
    results.inputs = load_inputs(results.config);
    compute_country_measures(results);
    compute_aggregates(results);
    compute_rankings(results);
    compute_spatial(results);
    compute_embedding(results);
    compute_dendrogram(results);
    compute_correlations(results);
    return results;
}

} // namespace mobres
