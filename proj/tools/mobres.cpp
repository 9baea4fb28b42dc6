// Command-line front end: configuration, pipeline execution, artifact and
// plot-data emission. Exit codes: 0 ok, 1 data error, 2 config error,
// 3 internal error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mobres/mobres.hpp"

namespace {

using namespace mobres;

AnalysisWindow parse_window_flag(const std::string& start, const std::string& end) {
    auto s = Date::parse_iso(start);
    auto e = Date::parse_iso(end);
    if (!s || !e) throw ConfigError("config: dates must be YYYY-MM-DD");
    try {
        return AnalysisWindow{*s, *e};
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("config: ") + ex.what());
    }
}

// COUNTRY:START..END, e.g. EG:2020-03-12..2020-03-12
std::pair<std::string, AnalysisWindow> parse_mask_flag(const std::string& spec) {
    const auto colon = spec.find(':');
    const auto dots = spec.find("..");
    if (colon == std::string::npos || dots == std::string::npos || dots < colon)
        throw ConfigError("config: mask must be COUNTRY:DATE..DATE, got '" + spec + "'");
    std::string iso = spec.substr(0, colon);
    for (char& c : iso) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return {iso, parse_window_flag(spec.substr(colon + 1, dots - colon - 1),
                                   spec.substr(dots + 2))};
}

struct CliOptions {
    RunConfig config;
    std::string window_start = "2020-02-15";
    std::string window_end = "2020-04-11";
    std::vector<std::string> mask_specs;
    std::vector<std::string> exclude_categories{"parks"};
    std::string format = "csv";
    std::string linkage = "average";
    int vector_categories = 6;
    std::string plot_country;
};

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--mobility", opt.config.paths.mobility,
                    "Community-mobility CSV (required)");
    cmd->add_option("--stringency", opt.config.paths.stringency,
                    "Government-response CSV (required)");
    cmd->add_option("--continents", opt.config.paths.continents,
                    "iso_code,continent CSV");
    cmd->add_option("--country-info", opt.config.paths.country_info,
                    "iso_code,population,area_km2 CSV");
    cmd->add_option("--neighbors", opt.config.paths.neighbors,
                    "iso_code,neighbor_iso_code CSV");
    cmd->add_option("--boundaries", opt.config.paths.boundaries,
                    "Boundary GeoJSON, one feature per country");
    cmd->add_option("--code-map", opt.config.paths.code_map,
                    "alpha2,alpha3 overrides for the built-in code table");
    cmd->add_option("--indices-manifest", opt.config.paths.indices_manifest,
                    "JSON manifest listing index CSVs");
    cmd->add_option("--window-start", opt.window_start, "Analysis window start (YYYY-MM-DD)")
        ->capture_default_str();
    cmd->add_option("--window-end", opt.window_end, "Analysis window end (YYYY-MM-DD)")
        ->capture_default_str();
    cmd->add_option("--xcorr-threshold", opt.config.lag.threshold,
                    "Cross-correlation significance threshold")
        ->capture_default_str();
    cmd->add_option("--max-lag", opt.config.lag.max_lag, "Largest lag searched, in days")
        ->capture_default_str();
    cmd->add_option("--min-overlap", opt.config.lag.min_overlap,
                    "Smallest overlap for a cross-correlation point")
        ->capture_default_str();
    cmd->add_option("--coverage", opt.config.align.min_coverage,
                    "Required observed fraction of window days")
        ->capture_default_str();
    cmd->add_option("--max-gap", opt.config.align.max_interior_gap,
                    "Longest interior gap repaired by interpolation, in days")
        ->capture_default_str();
    cmd->add_option("--exclude-category", opt.exclude_categories,
                    "Category excluded from country means (repeatable; 'none' clears)")
        ->capture_default_str();
    cmd->add_option("--mask", opt.mask_specs,
                    "Dates treated as missing for one country: COUNTRY:DATE..DATE (repeatable)");
    cmd->add_option("--out-dir", opt.config.out_dir, "Artifact directory")
        ->capture_default_str();
    cmd->add_option("--format", opt.format, "Tabular artifact format: csv or json")
        ->capture_default_str();
    cmd->add_option("--perm-seed", opt.config.perm_seed,
                    "Seed for the geography label-shuffle null check")
        ->capture_default_str();
    cmd->add_option("--vector-categories", opt.vector_categories,
                    "Response-vector dimensionality: 6 or 5 (drops parks)")
        ->capture_default_str();
    cmd->add_option("--linkage", opt.linkage, "Dendrogram linkage: average, single or complete")
        ->capture_default_str();
    cmd->add_option("--min-join", opt.config.min_join,
                    "Smallest measure-index join that yields a statistic")
        ->capture_default_str();
}

RunConfig finalize_config(CliOptions& opt) {
    RunConfig config = opt.config;
    config.window = parse_window_flag(opt.window_start, opt.window_end);

    config.excluded_from_means.clear();
    for (const auto& name : opt.exclude_categories) {
        if (name == "none") {
            config.excluded_from_means.clear();
            continue;
        }
        auto cat = parse_category(name);
        if (!cat) throw ConfigError("config: unknown category '" + name + "'");
        config.excluded_from_means.insert(*cat);
    }

    for (const auto& spec : opt.mask_specs) {
        auto [iso, window] = parse_mask_flag(spec);
        config.masks[iso].push_back(window);
    }

    auto format = parse_output_format(opt.format);
    if (!format) throw ConfigError("config: format must be csv or json");
    config.format = *format;

    if (opt.linkage == "average") config.linkage = LinkageMethod::Average;
    else if (opt.linkage == "single") config.linkage = LinkageMethod::Single;
    else if (opt.linkage == "complete") config.linkage = LinkageMethod::Complete;
    else throw ConfigError("config: unknown linkage '" + opt.linkage + "'");

    if (opt.vector_categories == 6) config.include_parks_in_vectors = true;
    else if (opt.vector_categories == 5) config.include_parks_in_vectors = false;
    else throw ConfigError("config: --vector-categories must be 5 or 6");

    return config;
}

void print_exclusion_summary(const AnalysisResults& r, std::ostream& out) {
    std::map<std::string, std::size_t> counts;
    for (const auto& e : r.exclusions) ++counts[e.reason];
    out << "exclusions by reason:\n";
    for (const auto& [reason, count] : counts) out << "  " << reason << ": " << count << '\n';
}

int run_ingest_check(const RunConfig& config) {
    validate(config);
    LoadedInputs inputs = load_inputs(config);
    std::cout << "mobility countries: " << inputs.mobility_countries << '\n'
              << "stringency countries: " << inputs.stringency_countries << '\n'
              << "merged countries: " << inputs.dataset.countries.size() << '\n'
              << "unmatched mobility codes: " << inputs.unmatched_mobility.size() << '\n'
              << "unmatched stringency codes: " << inputs.unmatched_stringency.size() << '\n'
              << "rows read: " << inputs.report.rows_read << '\n'
              << "rows skipped: " << inputs.report.rows_skipped << '\n'
              << "warnings: " << inputs.report.warnings << '\n';
    for (const auto& msg : inputs.report.messages) std::cerr << "warning: " << msg << '\n';
    return 0;
}

int run_measures(const RunConfig& config, const std::string& subcommand) {
    AnalysisResults results = run_analysis(config);

    std::set<std::string> stems;
    bool have_output = false;
    if (subcommand == "similarity") {
        stems = {"country_measures", "country_summary", "category_similarity",
                 "ranking_mean_cosine", "ranking_mean_pearson", "concordance", "exclusions"};
        for (const auto& [iso, c] : results.countries) have_output |= c.similarity.has_value();
    } else if (subcommand == "lag") {
        stems = {"country_measures", "category_lag", "ranking_mean_lag", "summary_stats",
                 "exclusions"};
        for (const auto& [iso, c] : results.countries) have_output |= c.lag.has_value();
    } else if (subcommand == "subregion") {
        stems = {"country_measures", "category_subregion_sd", "ranking_subregion_variation",
                 "concordance", "exclusions"};
        for (const auto& [iso, c] : results.countries) have_output |= c.subregion.has_value();
    } else if (subcommand == "spatial") {
        stems = {"continent_distance", "border_split", "geography_concordance", "distances",
                 "exclusions"};
        for (const auto& block : results.spatial) have_output |= block.distances.has_value();
    } else if (subcommand == "embed") {
        stems = {"embedding", "dendrogram"};
        have_output = results.embedding || results.dendrogram;
    } else if (subcommand == "correlate") {
        stems = {"correlations", "outcome_comparison"};
        have_output = !results.correlations.empty() || !results.outcomes.empty();
    } else {  // report-all
        have_output = !results.countries.empty();
    }

    if (!have_output) {
        std::cerr << "error: no countries usable for '" << subcommand << "'\n";
        print_exclusion_summary(results, std::cerr);
        return 1;
    }

    const auto written = write_artifacts(results, stems);
    std::cout << "wrote " << written.size() << " artifacts to " << results.config.out_dir << '\n';
    return 0;
}

int run_plot(const RunConfig& config, std::string country) {
    validate(config);
    for (char& c : country) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    LoadedInputs inputs = load_inputs(config);
    auto it = inputs.dataset.countries.find(country);
    if (it == inputs.dataset.countries.end())
        throw DataError("plot: unknown country code '" + country + "'");

    std::vector<AnalysisWindow> masks;
    if (auto m = config.masks.find(country); m != config.masks.end()) masks = m->second;
    PlotData plot = emit_plot_data(it->second, config.window, masks);

    std::filesystem::create_directories(config.out_dir);
    const char* ext = config.format == OutputFormat::Csv ? ".csv" : ".json";
    const auto path = std::filesystem::path(config.out_dir) / ("plot_" + country + ext);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write artifact: " + path.string());
    plot.table.write(out, config.format);
    for (const auto& name : plot.absent_series)
        std::cerr << "note: " << country << " has no " << name << " data in the window\n";
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Place-based activity response analytics"};
    app.require_subcommand(1);

    CliOptions opt;
    static const std::vector<std::string> kSubcommands = {
        "ingest-check", "similarity", "lag",       "subregion", "spatial",
        "embed",        "correlate",  "report-all"};
    for (const auto& name : kSubcommands) {
        auto* cmd = app.add_subcommand(name);
        add_common_flags(cmd, opt);
    }
    auto* plot_cmd = app.add_subcommand("plot", "Per-country curve data for plotting");
    add_common_flags(plot_cmd, opt);
    plot_cmd->add_option("--country", opt.plot_country, "Country alpha-2 code")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const RunConfig config = finalize_config(opt);
        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "ingest-check") return run_ingest_check(config);
        if (sub == "plot") return run_plot(config, opt.plot_country);
        return run_measures(config, sub);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
}
