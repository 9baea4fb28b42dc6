#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mobres/csv.hpp"
#include "mobres/hashing.hpp"
#include "mobres/pipeline.hpp"

namespace mobres {

// ---------------------------------------------------------------------------
// Dual-format tables
// ---------------------------------------------------------------------------

/// Rectangular table whose cells are JSON scalars; serializes as CSV (doubles
/// via shortest round-trip formatting) or as a JSON array of objects.
class Table {
public:
    explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(std::vector<nlohmann::json> cells) {
        if (cells.size() != columns_.size())
            throw std::invalid_argument("table row width mismatch");
        rows_.push_back(std::move(cells));
    }

    void write_csv(std::ostream& out) const {
        csv::write_row(out, columns_);
        for (const auto& row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out << ',';
                csv::write_field(out, cell_text(row[i]));
            }
            out << '\n';
        }
    }

    void write_json(std::ostream& out) const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& row : rows_) {
            nlohmann::json obj;
            for (std::size_t i = 0; i < row.size(); ++i) obj[columns_[i]] = row[i];
            arr.push_back(std::move(obj));
        }
        out << arr.dump(2) << '\n';
    }

    void write(std::ostream& out, OutputFormat format) const {
        format == OutputFormat::Csv ? write_csv(out) : write_json(out);
    }

private:
    static std::string cell_text(const nlohmann::json& cell) {
        if (cell.is_null()) return "";
        if (cell.is_string()) return cell.get<std::string>();
        if (cell.is_boolean()) return cell.get<bool>() ? "true" : "false";
        if (cell.is_number_float()) return csv::format_double(cell.get<double>());
        return cell.dump();
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<nlohmann::json>> rows_;
};

namespace detail {

inline nlohmann::json jopt(std::optional<double> v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json jopt_int(std::optional<int> v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Tabular artifacts
// ---------------------------------------------------------------------------

/// Long per-country, per-category rows; rejected categories keep their row
/// with a reason code so nothing disappears silently.
inline Table country_measures_table(const AnalysisResults& r) {
    Table t({"iso_code", "category", "cosine", "pearson", "lag_days", "subregion_sd",
             "in_country_means", "rejection"});
    for (const auto& [iso, c] : r.countries) {
        for (ActivityCategory cat : kAllCategories) {
            std::optional<double> cosine, pears, sd;
            std::optional<int> lag;
            std::optional<std::string> rejection;
            bool have_any = false;
            if (c.similarity) {
                if (auto it = c.similarity->per_category.find(cat);
                    it != c.similarity->per_category.end()) {
                    cosine = it->second.cosine;
                    pears = it->second.pearson;
                    have_any = true;
                }
            }
            if (c.lag) {
                if (auto it = c.lag->per_category.find(cat); it != c.lag->per_category.end()) {
                    lag = it->second;
                    have_any = true;
                }
            }
            if (c.subregion) {
                if (auto it = c.subregion->per_category_sd.find(cat);
                    it != c.subregion->per_category_sd.end()) {
                    sd = it->second;
                    have_any = true;
                }
            }
            if (auto it = c.rejected_categories.find(cat); it != c.rejected_categories.end()) {
                rejection = std::string(exclusion_reason_code(it->second));
                have_any = true;
            }
            if (!have_any) continue;
            t.add_row({iso, std::string(category_name(cat)), detail::jopt(cosine),
                       detail::jopt(pears), detail::jopt_int(lag), detail::jopt(sd),
                       !r.config.excluded_from_means.contains(cat),
                       rejection ? nlohmann::json(*rejection) : nlohmann::json(nullptr)});
        }
    }
    return t;
}

inline Table country_summary_table(const AnalysisResults& r) {
    Table t({"iso_code", "name", "continent", "mean_cosine", "mean_pearson", "mean_lag",
             "subregion_mean_sd", "n_subregions", "subregion_low_confidence"});
    for (const auto& [iso, c] : r.countries) {
        const CountryRecord& rec = r.inputs.dataset.countries.at(iso);
        t.add_row({iso, rec.name,
                   rec.continent ? nlohmann::json(std::string(continent_name(*rec.continent)))
                                 : nlohmann::json(nullptr),
                   c.similarity ? nlohmann::json(c.similarity->mean_cosine) : nullptr,
                   c.similarity ? nlohmann::json(c.similarity->mean_pearson) : nullptr,
                   c.lag ? nlohmann::json(c.lag->mean_lag) : nullptr,
                   c.subregion ? nlohmann::json(c.subregion->mean_sd) : nullptr,
                   c.subregion ? nlohmann::json(c.subregion->n_subregions) : nullptr,
                   c.subregion ? nlohmann::json(c.subregion->low_confidence) : nullptr});
    }
    return t;
}

inline Table category_similarity_table(const AnalysisResults& r) {
    Table t({"category", "mean_cosine", "median_cosine", "sd_cosine", "n_cosine", "mean_pearson",
             "median_pearson", "sd_pearson", "n_pearson"});
    std::map<ActivityCategory, const CategoryAggregate*> pears;
    for (const auto& a : r.pearson_by_category) pears[a.category] = &a;
    for (const auto& a : r.cosine_by_category) {
        const CategoryAggregate* p = pears.count(a.category) ? pears[a.category] : nullptr;
        t.add_row({std::string(category_name(a.category)), a.mean, a.median, a.sd, a.n,
                   p ? nlohmann::json(p->mean) : nullptr, p ? nlohmann::json(p->median) : nullptr,
                   p ? nlohmann::json(p->sd) : nullptr, p ? nlohmann::json(p->n) : nullptr});
    }
    return t;
}

inline Table category_aggregate_table(const std::vector<CategoryAggregate>& aggregates,
                                      const std::string& value_name) {
    Table t({"category", "mean_" + value_name, "median_" + value_name, "sd_" + value_name, "n"});
    for (const auto& a : aggregates)
        t.add_row({std::string(category_name(a.category)), a.mean, a.median, a.sd, a.n});
    return t;
}

inline Table summary_stats_table(const AnalysisResults& r) {
    Table t({"stat", "value", "n"});
    t.add_row({"mean_country_lag", r.mean_country_lag, r.mean_country_lag_n});
    std::size_t with_sim = 0, with_lag = 0, with_sub = 0;
    for (const auto& [iso, c] : r.countries) {
        with_sim += c.similarity ? 1 : 0;
        with_lag += c.lag ? 1 : 0;
        with_sub += c.subregion ? 1 : 0;
    }
    t.add_row({"countries_aligned", static_cast<double>(r.countries.size()), r.countries.size()});
    t.add_row({"countries_with_similarity", static_cast<double>(with_sim), with_sim});
    t.add_row({"countries_with_lag", static_cast<double>(with_lag), with_lag});
    t.add_row({"countries_with_subregion_variation", static_cast<double>(with_sub), with_sub});
    return t;
}

inline Table ranking_table(const std::vector<RankedEntry>& ranking) {
    Table t({"rank", "iso_code", "value"});
    for (std::size_t i = 0; i < ranking.size(); ++i)
        t.add_row({i + 1, ranking[i].iso_code, ranking[i].value});
    return t;
}

inline Table concordance_table(const AnalysisResults& r) {
    Table t({"comparison", "tau", "p", "n", "only_first", "only_second"});
    auto add = [&](const std::string& name, const std::optional<ConcordanceResult>& c) {
        if (!c) return;
        t.add_row({name, c->tau ? nlohmann::json(c->tau->tau) : nullptr,
                   c->tau ? nlohmann::json(c->tau->p_value) : nullptr, c->joined,
                   c->only_a.size(), c->only_b.size()});
    };
    add("mean_cosine_vs_mean_pearson", r.cosine_vs_pearson);
    add("subregion_variation_vs_mean_cosine", r.subregion_vs_similarity);
    return t;
}

inline Table continent_distance_table(const AnalysisResults& r) {
    Table t({"measure", "group", "mean", "median", "pairs"});
    for (const auto& block : r.spatial) {
        for (const auto& row : block.continents.per_continent)
            t.add_row({block.measure, row.group, row.mean, row.median, row.pairs});
        if (block.continents.same_continent) {
            const auto& s = *block.continents.same_continent;
            t.add_row({block.measure, s.group, s.mean, s.median, s.pairs});
        }
        if (block.continents.different_continent) {
            const auto& d = *block.continents.different_continent;
            t.add_row({block.measure, d.group, d.mean, d.median, d.pairs});
        }
    }
    return t;
}

inline Table border_split_table(const AnalysisResults& r) {
    Table t({"measure", "group", "mean", "median", "pairs"});
    for (const auto& block : r.spatial) {
        t.add_row({block.measure, block.borders.border.group, block.borders.border.mean,
                   block.borders.border.median, block.borders.border.pairs});
        t.add_row({block.measure, block.borders.non_border.group, block.borders.non_border.mean,
                   block.borders.non_border.median, block.borders.non_border.pairs});
    }
    return t;
}

inline Table geography_concordance_table(const AnalysisResults& r) {
    Table t({"measure", "tau", "p", "n_countries", "permuted_tau"});
    for (const auto& block : r.spatial) {
        t.add_row({block.measure,
                   block.geography_tau ? nlohmann::json(block.geography_tau->tau) : nullptr,
                   block.geography_tau ? nlohmann::json(block.geography_tau->p_value) : nullptr,
                   block.geography_n, detail::jopt(block.permuted_tau)});
    }
    return t;
}

inline Table embedding_table(const Embedding2D& e) {
    Table t({"iso_code", "x", "y"});
    for (std::size_t i = 0; i < e.labels.size(); ++i)
        t.add_row({e.labels[i], e.coords[i][0], e.coords[i][1]});
    return t;
}

inline Table correlations_table(const AnalysisResults& r) {
    Table t({"measure", "index", "tau", "p", "n", "stars", "insufficient_data"});
    for (const auto& row : r.correlations) {
        t.add_row({row.measure, row.index,
                   row.insufficient_data ? nlohmann::json(nullptr) : nlohmann::json(row.tau),
                   row.insufficient_data ? nlohmann::json(nullptr) : nlohmann::json(row.p), row.n,
                   row.stars, row.insufficient_data});
    }
    return t;
}

inline Table outcomes_table(const AnalysisResults& r) {
    Table t({"outcome", "mean_tau", "n_countries", "n_undefined"});
    for (const auto& o : r.outcomes)
        t.add_row({o.outcome, o.mean_tau, o.n_countries, o.n_undefined});
    return t;
}

inline Table exclusions_table(const AnalysisResults& r) {
    Table t({"iso_code", "scope", "reason"});
    for (const auto& e : r.exclusions) t.add_row({e.iso_code, e.scope, e.reason});
    return t;
}

/// Labeled square matrix, always CSV.
inline void write_distance_matrix(std::ostream& out, const DistanceMatrix& m) {
    std::vector<std::string> header{"iso_code"};
    header.insert(header.end(), m.labels().begin(), m.labels().end());
    csv::write_row(out, header);
    for (std::size_t i = 0; i < m.size(); ++i) {
        csv::write_field(out, m.labels()[i]);
        for (std::size_t j = 0; j < m.size(); ++j) {
            out << ',';
            csv::write_field(out, csv::format_double(m.at(i, j)));
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Plot data
// ---------------------------------------------------------------------------

struct PlotData {
    Table table{std::vector<std::string>{"date", "series", "value", "masked"}};
    std::vector<std::string> absent_series;  // categories with no data in the window
};

/// Long-format per-country curves over the window: the six activity
/// categories (raw, uninverted) plus the stringency index. Masked dates keep
/// their value but carry a flag.
inline PlotData emit_plot_data(const CountryRecord& record, const AnalysisWindow& window,
                               const std::vector<AnalysisWindow>& masks = {}) {
    PlotData out;
    struct SeriesRef {
        std::string name;
        const DailySeries* series;
        bool maskable;
    };
    std::vector<SeriesRef> refs;
    for (ActivityCategory cat : kAllCategories) {
        auto it = record.national.find(cat);
        if (it == record.national.end() || it->second.empty()) {
            out.absent_series.emplace_back(category_name(cat));
            continue;
        }
        refs.push_back({std::string(category_name(cat)), &it->second, true});
    }
    if (!record.stringency.empty()) refs.push_back({"stringency", &record.stringency, false});
    else out.absent_series.emplace_back("stringency");

    for (int i = 0; i < window.days(); ++i) {
        const Date d = window.start + i;
        const bool masked = std::any_of(masks.begin(), masks.end(),
                                        [&](const AnalysisWindow& m) { return m.contains(d); });
        for (const auto& ref : refs) {
            auto v = ref.series->at(d);
            out.table.add_row({d.to_iso(), ref.name, detail::jopt(v), masked && ref.maskable});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

inline nlohmann::json run_manifest(const AnalysisResults& r,
                                   const std::vector<std::string>& artifacts) {
    const RunConfig& c = r.config;
    nlohmann::json config;
    config["window_start"] = c.window.start.to_iso();
    config["window_end"] = c.window.end.to_iso();
    config["paths"] = {{"mobility", c.paths.mobility},
                       {"stringency", c.paths.stringency},
                       {"continents", c.paths.continents},
                       {"country_info", c.paths.country_info},
                       {"neighbors", c.paths.neighbors},
                       {"boundaries", c.paths.boundaries},
                       {"code_map", c.paths.code_map},
                       {"indices_manifest", c.paths.indices_manifest}};
    config["min_coverage"] = c.align.min_coverage;
    config["max_interior_gap"] = c.align.max_interior_gap;
    config["xcorr_threshold"] = c.lag.threshold;
    config["max_lag"] = c.lag.max_lag;
    config["min_overlap"] = c.lag.min_overlap;
    nlohmann::json excluded = nlohmann::json::array();
    for (ActivityCategory cat : c.excluded_from_means)
        excluded.push_back(std::string(category_name(cat)));
    config["excluded_from_means"] = excluded;
    nlohmann::json masks = nlohmann::json::object();
    for (const auto& [iso, windows] : c.masks) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& w : windows) arr.push_back(w.start.to_iso() + ".." + w.end.to_iso());
        masks[iso] = arr;
    }
    config["masks"] = masks;
    config["format"] = std::string(output_format_name(c.format));
    config["perm_seed"] = c.perm_seed;
    config["include_parks_in_vectors"] = c.include_parks_in_vectors;
    config["linkage"] = std::string(linkage_name(c.linkage));
    config["min_join"] = c.min_join;

    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& f : r.inputs.files)
        inputs.push_back({{"path", f.path}, {"checksum_fnv1a64", f.checksum}, {"rows", f.rows}});

    std::map<std::string, std::size_t> exclusion_counts;
    for (const auto& e : r.exclusions) ++exclusion_counts[e.reason];

    std::size_t with_sub = 0;
    for (const auto& [iso, cc] : r.countries) with_sub += cc.subregion ? 1 : 0;

    nlohmann::json manifest;
    manifest["config"] = config;
    manifest["config_hash_fnv1a64"] = hex64(fnv1a64(canonical_config(c)));
    manifest["inputs"] = inputs;
    manifest["counts"] = {{"mobility_countries", r.inputs.mobility_countries},
                          {"stringency_countries", r.inputs.stringency_countries},
                          {"merged_countries", r.inputs.dataset.countries.size()},
                          {"aligned_countries", r.countries.size()},
                          {"countries_with_subregion_variation", with_sub},
                          {"unmatched_mobility", r.inputs.unmatched_mobility.size()},
                          {"unmatched_stringency", r.inputs.unmatched_stringency.size()},
                          {"rows_read", r.inputs.report.rows_read},
                          {"rows_skipped", r.inputs.report.rows_skipped},
                          {"parse_warnings", r.inputs.report.warnings}};
    manifest["exclusion_counts"] = exclusion_counts;
    manifest["embedding_features"] = r.embedding_features;
    manifest["dendrogram_features"] = r.dendrogram_features;
    manifest["artifacts"] = artifacts;
    manifest["warnings"] = r.inputs.report.messages;
    return manifest;
}

// ---------------------------------------------------------------------------
// Artifact emission
// ---------------------------------------------------------------------------

/// Writes artifacts into out_dir and finishes with the run manifest. An
/// empty `only` set means everything; otherwise only stems in the set are
/// written (the manifest always is). Returns the written file names.
inline std::vector<std::string> write_artifacts(const AnalysisResults& r,
                                                const std::set<std::string>& only = {}) {
    namespace fs = std::filesystem;
    const fs::path dir(r.config.out_dir);
    fs::create_directories(dir);
    const char* ext = r.config.format == OutputFormat::Csv ? ".csv" : ".json";

    std::vector<std::string> written;
    auto wanted = [&](const std::string& stem) { return only.empty() || only.contains(stem); };
    auto emit_text = [&](const std::string& stem, const std::string& name,
                         const std::string& text) {
        if (!wanted(stem)) return;
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw DataError("cannot write artifact: " + (dir / name).string());
        out << text;
        written.push_back(name);
    };
    auto emit = [&](const std::string& stem, const Table& table) {
        if (!wanted(stem)) return;
        std::ostringstream os;
        table.write(os, r.config.format);
        emit_text(stem, stem + ext, os.str());
    };

    emit("country_measures", country_measures_table(r));
    emit("country_summary", country_summary_table(r));
    emit("category_similarity", category_similarity_table(r));
    emit("category_lag", category_aggregate_table(r.lag_by_category, "lag"));
    emit("category_subregion_sd", category_aggregate_table(r.subregion_sd_by_category, "sd"));
    emit("summary_stats", summary_stats_table(r));
    for (const auto& [name, ranking] : r.rankings) emit("ranking_" + name, ranking_table(ranking));
    emit("concordance", concordance_table(r));
    emit("continent_distance", continent_distance_table(r));
    emit("border_split", border_split_table(r));
    emit("geography_concordance", geography_concordance_table(r));
    for (const auto& block : r.spatial) {
        if (!block.distances) continue;
        std::ostringstream os;
        write_distance_matrix(os, *block.distances);
        emit_text("distances", "distance_" + block.measure + ".csv", os.str());
    }
    if (r.embedding) {
        emit("embedding", embedding_table(*r.embedding));
        nlohmann::json meta;
        meta["eigenvalues"] = {r.embedding->eigenvalues[0], r.embedding->eigenvalues[1]};
        meta["strain"] = r.embedding->strain;
        meta["negative_eigenvalue_floored"] = r.embedding->floored;
        meta["features"] = r.embedding_features;
        meta["dropped"] = r.embedding_dropped;
        emit_text("embedding", "embedding_meta.json", meta.dump(2) + "\n");
    }
    if (r.dendrogram) {
        emit_text("dendrogram", "dendrogram.newick", to_newick(*r.dendrogram) + "\n");
        nlohmann::json tree;
        tree["features"] = r.dendrogram_features;
        tree["linkage"] = std::string(linkage_name(r.config.linkage));
        tree["leaves"] = r.dendrogram->leaves;
        tree["dropped"] = r.dendrogram_dropped;
        tree["tree"] = to_tree_json(*r.dendrogram);
        emit_text("dendrogram", "dendrogram.json", tree.dump(2) + "\n");
    }
    emit("correlations", correlations_table(r));
    emit("outcome_comparison", outcomes_table(r));
    emit("exclusions", exclusions_table(r));

    {
        const std::string name = "run_manifest.json";
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw DataError("cannot write artifact: " + (dir / name).string());
        out << run_manifest(r, written).dump(2) << '\n';
        written.push_back(name);
    }
    return written;
}

/// Every artifact; the report-all subcommand.
inline std::vector<std::string> write_all_artifacts(const AnalysisResults& r) {
    return write_artifacts(r);
}

} // namespace mobres
