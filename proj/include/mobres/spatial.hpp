#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mobres/rankstats.hpp"
#include "mobres/stats.hpp"
#include "mobres/types.hpp"

namespace mobres {

// ---------------------------------------------------------------------------
// Distance matrices
// ---------------------------------------------------------------------------

/// Labeled symmetric nonnegative matrix with zero diagonal.
class DistanceMatrix {
public:
    DistanceMatrix(std::vector<std::string> labels, std::vector<double> values)
        : labels_(std::move(labels)), d_(std::move(values)) {
        const std::size_t n = labels_.size();
        if (d_.size() != n * n) throw std::invalid_argument("distance matrix: bad size");
        for (std::size_t i = 0; i < n; ++i) {
            if (d_[i * n + i] != 0.0)
                throw std::invalid_argument("distance matrix: nonzero diagonal");
            for (std::size_t j = i + 1; j < n; ++j) {
                if (d_[i * n + j] != d_[j * n + i])
                    throw std::invalid_argument("distance matrix: not symmetric");
                if (d_[i * n + j] < 0.0)
                    throw std::invalid_argument("distance matrix: negative entry");
            }
        }
    }

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    double at(std::size_t i, std::size_t j) const { return d_[i * size() + j]; }

    /// Row-major strictly-upper-triangle entries, (0,1), (0,2), ...
    std::vector<double> upper_triangle() const {
        std::vector<double> out;
        out.reserve(size() * (size() - 1) / 2);
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = i + 1; j < size(); ++j) out.push_back(at(i, j));
        return out;
    }

    /// Builder enforcing symmetry by construction.
    template <typename PairwiseFn>
    static DistanceMatrix build(std::vector<std::string> labels, PairwiseFn&& distance) {
        const std::size_t n = labels.size();
        std::vector<double> d(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                d[i * n + j] = d[j * n + i] = distance(i, j);
        return DistanceMatrix(std::move(labels), std::move(d));
    }

private:
    std::vector<std::string> labels_;
    std::vector<double> d_;  // n*n row-major
};

enum class ResponseMeasure { Cosine, Lag, SubregionSd };

inline constexpr std::string_view response_measure_name(ResponseMeasure m) {
    switch (m) {
        case ResponseMeasure::Cosine: return "cosine";
        case ResponseMeasure::Lag: return "lag";
        case ResponseMeasure::SubregionSd: return "subregion_sd";
    }
    return "?";
}

/// Per-category values of one measure for one country, a point in 5- or
/// 6-dimensional response space. Countries missing a category are excluded
/// rather than imputed.
struct CountryResponseVector {
    std::string iso_code;
    ResponseMeasure measure{};
    std::vector<double> values;
};

/// Builds uniform-dimension response vectors from per-country per-category
/// values; countries lacking any requested category are dropped and
/// reported.
inline std::pair<std::vector<CountryResponseVector>, std::vector<std::string>>
build_response_vectors(const std::map<std::string, std::map<ActivityCategory, double>>& values,
                       ResponseMeasure measure, bool include_parks) {
    std::vector<ActivityCategory> dims;
    for (ActivityCategory c : kAllCategories)
        if (include_parks || c != ActivityCategory::Parks) dims.push_back(c);

    std::vector<CountryResponseVector> vectors;
    std::vector<std::string> dropped;
    for (const auto& [iso, per_cat] : values) {
        CountryResponseVector v{iso, measure, {}};
        v.values.reserve(dims.size());
        bool complete = true;
        for (ActivityCategory c : dims) {
            auto it = per_cat.find(c);
            if (it == per_cat.end()) {
                complete = false;
                break;
            }
            v.values.push_back(it->second);
        }
        if (complete) vectors.push_back(std::move(v));
        else dropped.push_back(iso);
    }
    return {std::move(vectors), std::move(dropped)};
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("euclidean: dimension mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

/// Pairwise Euclidean distances between country response vectors.
inline DistanceMatrix response_distance_matrix(std::span<const CountryResponseVector> vectors) {
    if (vectors.size() < 2)
        throw std::invalid_argument("response distance matrix: need >= 2 vectors");
    const std::size_t dim = vectors.front().values.size();
    std::vector<std::string> labels;
    labels.reserve(vectors.size());
    for (const auto& v : vectors) {
        if (v.values.size() != dim)
            throw std::invalid_argument("response distance matrix: dimension mismatch");
        labels.push_back(v.iso_code);
    }
    return DistanceMatrix::build(std::move(labels), [&](std::size_t i, std::size_t j) {
        return euclidean(vectors[i].values, vectors[j].values);
    });
}

/// Z-scores each dimension across vectors in place; dimensions with zero
/// spread are left centered at 0.
inline void standardize_dimensions(std::span<CountryResponseVector> vectors) {
    if (vectors.empty()) return;
    const std::size_t dim = vectors.front().values.size();
    for (std::size_t k = 0; k < dim; ++k) {
        std::vector<double> column;
        column.reserve(vectors.size());
        for (const auto& v : vectors) column.push_back(v.values[k]);
        const double m = stats::mean(column);
        const double sd = stats::stddev(column);
        for (auto& v : vectors) v.values[k] = sd > 0 ? (v.values[k] - m) / sd : 0.0;
    }
}

// ---------------------------------------------------------------------------
// Geography
// ---------------------------------------------------------------------------

inline constexpr double kEarthRadiusKm = 6371.0088;

struct GeoPoint {
    double lon = 0;  // degrees
    double lat = 0;
};

/// Exterior rings only; enough for vertex-based minimum distances.
struct CountryGeometry {
    std::vector<std::vector<GeoPoint>> rings;

    bool empty() const {
        for (const auto& r : rings)
            if (!r.empty()) return false;
        return true;
    }
};

inline double haversine_km(GeoPoint a, GeoPoint b) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double dlat = (b.lat - a.lat) * deg;
    const double dlon = (b.lon - a.lon) * deg;
    const double s1 = std::sin(dlat / 2), s2 = std::sin(dlon / 2);
    const double h = s1 * s1 + std::cos(a.lat * deg) * std::cos(b.lat * deg) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Even-odd ray cast in lon/lat coordinates. Adequate for country outlines
/// away from the antimeridian.
inline bool point_in_ring(GeoPoint p, std::span<const GeoPoint> ring) {
    bool inside = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const GeoPoint a = ring[i], b = ring[j];
        if ((a.lat > p.lat) != (b.lat > p.lat) &&
            p.lon < (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon)
            inside = !inside;
    }
    return inside;
}

inline bool contains_point(const CountryGeometry& g, GeoPoint p) {
    for (const auto& ring : g.rings)
        if (ring.size() >= 3 && point_in_ring(p, ring)) return true;
    return false;
}

/// Shortest great-circle distance between two country boundaries,
/// approximated by the minimum vertex-pair haversine distance; zero when the
/// boundaries share a vertex or one contains a vertex of the other.
inline double min_great_circle_distance(const CountryGeometry& a, const CountryGeometry& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("min_great_circle_distance: empty geometry");
    for (const auto& ring : b.rings)
        for (const GeoPoint& p : ring)
            if (contains_point(a, p)) return 0.0;
    for (const auto& ring : a.rings)
        for (const GeoPoint& p : ring)
            if (contains_point(b, p)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& ra : a.rings)
        for (const GeoPoint& pa : ra)
            for (const auto& rb : b.rings)
                for (const GeoPoint& pb : rb) best = std::min(best, haversine_km(pa, pb));
    return best;
}

/// GeoJSON FeatureCollection with one feature per country; the country code
/// is read from properties.iso_code (fallback: the feature id). Supports
/// Polygon and MultiPolygon geometries; holes are ignored.
inline std::map<std::string, CountryGeometry> load_boundaries(std::istream& in) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("boundaries geojson: parse failure: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features"))
        throw DataError("boundaries geojson: expected a FeatureCollection");

    auto read_ring = [](const nlohmann::json& coords) {
        std::vector<GeoPoint> ring;
        for (const auto& pt : coords) {
            if (!pt.is_array() || pt.size() < 2)
                throw DataError("boundaries geojson: bad coordinate");
            ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
        }
        return ring;
    };

    std::map<std::string, CountryGeometry> out;
    for (const auto& feature : doc["features"]) {
        std::string iso;
        if (feature.contains("properties") && feature["properties"].contains("iso_code"))
            iso = feature["properties"]["iso_code"].get<std::string>();
        else if (feature.contains("id") && feature["id"].is_string())
            iso = feature["id"].get<std::string>();
        if (iso.empty())
            throw DataError("boundaries geojson: feature without iso_code");

        const auto& geom = feature.at("geometry");
        const std::string type = geom.value("type", "");
        CountryGeometry& g = out[iso];
        if (type == "Polygon") {
            if (!geom["coordinates"].empty()) g.rings.push_back(read_ring(geom["coordinates"][0]));
        } else if (type == "MultiPolygon") {
            for (const auto& poly : geom["coordinates"])
                if (!poly.empty()) g.rings.push_back(read_ring(poly[0]));
        } else {
            throw DataError("boundaries geojson: unsupported geometry type '" + type + "' for " +
                            iso);
        }
    }
    return out;
}

/// Minimum-vertex-distance matrix over the given labels; every label must
/// have a geometry.
inline DistanceMatrix geographic_distance_matrix(
    const std::map<std::string, CountryGeometry>& geometries, std::vector<std::string> labels) {
    std::vector<const CountryGeometry*> geoms;
    geoms.reserve(labels.size());
    for (const auto& iso : labels) {
        auto it = geometries.find(iso);
        if (it == geometries.end())
            throw DataError("geographic distance: no boundary geometry for " + iso);
        geoms.push_back(&it->second);
    }
    return DistanceMatrix::build(std::move(labels), [&](std::size_t i, std::size_t j) {
        return min_great_circle_distance(*geoms[i], *geoms[j]);
    });
}

// ---------------------------------------------------------------------------
// Aggregate comparisons
// ---------------------------------------------------------------------------

struct DistanceSummaryRow {
    std::string group;
    double mean = 0;
    double median = 0;
    std::size_t pairs = 0;
};

struct ContinentSummary {
    std::vector<DistanceSummaryRow> per_continent;
    std::optional<DistanceSummaryRow> same_continent;
    std::optional<DistanceSummaryRow> different_continent;
    std::vector<std::string> omitted_continents;  // fewer than 2 countries
    std::vector<std::string> unassigned;          // labels without a continent
};

/// Mean/median pairwise distance within each continent plus overall
/// same-continent vs different-continent rows.
inline ContinentSummary continent_summary(const DistanceMatrix& dist,
                                          const std::map<std::string, Continent>& continents) {
    ContinentSummary out;
    const auto& labels = dist.labels();
    std::vector<std::optional<Continent>> assignment(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = continents.find(labels[i]);
        if (it == continents.end()) out.unassigned.push_back(labels[i]);
        else assignment[i] = it->second;
    }

    std::map<Continent, std::vector<double>> within;
    std::vector<double> same, different;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!assignment[i]) continue;
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            if (!assignment[j]) continue;
            const double d = dist.at(i, j);
            if (*assignment[i] == *assignment[j]) {
                within[*assignment[i]].push_back(d);
                same.push_back(d);
            } else {
                different.push_back(d);
            }
        }
    }

    for (Continent c : kAllContinents) {
        auto it = within.find(c);
        std::size_t members = 0;
        for (const auto& a : assignment)
            if (a && *a == c) ++members;
        if (members == 0) continue;
        if (members < 2) {
            out.omitted_continents.emplace_back(continent_name(c));
            continue;
        }
        const auto& v = it->second;
        out.per_continent.push_back(
            {std::string(continent_name(c)), stats::mean(v), stats::median(v), v.size()});
    }
    if (!same.empty())
        out.same_continent = {"same_continent", stats::mean(same), stats::median(same), same.size()};
    if (!different.empty())
        out.different_continent = {"different_continent", stats::mean(different),
                                   stats::median(different), different.size()};
    return out;
}

/// Rank concordance between two distance matrices over the same label set,
/// computed on the flattened upper triangles. The matrices are re-aligned to
/// a common label order first.
inline std::optional<TauResult> geography_concordance(const DistanceMatrix& response,
                                                      const DistanceMatrix& geographic) {
    const auto& la = response.labels();
    if (std::set<std::string>(la.begin(), la.end()) !=
        std::set<std::string>(geographic.labels().begin(), geographic.labels().end()))
        throw std::invalid_argument("geography_concordance: label sets differ");

    std::map<std::string, std::size_t> geo_index;
    for (std::size_t i = 0; i < geographic.labels().size(); ++i)
        geo_index[geographic.labels()[i]] = i;

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < la.size(); ++i) {
        for (std::size_t j = i + 1; j < la.size(); ++j) {
            xs.push_back(response.at(i, j));
            ys.push_back(geographic.at(geo_index[la[i]], geo_index[la[j]]));
        }
    }
    return kendall_tau_b(xs, ys);
}

struct BorderSplit {
    DistanceSummaryRow border{"border", 0, 0, 0};
    DistanceSummaryRow non_border{"non_border", 0, 0, 0};
};

/// Splits pairwise distances into border / non-border pairs using the
/// neighbor table.
inline BorderSplit border_distance_split(const DistanceMatrix& dist,
                                         const std::map<std::string, std::set<std::string>>& neighbors) {
    std::vector<double> border, non_border;
    const auto& labels = dist.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = neighbors.find(labels[i]);
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            const bool adjacent = it != neighbors.end() && it->second.contains(labels[j]);
            (adjacent ? border : non_border).push_back(dist.at(i, j));
        }
    }
    BorderSplit out;
    if (!border.empty())
        out.border = {"border", stats::mean(border), stats::median(border), border.size()};
    if (!non_border.empty())
        out.non_border = {"non_border", stats::mean(non_border), stats::median(non_border),
                          non_border.size()};
    return out;
}

} // namespace mobres
