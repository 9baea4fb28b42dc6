#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mobres/spatial.hpp"
#include "mobres/types.hpp"

namespace mobres {

// ---------------------------------------------------------------------------
// Classical multidimensional scaling
// ---------------------------------------------------------------------------

struct Embedding2D {
    std::vector<std::string> labels;
    std::vector<std::array<double, 2>> coords;  // one row per label
    std::array<double, 2> eigenvalues{0, 0};    // descending
    double strain = 0;       // ||B - X X^T||_F / ||B||_F
    bool floored = false;    // a slightly negative eigenvalue was clamped to 0
};

namespace detail {

/// Largest-in-magnitude eigenpair of the symmetric matrix `m` (row-major
/// n*n) by power iteration with orthogonalization against `held`, shifted so
/// the algebraically largest eigenvalue dominates.
struct EigPair {
    double value = 0;
    std::vector<double> vector;
};

/// SplitMix64 bit mixer; gives a portable, deterministic start vector with
/// no structure a data matrix could be orthogonal to by coincidence.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline EigPair top_eigenpair(const std::vector<double>& m, std::size_t n,
                             const std::vector<std::vector<double>>& held, double shift,
                             double tol, std::size_t max_iter) {
    std::vector<double> v(n), w(n);

    auto orthogonalize = [&](std::vector<double>& x) {
        for (const auto& h : held) {
            double dot = 0;
            for (std::size_t i = 0; i < n; ++i) dot += x[i] * h[i];
            for (std::size_t i = 0; i < n; ++i) x[i] -= dot * h[i];
        }
    };
    auto normalize = [&](std::vector<double>& x) {
        double norm = 0;
        for (double xi : x) norm += xi * xi;
        norm = std::sqrt(norm);
        if (norm == 0) throw std::runtime_error("eigensolver: vector collapsed to zero");
        for (double& xi : x) xi /= norm;
        return norm;
    };

    // A start vector lying exactly in the held span projects to zero; retry
    // with fresh bits instead of failing (the remaining subspace is nonempty
    // whenever the caller still asks for an eigenpair).
    for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt == 16)
            throw std::runtime_error("eigensolver: no start vector outside the held span");
        for (std::size_t i = 0; i < n; ++i)
            v[i] = 0.5 + static_cast<double>(mix64((attempt << 32) + i) >> 11) * 0x1.0p-53;
        orthogonalize(v);
        double norm = 0;
        for (double xi : v) norm += xi * xi;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (double& xi : v) xi /= norm;
        break;
    }
    double lambda = 0;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // w = (M + shift I) v
        for (std::size_t i = 0; i < n; ++i) {
            double acc = shift * v[i];
            const double* row = m.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) acc += row[j] * v[j];
            w[i] = acc;
        }
        orthogonalize(w);
        const double norm = normalize(w);
        double delta = 0;
        for (std::size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(w[i] - v[i]));
        v.swap(w);
        lambda = norm - shift;
        if (delta < tol) break;
    }
    // Rayleigh quotient for the unshifted matrix; more accurate than the
    // iterate norm.
    double num = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0;
        const double* row = m.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * v[j];
        num += v[i] * acc;
    }
    lambda = num;
    return {lambda, std::move(v)};
}

} // namespace detail

/// Classical (Torgerson) scaling of a distance matrix to two dimensions.
///
/// The doubly centered Gram matrix B = -1/2 J D^2 J always contains 0 in its
/// spectrum (J annihilates the constant vector) and has nonnegative trace,
/// so two algebraically nonnegative eigenvalues exist for any valid input;
/// failure to find them indicates a numerical problem and throws. Slightly
/// negative computed eigenvalues (within -1e-9 * |lambda_max|) are floored
/// to zero and flagged.
inline Embedding2D classical_mds(const DistanceMatrix& dist, double tol = 1e-10,
                                 std::size_t max_iter = 10000) {
    const std::size_t n = dist.size();
    if (n < 3) throw std::invalid_argument("classical_mds: need at least 3 points");

    // B = -1/2 J D^2 J with J = I - 11^T/n, computed by centering rows then
    // columns of -D^2/2.
    std::vector<double> b(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            b[i * n + j] = -0.5 * dist.at(i, j) * dist.at(i, j);
    std::vector<double> row_mean(n, 0), col_mean(n, 0);
    double grand = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            row_mean[i] += b[i * n + j];
            col_mean[j] += b[i * n + j];
            grand += b[i * n + j];
        }
    for (auto& x : row_mean) x /= static_cast<double>(n);
    for (auto& x : col_mean) x /= static_cast<double>(n);
    grand /= static_cast<double>(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            b[i * n + j] += grand - row_mean[i] - col_mean[j];

    double b_frob = 0;
    for (double x : b) b_frob += x * x;
    b_frob = std::sqrt(b_frob);

    Embedding2D out;
    out.labels = dist.labels();
    out.coords.assign(n, {0.0, 0.0});
    if (b_frob == 0) return out;  // all points coincide

    // Shift by the Gershgorin bound so the algebraically largest eigenvalue
    // of B becomes the dominant eigenvalue of B + sigma I.
    double sigma = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0;
        for (std::size_t j = 0; j < n; ++j) row_sum += std::abs(b[i * n + j]);
        sigma = std::max(sigma, row_sum);
    }

    // The constant vector spans B's built-in null direction (J annihilates
    // it); holding it out keeps deflated iterations from drifting there.
    std::vector<std::vector<double>> held;
    held.emplace_back(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::array<detail::EigPair, 2> pairs;
    for (int k = 0; k < 2; ++k) {
        pairs[k] = detail::top_eigenpair(b, n, held, sigma, tol, max_iter);
        held.push_back(pairs[k].vector);
    }

    // Rayleigh-Ritz refinement on span{v1, v2}: power iteration stalls on the
    // rotation inside the plane when the top eigenvalues nearly coincide, and
    // the 2x2 projected problem repairs exactly that.
    {
        auto bmul = [&](const std::vector<double>& x) {
            std::vector<double> y(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double* row = b.data() + i * n;
                double acc = 0;
                for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
                y[i] = acc;
            }
            return y;
        };
        auto dot = [&](const std::vector<double>& x, const std::vector<double>& y) {
            double acc = 0;
            for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
            return acc;
        };
        const std::vector<double> ba = bmul(pairs[0].vector);
        const std::vector<double> bb = bmul(pairs[1].vector);
        const double g11 = dot(pairs[0].vector, ba);
        const double g12 = dot(pairs[0].vector, bb);
        const double g22 = dot(pairs[1].vector, bb);
        const double theta = 0.5 * std::atan2(2.0 * g12, g11 - g22);
        const double c = std::cos(theta), s = std::sin(theta);
        std::vector<double> u1(n), u2(n);
        for (std::size_t i = 0; i < n; ++i) {
            u1[i] = c * pairs[0].vector[i] + s * pairs[1].vector[i];
            u2[i] = -s * pairs[0].vector[i] + c * pairs[1].vector[i];
        }
        pairs[0] = {c * c * g11 + 2.0 * c * s * g12 + s * s * g22, std::move(u1)};
        pairs[1] = {s * s * g11 - 2.0 * c * s * g12 + c * c * g22, std::move(u2)};
    }
    if (pairs[0].value < pairs[1].value) std::swap(pairs[0], pairs[1]);

    const double floor_band = 1e-9 * std::max(1.0, std::abs(pairs[0].value));
    for (auto& p : pairs) {
        if (p.value < 0) {
            if (p.value < -floor_band)
                throw std::runtime_error(
                    "classical_mds: eigensolver returned a significantly negative eigenvalue; "
                    "input is not embeddable");
            p.value = 0;
            out.floored = true;
        }
    }

    out.eigenvalues = {pairs[0].value, pairs[1].value};
    for (std::size_t i = 0; i < n; ++i)
        out.coords[i] = {pairs[0].vector[i] * std::sqrt(pairs[0].value),
                         pairs[1].vector[i] * std::sqrt(pairs[1].value)};

    // Strain against the rank-2 reconstruction.
    double resid = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double recon = out.coords[i][0] * out.coords[j][0] +
                                 out.coords[i][1] * out.coords[j][1];
            const double r = b[i * n + j] - recon;
            resid += r * r;
        }
    out.strain = std::sqrt(resid) / b_frob;

    // Sign convention: first nonzero coordinate of each axis is positive.
    for (int k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            if (out.coords[i][k] != 0) {
                if (out.coords[i][k] < 0)
                    for (std::size_t r = 0; r < n; ++r) out.coords[r][k] = -out.coords[r][k];
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Agglomerative clustering
// ---------------------------------------------------------------------------

enum class LinkageMethod { Average, Single, Complete };

inline constexpr std::string_view linkage_name(LinkageMethod m) {
    switch (m) {
        case LinkageMethod::Average: return "average";
        case LinkageMethod::Single: return "single";
        case LinkageMethod::Complete: return "complete";
    }
    return "?";
}

struct Merge {
    // Node ids: 0..n-1 are leaves; n+k is the cluster created by merge k.
    std::size_t a = 0;
    std::size_t b = 0;
    double height = 0;
};

struct Dendrogram {
    std::vector<std::string> leaves;
    std::vector<Merge> merges;  // exactly leaves.size() - 1, nondecreasing height
};

/// Agglomerative clustering with Lance-Williams updates. Ties on merge
/// distance are broken by the lexicographically smallest pair of minimum
/// leaf labels, which fixes the merge order independent of input order.
inline Dendrogram agglomerative_cluster(const DistanceMatrix& dist,
                                        LinkageMethod method = LinkageMethod::Average) {
    const std::size_t n = dist.size();
    if (n < 2) throw std::invalid_argument("agglomerative_cluster: need at least 2 points");

    Dendrogram out;
    out.leaves = dist.labels();

    struct Cluster {
        std::size_t id;          // node id in the merge tree
        std::size_t size;
        std::string min_label;   // smallest leaf label, for tie-breaking
    };
    std::vector<Cluster> active;
    active.reserve(n);
    for (std::size_t i = 0; i < n; ++i) active.push_back({i, 1, out.leaves[i]});

    // Distances between active clusters, indexed by position in `active`.
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i][j] = dist.at(i, j);

    std::size_t next_id = n;
    while (active.size() > 1) {
        std::size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        auto key = [&](std::size_t i, std::size_t j) {
            return active[i].min_label <= active[j].min_label
                       ? std::pair(active[i].min_label, active[j].min_label)
                       : std::pair(active[j].min_label, active[i].min_label);
        };
        for (std::size_t i = 0; i < active.size(); ++i) {
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                if (d[i][j] < best || (d[i][j] == best && key(i, j) < key(bi, bj))) {
                    best = d[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }

        const std::size_t sa = active[bi].size, sb = active[bj].size;
        out.merges.push_back({std::min(active[bi].id, active[bj].id),
                              std::max(active[bi].id, active[bj].id), best});

        // Lance-Williams update for the merged cluster, written into slot bi.
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (k == bi || k == bj) continue;
            double nd = 0;
            switch (method) {
                case LinkageMethod::Average:
                    nd = (static_cast<double>(sa) * d[bi][k] + static_cast<double>(sb) * d[bj][k]) /
                         static_cast<double>(sa + sb);
                    break;
                case LinkageMethod::Single:
                    nd = std::min(d[bi][k], d[bj][k]);
                    break;
                case LinkageMethod::Complete:
                    nd = std::max(d[bi][k], d[bj][k]);
                    break;
            }
            d[bi][k] = d[k][bi] = nd;
        }
        active[bi] = {next_id++, sa + sb,
                      std::min(active[bi].min_label, active[bj].min_label)};

        // Remove slot bj by swapping in the last slot.
        const std::size_t last = active.size() - 1;
        if (bj != last) {
            active[bj] = active[last];
            for (std::size_t k = 0; k < active.size(); ++k) {
                d[bj][k] = d[last][k];
                d[k][bj] = d[k][last];
            }
            d[bj][bj] = 0;
        }
        active.pop_back();
    }
    return out;
}

namespace detail {

struct TreeNode {
    std::string label;   // leaves only
    double height = 0;   // merge height; 0 for leaves
    std::vector<std::size_t> children;
    std::string min_label;
};

inline std::vector<TreeNode> build_tree(const Dendrogram& dg) {
    const std::size_t n = dg.leaves.size();
    std::vector<TreeNode> nodes(n + dg.merges.size());
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i].label = dg.leaves[i];
        nodes[i].min_label = dg.leaves[i];
    }
    for (std::size_t k = 0; k < dg.merges.size(); ++k) {
        TreeNode& t = nodes[n + k];
        t.height = dg.merges[k].height;
        std::size_t a = dg.merges[k].a, b = dg.merges[k].b;
        // Children ordered by smallest contained leaf label.
        if (nodes[b].min_label < nodes[a].min_label) std::swap(a, b);
        t.children = {a, b};
        t.min_label = nodes[a].min_label;
    }
    return nodes;
}

} // namespace detail

/// Newick serialization with ultrametric branch lengths: every leaf sits at
/// depth height/2 of the root merge, so an edge's length is the difference
/// of the parent's and child's half-heights.
inline std::string to_newick(const Dendrogram& dg) {
    if (dg.leaves.empty()) throw std::invalid_argument("to_newick: empty dendrogram");
    if (dg.leaves.size() == 1) return dg.leaves.front() + ":0;";
    const auto nodes = detail::build_tree(dg);

    std::ostringstream os;
    os.precision(17);
    auto emit = [&](auto&& self, std::size_t id, double parent_half, bool root) -> void {
        const auto& t = nodes[id];
        const double half = t.children.empty() ? 0.0 : t.height / 2.0;
        if (t.children.empty()) {
            os << t.label;
        } else {
            os << '(';
            self(self, t.children[0], half, false);
            os << ',';
            self(self, t.children[1], half, false);
            os << ')';
        }
        if (!root) os << ':' << (parent_half - half);
    };
    emit(emit, nodes.size() - 1, 0.0, true);
    os << ';';
    return os.str();
}

/// Nested-object JSON form: leaves are {"label": ...}, internal nodes are
/// {"height": h, "children": [...]} with children ordered by smallest leaf
/// label.
inline nlohmann::json to_tree_json(const Dendrogram& dg) {
    if (dg.leaves.empty()) throw std::invalid_argument("to_tree_json: empty dendrogram");
    const auto nodes = detail::build_tree(dg);
    auto emit = [&](auto&& self, std::size_t id) -> nlohmann::json {
        const auto& t = nodes[id];
        if (t.children.empty()) return nlohmann::json{{"label", t.label}};
        nlohmann::json j;
        j["height"] = t.height;
        j["children"] = nlohmann::json::array({self(self, t.children[0]), self(self, t.children[1])});
        return j;
    };
    if (dg.leaves.size() == 1) return nlohmann::json{{"label", dg.leaves.front()}};
    return emit(emit, nodes.size() - 1);
}

} // namespace mobres
