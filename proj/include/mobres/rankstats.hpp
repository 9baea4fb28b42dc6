#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mobres {

struct TauResult {
    double tau = 0;      // in [-1,1]
    double p_value = 1;  // two-sided
    std::size_t n = 0;
    std::int64_t concordant = 0;
    std::int64_t discordant = 0;
    std::int64_t tied_x = 0;  // tied in x only
    std::int64_t tied_y = 0;  // tied in y only
    std::int64_t tied_both = 0;
    bool exact_p = false;  // permutation enumeration rather than normal approximation
};

namespace detail {

struct PairCounts {
    std::int64_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, tied_both = 0;
    std::int64_t s() const { return concordant - discordant; }
};

inline PairCounts count_pairs(std::span<const double> x, std::span<const double> y) {
    PairCounts c;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[j] - x[i], dy = y[j] - y[i];
            if (dx == 0 && dy == 0) ++c.tied_both;
            else if (dx == 0) ++c.tied_x;
            else if (dy == 0) ++c.tied_y;
            else if (dx * dy > 0) ++c.concordant;
            else ++c.discordant;
        }
    }
    return c;
}

inline std::vector<std::int64_t> tie_group_sizes(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    std::vector<std::int64_t> groups;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        if (j - i > 1) groups.push_back(static_cast<std::int64_t>(j - i));
        i = j;
    }
    return groups;
}

/// Tie-corrected variance of S = C - D under the null (Kendall 1970 form,
/// the same expression scipy uses for its asymptotic tau-b test).
inline double tau_s_variance(std::size_t n_, std::span<const double> x,
                             std::span<const double> y) {
    const double n = static_cast<double>(n_);
    auto tx = tie_group_sizes(x);
    auto ty = tie_group_sizes(y);
    auto sum = [](const std::vector<std::int64_t>& g, auto&& f) {
        double acc = 0;
        for (std::int64_t t : g) acc += f(static_cast<double>(t));
        return acc;
    };
    const double vt = sum(tx, [](double t) { return t * (t - 1) * (2 * t + 5); });
    const double vu = sum(ty, [](double t) { return t * (t - 1) * (2 * t + 5); });
    const double t1 = sum(tx, [](double t) { return t * (t - 1) * (t - 2); });
    const double u1 = sum(ty, [](double t) { return t * (t - 1) * (t - 2); });
    const double t2 = sum(tx, [](double t) { return t * (t - 1); });
    const double u2 = sum(ty, [](double t) { return t * (t - 1); });
    return (n * (n - 1) * (2 * n + 5) - vt - vu) / 18.0 +
           t1 * u1 / (9.0 * n * (n - 1) * (n - 2)) + t2 * u2 / (2.0 * n * (n - 1));
}

/// Exact two-sided p: the fraction of distinct arrangements of y with
/// |C - D| at least as large as observed. Feasible for n <= 10.
inline double exact_p_value(std::span<const double> x, std::vector<double> y,
                            std::int64_t s_observed) {
    std::sort(y.begin(), y.end());
    const std::int64_t target = std::abs(s_observed);
    std::uint64_t total = 0, extreme = 0;
    do {
        ++total;
        if (std::abs(count_pairs(x, y).s()) >= target) ++extreme;
    } while (std::next_permutation(y.begin(), y.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

} // namespace detail

inline constexpr std::size_t kExactTauLimit = 10;

/// Kendall tau-b with tie correction in numerator and denominator. The
/// two-sided p-value comes from exhaustive permutation enumeration for
/// n <= 10 and from the tie-corrected normal approximation otherwise.
/// Undefined (nullopt) when either vector is fully tied or n < 3.
inline std::optional<TauResult> kendall_tau_b(std::span<const double> x,
                                              std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("kendall_tau_b: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) return std::nullopt;

    const detail::PairCounts c = detail::count_pairs(x, y);
    const std::int64_t n0 = static_cast<std::int64_t>(n) * (static_cast<std::int64_t>(n) - 1) / 2;
    std::int64_t n1 = 0, n2 = 0;  // tied pairs per side
    for (std::int64_t t : detail::tie_group_sizes(x)) n1 += t * (t - 1) / 2;
    for (std::int64_t t : detail::tie_group_sizes(y)) n2 += t * (t - 1) / 2;
    if (n0 == n1 || n0 == n2) return std::nullopt;  // a side is fully tied

    TauResult result;
    result.n = n;
    result.concordant = c.concordant;
    result.discordant = c.discordant;
    result.tied_x = c.tied_x;
    result.tied_y = c.tied_y;
    result.tied_both = c.tied_both;
    result.tau = static_cast<double>(c.s()) /
                 std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));

    if (n <= kExactTauLimit) {
        result.p_value = detail::exact_p_value(x, std::vector<double>(y.begin(), y.end()), c.s());
        result.exact_p = true;
    } else {
        const double var = detail::tau_s_variance(n, x, y);
        const double z = static_cast<double>(c.s()) / std::sqrt(var);
        result.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Country ranking and concordance
// ---------------------------------------------------------------------------

/// One scalar per country for a named measure.
struct MeasureTable {
    std::string name;
    std::map<std::string, double> values;  // iso_code -> value
};

enum class RankOrder { Descending, Ascending };

struct RankedEntry {
    std::string iso_code;
    double value = 0;
};

/// Similarity-style measures rank descending (most concordant first); lag
/// ranks ascending (largest policy lead first). Ties break alphabetically.
inline std::vector<RankedEntry> rank_countries(const MeasureTable& table, RankOrder order) {
    std::vector<RankedEntry> out;
    out.reserve(table.values.size());
    for (const auto& [iso, v] : table.values) out.push_back({iso, v});
    std::stable_sort(out.begin(), out.end(), [&](const RankedEntry& a, const RankedEntry& b) {
        if (a.value != b.value)
            return order == RankOrder::Descending ? a.value > b.value : a.value < b.value;
        return a.iso_code < b.iso_code;
    });
    return out;
}

struct ConcordanceResult {
    std::optional<TauResult> tau;  // nullopt: join too small or degenerate
    std::size_t joined = 0;
    std::vector<std::string> only_a;  // codes dropped from either side
    std::vector<std::string> only_b;
};

/// Kendall tau-b over the inner join (by country code) of two measure tables.
inline ConcordanceResult concordance(const MeasureTable& a, const MeasureTable& b) {
    ConcordanceResult result;
    std::vector<double> xs, ys;
    for (const auto& [iso, va] : a.values) {
        auto it = b.values.find(iso);
        if (it == b.values.end()) {
            result.only_a.push_back(iso);
            continue;
        }
        xs.push_back(va);
        ys.push_back(it->second);
    }
    for (const auto& [iso, vb] : b.values)
        if (!a.values.contains(iso)) result.only_b.push_back(iso);
    result.joined = xs.size();
    if (xs.size() >= 3) result.tau = kendall_tau_b(xs, ys);
    return result;
}

} // namespace mobres
