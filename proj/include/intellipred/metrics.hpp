#pragma once

#include "intellipred/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace intellipred {

namespace detail {

inline void require_paired(std::span<const double> pred, std::span<const double> truth, std::size_t min_n,
                           const char* what)
{
    if (pred.size() != truth.size())
        throw ValidationError(fmt::format("{}: length mismatch ({} vs {})", what, pred.size(), truth.size()));
    if (pred.size() < min_n)
        throw ValidationError(fmt::format("{}: need at least {} values, got {}", what, min_n, pred.size()));
}

} // namespace detail

inline double rmse(std::span<const double> pred, std::span<const double> truth)
{
    detail::require_paired(pred, truth, 1, "rmse");
    double acc = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double d = pred[k] - truth[k];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

/// Normalised cross-correlation, taken as the Pearson coefficient.
inline double ncc(std::span<const double> pred, std::span<const double> truth)
{
    detail::require_paired(pred, truth, 2, "ncc");
    const double n = static_cast<double>(pred.size());
    const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
    const double mt = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double dx = pred[k] - mp;
        const double dy = truth[k] - mt;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw ValidationError("ncc: undefined correlation (zero variance)");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Kendall tau-b in O(n log n): sort by (pred, truth), then count truth inversions by merge sort.
inline double kendall_tau(std::span<const double> pred, std::span<const double> truth)
{
    detail::require_paired(pred, truth, 2, "kendall_tau");
    const std::size_t n = pred.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pred[a] < pred[b] || (pred[a] == pred[b] && truth[a] < truth[b]);
    });

    auto pairs_of = [](std::int64_t t) { return t * (t - 1) / 2; };
    const std::int64_t n0 = pairs_of(static_cast<std::int64_t>(n));

    std::int64_t tied_pred = 0, tied_both = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && pred[order[j]] == pred[order[i]])
            ++j;
        tied_pred += pairs_of(static_cast<std::int64_t>(j - i));
        for (std::size_t k = i; k < j;) {
            std::size_t l = k + 1;
            while (l < j && truth[order[l]] == truth[order[k]])
                ++l;
            tied_both += pairs_of(static_cast<std::int64_t>(l - k));
            k = l;
        }
        i = j;
    }

    std::vector<double> y(n), buf(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = truth[order[i]];
    std::int64_t swaps = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo < n; lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, n);
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t a = lo, b = mid, out = lo;
            while (a < mid && b < hi) {
                if (y[b] < y[a]) {
                    swaps += static_cast<std::int64_t>(mid - a);
                    buf[out++] = y[b++];
                } else {
                    buf[out++] = y[a++];
                }
            }
            while (a < mid)
                buf[out++] = y[a++];
            while (b < hi)
                buf[out++] = y[b++];
        }
        std::swap(y, buf);
    }

    std::int64_t tied_truth = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && y[j] == y[i])
            ++j;
        tied_truth += pairs_of(static_cast<std::int64_t>(j - i));
        i = j;
    }

    const std::int64_t untied_pred = n0 - tied_pred;
    const std::int64_t untied_truth = n0 - tied_truth;
    if (untied_pred == 0 || untied_truth == 0)
        throw ValidationError("kendall_tau: all values tied");
    const std::int64_t c_minus_d = n0 - tied_pred - tied_truth + tied_both - 2 * swaps;
    return static_cast<double>(c_minus_d) /
           std::sqrt(static_cast<double>(untied_pred) * static_cast<double>(untied_truth));
}

/// One row of the metric table.
struct EvalReport
{
    std::string subset_id;
    double rmse = 0.0;
    double ncc = 0.0;
    double kt = 0.0;
    std::size_t n = 0;
};

struct PredictionPair
{
    double pred = 0.0;
    double truth = 0.0;
};

/// Metrics per subset, returned in subset-id order.
inline std::vector<EvalReport> evaluate(const std::map<std::string, std::vector<PredictionPair>>& subsets)
{
    std::vector<EvalReport> out;
    for (const auto& [id, pairs] : subsets) {
        std::vector<double> p, t;
        for (const auto& q : pairs) {
            p.push_back(q.pred);
            t.push_back(q.truth);
        }
        try {
            if (pairs.size() < 2)
                throw ValidationError(fmt::format("need at least 2 pairs, got {}", pairs.size()));
            out.push_back({id, rmse(p, t), ncc(p, t), kendall_tau(p, t), pairs.size()});
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("subset {}: {}", id, e.what()));
        }
    }
    return out;
}

inline std::string format_report_csv(const std::vector<EvalReport>& reports)
{
    std::string out = "subset,rmse,ncc,kt,n\n";
    for (const auto& r : reports)
        out += fmt::format("{},{:.3f},{:.3f},{:.3f},{}\n", r.subset_id, r.rmse, r.ncc, r.kt, r.n);
    return out;
}

/// Plain-text table with one centred banner per method group.
inline std::string format_report_table(const std::vector<std::pair<std::string, std::vector<EvalReport>>>& groups)
{
    constexpr int width = 8 + 3 * 9 + 7;
    std::string out = fmt::format("{:<8}{:>9}{:>9}{:>9}{:>7}\n", "Subset", "RMSE", "NCC", "KT", "n");
    out += std::string(width, '-') + "\n";
    for (const auto& [label, reports] : groups) {
        if (!label.empty()) {
            out += fmt::format("{:^{}}\n", label, width);
            out += std::string(width, '-') + "\n";
        }
        for (const auto& r : reports)
            out += fmt::format("{:<8}{:>9.3f}{:>9.3f}{:>9.3f}{:>7}\n", r.subset_id, r.rmse, r.ncc, r.kt, r.n);
    }
    return out;
}

} // namespace intellipred
