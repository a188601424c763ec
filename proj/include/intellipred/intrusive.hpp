#pragma once

#include "intellipred/error.hpp"
#include "intellipred/interchange.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace intellipred {

/// Monotone alignment from (0,0) to (T_ref-1, T_proc-1); first = reference frame, second = processed frame.
struct AlignmentPath
{
    std::vector<std::pair<std::size_t, std::size_t>> steps;

    std::size_t size() const { return steps.size(); }
    friend bool operator==(const AlignmentPath&, const AlignmentPath&) = default;
};

/// dot(u,v) / (|u| |v|), or 0 when either norm is below 1e-12.
template <class T, class U>
double cosine_similarity(std::span<const T> u, std::span<const U> v)
{
    if (u.size() != v.size())
        throw ValidationError(fmt::format("cosine_similarity: dimension mismatch ({} vs {})", u.size(), v.size()));
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double a = static_cast<double>(u[k]);
        const double b = static_cast<double>(v[k]);
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    const double nu = std::sqrt(uu);
    const double nv = std::sqrt(vv);
    if (nu < 1e-12 || nv < 1e-12)
        return 0.0;
    return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

inline double cosine_similarity(std::span<const double> u, std::span<const double> v)
{
    return cosine_similarity<double, double>(u, v);
}

struct DtwOptions
{
    /// Sakoe-Chiba half-width around the (scaled) diagonal; unset means unconstrained.
    std::optional<std::size_t> band;
};

/// Frame-by-frame cosine similarities, rows = reference frames.
class SimilarityMatrix
{
public:
    SimilarityMatrix(const RepresentationSequence& ref, const RepresentationSequence& proc)
        : rows_(ref.frames), cols_(proc.frames), sim_(ref.frames * proc.frames)
    {
        if (ref.dim != proc.dim)
            throw ValidationError(fmt::format("dimension mismatch: reference has dim {}, processed has dim {}",
                                              ref.dim, proc.dim));
        if (ref.frames == 0 || proc.frames == 0)
            throw ValidationError("empty representation sequence");
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                sim_[i * cols_ + j] = cosine_similarity(ref.row(i), proc.row(j));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t i, std::size_t j) const { return sim_[i * cols_ + j]; }
    double cost(std::size_t i, std::size_t j) const { return 1.0 - (*this)(i, j); }

private:
    std::size_t rows_, cols_;
    std::vector<double> sim_;
};

namespace detail {

/// Allowed column range per row. Each row reaches up to the next row's centre so the band stays connected.
inline std::vector<std::pair<std::size_t, std::size_t>> band_limits(std::size_t rows, std::size_t cols,
                                                                    std::optional<std::size_t> band)
{
    std::vector<std::pair<std::size_t, std::size_t>> lim(rows, {0, cols - 1});
    if (!band || rows == 1)
        return lim;
    auto centre = [&](std::size_t i) { return i * (cols - 1) / (rows - 1); };
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t c = centre(i);
        const std::size_t c_next = i + 1 < rows ? centre(i + 1) : c;
        lim[i].first = c > *band ? c - *band : 0;
        lim[i].second = std::min(cols - 1, c_next + *band);
    }
    return lim;
}

} // namespace detail

/// Minimum-cost path under the step set {(1,0),(0,1),(1,1)} with cost 1 - cos.
/// The backtrace prefers diagonal, then reference-advance, then processed-advance steps on ties.
inline AlignmentPath dtw_align(const SimilarityMatrix& sim, DtwOptions opts = {})
{
    const std::size_t n = sim.rows();
    const std::size_t m = sim.cols();
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto lim = detail::band_limits(n, m, opts.band);
    auto allowed = [&](std::size_t i, std::size_t j) { return j >= lim[i].first && j <= lim[i].second; };

    std::vector<double> acc(n * m, inf);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * m + j]; };

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = lim[i].first; j <= lim[i].second; ++j) {
            const double c = sim.cost(i, j);
            if (i == 0 && j == 0) {
                at(i, j) = c;
                continue;
            }
            double best = inf;
            if (i > 0 && j > 0)
                best = std::min(best, at(i - 1, j - 1));
            if (i > 0)
                best = std::min(best, at(i - 1, j));
            if (j > 0)
                best = std::min(best, at(i, j - 1));
            at(i, j) = c + best;
        }
    }

    AlignmentPath path;
    std::size_t i = n - 1, j = m - 1;
    path.steps.emplace_back(i, j);
    while (i > 0 || j > 0) {
        const double diag = (i > 0 && j > 0 && allowed(i - 1, j - 1)) ? at(i - 1, j - 1) : inf;
        const double up = (i > 0 && allowed(i - 1, j)) ? at(i - 1, j) : inf;
        const double left = (j > 0 && allowed(i, j - 1)) ? at(i, j - 1) : inf;
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
        path.steps.emplace_back(i, j);
    }
    std::reverse(path.steps.begin(), path.steps.end());
    return path;
}

inline AlignmentPath dtw_align(const RepresentationSequence& ref, const RepresentationSequence& proc,
                               DtwOptions opts = {})
{
    return dtw_align(SimilarityMatrix(ref, proc), opts);
}

/// Sum of (1 - cos) along the path, accumulated from the start.
inline double path_cost(const SimilarityMatrix& sim, const AlignmentPath& path)
{
    double total = 0.0;
    for (auto [i, j] : path.steps)
        total = sim.cost(i, j) + total;
    return total;
}

/// Mean cosine similarity along the DTW alignment of decoder representations.
inline double intrusive_score(const RepresentationSequence& ref, const RepresentationSequence& proc,
                              DtwOptions opts = {})
{
    const SimilarityMatrix sim(ref, proc);
    const auto path = dtw_align(sim, opts);
    double total = 0.0;
    for (auto [i, j] : path.steps)
        total += sim(i, j);
    return std::clamp(total / static_cast<double>(path.size()), -1.0, 1.0);
}

} // namespace intellipred
