#pragma once

#include "intellipred/error.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace intellipred {

/// Parameters of f(x) = 1 / (1 + exp(a x + b)).
struct MappingParams
{
    double a = 0.0;
    double b = 0.0;

    friend bool operator==(const MappingParams&, const MappingParams&) = default;
};

struct CalibrationPair
{
    double score = 0.0;
    double intelligibility = 0.0;
};

/// Evaluates the logistic mapping without overflow. Results are kept inside the open interval (0, 1).
inline double logistic_apply(const MappingParams& p, double x)
{
    if (!std::isfinite(x))
        throw ValidationError("logistic_apply: non-finite score");
    const double z = p.a * x + p.b;
    double f;
    if (z > 0.0) {
        const double e = std::exp(-z);
        f = e / (1.0 + e);
    } else {
        f = 1.0 / (1.0 + std::exp(z));
    }
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    const double hi = std::nextafter(1.0, 0.0);
    return std::clamp(f, lo, hi);
}

inline double mapping_mse(const MappingParams& p, std::span<const CalibrationPair> pairs)
{
    double acc = 0.0;
    for (const auto& q : pairs) {
        const double r = logistic_apply(p, q.score) - q.intelligibility;
        acc += r * r;
    }
    return acc / static_cast<double>(pairs.size());
}

struct FitOptions
{
    double a_min = -50.0, a_max = 50.0;
    double b_min = -20.0, b_max = 20.0;
    double grid_step = 0.5;
    int max_iterations = 200;
    double step_tolerance = 1e-10;
};

struct FitReport
{
    MappingParams params;
    double mse = 0.0;
    MappingParams grid_best;
    double grid_mse = 0.0;
    int iterations = 0;
};

namespace detail {

inline std::vector<CalibrationPair> checked_sorted_pairs(std::span<const CalibrationPair> pairs)
{
    if (pairs.size() < 2)
        throw ValidationError(fmt::format("insufficient data: need at least 2 pairs, got {}", pairs.size()));
    for (const auto& q : pairs) {
        if (!std::isfinite(q.score) || !std::isfinite(q.intelligibility))
            throw ValidationError("fit_logistic: non-finite input");
        if (q.intelligibility < 0.0 || q.intelligibility > 1.0)
            throw ValidationError(fmt::format("fit_logistic: intelligibility {} outside [0, 1]", q.intelligibility));
    }
    std::vector<CalibrationPair> sorted(pairs.begin(), pairs.end());
    // fixed order makes every floating-point sum independent of the caller's ordering
    std::sort(sorted.begin(), sorted.end(), [](const CalibrationPair& x, const CalibrationPair& y) {
        return x.score < y.score || (x.score == y.score && x.intelligibility < y.intelligibility);
    });
    if (sorted.front().score == sorted.back().score)
        throw ValidationError("fit_logistic: all scores identical");
    return sorted;
}

} // namespace detail

/// Least-squares fit of (a, b): coarse grid search, then damped Gauss-Newton from the best grid point.
inline FitReport fit_logistic_report(std::span<const CalibrationPair> input, const FitOptions& opt = {})
{
    const auto pairs = detail::checked_sorted_pairs(input);
    const std::span<const CalibrationPair> data(pairs);

    FitReport rep;
    rep.grid_mse = std::numeric_limits<double>::infinity();
    const int na = static_cast<int>(std::lround((opt.a_max - opt.a_min) / opt.grid_step));
    const int nb = static_cast<int>(std::lround((opt.b_max - opt.b_min) / opt.grid_step));
    for (int ia = 0; ia <= na; ++ia) {
        for (int ib = 0; ib <= nb; ++ib) {
            const MappingParams p{opt.a_min + ia * opt.grid_step, opt.b_min + ib * opt.grid_step};
            const double e = mapping_mse(p, data);
            if (e < rep.grid_mse) {
                rep.grid_mse = e;
                rep.grid_best = p;
            }
        }
    }

    MappingParams cur = rep.grid_best;
    double cur_mse = rep.grid_mse;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        // Normal equations of the linearised residuals r_k = f(x_k) - y_k.
        double jaa = 0.0, jab = 0.0, jbb = 0.0, ga = 0.0, gb = 0.0;
        for (const auto& q : data) {
            const double f = logistic_apply(cur, q.score);
            const double d = -f * (1.0 - f); // df/dz
            const double da = d * q.score;
            const double r = f - q.intelligibility;
            jaa += da * da;
            jab += da * d;
            jbb += d * d;
            ga += da * r;
            gb += d * r;
        }
        if (jaa + jbb == 0.0)
            break;
        double det = jaa * jbb - jab * jab;
        if (!(det > 1e-14 * jaa * jbb)) {
            const double mu = 1e-10 * (jaa + jbb);
            jaa += mu;
            jbb += mu;
            det = jaa * jbb - jab * jab;
        }
        const double step_a = -(jbb * ga - jab * gb) / det;
        const double step_b = -(jaa * gb - jab * ga) / det;
        if (!std::isfinite(step_a) || !std::isfinite(step_b))
            break;

        bool accepted = false;
        double taken = 0.0;
        for (double lambda = 1.0; lambda > 1e-12; lambda *= 0.5) {
            const MappingParams trial{cur.a + lambda * step_a, cur.b + lambda * step_b};
            const double e = mapping_mse(trial, data);
            if (e <= cur_mse) {
                taken = std::max(std::abs(trial.a - cur.a), std::abs(trial.b - cur.b));
                cur = trial;
                cur_mse = e;
                accepted = true;
                break;
            }
        }
        if (!accepted || taken < opt.step_tolerance) {
            ++it;
            break;
        }
    }

    rep.params = cur;
    rep.mse = cur_mse;
    rep.iterations = it;
    return rep;
}

inline MappingParams fit_logistic(std::span<const CalibrationPair> pairs, const FitOptions& opt = {})
{
    return fit_logistic_report(pairs, opt).params;
}

inline std::string format_params(const MappingParams& p)
{
    if (!std::isfinite(p.a) || !std::isfinite(p.b))
        throw ValidationError("mapping parameters must be finite");
    return fmt::format("{{\"a\":{:.17g},\"b\":{:.17g}}}\n", p.a, p.b);
}

inline MappingParams parse_params(std::string_view text, const std::string& source)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(fmt::format("{}: malformed JSON: {}", source, e.what()));
    }
    if (!j.is_object())
        throw FormatError(fmt::format("{}: mapping parameters must be a JSON object", source));
    MappingParams p;
    for (const char* key : {"a", "b"}) {
        if (!j.contains(key) || !j[key].is_number())
            throw FormatError(fmt::format("{}: schema error: numeric field \"{}\" required", source, key));
    }
    p.a = j["a"].get<double>();
    p.b = j["b"].get<double>();
    if (!std::isfinite(p.a) || !std::isfinite(p.b))
        throw FormatError(fmt::format("{}: mapping parameters must be finite", source));
    return p;
}

inline void save_params(const MappingParams& p, const std::filesystem::path& path)
{
    const auto text = format_params(p);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out)
        throw IoError(fmt::format("error writing '{}'", path.string()));
}

inline MappingParams load_params(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot open '{}'", path.string()));
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_params(text, path.string());
}

} // namespace intellipred
