#pragma once

#include "intellipred/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace intellipred {

/// Mono signal. Samples are kept in double precision; WAV files store float32.
struct Waveform
{
    std::vector<double> samples;
    int sample_rate = 16000;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    friend bool operator==(const Waveform&, const Waveform&) = default;
};

/// FIR weighting applied before measuring speech-weighted power.
struct WeightingFilter
{
    std::vector<double> taps;
    int design_sample_rate = 16000;
};

inline void validate(const Waveform& w)
{
    if (w.sample_rate <= 0)
        throw ValidationError(fmt::format("sample rate must be positive, got {}", w.sample_rate));
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        if (!std::isfinite(w.samples[i]))
            throw ValidationError(fmt::format("non-finite sample at index {}", i));
}

inline void validate(const WeightingFilter& f)
{
    if (f.taps.empty())
        throw ValidationError("weighting filter has no taps");
    if (f.design_sample_rate <= 0)
        throw ValidationError("weighting filter sample rate must be positive");
    for (double t : f.taps)
        if (!std::isfinite(t))
            throw ValidationError("weighting filter has a non-finite tap");
}

namespace detail {

inline void require_same_rate(int a, int b, const char* what)
{
    if (a != b)
        throw ValidationError(fmt::format("{}: sample rate mismatch ({} Hz vs {} Hz)", what, a, b));
}

} // namespace detail

/// Full linear convolution by direct summation; output length is len(w) + len(rir) - 1.
inline Waveform convolve(const Waveform& w, const Waveform& rir)
{
    detail::require_same_rate(w.sample_rate, rir.sample_rate, "convolve");
    if (w.empty() || rir.empty())
        throw ValidationError("convolve: empty input");

    const std::size_t n = w.size();
    const std::size_t m = rir.size();
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.assign(n + m - 1, 0.0);

    // Scatter form keeps the inner loop contiguous in both operands.
    const double* h = rir.samples.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = w.samples[i];
        if (x == 0.0)
            continue;
        double* y = out.samples.data() + i;
        for (std::size_t k = 0; k < m; ++k)
            y[k] += x * h[k];
    }
    return out;
}

/// Filters `x` keeping its length; the output is advanced by the FIR group delay (taps-1)/2.
inline std::vector<double> filter_same(std::span<const double> x, std::span<const double> taps)
{
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(taps.size());
    const std::ptrdiff_t delay = (m - 1) / 2;
    std::vector<double> y(x.size(), 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        // y[i] = sum_k h[k] * x[i + delay - k]
        const std::ptrdiff_t base = i + delay;
        const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, base - (n - 1));
        const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(m - 1, base);
        double acc = 0.0;
        for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k)
            acc += taps[k] * x[base - k];
        y[i] = acc;
    }
    return y;
}

/// Mean square of the weighted signal.
inline double weighted_power(const Waveform& w, const WeightingFilter& f)
{
    if (w.empty())
        throw ValidationError("weighted_power: empty waveform");
    detail::require_same_rate(w.sample_rate, f.design_sample_rate, "weighted_power");
    validate(f);
    const auto y = filter_same(w.samples, f.taps);
    double acc = 0.0;
    for (double v : y)
        acc += v * v;
    return acc / static_cast<double>(y.size());
}

/// Gain g such that speech + g * noise has speech-weighted SNR equal to `snr_db`.
inline double gain_for_snr(double speech_power, double noise_power, double snr_db)
{
    if (!(speech_power > 0.0))
        throw ValidationError("gain_for_snr: speech has zero weighted power");
    if (!(noise_power > 0.0))
        throw ValidationError("gain_for_snr: noise has zero weighted power");
    if (!std::isfinite(snr_db))
        throw ValidationError("gain_for_snr: non-finite SNR");
    return std::sqrt(speech_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
}

inline double gain_for_snr(const Waveform& speech, const Waveform& noise, double snr_db,
                           const WeightingFilter& f)
{
    return gain_for_snr(weighted_power(speech, f), weighted_power(noise, f), snr_db);
}

/// Elementwise sum; the shorter input is zero-padded at the tail.
inline Waveform mix(const Waveform& a, const Waveform& b)
{
    detail::require_same_rate(a.sample_rate, b.sample_rate, "mix");
    Waveform out;
    out.sample_rate = a.sample_rate;
    out.samples.assign(std::max(a.size(), b.size()), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        out.samples[i] += a.samples[i];
    for (std::size_t i = 0; i < b.size(); ++i)
        out.samples[i] += b.samples[i];
    return out;
}

inline Waveform scaled(Waveform w, double gain)
{
    for (double& s : w.samples)
        s *= gain;
    return w;
}

inline double snr_db(double speech_power, double noise_power)
{
    return 10.0 * std::log10(speech_power / noise_power);
}

} // namespace intellipred
