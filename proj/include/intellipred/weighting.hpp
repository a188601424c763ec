#pragma once

#include "intellipred/error.hpp"
#include "intellipred/signal.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace intellipred {

struct BandPassDesign
{
    int taps = 65;
    double low_hz = 300.0;
    double high_hz = 5000.0;
};

/// Linear-phase band-pass FIR, Hamming-windowed sinc. Cut-offs above Nyquist are clamped.
inline WeightingFilter design_band_pass(int sample_rate, BandPassDesign design = {})
{
    if (sample_rate <= 0)
        throw ValidationError("design_band_pass: sample rate must be positive");
    if (design.taps < 1)
        throw ValidationError("design_band_pass: need at least one tap");
    if (!(design.low_hz >= 0.0 && design.low_hz < design.high_hz))
        throw ValidationError("design_band_pass: need 0 <= low < high");

    const double nyquist = 0.5 * sample_rate;
    const double f1 = std::min(design.low_hz, nyquist) / sample_rate;
    const double f2 = std::min(design.high_hz, nyquist) / sample_rate;
    const double centre = 0.5 * (design.taps - 1);

    auto lowpass = [](double fc, double m) {
        if (m == 0.0)
            return 2.0 * fc;
        return std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    };

    WeightingFilter f;
    f.design_sample_rate = sample_rate;
    f.taps.resize(static_cast<std::size_t>(design.taps));
    for (int n = 0; n < design.taps; ++n) {
        const double m = n - centre;
        const double window = design.taps == 1
                                  ? 1.0
                                  : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (design.taps - 1));
        f.taps[static_cast<std::size_t>(n)] = window * (lowpass(f2, m) - lowpass(f1, m));
    }
    return f;
}

/// Default speech weighting: 65-tap 300-5000 Hz band-pass.
inline WeightingFilter default_speech_weighting(int sample_rate = 16000)
{
    return design_band_pass(sample_rate);
}

/// Reads a coefficient file: first line `# rate=<Hz>`, then one coefficient per line.
inline WeightingFilter load_weighting(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError(fmt::format("cannot open weighting file '{}'", path.string()));

    std::string line;
    if (!std::getline(in, line))
        throw FormatError(fmt::format("weighting file '{}' is empty", path.string()));
    if (!line.empty() && line.back() == '\r')
        line.pop_back();

    WeightingFilter f;
    const std::string prefix = "# rate=";
    if (line.rfind(prefix, 0) != 0)
        throw FormatError(fmt::format("weighting file '{}': first line must be '# rate=<Hz>'", path.string()));
    {
        const char* first = line.data() + prefix.size();
        const char* last = line.data() + line.size();
        auto [ptr, ec] = std::from_chars(first, last, f.design_sample_rate);
        if (ec != std::errc() || ptr != last || f.design_sample_rate <= 0)
            throw FormatError(fmt::format("weighting file '{}': bad rate '{}'", path.string(), line));
    }

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        double v = 0.0;
        if (!(ss >> v)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            throw FormatError(fmt::format("weighting file '{}': line {} is not a number", path.string(), lineno));
        }
        std::string rest;
        if (ss >> rest)
            throw FormatError(fmt::format("weighting file '{}': trailing text on line {}", path.string(), lineno));
        f.taps.push_back(v);
    }
    try {
        validate(f);
    } catch (const ValidationError& e) {
        throw FormatError(fmt::format("weighting file '{}': {}", path.string(), e.what()));
    }
    return f;
}

inline void save_weighting(const WeightingFilter& f, const std::filesystem::path& path)
{
    validate(f);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError(fmt::format("cannot write weighting file '{}'", path.string()));
    out << fmt::format("# rate={}\n", f.design_sample_rate);
    for (double t : f.taps)
        out << fmt::format("{:.17g}\n", t);
    if (!out)
        throw IoError(fmt::format("error writing weighting file '{}'", path.string()));
}

} // namespace intellipred
