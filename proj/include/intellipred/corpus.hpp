#pragma once

#include "intellipred/csv.hpp"
#include "intellipred/error.hpp"
#include "intellipred/parallel.hpp"
#include "intellipred/signal.hpp"
#include "intellipred/wav.hpp"
#include "intellipred/weighting.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace intellipred {

struct ManifestItem
{
    std::string id;
    std::filesystem::path path;
};

/// Everything needed to regenerate a simulated corpus bit for bit.
struct SimulationSpec
{
    std::uint64_t seed = 0;
    double snr_low = -6.0;
    double snr_high = 6.0;
    std::vector<ManifestItem> speech_manifest;
    std::vector<ManifestItem> rir_manifest;
    std::vector<ManifestItem> noise_manifest;
    std::filesystem::path output_dir;
    /// When unset, the default band-pass is designed at the speech sample rate.
    std::optional<WeightingFilter> weighting;
    ChannelSelect channel = ChannelSelect::Mean;
    unsigned jobs = 1;
};

struct CorpusManifestEntry
{
    std::string utterance_id;
    std::string speech_id;
    std::string rir_id;
    std::string noise_id;
    double snr_db = 0.0;
    /// Relative to the corpus output directory.
    std::string output_path;

    friend bool operator==(const CorpusManifestEntry&, const CorpusManifestEntry&) = default;
};

struct Condition
{
    std::size_t rir_index = 0;
    std::size_t noise_index = 0;
    std::string rir_id;
    std::string noise_id;
    double snr_db = 0.0;
    /// Raw draw later reduced to a noise start offset once the noise length is known.
    std::uint64_t offset_draw = 0;
};

/// Counter-based generator: the stream for (seed, index) never depends on other utterances.
class CounterRng
{
public:
    CounterRng(std::uint64_t seed, std::uint64_t index)
        : key_(mix(seed ^ mix(index + 0xD1B54A32D192ED03ull)))
    {}

    std::uint64_t next()
    {
        ++counter_;
        return mix(key_ + counter_ * 0x9E3779B97F4A7C15ull);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform on [0, n).
    std::uint64_t below(std::uint64_t n) { return reduce(next(), n); }

    static std::uint64_t reduce(std::uint64_t draw, std::uint64_t n)
    {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(draw) * n) >> 64);
    }

    static std::uint64_t mix(std::uint64_t z)
    {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

namespace detail {

inline void check_manifest(const std::vector<ManifestItem>& items, const char* what)
{
    if (items.empty())
        throw ValidationError(fmt::format("{} manifest is empty", what));
    std::set<std::string> seen;
    for (const auto& it : items)
        if (!seen.insert(it.id).second)
            throw ValidationError(fmt::format("{} manifest: duplicate id '{}'", what, it.id));
}

} // namespace detail

inline void validate(const SimulationSpec& spec)
{
    if (!std::isfinite(spec.snr_low) || !std::isfinite(spec.snr_high))
        throw ValidationError("SNR bounds must be finite");
    if (spec.snr_low > spec.snr_high)
        throw ValidationError(fmt::format("snr_low ({}) exceeds snr_high ({})", spec.snr_low, spec.snr_high));
    detail::check_manifest(spec.speech_manifest, "speech");
    detail::check_manifest(spec.rir_manifest, "rir");
    detail::check_manifest(spec.noise_manifest, "noise");
}

/// Draws (rir, noise, snr) for one utterance; a pure function of (seed, utterance_index).
inline Condition sample_condition(const SimulationSpec& spec, std::uint64_t utterance_index)
{
    if (spec.rir_manifest.empty())
        throw ValidationError("rir manifest is empty");
    if (spec.noise_manifest.empty())
        throw ValidationError("noise manifest is empty");
    if (spec.snr_low > spec.snr_high)
        throw ValidationError("snr_low exceeds snr_high");

    CounterRng rng(spec.seed, utterance_index);
    Condition c;
    c.rir_index = rng.below(spec.rir_manifest.size());
    c.noise_index = rng.below(spec.noise_manifest.size());
    const double u = rng.uniform();
    c.snr_db = spec.snr_low == spec.snr_high ? spec.snr_low : spec.snr_low + (spec.snr_high - spec.snr_low) * u;
    c.offset_draw = rng.next();
    c.rir_id = spec.rir_manifest[c.rir_index].id;
    c.noise_id = spec.noise_manifest[c.noise_index].id;
    return c;
}

/// Noise excerpt of exactly `length` samples: random-offset crop, or circular loop when too short.
inline Waveform noise_segment(const Waveform& noise, std::size_t length, std::uint64_t offset_draw)
{
    if (noise.empty())
        throw ValidationError("noise signal is empty");
    Waveform seg;
    seg.sample_rate = noise.sample_rate;
    seg.samples.resize(length);
    const std::size_t n = noise.size();
    if (n >= length) {
        const std::size_t off = CounterRng::reduce(offset_draw, n - length + 1);
        std::copy_n(noise.samples.begin() + static_cast<std::ptrdiff_t>(off), length, seg.samples.begin());
    } else {
        const std::size_t off = CounterRng::reduce(offset_draw, n);
        for (std::size_t i = 0; i < length; ++i)
            seg.samples[i] = noise.samples[(off + i) % n];
    }
    return seg;
}

/// Reverberates speech and adds a scaled noise segment at the given speech-weighted SNR.
inline Waveform render_noisy(const Waveform& speech, const Waveform& rir, const Waveform& noise, double snr,
                             std::uint64_t offset_draw, const WeightingFilter& weighting)
{
    detail::require_same_rate(speech.sample_rate, noise.sample_rate, "simulate (speech vs noise)");
    const Waveform reverberant = convolve(speech, rir);
    const Waveform segment = noise_segment(noise, reverberant.size(), offset_draw);
    const double p_speech = weighted_power(reverberant, weighting);
    const double p_noise = weighted_power(segment, weighting);
    if (!(p_noise > 0.0))
        throw ValidationError("noise segment has zero weighted power");
    const double g = gain_for_snr(p_speech, p_noise, snr);
    return mix(reverberant, scaled(segment, g));
}

/// Generates every utterance of the corpus into spec.output_dir and returns the manifest in speech order.
inline std::vector<CorpusManifestEntry> simulate_corpus(const SimulationSpec& spec)
{
    validate(spec);
    const std::size_t count = spec.speech_manifest.size();

    std::vector<Condition> conditions;
    conditions.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        conditions.push_back(sample_condition(spec, i));

    // Load only the RIR and noise files that were actually drawn.
    std::map<std::size_t, Waveform> rirs;
    std::map<std::size_t, Waveform> noises;
    for (const auto& c : conditions) {
        if (!rirs.count(c.rir_index))
            rirs.emplace(c.rir_index, read_wav(spec.rir_manifest[c.rir_index].path, spec.channel));
        if (!noises.count(c.noise_index))
            noises.emplace(c.noise_index, read_wav(spec.noise_manifest[c.noise_index].path, spec.channel));
    }

    std::error_code ec;
    std::filesystem::create_directories(spec.output_dir, ec);
    if (ec)
        throw IoError(fmt::format("cannot create output directory '{}': {}", spec.output_dir.string(), ec.message()));

    std::vector<CorpusManifestEntry> manifest(count);
    parallel_for(count, spec.jobs, [&](std::size_t i) {
        const auto& item = spec.speech_manifest[i];
        const auto& c = conditions[i];
        const Waveform speech = read_wav(item.path, spec.channel);
        const Waveform& rir = rirs.at(c.rir_index);
        const Waveform& noise = noises.at(c.noise_index);
        const WeightingFilter weighting = spec.weighting ? *spec.weighting : default_speech_weighting(speech.sample_rate);

        Waveform noisy;
        try {
            noisy = render_noisy(speech, rir, noise, c.snr_db, c.offset_draw, weighting);
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("utterance '{}': {}", item.id, e.what()));
        }

        CorpusManifestEntry& e = manifest[i];
        e.utterance_id = item.id;
        e.speech_id = item.id;
        e.rir_id = c.rir_id;
        e.noise_id = c.noise_id;
        e.snr_db = c.snr_db;
        e.output_path = item.id + ".wav";
        write_wav(noisy, spec.output_dir / e.output_path);
    });
    return manifest;
}

inline std::string format_manifest(const std::vector<CorpusManifestEntry>& entries)
{
    std::string out = "utterance_id,speech_id,rir_id,noise_id,snr_db,output_path\n";
    for (const auto& e : entries)
        out += csv::join_row({e.utterance_id, e.speech_id, e.rir_id, e.noise_id, fmt::format("{:.6f}", e.snr_db),
                              e.output_path});
    return out;
}

inline void write_manifest(const std::vector<CorpusManifestEntry>& entries, const std::filesystem::path& path)
{
    csv::write_text(path, format_manifest(entries));
}

inline std::vector<CorpusManifestEntry> read_manifest(const std::filesystem::path& path)
{
    const auto t = csv::read(path);
    const auto c_utt = t.column("utterance_id"), c_sp = t.column("speech_id"), c_rir = t.column("rir_id"),
               c_noise = t.column("noise_id"), c_snr = t.column("snr_db"), c_out = t.column("output_path");
    std::vector<CorpusManifestEntry> out;
    for (const auto& row : t.rows)
        out.push_back({row[c_utt], row[c_sp], row[c_rir], row[c_noise], csv::to_double(row[c_snr], t.source),
                       row[c_out]});
    return out;
}

namespace detail {

inline std::vector<ManifestItem> manifest_from_json(const nlohmann::json& j, const char* key,
                                                    const std::filesystem::path& base)
{
    if (!j.contains(key))
        return {};
    const auto& arr = j.at(key);
    if (!arr.is_array())
        throw FormatError(fmt::format("spec field '{}' must be an array", key));
    std::vector<ManifestItem> items;
    for (std::size_t k = 0; k < arr.size(); ++k) {
        const auto& e = arr[k];
        if (!e.is_object() || !e.contains("id") || !e.contains("path") || !e["id"].is_string() ||
            !e["path"].is_string())
            throw FormatError(fmt::format("spec field '{}'[{}] must be {{\"id\": string, \"path\": string}}", key, k));
        std::filesystem::path p = e["path"].get<std::string>();
        items.push_back({e["id"].get<std::string>(), p.is_absolute() ? p : base / p});
    }
    return items;
}

} // namespace detail

/// Loads a JSON simulation spec. Relative paths are resolved against the spec file's directory.
inline SimulationSpec load_simulation_spec(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError(fmt::format("cannot open simulation spec '{}'", path.string()));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(fmt::format("simulation spec '{}': {}", path.string(), e.what()));
    }
    if (!j.is_object())
        throw FormatError(fmt::format("simulation spec '{}' must be a JSON object", path.string()));

    const auto base = path.parent_path();
    SimulationSpec spec;
    try {
        if (j.contains("seed"))
            spec.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("snr_low"))
            spec.snr_low = j.at("snr_low").get<double>();
        if (j.contains("snr_high"))
            spec.snr_high = j.at("snr_high").get<double>();
        if (j.contains("output_dir")) {
            std::filesystem::path out = j.at("output_dir").get<std::string>();
            spec.output_dir = out.is_absolute() ? out : base / out;
        }
        if (j.contains("weighting") && !j.at("weighting").is_null()) {
            std::filesystem::path w = j.at("weighting").get<std::string>();
            spec.weighting = load_weighting(w.is_absolute() ? w : base / w);
        }
        if (j.contains("channel")) {
            auto ch = parse_channel_select(j.at("channel").get<std::string>());
            if (!ch)
                throw FormatError("channel must be one of left, right, mean");
            spec.channel = *ch;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("simulation spec '{}': {}", path.string(), e.what()));
    }
    spec.speech_manifest = detail::manifest_from_json(j, "speech_manifest", base);
    spec.rir_manifest = detail::manifest_from_json(j, "rir_manifest", base);
    spec.noise_manifest = detail::manifest_from_json(j, "noise_manifest", base);
    return spec;
}

} // namespace intellipred
