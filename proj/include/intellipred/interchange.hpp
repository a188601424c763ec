#pragma once

#include "intellipred/error.hpp"
#include "intellipred/wav.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace intellipred {

// ---------------------------------------------------------------------------
// Representation container (ASRREPR1)
//
//   bytes 0..7    magic "ASRREPR1"
//   bytes 8..11   header length H, uint32 little-endian
//   next H bytes  UTF-8 JSON {"utterance_id","layer","frames","dim","dtype":"f32le"}
//   remainder     frames*dim float32 little-endian, row-major
// ---------------------------------------------------------------------------

inline constexpr char kReprMagic[8] = {'A', 'S', 'R', 'R', 'E', 'P', 'R', '1'};

/// T x D decoder hidden vectors for one utterance.
struct RepresentationSequence
{
    std::string utterance_id;
    std::string layer = "decoder";
    std::size_t frames = 0;
    std::size_t dim = 0;
    std::vector<float> values;

    std::span<const float> row(std::size_t t) const { return {values.data() + t * dim, dim}; }
    std::span<float> row(std::size_t t) { return {values.data() + t * dim, dim}; }

    friend bool operator==(const RepresentationSequence&, const RepresentationSequence&) = default;
};

inline void validate(const RepresentationSequence& r)
{
    if (r.frames < 1 || r.dim < 1)
        throw ValidationError(fmt::format("representation '{}': frames and dim must be >= 1 (got {}x{})",
                                          r.utterance_id, r.frames, r.dim));
    if (r.values.size() != r.frames * r.dim)
        throw ValidationError(fmt::format("representation '{}': {} values for {}x{}", r.utterance_id,
                                          r.values.size(), r.frames, r.dim));
    for (std::size_t i = 0; i < r.values.size(); ++i)
        if (!std::isfinite(r.values[i]))
            throw ValidationError(fmt::format("representation '{}': non-finite value at frame {}, dim {}",
                                              r.utterance_id, i / r.dim, i % r.dim));
}

inline std::vector<unsigned char> encode_repr(const RepresentationSequence& r)
{
    validate(r);
    nlohmann::ordered_json header;
    header["utterance_id"] = r.utterance_id;
    header["layer"] = r.layer;
    header["frames"] = r.frames;
    header["dim"] = r.dim;
    header["dtype"] = "f32le";
    const std::string text = header.dump();

    std::vector<unsigned char> out;
    out.reserve(12 + text.size() + 4 * r.values.size());
    out.insert(out.end(), kReprMagic, kReprMagic + 8);
    detail::store_u32le(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (float v : r.values)
        detail::store_u32le(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

inline RepresentationSequence decode_repr(std::span<const unsigned char> bytes, const std::string& source)
{
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kReprMagic, 8) != 0)
        throw FormatError(fmt::format("{}: bad magic (expected ASRREPR1)", source));
    if (bytes.size() < 12)
        throw FormatError(fmt::format("{}: truncated before header length", source));
    const std::uint32_t header_len = detail::load_u32le(bytes.data() + 8);
    if (header_len > bytes.size() - 12)
        throw FormatError(fmt::format("{}: header length {} exceeds the {} bytes available", source, header_len,
                                      bytes.size() - 12));

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(fmt::format("{}: malformed header JSON: {}", source, e.what()));
    }

    RepresentationSequence r;
    std::string dtype;
    try {
        r.utterance_id = header.at("utterance_id").get<std::string>();
        r.layer = header.at("layer").get<std::string>();
        r.frames = header.at("frames").get<std::size_t>();
        r.dim = header.at("dim").get<std::size_t>();
        dtype = header.at("dtype").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("{}: bad header: {}", source, e.what()));
    }
    if (dtype != "f32le")
        throw UnsupportedFormat(fmt::format("{}: unknown dtype '{}'", source, dtype));
    if (r.frames < 1 || r.dim < 1)
        throw FormatError(fmt::format("{}: frames and dim must be >= 1 (got {}x{})", source, r.frames, r.dim));

    const std::size_t payload = bytes.size() - 12 - header_len;
    if (r.frames > SIZE_MAX / 4 / r.dim)
        throw FormatError(fmt::format("{}: header shape {}x{} overflows", source, r.frames, r.dim));
    const std::size_t expected = r.frames * r.dim * 4;
    if (payload != expected)
        throw FormatError(fmt::format("{}: payload length mismatch: expected {} bytes, found {}", source, expected,
                                      payload));

    const unsigned char* p = bytes.data() + 12 + header_len;
    r.values.resize(r.frames * r.dim);
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        r.values[i] = std::bit_cast<float>(detail::load_u32le(p + 4 * i));
        if (!std::isfinite(r.values[i]))
            throw FormatError(fmt::format("{}: non-finite value at frame {}, dim {}", source, i / r.dim, i % r.dim));
    }
    return r;
}

inline void write_repr(const RepresentationSequence& r, const std::filesystem::path& path)
{
    detail::write_file_bytes(path, encode_repr(r));
}

inline RepresentationSequence read_repr(const std::filesystem::path& path)
{
    const auto bytes = detail::read_file_bytes(path);
    return decode_repr(bytes, path.string());
}

// ---------------------------------------------------------------------------
// Beam sets (JSON)
// ---------------------------------------------------------------------------

struct BeamHypothesis
{
    std::vector<std::int64_t> tokens;
    /// Total log score as reported by the decoder.
    double score = 0.0;
    /// Optional per-step log-probabilities; carried through untouched.
    std::optional<std::vector<double>> token_scores;

    friend bool operator==(const BeamHypothesis&, const BeamHypothesis&) = default;
};

struct BeamSet
{
    std::string utterance_id;
    /// Sorted by score, best first.
    std::vector<BeamHypothesis> hypotheses;

    friend bool operator==(const BeamSet&, const BeamSet&) = default;
};

/// Stable descending sort by score.
inline void sort_hypotheses(BeamSet& b)
{
    std::stable_sort(b.hypotheses.begin(), b.hypotheses.end(),
                     [](const BeamHypothesis& x, const BeamHypothesis& y) { return x.score > y.score; });
}

inline void validate(const BeamSet& b)
{
    if (b.hypotheses.empty())
        throw ValidationError(fmt::format("beam '{}': empty hypothesis list", b.utterance_id));
    for (std::size_t i = 0; i < b.hypotheses.size(); ++i) {
        const auto& h = b.hypotheses[i];
        if (!std::isfinite(h.score))
            throw ValidationError(fmt::format("beam '{}': non-finite score in hypothesis {}", b.utterance_id, i));
        if (h.tokens.empty() && b.hypotheses.size() > 1)
            throw ValidationError(fmt::format("beam '{}': hypothesis {} has no tokens", b.utterance_id, i));
        for (auto t : h.tokens)
            if (t < 0)
                throw ValidationError(fmt::format("beam '{}': negative token id {} in hypothesis {}",
                                                  b.utterance_id, t, i));
        if (h.token_scores)
            for (double s : *h.token_scores)
                if (!std::isfinite(s))
                    throw ValidationError(fmt::format("beam '{}': non-finite token score in hypothesis {}",
                                                      b.utterance_id, i));
        if (i > 0 && h.score > b.hypotheses[i - 1].score)
            throw ValidationError(fmt::format("beam '{}': hypotheses not sorted by score", b.utterance_id));
    }
}

inline std::string encode_beam(const BeamSet& b)
{
    validate(b);
    nlohmann::ordered_json j;
    j["utterance_id"] = b.utterance_id;
    auto& hyps = j["hypotheses"] = nlohmann::ordered_json::array();
    for (const auto& h : b.hypotheses) {
        nlohmann::ordered_json o;
        o["tokens"] = h.tokens;
        o["score"] = h.score;
        if (h.token_scores)
            o["token_scores"] = *h.token_scores;
        hyps.push_back(std::move(o));
    }
    return j.dump() + "\n";
}

namespace detail {

inline double json_score(const nlohmann::json& v, const std::string& where)
{
    if (v.is_number())
        return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "NaN" || s == "nan" || s == "Infinity" || s == "-Infinity" || s == "inf" || s == "-inf")
            throw ValidationError(fmt::format("{}: non-finite score \"{}\"", where, s));
    }
    throw FormatError(fmt::format("{}: score must be a number", where));
}

} // namespace detail

/// Parses a beam document and re-sorts hypotheses best first.
inline BeamSet decode_beam(std::string_view text, const std::string& source)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(fmt::format("{}: malformed JSON: {}", source, e.what()));
    }
    if (!j.is_object() || !j.contains("utterance_id") || !j["utterance_id"].is_string())
        throw FormatError(fmt::format("{}: expected an object with string utterance_id", source));
    if (!j.contains("hypotheses") || !j["hypotheses"].is_array())
        throw FormatError(fmt::format("{}: expected a hypotheses array", source));

    BeamSet b;
    b.utterance_id = j["utterance_id"].get<std::string>();
    const auto& arr = j["hypotheses"];
    if (arr.empty())
        throw ValidationError(fmt::format("{}: empty hypothesis list", source));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto where = fmt::format("{}: hypotheses[{}]", source, i);
        const auto& o = arr[i];
        if (!o.is_object() || !o.contains("tokens") || !o.contains("score"))
            throw FormatError(fmt::format("{}: expected {{\"tokens\", \"score\"}}", where));
        BeamHypothesis h;
        try {
            h.tokens = o.at("tokens").get<std::vector<std::int64_t>>();
            if (o.contains("token_scores"))
                h.token_scores = o.at("token_scores").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(fmt::format("{}: {}", where, e.what()));
        }
        h.score = detail::json_score(o.at("score"), where);
        b.hypotheses.push_back(std::move(h));
    }
    sort_hypotheses(b);
    try {
        validate(b);
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", source, e.what()));
    }
    return b;
}

inline void write_beam(const BeamSet& b, const std::filesystem::path& path)
{
    const auto text = encode_beam(b);
    detail::write_file_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

inline BeamSet read_beam(const std::filesystem::path& path)
{
    const auto bytes = detail::read_file_bytes(path);
    return decode_beam(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path.string());
}

// ---------------------------------------------------------------------------
// Conformance checks
// ---------------------------------------------------------------------------

enum class InterchangeKind { Representation, Beam };

/// `.json` files are beams; anything else is treated as a representation container.
inline InterchangeKind guess_kind(const std::filesystem::path& path)
{
    if (path.extension() == ".json")
        return InterchangeKind::Beam;
    return InterchangeKind::Representation;
}

/// Returns human-readable findings; empty means the file is fully conformant.
inline std::vector<std::string> inspect_interchange(const std::filesystem::path& path, InterchangeKind kind)
{
    std::vector<std::string> findings;
    try {
        if (kind == InterchangeKind::Representation) {
            const auto r = read_repr(path);
            if (r.layer.empty())
                findings.push_back("layer tag is empty");
            if (r.utterance_id.empty())
                findings.push_back("utterance_id is empty");
        } else {
            const auto bytes = detail::read_file_bytes(path);
            const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
            const auto b = decode_beam(text, path.string());
            const auto raw = nlohmann::json::parse(text);
            for (std::size_t i = 1; i < raw["hypotheses"].size(); ++i)
                if (raw["hypotheses"][i]["score"].get<double>() > raw["hypotheses"][i - 1]["score"].get<double>()) {
                    findings.push_back("hypotheses are not stored in descending score order");
                    break;
                }
            if (b.utterance_id.empty())
                findings.push_back("utterance_id is empty");
        }
    } catch (const Error& e) {
        findings.push_back(e.what());
    }
    return findings;
}

} // namespace intellipred
