#pragma once

#include "intellipred/csv.hpp"
#include "intellipred/error.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace intellipred {

enum class Split { Train, Eval };

inline std::string to_string(Split s) { return s == Split::Train ? "train" : "eval"; }

inline std::optional<Split> parse_split(std::string_view s)
{
    if (s == "train")
        return Split::Train;
    if (s == "eval")
        return Split::Eval;
    return std::nullopt;
}

/// Names of the JSON keys carrying each record field. Release-specific metadata is handled by remapping.
struct FieldMapping
{
    std::string signal_id = "signal";
    std::string scene_id = "scene";
    std::string listener_id = "listener";
    std::string system_id = "system";
    std::string correctness = "correctness";
    std::string partition = "partition";
    std::string split = "split";
    std::string processed_path = "processed_path";
    std::string reference_path = "reference_path";
};

struct SignalRecord
{
    std::string signal_id;
    std::string scene_id;
    std::string listener_id;
    std::string system_id;
    /// Percent of words correct, [0, 100].
    double correctness = 0.0;
    int partition = 1;
    Split split = Split::Eval;
    std::string processed_path;
    std::optional<std::string> reference_path;
    /// Keys not named by the mapping, kept verbatim.
    std::map<std::string, nlohmann::json> extras;

    double intelligibility() const { return correctness / 100.0; }
};

struct MetadataOptions
{
    FieldMapping fields;
    /// Used when a record carries no partition / split key.
    int default_partition = 1;
    Split default_split = Split::Eval;
};

inline FieldMapping load_field_mapping(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError(fmt::format("cannot open field mapping '{}'", path.string()));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(fmt::format("field mapping '{}': {}", path.string(), e.what()));
    }
    if (!j.is_object())
        throw FormatError(fmt::format("field mapping '{}' must be a JSON object", path.string()));

    FieldMapping m;
    const std::map<std::string, std::string*> slots = {
        {"signal_id", &m.signal_id},           {"scene_id", &m.scene_id},
        {"listener_id", &m.listener_id},       {"system_id", &m.system_id},
        {"correctness", &m.correctness},       {"partition", &m.partition},
        {"split", &m.split},                   {"processed_path", &m.processed_path},
        {"reference_path", &m.reference_path},
    };
    for (const auto& [key, value] : j.items()) {
        auto it = slots.find(key);
        if (it == slots.end())
            throw FormatError(fmt::format("field mapping '{}': unknown field '{}'", path.string(), key));
        if (!value.is_string())
            throw FormatError(fmt::format("field mapping '{}': '{}' must map to a string", path.string(), key));
        *it->second = value.get<std::string>();
    }
    return m;
}

namespace detail {

inline std::string json_text(const nlohmann::json& v)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_number_integer())
        return std::to_string(v.get<long long>());
    return v.dump();
}

} // namespace detail

/// Parses an already-loaded metadata array.
inline std::vector<SignalRecord> parse_metadata(const nlohmann::json& j, const MetadataOptions& opts = {},
                                                const std::string& source = "metadata")
{
    if (!j.is_array())
        throw FormatError(fmt::format("{}: expected a JSON array", source));
    const auto& f = opts.fields;
    const std::set<std::string> known = {f.signal_id, f.scene_id,  f.listener_id,    f.system_id,     f.correctness,
                                         f.partition, f.split, f.processed_path, f.reference_path};

    std::vector<SignalRecord> out;
    out.reserve(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) {
        const auto& o = j[k];
        if (!o.is_object())
            throw FormatError(fmt::format("{}: entry at index {} is not an object", source, k));
        auto require = [&](const std::string& key) -> const nlohmann::json& {
            if (!o.contains(key))
                throw FormatError(fmt::format("{}: field {} absent at index {}", source, key, k));
            return o.at(key);
        };

        SignalRecord r;
        r.signal_id = detail::json_text(require(f.signal_id));
        r.listener_id = detail::json_text(require(f.listener_id));
        const auto& corr = require(f.correctness);
        if (!corr.is_number())
            throw FormatError(fmt::format("{}: field {} at index {} is not a number", source, f.correctness, k));
        r.correctness = corr.get<double>();
        if (!(r.correctness >= 0.0 && r.correctness <= 100.0))
            throw ValidationError(fmt::format("{}: correctness {} at index {} outside [0, 100]", source,
                                              r.correctness, k));
        if (o.contains(f.scene_id))
            r.scene_id = detail::json_text(o.at(f.scene_id));
        if (o.contains(f.system_id))
            r.system_id = detail::json_text(o.at(f.system_id));
        if (o.contains(f.processed_path))
            r.processed_path = detail::json_text(o.at(f.processed_path));
        if (o.contains(f.reference_path) && !o.at(f.reference_path).is_null())
            r.reference_path = detail::json_text(o.at(f.reference_path));

        r.partition = opts.default_partition;
        if (o.contains(f.partition)) {
            const auto& p = o.at(f.partition);
            if (p.is_number_integer())
                r.partition = p.get<int>();
            else if (p.is_string() && p.get<std::string>().size() == 1)
                r.partition = p.get<std::string>()[0] - '0';
            else
                r.partition = 0;
        }
        if (r.partition < 1 || r.partition > 3)
            throw ValidationError(fmt::format("{}: partition at index {} must be 1, 2 or 3", source, k));

        r.split = opts.default_split;
        if (o.contains(f.split)) {
            const auto s = o.at(f.split).is_string() ? parse_split(o.at(f.split).get<std::string>()) : std::nullopt;
            if (!s)
                throw ValidationError(fmt::format("{}: split at index {} must be \"train\" or \"eval\"", source, k));
            r.split = *s;
        }

        for (const auto& [key, value] : o.items())
            if (!known.count(key))
                r.extras.emplace(key, value);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<SignalRecord> load_metadata(const std::filesystem::path& path, const MetadataOptions& opts = {})
{
    std::ifstream in(path);
    if (!in)
        throw IoError(fmt::format("cannot open metadata '{}'", path.string()));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(fmt::format("metadata '{}': {}", path.string(), e.what()));
    }
    return parse_metadata(j, opts, path.string());
}

inline nlohmann::json serialize_metadata(const std::vector<SignalRecord>& records, const FieldMapping& f = {})
{
    auto arr = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json o;
        for (const auto& [key, value] : r.extras)
            o[key] = value;
        o[f.signal_id] = r.signal_id;
        o[f.scene_id] = r.scene_id;
        o[f.listener_id] = r.listener_id;
        o[f.system_id] = r.system_id;
        o[f.correctness] = r.correctness;
        o[f.partition] = r.partition;
        o[f.split] = to_string(r.split);
        o[f.processed_path] = r.processed_path;
        if (r.reference_path)
            o[f.reference_path] = *r.reference_path;
        arr.push_back(std::move(o));
    }
    return arr;
}

// ---------------------------------------------------------------------------
// Predictions and joins
// ---------------------------------------------------------------------------

struct Prediction
{
    std::string utterance_id;
    double score = 0.0;
};

inline std::string format_predictions(const std::vector<Prediction>& preds)
{
    std::string out = "utterance_id,score\n";
    for (const auto& p : preds)
        out += csv::join_row({p.utterance_id, fmt::format("{:.6f}", p.score)});
    return out;
}

inline void write_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path)
{
    csv::write_text(path, format_predictions(preds));
}

inline std::vector<Prediction> read_predictions(const std::filesystem::path& path)
{
    const auto t = csv::read(path);
    const auto c_id = t.column("utterance_id");
    const auto c_score = t.column("score");
    std::vector<Prediction> out;
    for (const auto& row : t.rows)
        out.push_back({row[c_id], csv::to_double(row[c_score], t.source)});
    return out;
}

struct JoinedRow
{
    std::string subset;
    std::string utterance_id;
    Split split = Split::Eval;
    double score = 0.0;
    double truth = 0.0;

    friend bool operator==(const JoinedRow&, const JoinedRow&) = default;
};

struct JoinResult
{
    std::vector<JoinedRow> rows;
    std::vector<std::string> unmatched_records;
    std::vector<std::string> unmatched_predictions;
};

/// Inner join on signal id. Rows follow record order; subset is the partition number.
inline JoinResult join_predictions(const std::vector<SignalRecord>& records, const std::vector<Prediction>& preds)
{
    std::unordered_map<std::string, double> by_id;
    for (const auto& p : preds)
        if (!by_id.emplace(p.utterance_id, p.score).second)
            throw ValidationError(fmt::format("duplicate prediction id '{}'", p.utterance_id));

    JoinResult res;
    std::set<std::string> used;
    for (const auto& r : records) {
        auto it = by_id.find(r.signal_id);
        if (it == by_id.end()) {
            res.unmatched_records.push_back(r.signal_id);
            continue;
        }
        used.insert(r.signal_id);
        res.rows.push_back({std::to_string(r.partition), r.signal_id, r.split, it->second, r.intelligibility()});
    }
    for (const auto& p : preds)
        if (!used.count(p.utterance_id))
            res.unmatched_predictions.push_back(p.utterance_id);
    return res;
}

} // namespace intellipred
