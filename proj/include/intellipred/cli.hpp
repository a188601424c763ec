#pragma once

#include "intellipred/calibration.hpp"
#include "intellipred/corpus.hpp"
#include "intellipred/cpc2.hpp"
#include "intellipred/csv.hpp"
#include "intellipred/error.hpp"
#include "intellipred/interchange.hpp"
#include "intellipred/intrusive.hpp"
#include "intellipred/metrics.hpp"
#include "intellipred/nonintrusive.hpp"
#include "intellipred/parallel.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace intellipred::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2 };

/// Parsed command line; only the fields of the selected subcommand are meaningful.
struct RunConfig
{
    std::string subcommand;

    // simulate
    fs::path spec;
    std::optional<std::uint64_t> seed;
    std::optional<double> snr_low, snr_high;
    std::optional<fs::path> weighting;
    std::optional<std::string> channel;
    std::optional<fs::path> out_dir;
    std::optional<fs::path> manifest;

    // predict-*
    fs::path pairs;
    std::optional<std::size_t> band;
    bool length_norm = false;

    // fit-map / apply-map / evaluate
    std::optional<fs::path> input;
    std::optional<fs::path> output;
    std::optional<fs::path> metadata;
    std::optional<fs::path> predictions;
    std::optional<fs::path> params;
    std::optional<fs::path> params_dir;
    std::optional<fs::path> field_map;
    bool per_partition = true;
    std::string split = "eval";
    std::string label;

    // validate-interchange
    std::vector<fs::path> files;
    std::string kind = "auto";

    std::optional<unsigned> jobs;
};

inline unsigned resolve_jobs(const RunConfig& cfg)
{
    if (cfg.jobs)
        return std::max(1u, *cfg.jobs);
    if (const char* env = std::getenv("INTELLIPRED_JOBS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1)
                return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw ValidationError(fmt::format("INTELLIPRED_JOBS must be a positive integer, got '{}'", env));
    }
    return 1;
}

namespace detail {

inline fs::path relative_to(const fs::path& base_file, const std::string& p)
{
    fs::path path(p);
    return path.is_absolute() ? path : base_file.parent_path() / path;
}

inline void emit(const std::optional<fs::path>& path, const std::string& text, std::ostream& out)
{
    if (path)
        csv::write_text(*path, text);
    else
        out << text;
}

inline std::string partition_params_name(const std::string& subset) { return fmt::format("params_p{}.json", subset); }

inline MappingParams mapping_for(const fs::path& dir, const std::string& subset)
{
    const auto own = dir / partition_params_name(subset);
    if (fs::exists(own))
        return load_params(own);
    const auto global = dir / "params_global.json";
    if (fs::exists(global))
        return load_params(global);
    throw IoError(fmt::format("no mapping for partition {} in '{}'", subset, dir.string()));
}

inline MetadataOptions metadata_options(const RunConfig& cfg)
{
    MetadataOptions opts;
    if (cfg.field_map)
        opts.fields = load_field_mapping(*cfg.field_map);
    return opts;
}

inline JoinResult load_and_join(const RunConfig& cfg, std::ostream& err)
{
    const auto records = load_metadata(*cfg.metadata, metadata_options(cfg));
    const auto preds = read_predictions(*cfg.predictions);
    auto joined = join_predictions(records, preds);
    err << fmt::format("joined {} rows; {} records without prediction, {} predictions without record\n",
                       joined.rows.size(), joined.unmatched_records.size(), joined.unmatched_predictions.size());
    return joined;
}

} // namespace detail

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    auto spec = load_simulation_spec(cfg.spec);
    if (cfg.seed)
        spec.seed = *cfg.seed;
    if (cfg.snr_low)
        spec.snr_low = *cfg.snr_low;
    if (cfg.snr_high)
        spec.snr_high = *cfg.snr_high;
    if (cfg.weighting)
        spec.weighting = load_weighting(*cfg.weighting);
    if (cfg.channel)
        spec.channel = *parse_channel_select(*cfg.channel);
    if (cfg.out_dir)
        spec.output_dir = *cfg.out_dir;
    if (spec.output_dir.empty())
        throw ValidationError("no output directory (set output_dir in the spec or pass --out-dir)");
    spec.jobs = resolve_jobs(cfg);

    const auto entries = simulate_corpus(spec);
    const auto manifest = cfg.manifest ? *cfg.manifest : spec.output_dir / "manifest.csv";
    write_manifest(entries, manifest);
    err << fmt::format("simulated {} utterances into '{}'\n", entries.size(), spec.output_dir.string());
    (void)out;
    return kOk;
}

inline int cmd_predict_intrusive(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    const auto table = csv::read(cfg.pairs);
    const auto c_id = table.column("utterance_id");
    const auto c_ref = table.column("ref_repr_path");
    const auto c_proc = table.column("proc_repr_path");

    std::vector<Prediction> preds(table.rows.size());
    std::vector<std::string> warnings(table.rows.size());
    DtwOptions opts;
    opts.band = cfg.band;
    parallel_for(table.rows.size(), resolve_jobs(cfg), [&](std::size_t i) {
        const auto& row = table.rows[i];
        const auto ref = read_repr(detail::relative_to(cfg.pairs, row[c_ref]));
        const auto proc = read_repr(detail::relative_to(cfg.pairs, row[c_proc]));
        if (ref.layer != proc.layer)
            warnings[i] = fmt::format("warning: {}: layer tags differ ('{}' vs '{}')\n", row[c_id], ref.layer,
                                      proc.layer);
        try {
            preds[i] = {row[c_id], intrusive_score(ref, proc, opts)};
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("utterance '{}': {}", row[c_id], e.what()));
        }
    });
    for (const auto& w : warnings)
        err << w;
    detail::emit(cfg.output, format_predictions(preds), out);
    return kOk;
}

inline int cmd_predict_nonintrusive(const RunConfig& cfg, std::ostream& out, std::ostream&)
{
    const auto table = csv::read(cfg.pairs);
    const auto c_id = table.column("utterance_id");
    const auto c_beam = table.column("beam_path");

    EntropyOptions opts;
    opts.length_norm = cfg.length_norm;
    std::vector<Prediction> preds(table.rows.size());
    parallel_for(table.rows.size(), resolve_jobs(cfg), [&](std::size_t i) {
        const auto& row = table.rows[i];
        const auto beam = read_beam(detail::relative_to(cfg.pairs, row[c_beam]));
        preds[i] = {row[c_id], negative_entropy(beam, opts)};
    });
    detail::emit(cfg.output, format_predictions(preds), out);
    return kOk;
}

inline int cmd_fit_map(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    if (cfg.input) {
        const auto t = csv::read(*cfg.input);
        const auto c_score = t.column("score");
        const auto c_int = t.column("intelligibility");
        std::vector<CalibrationPair> pairs;
        for (const auto& row : t.rows)
            pairs.push_back({csv::to_double(row[c_score], t.source), csv::to_double(row[c_int], t.source)});
        const auto rep = fit_logistic_report(pairs);
        err << fmt::format("fit a={:.6g} b={:.6g} mse={:.6g} (grid mse {:.6g}, {} iterations)\n", rep.params.a,
                           rep.params.b, rep.mse, rep.grid_mse, rep.iterations);
        detail::emit(cfg.output, format_params(rep.params), out);
        return kOk;
    }

    if (!cfg.metadata || !cfg.predictions || !cfg.out_dir)
        throw ValidationError("fit-map needs --input, or --metadata with --predictions and --out-dir");
    const auto joined = detail::load_and_join(cfg, err);
    std::map<std::string, std::vector<CalibrationPair>> groups;
    for (const auto& r : joined.rows)
        if (r.split == Split::Train)
            groups[cfg.per_partition ? r.subset : std::string("global")].push_back({r.score, r.truth});
    if (groups.empty())
        throw ValidationError("no training rows after the join");

    fs::create_directories(*cfg.out_dir);
    for (const auto& [key, pairs] : groups) {
        MappingParams p;
        try {
            p = fit_logistic(pairs);
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("partition {}: {}", key, e.what()));
        }
        const auto name = cfg.per_partition ? detail::partition_params_name(key) : std::string("params_global.json");
        save_params(p, *cfg.out_dir / name);
        err << fmt::format("{}: a={:.6g} b={:.6g} from {} pairs\n", name, p.a, p.b, pairs.size());
    }
    return kOk;
}

inline int cmd_apply_map(const RunConfig& cfg, std::ostream& out, std::ostream&)
{
    auto preds = read_predictions(*cfg.input);
    if (cfg.params) {
        const auto p = load_params(*cfg.params);
        for (auto& q : preds)
            q.score = logistic_apply(p, q.score);
    } else if (cfg.params_dir && cfg.metadata) {
        const auto records = load_metadata(*cfg.metadata, detail::metadata_options(cfg));
        std::map<std::string, int> partition_of;
        for (const auto& r : records)
            partition_of.emplace(r.signal_id, r.partition);
        std::map<int, MappingParams> cache;
        for (auto& q : preds) {
            auto it = partition_of.find(q.utterance_id);
            if (it == partition_of.end())
                throw ValidationError(fmt::format("prediction '{}' has no metadata record", q.utterance_id));
            if (!cache.count(it->second))
                cache[it->second] = detail::mapping_for(*cfg.params_dir, std::to_string(it->second));
            q.score = logistic_apply(cache[it->second], q.score);
        }
    } else {
        throw ValidationError("apply-map needs --params, or --params-dir with --metadata");
    }
    detail::emit(cfg.output, format_predictions(preds), out);
    return kOk;
}

inline int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    std::map<std::string, std::vector<PredictionPair>> subsets;
    if (cfg.input) {
        const auto t = csv::read(*cfg.input);
        const auto c_sub = t.column("subset");
        const auto c_pred = t.column("pred");
        const auto c_truth = t.column("truth");
        t.column("utterance_id");
        for (const auto& row : t.rows)
            subsets[row[c_sub]].push_back({csv::to_double(row[c_pred], t.source), csv::to_double(row[c_truth], t.source)});
    } else if (cfg.metadata && cfg.predictions) {
        const auto split = parse_split(cfg.split);
        if (!split)
            throw ValidationError("--split must be train or eval");
        const auto joined = detail::load_and_join(cfg, err);
        std::map<std::string, MappingParams> maps;
        for (const auto& r : joined.rows) {
            if (r.split != *split)
                continue;
            double pred = r.score;
            if (cfg.params_dir) {
                if (!maps.count(r.subset))
                    maps[r.subset] = detail::mapping_for(*cfg.params_dir, r.subset);
                pred = logistic_apply(maps[r.subset], pred);
            } else if (cfg.params) {
                if (!maps.count(""))
                    maps[""] = load_params(*cfg.params);
                pred = logistic_apply(maps[""], pred);
            }
            subsets[r.subset].push_back({pred, r.truth});
        }
    } else {
        throw ValidationError("evaluate needs --input, or --metadata with --predictions");
    }
    if (subsets.empty())
        throw ValidationError("nothing to evaluate");

    const auto reports = evaluate(subsets);
    out << format_report_table({{cfg.label, reports}});
    if (cfg.output)
        csv::write_text(*cfg.output, format_report_csv(reports));
    return kOk;
}

inline int cmd_validate_interchange(const RunConfig& cfg, std::ostream& out, std::ostream&)
{
    std::size_t bad = 0;
    for (const auto& f : cfg.files) {
        InterchangeKind kind = guess_kind(f);
        if (cfg.kind == "repr")
            kind = InterchangeKind::Representation;
        else if (cfg.kind == "beam")
            kind = InterchangeKind::Beam;
        const auto findings = inspect_interchange(f, kind);
        if (findings.empty()) {
            out << "OK   " << f.string() << "\n";
            continue;
        }
        ++bad;
        for (const auto& msg : findings)
            out << "FAIL " << f.string() << ": " << msg << "\n";
    }
    return bad == 0 ? kOk : kValidation;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Intelligibility prediction toolkit: simulate noisy corpora, score ASR exports, calibrate, evaluate",
                 "intellipred"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_jobs = [&](CLI::App* sub) {
        sub->add_option("--jobs", cfg.jobs, "Worker threads (fallback: INTELLIPRED_JOBS, else 1)")
            ->check(CLI::PositiveNumber);
    };

    auto* sim = app.add_subcommand("simulate", "Generate a reverberant noisy corpus from a JSON spec");
    sim->add_option("--spec", cfg.spec, "Simulation spec (JSON)")->required()->check(CLI::ExistingFile);
    sim->add_option("--seed", cfg.seed, "Override the spec seed");
    sim->add_option("--snr-low", cfg.snr_low, "Lower SNR bound in dB");
    sim->add_option("--snr-high", cfg.snr_high, "Upper SNR bound in dB");
    sim->add_option("--weighting", cfg.weighting, "Weighting filter coefficient file")->check(CLI::ExistingFile);
    sim->add_option("--channel", cfg.channel, "Stereo reduction")->check(CLI::IsMember({"left", "right", "mean"}));
    sim->add_option("--out-dir", cfg.out_dir, "Override the spec output directory");
    sim->add_option("--manifest", cfg.manifest, "Manifest CSV path (default <out-dir>/manifest.csv)");
    add_jobs(sim);

    auto* pin = app.add_subcommand("predict-intrusive", "Score reference/processed representation pairs");
    pin->add_option("--pairs", cfg.pairs, "CSV utterance_id,ref_repr_path,proc_repr_path")
        ->required()
        ->check(CLI::ExistingFile);
    pin->add_option("--out", cfg.output, "Predictions CSV (default stdout)");
    pin->add_option("--band", cfg.band, "Sakoe-Chiba half-width (default unconstrained)");
    add_jobs(pin);

    auto* pni = app.add_subcommand("predict-nonintrusive", "Negative beam entropy per utterance");
    pni->add_option("--pairs", cfg.pairs, "CSV utterance_id,beam_path")->required()->check(CLI::ExistingFile);
    pni->add_option("--out", cfg.output, "Predictions CSV (default stdout)");
    pni->add_flag("--length-norm", cfg.length_norm, "Divide hypothesis scores by token count");
    add_jobs(pni);

    auto* fit = app.add_subcommand("fit-map", "Fit the logistic mapping on training data");
    fit->add_option("--input", cfg.input, "CSV utterance_id,score,intelligibility")->check(CLI::ExistingFile);
    fit->add_option("--out", cfg.output, "Params JSON for --input mode (default stdout)");
    fit->add_option("--metadata", cfg.metadata, "Listener metadata (JSON array)")->check(CLI::ExistingFile);
    fit->add_option("--predictions", cfg.predictions, "Predictions CSV")->check(CLI::ExistingFile);
    fit->add_option("--out-dir", cfg.out_dir, "Directory for params_p<k>.json / params_global.json");
    fit->add_flag("--per-partition,!--global", cfg.per_partition, "One mapping per partition (default) or one global");
    fit->add_option("--field-map", cfg.field_map, "Metadata field-name mapping (JSON)")->check(CLI::ExistingFile);

    auto* apply = app.add_subcommand("apply-map", "Map raw scores through fitted parameters");
    apply->add_option("--input", cfg.input, "Predictions CSV")->required()->check(CLI::ExistingFile);
    apply->add_option("--out", cfg.output, "Mapped predictions CSV (default stdout)");
    apply->add_option("--params", cfg.params, "Params JSON")->check(CLI::ExistingFile);
    apply->add_option("--params-dir", cfg.params_dir, "Directory written by fit-map")->check(CLI::ExistingDirectory);
    apply->add_option("--metadata", cfg.metadata, "Metadata giving each utterance's partition")
        ->check(CLI::ExistingFile);
    apply->add_option("--field-map", cfg.field_map, "Metadata field-name mapping (JSON)")->check(CLI::ExistingFile);

    auto* ev = app.add_subcommand("evaluate", "RMSE, NCC and Kendall tau per subset");
    ev->add_option("--input", cfg.input, "CSV subset,utterance_id,pred,truth")->check(CLI::ExistingFile);
    ev->add_option("--metadata", cfg.metadata, "Listener metadata (JSON array)")->check(CLI::ExistingFile);
    ev->add_option("--predictions", cfg.predictions, "Raw predictions CSV")->check(CLI::ExistingFile);
    ev->add_option("--params", cfg.params, "Single mapping applied to every subset")->check(CLI::ExistingFile);
    ev->add_option("--params-dir", cfg.params_dir, "Per-partition mappings from fit-map")
        ->check(CLI::ExistingDirectory);
    ev->add_option("--split", cfg.split, "Which split to evaluate (default eval)")
        ->check(CLI::IsMember({"train", "eval"}));
    ev->add_option("--label", cfg.label, "Group banner for the text table (e.g. Intrusive)");
    ev->add_option("--out", cfg.output, "Also write the report CSV here");
    ev->add_option("--field-map", cfg.field_map, "Metadata field-name mapping (JSON)")->check(CLI::ExistingFile);

    auto* val = app.add_subcommand("validate-interchange", "Check representation / beam files");
    val->add_option("files", cfg.files, "Files to check")->required()->check(CLI::ExistingFile);
    val->add_option("--kind", cfg.kind, "auto (by extension), repr or beam")
        ->check(CLI::IsMember({"auto", "repr", "beam"}));

    for (auto* sub : {sim, pin, pni, fit, apply, ev, val})
        sub->callback([&cfg, sub] { cfg.subcommand = sub->get_name(); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kValidation;
    }

    try {
        if (cfg.subcommand == "simulate")
            return cmd_simulate(cfg, out, err);
        if (cfg.subcommand == "predict-intrusive")
            return cmd_predict_intrusive(cfg, out, err);
        if (cfg.subcommand == "predict-nonintrusive")
            return cmd_predict_nonintrusive(cfg, out, err);
        if (cfg.subcommand == "fit-map")
            return cmd_fit_map(cfg, out, err);
        if (cfg.subcommand == "apply-map")
            return cmd_apply_map(cfg, out, err);
        if (cfg.subcommand == "evaluate")
            return cmd_evaluate(cfg, out, err);
        if (cfg.subcommand == "validate-interchange")
            return cmd_validate_interchange(cfg, out, err);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    err << app.help();
    return kValidation;
}

} // namespace intellipred::cli
