// vrleak command-line driver.
//
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include "vrleak/vrleak.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace vrleak;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoFailure, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(Errc::ParseError, path.string() + ": " + e.what());
    }
}

/// Schema from --schema, else <dir>/schema.json, else the writer's default layout.
ColumnSchema resolve_schema(const fs::path& input, const std::string& schema_path) {
    if (!schema_path.empty()) return read_schema_file(schema_path);
    if (fs::is_directory(input) && fs::exists(input / "schema.json")) return read_schema_file(input / "schema.json");
    ColumnSchema s;
    s.time = "t";
    for (auto k : kAllStreams) s.streams[index_of(k)] = default_columns(k, 3);
    return s;
}

Dataset load_input(const fs::path& input, const std::string& schema_path) {
    return filter_subjects(load_dataset(input, resolve_schema(input, schema_path)));
}

/// --config accepts a privacy object or a run config with a "privacy" member.
PrivacyConfig privacy_from(const std::string& config_path) {
    if (config_path.empty()) return {};
    const auto j = read_json_file(config_path);
    return privacy_config_from_json(j.contains("privacy") ? j.at("privacy") : j);
}

ReportFormat parse_format(const std::string& f) {
    if (f == "json") return ReportFormat::Json;
    if (f == "csv") return ReportFormat::Csv;
    fail(Errc::InvalidConfig, "unknown format '" + f + "'");
}

void print_summary_table(const Report& r, std::ostream& os) {
    int w = 5;
    for (const auto& e : r.results) w = std::max(w, static_cast<int>(e.experiment_id.size()) + 1);
    char line[320];
    std::snprintf(line, sizeof line, "%-*s %-11s %-11s %-11s %-15s %-15s %s\n", w, "id", "gaze", "head", "hands",
                  "EER%", "IR%", "chance IR%");
    os << line;
    for (const auto& e : r.results) {
        std::snprintf(line, sizeof line, "%-*s %-11s %-11s %-11s %6.2f +- %-6.2f %6.2f +- %-6.2f %6.2f\n", w,
                      e.experiment_id.substr(0, 200).c_str(), std::string(to_string(e.gaze)).c_str(),
                      std::string(to_string(e.head)).c_str(), std::string(to_string(e.hands)).c_str(),
                      e.summary.eer_pct.mean, e.summary.eer_pct.std, e.summary.rank1_ir_pct.mean,
                      e.summary.rank1_ir_pct.std, e.chance.ir_pct);
        os << line;
    }
}

struct RunArgs {
    std::string input, schema, config, matrix, experiment, spec_file, out, format = "json", gallery = "population";
    std::uint64_t seed = 7;
    std::size_t folds = 4;
    unsigned threads = 1;
};

std::vector<ExperimentSpec> select_specs(const RunArgs& a, const PrivacyConfig& privacy) {
    if (!a.spec_file.empty()) {
        const auto j = read_json_file(a.spec_file);
        std::vector<ExperimentSpec> specs;
        if (j.is_array())
            for (const auto& e : j) specs.push_back(experiment_spec_from_json(e, privacy, a.seed));
        else
            specs.push_back(experiment_spec_from_json(j, privacy, a.seed));
        return specs;
    }
    auto matrix = build_standard_matrix(a.seed, privacy);
    if (!a.experiment.empty()) {
        for (const auto& s : matrix)
            if (s.experiment_id == a.experiment) return {s};
        fail(Errc::InvalidConfig, "unknown experiment '" + a.experiment + "' (expected E01..E20)");
    }
    if (!a.matrix.empty() && a.matrix != "standard") fail(Errc::InvalidConfig, "unknown matrix '" + a.matrix + "'");
    return matrix;
}

RunOptions run_options(const RunArgs& a) {
    RunOptions o;
    o.k = a.folds;
    o.gallery = parse_gallery_scope(a.gallery);
    o.threads = a.threads == 0 ? default_thread_count() : a.threads;
    return o;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Re-identification leakage analysis for VR gaze and motion telemetry"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "vrleak 1.0");

    // synth
    GeneratorConfig gen;
    std::string synth_out, synth_config;
    unsigned synth_threads = 1;
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic population as CSV");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--config", synth_config, "Generator config JSON (flags override it)");
    auto* o_subjects = synth->add_option("--subjects", gen.n_subjects, "Number of subjects");
    auto* o_sessions = synth->add_option("--sessions", gen.sessions_per_subject, "Sessions per subject");
    auto* o_duration = synth->add_option("--duration", gen.session_duration_s, "Session length in seconds");
    auto* o_strength = synth->add_option("--strength", gen.identity_strength, "Identity strength in [0, 1]");
    auto* o_gseed = synth->add_option("--seed", gen.seed, "Generator seed");
    synth->add_option("--threads", synth_threads, "Worker threads");

    // ingest
    std::string ingest_input, ingest_schema, ingest_out;
    auto* ingest = app.add_subcommand("ingest", "Load CSV telemetry, apply inclusion rules, rewrite canonically");
    ingest->add_option("--input", ingest_input, "CSV file or directory")->required();
    ingest->add_option("--schema", ingest_schema, "Column schema JSON");
    ingest->add_option("--out", ingest_out, "Output directory (omit to only validate)");

    // privatize
    std::string priv_input, priv_schema, priv_out, priv_config;
    bool priv_gaze = false, priv_motion = false;
    std::optional<std::uint64_t> priv_noise_seed;
    auto* privatize = app.add_subcommand("privatize", "Apply the gaze and/or motion privacy mechanisms");
    privatize->add_option("--input", priv_input, "Dataset directory or CSV")->required();
    privatize->add_option("--schema", priv_schema, "Column schema JSON");
    privatize->add_option("--out", priv_out, "Output directory")->required();
    privatize->add_option("--config", priv_config, "Privacy config JSON");
    privatize->add_flag("--gaze", priv_gaze, "Smooth the gaze stream");
    privatize->add_flag("--motion", priv_motion, "Perturb head and hand positions");
    privatize->add_option("--noise-seed", priv_noise_seed, "Noise seed (overrides the config)");

    // run
    RunArgs ra;
    auto* run = app.add_subcommand("run", "Evaluate experiments with subject-disjoint cross-validation");
    run->add_option("--input", ra.input, "Dataset directory or CSV")->required();
    run->add_option("--schema", ra.schema, "Column schema JSON");
    run->add_option("--config", ra.config, "Privacy config JSON");
    run->add_option("--matrix", ra.matrix, "Experiment matrix (standard)");
    run->add_option("--experiment", ra.experiment, "Single experiment id, e.g. E15");
    run->add_option("--spec", ra.spec_file, "Experiment spec JSON (object or array)");
    run->add_option("--seed", ra.seed, "Fold seed");
    run->add_option("--folds", ra.folds, "Number of folds");
    run->add_option("--gallery", ra.gallery, "population | test_fold");
    run->add_option("--threads", ra.threads, "Worker threads (0 = all cores)");
    run->add_option("--out", ra.out, "Report path (omit for stdout table)");
    run->add_option("--format", ra.format, "json | csv");

    // report
    std::string rep_input, rep_out, rep_format = "table";
    auto* report = app.add_subcommand("report", "Convert a JSON report to CSV or a summary table");
    report->add_option("--input", rep_input, "Report JSON")->required();
    report->add_option("--format", rep_format, "table | csv | json");
    report->add_option("--out", rep_out, "Output path (omit for stdout)");

    // roc
    RunArgs roc_args;
    auto* roc = app.add_subcommand("roc", "Export the pooled ROC curve of one experiment");
    roc->add_option("--input", roc_args.input, "Dataset directory or CSV")->required();
    roc->add_option("--schema", roc_args.schema, "Column schema JSON");
    roc->add_option("--config", roc_args.config, "Privacy config JSON");
    roc->add_option("--experiment", roc_args.experiment, "Experiment id")->required();
    roc->add_option("--seed", roc_args.seed, "Fold seed");
    roc->add_option("--folds", roc_args.folds, "Number of folds");
    roc->add_option("--gallery", roc_args.gallery, "population | test_fold");
    roc->add_option("--out", roc_args.out, "CSV path (omit for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*synth) {
            if (!synth_config.empty()) {
                const GeneratorConfig file = generator_config_from_json(read_json_file(synth_config));
                if (!*o_subjects) gen.n_subjects = file.n_subjects;
                if (!*o_sessions) gen.sessions_per_subject = file.sessions_per_subject;
                if (!*o_duration) gen.session_duration_s = file.session_duration_s;
                if (!*o_strength) gen.identity_strength = file.identity_strength;
                if (!*o_gseed) gen.seed = file.seed;
            }
            validate(gen);
            const Dataset d = generate_population(gen, synth_threads);
            write_dataset(d, synth_out);
            std::ofstream(fs::path(synth_out) / "generator.json") << to_json(gen).dump(2) << '\n';
            std::cout << "wrote " << d.size() << " recordings of " << d.subject_count() << " subjects to "
                      << synth_out << '\n';
        } else if (*ingest) {
            const Dataset raw = load_dataset(ingest_input, resolve_schema(ingest_input, ingest_schema));
            const Dataset kept = filter_subjects(raw);
            if (kept.empty()) fail(Errc::EmptyDataset, "no subject meets the inclusion rules");
            std::cout << "loaded " << raw.subject_count() << " subjects (" << raw.size() << " recordings); kept "
                      << kept.subject_count() << " with >= 2 sessions of >= 15 s\n";
            if (!ingest_out.empty()) write_dataset(kept, ingest_out);
        } else if (*privatize) {
            PrivacyConfig cfg = privacy_from(priv_config);
            cfg.gaze_private = cfg.gaze_private || priv_gaze;
            cfg.motion_private = cfg.motion_private || priv_motion;
            if (priv_noise_seed) cfg.noise_seed = *priv_noise_seed;
            validate(cfg);
            const Dataset d = apply_privacy(load_input(priv_input, priv_schema), cfg);
            write_dataset(d, priv_out);
            std::ofstream(fs::path(priv_out) / "privacy.json") << to_json(cfg).dump(2) << '\n';
            std::cout << "privatized " << d.size() << " recordings (gaze " << (cfg.gaze_private ? "on" : "off")
                      << ", motion " << (cfg.motion_private ? "on" : "off") << ")\n";
        } else if (*run) {
            const PrivacyConfig privacy = privacy_from(ra.config);
            const auto specs = select_specs(ra, privacy);
            const RunOptions opts = run_options(ra);
            const Dataset d = load_input(ra.input, ra.schema);
            const Report r = run_matrix(d, specs, opts);
            if (ra.out.empty())
                print_summary_table(r, std::cout);
            else
                emit_report(r, parse_format(ra.format), ra.out);
        } else if (*report) {
            const Report r = read_report_json(rep_input);
            std::ofstream file;
            if (!rep_out.empty()) {
                file.open(rep_out);
                if (!file) fail(Errc::IoFailure, "cannot write " + rep_out);
            }
            std::ostream& os = rep_out.empty() ? std::cout : file;
            if (rep_format == "table")
                print_summary_table(r, os);
            else if (rep_format == "csv")
                write_report_csv(r, os);
            else if (rep_format == "json")
                os << to_json(r).dump(2) << '\n';
            else
                fail(Errc::InvalidConfig, "unknown format '" + rep_format + "'");
        } else if (*roc) {
            const auto specs = select_specs(roc_args, privacy_from(roc_args.config));
            const Dataset d = load_input(roc_args.input, roc_args.schema);
            const auto result = run_experiment(d, specs.front(), run_options(roc_args));
            const auto curve = compute_roc(pooled_scores(result));
            if (roc_args.out.empty()) {
                write_roc_csv(curve, std::cout);
            } else {
                std::ofstream out(roc_args.out);
                if (!out) fail(Errc::IoFailure, "cannot write " + roc_args.out);
                write_roc_csv(curve, out);
            }
        }
    } catch (const Error& e) {
        std::cerr << "vrleak: " << e.what() << '\n';
        return is_config_error(e.code()) ? kExitConfig : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "vrleak: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
