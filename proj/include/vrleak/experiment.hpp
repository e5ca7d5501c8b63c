#pragma once

// The E01-E20 experiment matrix: which streams an adversary sees, and whether
// each one was privatized, evaluated with subject-disjoint k-fold
// cross-validation.
//
// Per fold:
//   * privacy is applied to every recording (anthropometrics come from each
//     subject's unprivatized first session);
//   * gaze norm stats and the embedder are fit on train-subject windows only;
//   * the gallery holds one session-1 template per enrolled subject (every
//     subject by default, or only the test fold);
//   * probes are the test subjects' session-2 windows; each probe is scored
//     against every template (own = genuine, others = impostor) and ranked.

#include "biometric.hpp"
#include "core_model.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "privacy.hpp"
#include "rng.hpp"
#include "signal_features.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vrleak {

inline constexpr std::string_view kReportSchema = "vrleak.report/1";

enum class StreamState { Unused, Unmodified, Privatized };

constexpr std::string_view to_string(StreamState s) noexcept {
    switch (s) {
    case StreamState::Unused: return "unused";
    case StreamState::Unmodified: return "unmodified";
    case StreamState::Privatized: return "privatized";
    }
    return "?";
}

inline StreamState parse_stream_state(std::string_view s) {
    if (s == "unused" || s == "-") return StreamState::Unused;
    if (s == "unmodified" || s == "o") return StreamState::Unmodified;
    if (s == "privatized" || s == "*") return StreamState::Privatized;
    fail(Errc::InvalidConfig, "unknown stream state '" + std::string(s) + "'");
}

struct ExperimentSpec {
    std::string experiment_id;
    StreamState gaze = StreamState::Unused;
    StreamState head = StreamState::Unused;
    StreamState hands = StreamState::Unused;
    /// Mechanism parameters; the two flags are derived from the states.
    PrivacyConfig privacy;
    std::uint64_t seed = 0;

    ChannelSelection selection() const noexcept {
        return {gaze != StreamState::Unused, head != StreamState::Unused, hands != StreamState::Unused};
    }

    PrivacyConfig effective_privacy() const noexcept {
        PrivacyConfig p = privacy;
        p.gaze_private = gaze == StreamState::Privatized;
        p.motion_private = head == StreamState::Privatized || hands == StreamState::Privatized;
        return p;
    }
};

inline void validate_spec(const ExperimentSpec& spec) {
    if (spec.selection().empty()) fail(Errc::EmptySelection, spec.experiment_id + ": no streams used");
    if (spec.head != StreamState::Unused && spec.hands != StreamState::Unused && spec.head != spec.hands)
        fail(Errc::ParityViolation, spec.experiment_id + ": head and hands must be privatized together");
    validate(spec.effective_privacy());
}

/// E01-E07 unmodified, E08-E14 the same subsets privatized, E15-E20 mixed.
inline std::vector<ExperimentSpec> build_standard_matrix(std::uint64_t seed, const PrivacyConfig& defaults = {}) {
    using S = StreamState;
    struct Row {
        S gaze, head, hands;
    };
    const Row subsets[7] = {{S::Unmodified, S::Unused, S::Unused},     {S::Unused, S::Unmodified, S::Unused},
                            {S::Unused, S::Unused, S::Unmodified},     {S::Unused, S::Unmodified, S::Unmodified},
                            {S::Unmodified, S::Unmodified, S::Unused}, {S::Unmodified, S::Unused, S::Unmodified},
                            {S::Unmodified, S::Unmodified, S::Unmodified}};
    auto privatize = [](S s) { return s == S::Unmodified ? S::Privatized : s; };
    std::vector<Row> rows(std::begin(subsets), std::end(subsets));
    for (const auto& r : subsets) rows.push_back({privatize(r.gaze), privatize(r.head), privatize(r.hands)});
    rows.insert(rows.end(), {{S::Privatized, S::Unmodified, S::Unused},
                             {S::Privatized, S::Unused, S::Unmodified},
                             {S::Privatized, S::Unmodified, S::Unmodified},
                             {S::Unmodified, S::Privatized, S::Unused},
                             {S::Unmodified, S::Unused, S::Privatized},
                             {S::Unmodified, S::Privatized, S::Privatized}});
    std::vector<ExperimentSpec> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        char id[24];
        std::snprintf(id, sizeof id, "E%02zu", i + 1);
        out.push_back({id, rows[i].gaze, rows[i].head, rows[i].hands, defaults, seed});
    }
    return out;
}

enum class GalleryScope { Population, TestFold };

constexpr std::string_view to_string(GalleryScope g) noexcept {
    return g == GalleryScope::Population ? "population" : "test_fold";
}

inline GalleryScope parse_gallery_scope(std::string_view s) {
    if (s == "population") return GalleryScope::Population;
    if (s == "test_fold") return GalleryScope::TestFold;
    fail(Errc::InvalidConfig, "unknown gallery scope '" + std::string(s) + "'");
}

struct RunOptions {
    std::size_t k = 4;
    GalleryScope gallery = GalleryScope::Population;
    unsigned threads = 1;
};

struct FoldAudit {
    std::vector<std::string> train_subjects;
    std::vector<std::string> test_subjects;
    std::vector<std::string> fit_subjects;  // subjects whose windows reached the norm/embedder fit
    std::size_t windows_checked = 0;
    std::size_t nan_windows = 0;

    bool disjoint() const {
        std::vector<std::string> overlap;
        std::set_intersection(fit_subjects.begin(), fit_subjects.end(), test_subjects.begin(), test_subjects.end(),
                              std::back_inserter(overlap));
        std::set_intersection(train_subjects.begin(), train_subjects.end(), test_subjects.begin(),
                              test_subjects.end(), std::back_inserter(overlap));
        return overlap.empty();
    }
};

struct FoldResult {
    std::size_t fold = 0;
    FoldMetrics metrics;
    FoldAudit audit;
    std::size_t gallery_size = 0;
    std::size_t probe_count = 0;
    std::size_t genuine_count = 0;
    std::size_t impostor_count = 0;
    ScoreSet scores;  // empty when read back from a report
    std::vector<IdentificationTrial> trials;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::uint64_t noise_seed = 0;
    std::size_t folds = 0;
    std::string gallery;
    std::string embedder;
    std::string config_hash;
    std::string dataset_fingerprint;
};

struct ExperimentResult {
    std::string experiment_id;
    StreamState gaze = StreamState::Unused;
    StreamState head = StreamState::Unused;
    StreamState hands = StreamState::Unused;
    PrivacyConfig privacy;
    std::vector<FoldResult> folds;
    MetricSummary summary;
    ChanceLevels chance;
    Provenance provenance;
};

struct Report {
    std::string schema{kReportSchema};
    nlohmann::json dataset = nlohmann::json::object();
    std::string timestamp;
    std::vector<ExperimentResult> results;

    const ExperimentResult* find(std::string_view id) const {
        for (const auto& r : results)
            if (r.experiment_id == id) return &r;
        return nullptr;
    }
};

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline nlohmann::json to_json(const ExperimentSpec& s) {
    return {{"experiment_id", s.experiment_id},
            {"gaze_state", to_string(s.gaze)},
            {"head_state", to_string(s.head)},
            {"hand_state", to_string(s.hands)},
            {"privacy", to_json(s.effective_privacy())},
            {"seed", s.seed}};
}

inline ExperimentSpec experiment_spec_from_json(const nlohmann::json& j, const PrivacyConfig& defaults = {},
                                                std::uint64_t default_seed = 0) {
    ExperimentSpec s;
    try {
        s.experiment_id = j.at("experiment_id").get<std::string>();
        s.gaze = parse_stream_state(j.value("gaze_state", std::string("unused")));
        s.head = parse_stream_state(j.value("head_state", std::string("unused")));
        s.hands = parse_stream_state(j.value("hand_state", std::string("unused")));
        s.privacy = j.contains("privacy") ? privacy_config_from_json(j.at("privacy"), defaults) : defaults;
        s.seed = j.value("seed", default_seed);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::InvalidConfig, std::string("experiment spec: ") + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Running

namespace detail {

struct SubjectWindows {
    std::vector<std::vector<ChannelWindow>> sessions;  // raw windows, by session order
};

template <class T>
void append_all(std::vector<T>& dst, const std::vector<T>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

} // namespace detail

template <WindowEmbedder Embedder = StatisticalEmbedder>
ExperimentResult run_experiment(const Dataset& d, const ExperimentSpec& spec, const RunOptions& opts = {},
                                const Embedder& prototype = Embedder{}) {
    validate_spec(spec);
    const ChannelSelection selection = spec.selection();
    const PrivacyConfig privacy = spec.effective_privacy();
    const auto subjects = d.subjects();
    for (const auto& s : subjects)
        if (d.sessions_of(s).size() < 2)
            fail(Errc::InsufficientSessions, "subject " + s + " needs two sessions (run filter_subjects first)");

    const Dataset private_data = apply_privacy(d, privacy);

    std::map<std::string, detail::SubjectWindows> windows;
    {
        const auto& recs = private_data.recordings();
        std::vector<std::vector<ChannelWindow>> per_rec(recs.size());
        parallel_for(recs.size(), opts.threads,
                     [&](std::size_t i) { per_rec[i] = build_raw_windows(recs[i], selection); });
        for (const auto& s : subjects) {
            auto& sw = windows[s];
            for (const auto* rec : private_data.sessions_of(s)) {
                const auto idx = static_cast<std::size_t>(rec - recs.data());
                sw.sessions.push_back(std::move(per_rec[idx]));
            }
        }
    }

    const FoldAssignment folds = assign_folds(subjects, opts.k, spec.seed);
    std::vector<FoldResult> fold_results(folds.folds.size());

    parallel_for(folds.folds.size(), opts.threads, [&](std::size_t f) {
        const Fold& fold = folds.folds[f];
        FoldResult out;
        out.fold = f;
        out.audit.train_subjects = fold.train;
        out.audit.test_subjects = fold.test;

        std::vector<ChannelWindow> train;
        std::set<std::string> fit_subjects;
        for (const auto& s : fold.train)
            for (const auto& session : windows.at(s).sessions) {
                detail::append_all(train, session);
                for (const auto& w : session) fit_subjects.insert(w.subject_id);
            }
        out.audit.fit_subjects.assign(fit_subjects.begin(), fit_subjects.end());
        if (!out.audit.disjoint()) fail(Errc::InvalidConfig, "fold " + std::to_string(f) + " is not subject-disjoint");

        const NormStats stats = fit_norm_stats(train, selection);
        auto normalized = [&](const std::vector<ChannelWindow>& raw) {
            std::vector<ChannelWindow> v;
            v.reserve(raw.size());
            for (const auto& w : raw) {
                v.push_back(normalize_window(w, stats));
                ++out.audit.windows_checked;
                if (v.back().has_nan()) ++out.audit.nan_windows;
            }
            return v;
        };
        const auto train_norm = normalized(train);
        Embedder embedder = prototype;
        embedder.fit(train_norm);

        const auto& enrolled = opts.gallery == GalleryScope::Population ? subjects : fold.test;
        std::vector<EnrollmentTemplate> gallery;
        gallery.reserve(enrolled.size());
        for (const auto& s : enrolled) {
            std::vector<EmbeddingVector> emb;
            for (const auto& w : normalized(windows.at(s).sessions.front())) emb.push_back(embedder.embed(w));
            gallery.push_back(enroll(s, emb));
        }
        out.gallery_size = gallery.size();

        for (const auto& s : fold.test) {
            for (const auto& w : normalized(windows.at(s).sessions.at(1))) {
                const EmbeddingVector probe = embedder.embed(w);
                const auto ranked = identify(probe, gallery);
                for (const auto& c : ranked) (c.subject_id == s ? out.scores.genuine : out.scores.impostor).push_back(c.score);
                out.trials.push_back({s, ranked.front().subject_id});
                ++out.probe_count;
            }
        }
        out.genuine_count = out.scores.genuine.size();
        out.impostor_count = out.scores.impostor.size();
        out.metrics.eer_pct = compute_eer(out.scores);
        out.metrics.rank1_ir_pct = compute_rank1(out.trials);
        fold_results[f] = std::move(out);
    });

    ExperimentResult result;
    result.experiment_id = spec.experiment_id;
    result.gaze = spec.gaze;
    result.head = spec.head;
    result.hands = spec.hands;
    result.privacy = privacy;
    std::vector<FoldMetrics> metrics;
    double chance_ir = 0.0;
    for (const auto& fr : fold_results) {
        metrics.push_back(fr.metrics);
        chance_ir += chance_levels(fr.gallery_size).ir_pct;
    }
    result.summary = aggregate_folds(metrics);
    result.chance = {50.0, chance_ir / static_cast<double>(fold_results.size())};
    result.folds = std::move(fold_results);

    nlohmann::json cfg = to_json(spec);
    cfg["folds"] = opts.k;
    cfg["gallery"] = to_string(opts.gallery);
    cfg["embedder"] = prototype.id();
    result.provenance = {spec.seed,      privacy.noise_seed, opts.k, std::string(to_string(opts.gallery)),
                         prototype.id(), hex64(fnv1a64(cfg.dump())), hex64(fingerprint(d))};
    return result;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json describe_dataset(const Dataset& d) {
    return {{"subjects", d.subject_count()}, {"recordings", d.size()}, {"fingerprint", hex64(fingerprint(d))}};
}

/// Runs every spec (in parallel across experiments when opts.threads > 1).
/// Results are ordered as `specs` and do not depend on that order.
template <WindowEmbedder Embedder = StatisticalEmbedder>
Report run_matrix(const Dataset& d, const std::vector<ExperimentSpec>& specs, const RunOptions& opts = {},
                  const Embedder& prototype = Embedder{}) {
    std::set<std::string> ids;
    for (const auto& s : specs) {
        if (!ids.insert(s.experiment_id).second) fail(Errc::DuplicateExperiment, s.experiment_id);
        validate_spec(s);
    }
    Report report;
    report.dataset = describe_dataset(d);
    report.timestamp = utc_timestamp();
    report.results.resize(specs.size());
    RunOptions inner = opts;
    inner.threads = 1;
    parallel_for(specs.size(), opts.threads,
                 [&](std::size_t i) { report.results[i] = run_experiment(d, specs[i], inner, prototype); });
    return report;
}

/// Genuine/impostor scores pooled over every fold.
inline ScoreSet pooled_scores(const ExperimentResult& r) {
    ScoreSet s;
    for (const auto& f : r.folds) s.append(f.scores);
    return s;
}

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::json to_json(const ExperimentResult& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.folds)
        folds.push_back({{"fold", f.fold},
                         {"eer_pct", f.metrics.eer_pct},
                         {"rank1_ir_pct", f.metrics.rank1_ir_pct},
                         {"train_subjects", f.audit.train_subjects},
                         {"test_subjects", f.audit.test_subjects},
                         {"gallery_size", f.gallery_size},
                         {"probe_count", f.probe_count},
                         {"genuine_count", f.genuine_count},
                         {"impostor_count", f.impostor_count},
                         {"nan_windows", f.audit.nan_windows}});
    const auto& p = r.provenance;
    return {{"experiment_id", r.experiment_id},
            {"gaze_state", to_string(r.gaze)},
            {"head_state", to_string(r.head)},
            {"hand_state", to_string(r.hands)},
            {"privacy", to_json(r.privacy)},
            {"folds", folds},
            {"summary",
             {{"eer_mean", r.summary.eer_pct.mean},
              {"eer_std", r.summary.eer_pct.std},
              {"ir_mean", r.summary.rank1_ir_pct.mean},
              {"ir_std", r.summary.rank1_ir_pct.std}}},
            {"chance", {{"eer_pct", r.chance.eer_pct}, {"ir_pct", r.chance.ir_pct}}},
            {"provenance",
             {{"seed", p.seed},
              {"noise_seed", p.noise_seed},
              {"folds", p.folds},
              {"gallery", p.gallery},
              {"embedder", p.embedder},
              {"config_hash", p.config_hash},
              {"dataset_fingerprint", p.dataset_fingerprint}}}};
}

inline nlohmann::json to_json(const Report& r) {
    nlohmann::json experiments = nlohmann::json::array();
    for (const auto& e : r.results) experiments.push_back(to_json(e));
    return {{"schema", r.schema}, {"timestamp", r.timestamp}, {"dataset", r.dataset}, {"experiments", experiments}};
}

/// Inverse of to_json(Report). Score lists are not serialized, so folds come
/// back with metrics and audit data only.
inline Report report_from_json(const nlohmann::json& j) {
    Report r;
    try {
        r.schema = j.at("schema").get<std::string>();
        if (r.schema != kReportSchema) fail(Errc::ParseError, "unsupported report schema '" + r.schema + "'");
        r.timestamp = j.value("timestamp", std::string{});
        r.dataset = j.value("dataset", nlohmann::json::object());
        for (const auto& e : j.at("experiments")) {
            ExperimentResult x;
            x.experiment_id = e.at("experiment_id").get<std::string>();
            x.gaze = parse_stream_state(e.at("gaze_state").get<std::string>());
            x.head = parse_stream_state(e.at("head_state").get<std::string>());
            x.hands = parse_stream_state(e.at("hand_state").get<std::string>());
            if (e.contains("privacy")) x.privacy = privacy_config_from_json(e.at("privacy"));
            for (const auto& f : e.at("folds")) {
                FoldResult fr;
                fr.fold = f.at("fold").get<std::size_t>();
                fr.metrics = {f.at("eer_pct").get<double>(), f.at("rank1_ir_pct").get<double>()};
                fr.audit.train_subjects = f.value("train_subjects", std::vector<std::string>{});
                fr.audit.test_subjects = f.value("test_subjects", std::vector<std::string>{});
                fr.gallery_size = f.value("gallery_size", std::size_t{0});
                fr.probe_count = f.value("probe_count", std::size_t{0});
                fr.genuine_count = f.value("genuine_count", std::size_t{0});
                fr.impostor_count = f.value("impostor_count", std::size_t{0});
                fr.audit.nan_windows = f.value("nan_windows", std::size_t{0});
                x.folds.push_back(std::move(fr));
            }
            const auto& s = e.at("summary");
            std::vector<FoldMetrics> per_fold;
            for (const auto& f : x.folds) per_fold.push_back(f.metrics);
            x.summary.per_fold = per_fold;
            x.summary.eer_pct = {s.at("eer_mean").get<double>(), s.at("eer_std").get<double>()};
            x.summary.rank1_ir_pct = {s.at("ir_mean").get<double>(), s.at("ir_std").get<double>()};
            x.chance = {e.at("chance").at("eer_pct").get<double>(), e.at("chance").at("ir_pct").get<double>()};
            const auto& p = e.at("provenance");
            x.provenance = {p.at("seed").get<std::uint64_t>(),       p.at("noise_seed").get<std::uint64_t>(),
                            p.at("folds").get<std::size_t>(),        p.at("gallery").get<std::string>(),
                            p.at("embedder").get<std::string>(),     p.at("config_hash").get<std::string>(),
                            p.at("dataset_fingerprint").get<std::string>()};
            r.results.push_back(std::move(x));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::ParseError, std::string("report: ") + e.what());
    }
    return r;
}

inline void write_report_csv(const Report& r, std::ostream& os) {
    os << "experiment_id,gaze_state,head_state,hand_state,eer_mean,eer_std,ir_mean,ir_std,chance_eer,chance_ir\n";
    std::string line;
    for (const auto& e : r.results) {
        line = e.experiment_id + ',' + std::string(to_string(e.gaze)) + ',' + std::string(to_string(e.head)) + ',' +
               std::string(to_string(e.hands));
        for (double v : {e.summary.eer_pct.mean, e.summary.eer_pct.std, e.summary.rank1_ir_pct.mean,
                         e.summary.rank1_ir_pct.std, e.chance.eer_pct, e.chance.ir_pct}) {
            line += ',';
            detail::append_number(line, v);
        }
        os << line << '\n';
    }
}

enum class ReportFormat { Json, Csv };

inline void emit_report(const Report& r, ReportFormat format, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) fail(Errc::IoFailure, "cannot write " + path.string());
    if (format == ReportFormat::Json)
        out << to_json(r).dump(2) << '\n';
    else
        write_report_csv(r, out);
    if (!out) fail(Errc::IoFailure, "write failed for " + path.string());
}

inline Report read_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoFailure, "cannot open " + path.string());
    try {
        return report_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        fail(Errc::ParseError, path.string() + ": " + e.what());
    }
}

} // namespace vrleak
