#pragma once

// Telemetry data model: streams, session recordings, datasets, and the CSV
// adapter that loads them through a declarative column mapping.

#include "error.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vrleak {

inline constexpr double kNominalRateHz = 90.0;

enum class StreamKind : std::uint8_t { Gaze = 0, Head = 1, LeftHand = 2, RightHand = 3 };

inline constexpr std::array<StreamKind, 4> kAllStreams{StreamKind::Gaze, StreamKind::Head,
                                                       StreamKind::LeftHand, StreamKind::RightHand};

constexpr std::size_t index_of(StreamKind k) noexcept { return static_cast<std::size_t>(k); }

constexpr std::string_view to_string(StreamKind k) noexcept {
    switch (k) {
    case StreamKind::Gaze: return "gaze";
    case StreamKind::Head: return "head";
    case StreamKind::LeftHand: return "left_hand";
    case StreamKind::RightHand: return "right_hand";
    }
    return "?";
}

/// Uniformly sampled multi-component signal. Sample i sits at time i / rate_hz.
/// A sample is masked when any of its components is non-finite; masked samples
/// store NaN in every component.
class TimeSeries {
public:
    TimeSeries() = default;

    TimeSeries(StreamKind kind, double rate_hz, std::size_t arity, std::vector<double> values)
        : kind_(kind), rate_hz_(rate_hz), arity_(arity), values_(std::move(values)) {
        if (!(rate_hz_ > 0.0) || !std::isfinite(rate_hz_))
            fail(Errc::InvalidConfig, "time series rate must be positive");
        if (arity_ == 0) fail(Errc::InvalidConfig, "time series arity must be >= 1");
        if (values_.size() % arity_ != 0)
            fail(Errc::ArityMismatch, "value count is not a multiple of the arity");
        const std::size_t n = values_.size() / arity_;
        mask_.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = std::span<double>(values_).subspan(i * arity_, arity_);
            if (std::any_of(row.begin(), row.end(), [](double v) { return !std::isfinite(v); })) {
                mask_[i] = 1;
                std::fill(row.begin(), row.end(), std::numeric_limits<double>::quiet_NaN());
            }
        }
    }

    StreamKind kind() const noexcept { return kind_; }
    double rate_hz() const noexcept { return rate_hz_; }
    std::size_t arity() const noexcept { return arity_; }
    std::size_t size() const noexcept { return mask_.size(); }
    bool empty() const noexcept { return mask_.empty(); }

    double operator()(std::size_t i, std::size_t c) const noexcept { return values_[i * arity_ + c]; }
    std::span<const double> row(std::size_t i) const noexcept {
        return std::span<const double>(values_).subspan(i * arity_, arity_);
    }
    std::span<const double> values() const noexcept { return values_; }
    bool masked(std::size_t i) const noexcept { return mask_[i] != 0; }
    std::size_t masked_count() const noexcept {
        return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1));
    }

    std::vector<double> component(std::size_t c) const {
        std::vector<double> out(size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)(i, c);
        return out;
    }

    TimeSeries truncated(std::size_t n) const {
        n = std::min(n, size());
        return TimeSeries(kind_, rate_hz_, arity_,
                          std::vector<double>(values_.begin(), values_.begin() + n * arity_));
    }

    /// Bitwise equality, so NaN payloads compare equal to themselves.
    friend bool bit_equal(const TimeSeries& a, const TimeSeries& b) noexcept {
        return a.kind_ == b.kind_ && a.rate_hz_ == b.rate_hz_ && a.arity_ == b.arity_ &&
               a.values_.size() == b.values_.size() &&
               std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(double)) == 0;
    }

private:
    StreamKind kind_ = StreamKind::Gaze;
    double rate_hz_ = kNominalRateHz;
    std::size_t arity_ = 1;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

struct SessionRecording {
    std::string subject_id;
    int session_index = 1;
    std::array<std::optional<TimeSeries>, 4> streams;

    const TimeSeries* stream(StreamKind k) const noexcept {
        const auto& s = streams[index_of(k)];
        return s ? &*s : nullptr;
    }
    bool has(StreamKind k) const noexcept { return streams[index_of(k)].has_value(); }

    /// Length of the shortest present stream (all equal once aligned).
    std::size_t sample_count() const noexcept {
        std::optional<std::size_t> n;
        for (const auto& s : streams)
            if (s) n = n ? std::min(*n, s->size()) : s->size();
        return n.value_or(0);
    }

    double rate_hz() const noexcept {
        for (const auto& s : streams)
            if (s) return s->rate_hz();
        return kNominalRateHz;
    }

    double duration_s() const noexcept { return static_cast<double>(sample_count()) / rate_hz(); }

    bool aligned() const noexcept {
        const std::size_t n = sample_count();
        return std::all_of(streams.begin(), streams.end(),
                           [n](const auto& s) { return !s || s->size() == n; });
    }

    friend bool bit_equal(const SessionRecording& a, const SessionRecording& b) noexcept {
        if (a.subject_id != b.subject_id || a.session_index != b.session_index) return false;
        for (std::size_t k = 0; k < a.streams.size(); ++k) {
            if (a.streams[k].has_value() != b.streams[k].has_value()) return false;
            if (a.streams[k] && !bit_equal(*a.streams[k], *b.streams[k])) return false;
        }
        return true;
    }
};

class Dataset {
public:
    Dataset() = default;

    explicit Dataset(std::vector<SessionRecording> recordings) : recordings_(std::move(recordings)) {
        std::set<std::pair<std::string, int>> seen;
        for (const auto& r : recordings_) {
            if (!seen.emplace(r.subject_id, r.session_index).second)
                fail(Errc::DuplicateRecording,
                     "subject " + r.subject_id + " session " + std::to_string(r.session_index));
            subjects_.insert(r.subject_id);
        }
    }

    const std::vector<SessionRecording>& recordings() const noexcept { return recordings_; }
    std::size_t size() const noexcept { return recordings_.size(); }
    bool empty() const noexcept { return recordings_.empty(); }

    /// Sorted, unique subject ids.
    std::vector<std::string> subjects() const { return {subjects_.begin(), subjects_.end()}; }
    std::size_t subject_count() const noexcept { return subjects_.size(); }

    /// Recordings of one subject ordered by session index.
    std::vector<const SessionRecording*> sessions_of(std::string_view subject) const {
        std::vector<const SessionRecording*> out;
        for (const auto& r : recordings_)
            if (r.subject_id == subject) out.push_back(&r);
        std::sort(out.begin(), out.end(),
                  [](auto* a, auto* b) { return a->session_index < b->session_index; });
        return out;
    }

    friend bool bit_equal(const Dataset& a, const Dataset& b) noexcept {
        return a.recordings_.size() == b.recordings_.size() &&
               std::equal(a.recordings_.begin(), a.recordings_.end(), b.recordings_.begin(),
                          [](const auto& x, const auto& y) { return bit_equal(x, y); });
    }

private:
    std::vector<SessionRecording> recordings_;
    std::set<std::string> subjects_;
};

// ---------------------------------------------------------------------------
// Subject inclusion and alignment

/// Keeps subjects with at least `min_sessions` recordings, every one of them at
/// least `min_duration_s` long (the boundary is inclusive). Order-preserving.
inline Dataset filter_subjects(const Dataset& d, std::size_t min_sessions = 2,
                               double min_duration_s = 15.0) {
    std::map<std::string, std::pair<std::size_t, bool>> status;
    for (const auto& r : d.recordings()) {
        auto& [count, ok] = status.try_emplace(r.subject_id, 0, true).first->second;
        ++count;
        // Compare sample counts rather than seconds so 1350 samples at 90 Hz is exactly 15 s.
        const double needed = min_duration_s * r.rate_hz();
        if (static_cast<double>(r.sample_count()) + 1e-9 < needed) ok = false;
    }
    std::vector<SessionRecording> kept;
    for (const auto& r : d.recordings()) {
        const auto& [count, ok] = status.at(r.subject_id);
        if (ok && count >= min_sessions) kept.push_back(r);
    }
    return Dataset(std::move(kept));
}

inline SessionRecording align_streams(const SessionRecording& r) {
    const std::size_t n = r.sample_count();
    if (n == 0) fail(Errc::EmptySession, "subject " + r.subject_id + " session " +
                                             std::to_string(r.session_index) + " has no common samples");
    SessionRecording out;
    out.subject_id = r.subject_id;
    out.session_index = r.session_index;
    for (std::size_t k = 0; k < r.streams.size(); ++k)
        if (r.streams[k]) out.streams[k] = r.streams[k]->size() == n ? *r.streams[k] : r.streams[k]->truncated(n);
    return out;
}

// ---------------------------------------------------------------------------
// Column mapping

struct ColumnSchema {
    std::string subject = "subject";
    std::string session = "session";
    std::optional<std::string> time;
    double rate_hz = kNominalRateHz;
    /// Per stream kind: column names (gaze: 3 for a direction vector or 2 for
    /// pre-computed angles; motion: 3). Empty means the stream is absent.
    std::array<std::vector<std::string>, 4> streams;
};

inline std::string_view json_key(StreamKind k) noexcept { return to_string(k); }

inline ColumnSchema schema_from_json(const nlohmann::json& j) {
    ColumnSchema s;
    try {
        s.subject = j.at("subject").get<std::string>();
        s.session = j.at("session").get<std::string>();
        if (j.contains("time") && !j.at("time").is_null()) s.time = j.at("time").get<std::string>();
        s.rate_hz = j.value("rate_hz", kNominalRateHz);
        for (auto k : kAllStreams) {
            const std::string key(json_key(k));
            if (j.contains(key)) s.streams[index_of(k)] = j.at(key).get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::InvalidConfig, std::string("column schema: ") + e.what());
    }
    if (!(s.rate_hz > 0.0)) fail(Errc::InvalidConfig, "column schema: rate_hz must be positive");
    for (auto k : kAllStreams) {
        const auto n = s.streams[index_of(k)].size();
        const bool ok = n == 0 || n == 3 || (k == StreamKind::Gaze && n == 2);
        if (!ok) fail(Errc::InvalidConfig, "column schema: bad column count for " + std::string(to_string(k)));
    }
    return s;
}

inline nlohmann::json to_json(const ColumnSchema& s) {
    nlohmann::json j;
    j["subject"] = s.subject;
    j["session"] = s.session;
    if (s.time) j["time"] = *s.time;
    j["rate_hz"] = s.rate_hz;
    for (auto k : kAllStreams)
        if (!s.streams[index_of(k)].empty()) j[std::string(json_key(k))] = s.streams[index_of(k)];
    return j;
}

/// Column names the CSV writer emits for a stream of the given arity.
inline std::vector<std::string> default_columns(StreamKind k, std::size_t arity) {
    switch (k) {
    case StreamKind::Gaze:
        if (arity == 2) return {"gaze_h", "gaze_v"};
        return {"gaze_x", "gaze_y", "gaze_z"};
    case StreamKind::Head: return {"head_x", "head_y", "head_z"};
    case StreamKind::LeftHand: return {"lhand_x", "lhand_y", "lhand_z"};
    case StreamKind::RightHand: return {"rhand_x", "rhand_y", "rhand_z"};
    }
    return {};
}

// ---------------------------------------------------------------------------
// CSV reading

namespace detail {

inline std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// NaN for empty, "NaN" or unparseable cells.
inline double parse_cell(std::string_view cell) noexcept {
    double v = std::numeric_limits<double>::quiet_NaN();
    if (cell.empty()) return v;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        return std::numeric_limits<double>::quiet_NaN();
    return v;
}

inline std::optional<long> parse_int(std::string_view cell) noexcept {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
    return v;
}

struct RecordingRows {
    std::string subject;
    int session = 0;
    std::vector<double> time;
    std::array<std::vector<double>, 4> values;
};

inline void read_csv_file(const std::filesystem::path& file, const ColumnSchema& schema,
                          std::vector<RecordingRows>& out) {
    std::ifstream in(file);
    if (!in) fail(Errc::IoFailure, "cannot open " + file.string());
    std::string header_line;
    if (!std::getline(in, header_line)) return;
    const auto header = split_csv(header_line);
    auto column = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), std::string_view(name));
        if (it == header.end()) fail(Errc::MissingColumn, "'" + name + "' not found in " + file.string());
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t subject_col = column(schema.subject);
    const std::size_t session_col = column(schema.session);
    const std::optional<std::size_t> time_col =
        schema.time ? std::optional<std::size_t>(column(*schema.time)) : std::nullopt;
    std::array<std::vector<std::size_t>, 4> stream_cols;
    for (auto k : kAllStreams)
        for (const auto& name : schema.streams[index_of(k)]) stream_cols[index_of(k)].push_back(column(name));

    std::map<std::pair<std::string, int>, std::size_t> index;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        auto cell = [&](std::size_t c) { return c < cells.size() ? cells[c] : std::string_view{}; };
        const auto subject = cell(subject_col);
        const auto session = parse_int(cell(session_col));
        if (subject.empty() || !session) continue;
        const auto key = std::make_pair(std::string(subject), static_cast<int>(*session));
        auto [it, inserted] = index.try_emplace(key, out.size());
        if (inserted) out.push_back(RecordingRows{key.first, key.second, {}, {}});
        auto& rows = out[it->second];
        if (time_col) rows.time.push_back(parse_cell(cell(*time_col)));
        for (auto k : kAllStreams)
            for (auto c : stream_cols[index_of(k)]) rows.values[index_of(k)].push_back(parse_cell(cell(c)));
    }
}

inline void check_rate(const RecordingRows& rows, double declared) {
    std::vector<double> t;
    for (double v : rows.time)
        if (std::isfinite(v)) t.push_back(v);
    if (t.size() < 2) return;
    const double span = t.back() - t.front();
    if (!(span > 0.0)) fail(Errc::RateMismatch, "non-increasing timestamps for " + rows.subject);
    // Count samples across the full row range, masked timestamps included.
    const double inferred = static_cast<double>(rows.time.size() - 1) / span;
    if (std::abs(inferred - declared) > 0.05 * declared)
        fail(Errc::RateMismatch, rows.subject + " session " + std::to_string(rows.session) + ": inferred " +
                                     std::to_string(inferred) + " Hz vs declared " + std::to_string(declared));
}

} // namespace detail

/// Loads one CSV file, or every *.csv in a directory (sorted by name).
inline Dataset load_dataset(const std::filesystem::path& path, const ColumnSchema& schema) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
    } else if (fs::exists(path, ec)) {
        files.push_back(path);
    } else {
        fail(Errc::IoFailure, "no such path: " + path.string());
    }
    if (std::abs(schema.rate_hz - kNominalRateHz) > 0.05 * kNominalRateHz)
        fail(Errc::RateMismatch, "declared rate " + std::to_string(schema.rate_hz) + " Hz is not ~90 Hz");

    std::vector<detail::RecordingRows> rows;
    for (const auto& f : files) {
        std::vector<detail::RecordingRows> file_rows;
        detail::read_csv_file(f, schema, file_rows);
        for (auto& r : file_rows) rows.push_back(std::move(r));
    }

    std::vector<SessionRecording> recordings;
    for (const auto& rr : rows) {
        detail::check_rate(rr, schema.rate_hz);
        SessionRecording rec;
        rec.subject_id = rr.subject;
        rec.session_index = rr.session;
        for (auto k : kAllStreams) {
            const auto arity = schema.streams[index_of(k)].size();
            if (arity == 0) continue;
            rec.streams[index_of(k)] = TimeSeries(k, schema.rate_hz, arity, rr.values[index_of(k)]);
        }
        recordings.push_back(align_streams(rec));
    }
    if (recordings.empty()) fail(Errc::EmptyDataset, "no valid rows under " + path.string());
    return Dataset(std::move(recordings));
}

// ---------------------------------------------------------------------------
// CSV writing

namespace detail {

inline void append_number(std::string& out, double v) {
    if (!std::isfinite(v)) {
        out += "NaN";
        return;
    }
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

inline std::string file_stem(const SessionRecording& r) {
    std::string s;
    for (char c : r.subject_id) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return s + "_s" + std::to_string(r.session_index);
}

} // namespace detail

/// Schema matching what write_recording_csv emits for recordings shaped like `r`.
inline ColumnSchema schema_for(const SessionRecording& r) {
    ColumnSchema s;
    s.time = "t";
    s.rate_hz = r.rate_hz();
    for (auto k : kAllStreams)
        if (const auto* ts = r.stream(k)) s.streams[index_of(k)] = default_columns(k, ts->arity());
    return s;
}

inline void write_recording_csv(const SessionRecording& r, std::ostream& os) {
    std::string line = "subject,session,t";
    for (auto k : kAllStreams)
        if (const auto* ts = r.stream(k))
            for (const auto& c : default_columns(k, ts->arity())) line += "," + c;
    os << line << '\n';
    const std::size_t n = r.sample_count();
    const double rate = r.rate_hz();
    for (std::size_t i = 0; i < n; ++i) {
        line = r.subject_id + "," + std::to_string(r.session_index) + ",";
        detail::append_number(line, static_cast<double>(i) / rate);
        for (auto k : kAllStreams)
            if (const auto* ts = r.stream(k))
                for (std::size_t c = 0; c < ts->arity(); ++c) {
                    line += ',';
                    detail::append_number(line, (*ts)(i, c));
                }
        os << line << '\n';
    }
}

/// Writes one "<subject>_s<session>.csv" per recording plus schema.json.
/// Doubles use shortest round-trip formatting, so reloading is exact.
inline ColumnSchema write_dataset(const Dataset& d, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
    if (d.empty()) fail(Errc::EmptyDataset, "nothing to write");
    const ColumnSchema schema = schema_for(d.recordings().front());
    for (const auto& r : d.recordings()) {
        const auto path = dir / (detail::file_stem(r) + ".csv");
        std::ofstream out(path);
        if (!out) fail(Errc::IoFailure, "cannot write " + path.string());
        write_recording_csv(r, out);
    }
    std::ofstream js(dir / "schema.json");
    if (!js) fail(Errc::IoFailure, "cannot write schema.json");
    js << to_json(schema).dump(2) << '\n';
    return schema;
}

inline ColumnSchema read_schema_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoFailure, "cannot open " + path.string());
    try {
        return schema_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        fail(Errc::ParseError, path.string() + ": " + e.what());
    }
}

/// FNV-1a over every value bit pattern and identifier; identifies a dataset in reports.
inline std::uint64_t fingerprint(const Dataset& d) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& r : d.recordings()) {
        feed(r.subject_id.data(), r.subject_id.size());
        feed(&r.session_index, sizeof r.session_index);
        for (const auto& s : r.streams)
            if (s) feed(s->values().data(), s->values().size_bytes());
    }
    return h;
}

} // namespace vrleak
