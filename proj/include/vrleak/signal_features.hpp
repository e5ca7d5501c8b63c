#pragma once

// Session -> normalized fixed-length multichannel windows.
//
// Channel order (restricted to the selection):
//   gaze_vx, gaze_vy, head_x, head_y, head_z,
//   lhand_x, lhand_y, lhand_z, rhand_x, rhand_y, rhand_z
// Gaze channels are angular velocities in deg/s (Savitzky-Golay derivative,
// clamped, z-scored with training statistics). Motion channels are raw
// positions in meters and are not normalized. NaN becomes 0 after
// normalization.

#include "core_model.hpp"
#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace vrleak {

inline constexpr std::size_t kWindowSamples = 450;
inline constexpr double kVelocityLimitDegS = 1000.0;
inline constexpr std::size_t kSgWindow = 7;
inline constexpr std::size_t kSgOrder = 2;

struct ChannelSelection {
    bool include_gaze = false;
    bool include_head = false;
    bool include_hands = false;

    std::size_t channel_count() const noexcept {
        return (include_gaze ? 2u : 0u) + (include_head ? 3u : 0u) + (include_hands ? 6u : 0u);
    }
    bool empty() const noexcept { return channel_count() == 0; }

    friend bool operator==(const ChannelSelection&, const ChannelSelection&) = default;
};

inline std::vector<std::string> channel_names(const ChannelSelection& s) {
    std::vector<std::string> out;
    if (s.include_gaze) out.insert(out.end(), {"gaze_vx", "gaze_vy"});
    if (s.include_head) out.insert(out.end(), {"head_x", "head_y", "head_z"});
    if (s.include_hands) out.insert(out.end(), {"lhand_x", "lhand_y", "lhand_z", "rhand_x", "rhand_y", "rhand_z"});
    return out;
}

struct ChannelWindow {
    std::size_t samples = 0;
    std::size_t channels = 0;
    std::vector<double> data;  // row-major: samples x channels
    std::string subject_id;
    int session_index = 0;
    std::size_t window_index = 0;

    double operator()(std::size_t t, std::size_t c) const noexcept { return data[t * channels + c]; }
    double& operator()(std::size_t t, std::size_t c) noexcept { return data[t * channels + c]; }

    std::vector<double> channel(std::size_t c) const {
        std::vector<double> out(samples);
        for (std::size_t t = 0; t < samples; ++t) out[t] = (*this)(t, c);
        return out;
    }

    bool has_nan() const noexcept {
        return std::any_of(data.begin(), data.end(), [](double v) { return std::isnan(v); });
    }
};

struct ChannelNorm {
    double mean = 0.0;
    double std = 1.0;
    bool normalized = false;

    friend bool operator==(const ChannelNorm&, const ChannelNorm&) = default;
};

struct NormStats {
    std::vector<ChannelNorm> channels;

    static NormStats identity(std::size_t n) { return NormStats{std::vector<ChannelNorm>(n)}; }
    friend bool operator==(const NormStats&, const NormStats&) = default;
};

// ---------------------------------------------------------------------------
// Gaze angles

/// Direction vector -> (azimuth, elevation) in degrees: atan2(x, z) and
/// asin(y / |v|). Zero-length or masked vectors give masked samples; a
/// 2-component series is already in angle form and passes through.
inline TimeSeries gaze_to_angles(const TimeSeries& g) {
    if (g.arity() == 2) return g;
    if (g.arity() != 3) fail(Errc::ArityMismatch, "gaze must have 2 or 3 components");
    constexpr double rad2deg = 180.0 / std::numbers::pi;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> out(2 * g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g(i, 0), y = g(i, 1), z = g(i, 2);
        const double norm = std::sqrt(x * x + y * y + z * z);
        if (g.masked(i) || !(norm >= 1e-12)) {
            out[2 * i] = out[2 * i + 1] = nan;
            continue;
        }
        out[2 * i] = std::atan2(x, z) * rad2deg;
        out[2 * i + 1] = std::asin(std::clamp(y / norm, -1.0, 1.0)) * rad2deg;
    }
    return TimeSeries(StreamKind::Gaze, g.rate_hz(), 2, std::move(out));
}

// ---------------------------------------------------------------------------
// Savitzky-Golay

namespace detail {

/// Solves A X = B in place for small dense systems (Gaussian elimination with
/// partial pivoting). A is n x n row-major, B is n x m row-major.
inline void solve_dense(std::vector<double>& a, std::vector<double>& b, std::size_t n, std::size_t m) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (std::abs(a[pivot * n + col]) < 1e-300) fail(Errc::InvalidConfig, "singular Savitzky-Golay system");
        if (pivot != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
            for (std::size_t k = 0; k < m; ++k) std::swap(b[col * m + k], b[pivot * m + k]);
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
            for (std::size_t k = 0; k < m; ++k) b[r * m + k] -= f * b[col * m + k];
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        const double d = a[r * n + r];
        for (std::size_t k = 0; k < m; ++k) b[r * m + k] /= d;
    }
}

} // namespace detail

/// Least-squares first-derivative weights (per sample step) for a degree-`order`
/// polynomial fitted over `window` points centered at 0, evaluated at offset
/// `at` from the center. Derivative = sum_j c[j] * x[center - half + j].
inline std::vector<double> sg_derivative_coefficients(std::size_t window, std::size_t order, double at = 0.0) {
    if (window % 2 == 0 || window <= order) fail(Errc::InvalidConfig, "SG window must be odd and > order");
    const std::size_t p = order + 1;
    const auto half = static_cast<double>(window / 2);
    // Normal equations (V^T V) P = V^T with V[j][k] = u_j^k.
    std::vector<double> vtv(p * p, 0.0), vt(p * window, 0.0);
    for (std::size_t j = 0; j < window; ++j) {
        const double u = static_cast<double>(j) - half;
        for (std::size_t k = 0; k < p; ++k) {
            vt[k * window + j] = std::pow(u, static_cast<double>(k));
            for (std::size_t l = 0; l < p; ++l) vtv[k * p + l] += std::pow(u, static_cast<double>(k + l));
        }
    }
    detail::solve_dense(vtv, vt, p, window);
    std::vector<double> c(window, 0.0);
    for (std::size_t k = 1; k < p; ++k) {
        const double d = static_cast<double>(k) * std::pow(at, static_cast<double>(k - 1));
        for (std::size_t j = 0; j < window; ++j) c[j] += d * vt[k * window + j];
    }
    return c;
}

/// Savitzky-Golay first derivative scaled to units per second. Samples within
/// half a window of either end use the nearest full window's fit evaluated at
/// their offset, so the output has the input's length. A NaN anywhere in the
/// window used makes that output NaN.
inline std::vector<double> sg_derivative(std::span<const double> x, double rate_hz, std::size_t window = kSgWindow,
                                         std::size_t order = kSgOrder) {
    if (window % 2 == 0 || window <= order) fail(Errc::InvalidConfig, "SG window must be odd and > order");
    if (x.size() < window) fail(Errc::TooShort, "series shorter than the SG window");
    const std::size_t half = window / 2, n = x.size();
    std::vector<std::vector<double>> coeffs(window);
    for (std::size_t j = 0; j < window; ++j)
        coeffs[j] = sg_derivative_coefficients(window, order, static_cast<double>(j) - static_cast<double>(half));
    const auto& center = coeffs[half];

    std::vector<double> out(n);
    auto apply = [&](const std::vector<double>& c, std::size_t start) {
        double acc = 0.0;
        for (std::size_t j = 0; j < window; ++j) {
            const double v = x[start + j];
            if (std::isnan(v)) return std::numeric_limits<double>::quiet_NaN();
            acc += c[j] * v;
        }
        return acc * rate_hz;
    };
    for (std::size_t t = 0; t < n; ++t) {
        if (t < half)
            out[t] = apply(coeffs[t], 0);
        else if (t + half >= n)
            out[t] = apply(coeffs[window - (n - t)], n - window);
        else
            out[t] = apply(center, t - half);
    }
    return out;
}

inline std::vector<double> clamp_velocity(std::span<const double> v, double limit = kVelocityLimitDegS) {
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out)
        if (!std::isnan(x)) x = std::max(-limit, std::min(limit, x));
    return out;
}

// ---------------------------------------------------------------------------
// Windowing and normalization

/// Non-overlapping windows of `len` samples over equal-length channels; the
/// trailing remainder is dropped.
inline std::vector<ChannelWindow> window_session(const std::vector<std::vector<double>>& channels,
                                                 std::size_t len = kWindowSamples, const std::string& subject_id = {},
                                                 int session_index = 0) {
    std::vector<ChannelWindow> out;
    if (channels.empty() || len == 0) return out;
    const std::size_t n = channels.front().size();
    for (const auto& c : channels)
        if (c.size() != n) fail(Errc::LengthMismatch, "channel lengths differ");
    const std::size_t count = n / len;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        ChannelWindow win;
        win.samples = len;
        win.channels = channels.size();
        win.data.resize(len * channels.size());
        win.subject_id = subject_id;
        win.session_index = session_index;
        win.window_index = w;
        for (std::size_t t = 0; t < len; ++t)
            for (std::size_t c = 0; c < channels.size(); ++c) win(t, c) = channels[c][w * len + t];
        out.push_back(std::move(win));
    }
    return out;
}

/// Mean and population std of each gaze channel over every finite training
/// sample (Neumaier-compensated sums). Motion channels get identity stats; a
/// std below 1e-12 is replaced by 1.
inline NormStats fit_norm_stats(std::span<const ChannelWindow> training, const ChannelSelection& selection) {
    if (training.empty()) fail(Errc::NoTrainingData, "no training windows");
    const std::size_t channels = selection.channel_count();
    NormStats stats = NormStats::identity(channels);
    if (!selection.include_gaze) return stats;
    for (const auto& w : training)
        if (w.channels != channels) fail(Errc::ArityMismatch, "training window channel count mismatch");

    struct Neumaier {
        double sum = 0.0, comp = 0.0;
        void add(double v) noexcept {
            const double t = sum + v;
            comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
            sum = t;
        }
        double value() const noexcept { return sum + comp; }
    };
    for (std::size_t c = 0; c < 2; ++c) {
        Neumaier s;
        std::size_t count = 0;
        for (const auto& w : training)
            for (std::size_t t = 0; t < w.samples; ++t)
                if (const double v = w(t, c); !std::isnan(v)) {
                    s.add(v);
                    ++count;
                }
        auto& out = stats.channels[c];
        out.normalized = true;
        if (count == 0) continue;
        const double mean = s.value() / static_cast<double>(count);
        Neumaier sq;
        for (const auto& w : training)
            for (std::size_t t = 0; t < w.samples; ++t)
                if (const double v = w(t, c); !std::isnan(v)) sq.add((v - mean) * (v - mean));
        const double sd = std::sqrt(sq.value() / static_cast<double>(count));
        out.mean = mean;
        out.std = sd < 1e-12 ? 1.0 : sd;
    }
    return stats;
}

inline ChannelWindow normalize_window(const ChannelWindow& w, const NormStats& stats) {
    if (stats.channels.size() != w.channels) fail(Errc::ArityMismatch, "norm stats do not match window channels");
    ChannelWindow out = w;
    for (std::size_t t = 0; t < w.samples; ++t)
        for (std::size_t c = 0; c < w.channels; ++c) {
            double& v = out(t, c);
            const auto& s = stats.channels[c];
            if (s.normalized) v = (v - s.mean) / s.std;
            if (std::isnan(v)) v = 0.0;
        }
    return out;
}

/// Clamped gaze velocities and raw motion positions, windowed but not yet
/// normalized. Gaze processing runs only when gaze is selected.
inline std::vector<ChannelWindow> build_raw_windows(const SessionRecording& r, const ChannelSelection& selection,
                                                    std::size_t len = kWindowSamples) {
    if (selection.empty()) fail(Errc::EmptySelection, "no channels selected");
    auto require = [&](StreamKind k) -> const TimeSeries& {
        const TimeSeries* s = r.stream(k);
        if (!s) fail(Errc::MissingStream, "subject " + r.subject_id + " session " + std::to_string(r.session_index) +
                                              " lacks " + std::string(to_string(k)));
        return *s;
    };
    std::vector<const TimeSeries*> used;
    if (selection.include_gaze) used.push_back(&require(StreamKind::Gaze));
    if (selection.include_head) used.push_back(&require(StreamKind::Head));
    if (selection.include_hands) {
        used.push_back(&require(StreamKind::LeftHand));
        used.push_back(&require(StreamKind::RightHand));
    }
    std::size_t n = used.front()->size();
    for (const auto* s : used) n = std::min(n, s->size());
    if (n < len) return {};

    std::vector<std::vector<double>> channels;
    channels.reserve(selection.channel_count());
    if (selection.include_gaze) {
        const TimeSeries angles = gaze_to_angles(require(StreamKind::Gaze));
        for (std::size_t c = 0; c < 2; ++c) {
            auto comp = angles.component(c);
            comp.resize(n);
            channels.push_back(clamp_velocity(sg_derivative(comp, angles.rate_hz())));
        }
    }
    auto positions = [&](StreamKind k) {
        const TimeSeries& s = require(k);
        for (std::size_t c = 0; c < 3; ++c) {
            auto comp = s.component(c);
            comp.resize(n);
            channels.push_back(std::move(comp));
        }
    };
    if (selection.include_head) positions(StreamKind::Head);
    if (selection.include_hands) {
        positions(StreamKind::LeftHand);
        positions(StreamKind::RightHand);
    }
    return window_session(channels, len, r.subject_id, r.session_index);
}

inline std::vector<ChannelWindow> build_windows(const SessionRecording& r, const ChannelSelection& selection,
                                                const NormStats& stats, std::size_t len = kWindowSamples) {
    auto windows = build_raw_windows(r, selection, len);
    for (auto& w : windows) w = normalize_window(w, stats);
    return windows;
}

/// Debug export: one row per (window, sample); channel names in the header.
inline void write_windows_csv(std::span<const ChannelWindow> windows, const ChannelSelection& selection,
                              std::ostream& os) {
    os << "subject,session,window,sample";
    for (const auto& name : channel_names(selection)) os << ',' << name;
    os << '\n';
    std::string line;
    for (const auto& w : windows)
        for (std::size_t t = 0; t < w.samples; ++t) {
            line = w.subject_id + ',' + std::to_string(w.session_index) + ',' + std::to_string(w.window_index) + ',' +
                   std::to_string(t);
            for (std::size_t c = 0; c < w.channels; ++c) {
                line += ',';
                detail::append_number(line, w(t, c));
            }
            os << line << '\n';
        }
}

} // namespace vrleak
