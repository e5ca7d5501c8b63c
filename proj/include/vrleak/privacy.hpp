#pragma once

// Privacy mechanisms: recency-weighted gaze smoothing and bounded-Laplace
// perturbation of height (head vertical) and wingspan (hand reach).

#include "core_model.hpp"
#include "error.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace vrleak {

struct Interval {
    double lower = 1.32;
    double upper = 1.82;

    double width() const noexcept { return upper - lower; }
    double clamp(double v) const noexcept { return std::clamp(v, lower, upper); }
    bool contains(double v) const noexcept { return v >= lower && v <= upper; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

struct PrivacyConfig {
    bool gaze_private = false;
    /// Head and both hands are privatized together or not at all.
    bool motion_private = false;
    std::size_t window_b = 108;
    double epsilon_head = 1.0;
    double epsilon_hand = 0.5;
    Interval bounds_m{1.32, 1.82};
    std::uint64_t noise_seed = 0;

    friend bool operator==(const PrivacyConfig&, const PrivacyConfig&) = default;
};

inline void validate(const PrivacyConfig& c) {
    if (c.window_b < 1) fail(Errc::InvalidB, "B must be >= 1");
    if (!(c.epsilon_head > 0.0) || !(c.epsilon_hand > 0.0)) fail(Errc::InvalidConfig, "epsilons must be > 0");
    if (!(c.bounds_m.lower < c.bounds_m.upper) || !std::isfinite(c.bounds_m.lower) || !std::isfinite(c.bounds_m.upper))
        fail(Errc::InvalidBounds, "bounds lower must be < upper");
}

struct AnthropometricEstimate {
    double height_m = 0.0;
    double wingspan_m = 0.0;
};

// ---------------------------------------------------------------------------
// Gaze smoothing

/// Each output sample is the linearly weighted mean of the k = min(B, t+1)
/// most recent input samples, weight i/sum(1..k) for the i-th oldest, so the
/// current sample weighs most. Masked inputs drop out and the remaining
/// weights are renormalized; a window with no valid input yields a masked
/// sample. Applies per component.
inline TimeSeries smooth_stream(const TimeSeries& s, std::size_t b) {
    if (b < 1) fail(Errc::InvalidB, "B must be >= 1");
    const std::size_t n = s.size(), m = s.arity();
    std::vector<double> out(n * m);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t k = std::min(b, t + 1);
        const std::size_t first = t + 1 - k;
        for (std::size_t c = 0; c < m; ++c) {
            double acc = 0.0, weight = 0.0;
            for (std::size_t j = first; j <= t; ++j) {
                if (s.masked(j)) continue;
                const auto w = static_cast<double>(j - first + 1);
                acc += w * s(j, c);
                weight += w;
            }
            out[t * m + c] = weight > 0.0 ? acc / weight : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return TimeSeries(s.kind(), s.rate_hz(), m, std::move(out));
}

// ---------------------------------------------------------------------------
// Anthropometrics

/// Height = mean of the unmasked head vertical samples, clamped into `bounds`;
/// wingspan = height.
inline AnthropometricEstimate estimate_anthropometrics(const SessionRecording& first_session, Interval bounds) {
    const TimeSeries* head = first_session.stream(StreamKind::Head);
    if (!head) fail(Errc::NoHeadStream, "subject " + first_session.subject_id + " has no head stream");
    double sum = 0.0, comp = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < head->size(); ++i) {
        if (head->masked(i)) continue;
        // Neumaier summation
        const double v = (*head)(i, 1);
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
        ++count;
    }
    if (count == 0) fail(Errc::NoHeadStream, "subject " + first_session.subject_id + " has no valid head samples");
    const double height = bounds.clamp((sum + comp) / static_cast<double>(count));
    return {height, height};
}

// ---------------------------------------------------------------------------
// Bounded Laplace

/// One draw from Laplace(center, scale_b) truncated and renormalized to
/// [lower, upper], by inverting the truncated CDF. A zero scale returns center.
inline double sample_bounded_laplace(double center, double scale_b, double lower, double upper, SplitMix64& rng) {
    if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper))
        fail(Errc::InvalidBounds, "lower must be < upper");
    if (!(center >= lower && center <= upper)) fail(Errc::InvalidBounds, "center outside bounds");
    if (!(scale_b >= 0.0)) fail(Errc::InvalidBounds, "scale must be >= 0");
    const double u = rng.uniform();
    if (scale_b == 0.0) return center;

    // CDF of Laplace(center, b): 0.5 e^{z} for z < 0, 1 - 0.5 e^{-z} for z >= 0, z = (x - center) / b.
    const auto cdf = [&](double x) {
        const double z = (x - center) / scale_b;
        return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
    };
    const double lo = cdf(lower), hi = cdf(upper);
    const double p = lo + u * (hi - lo);
    const double x = p < 0.5 ? center + scale_b * std::log(2.0 * p) : center - scale_b * std::log(2.0 * (1.0 - p));
    return std::clamp(x, lower, upper);
}

inline std::uint64_t motion_noise_seed(const PrivacyConfig& cfg, const SessionRecording& r) noexcept {
    return derive_seed(derive_seed(cfg.noise_seed, r.subject_id), static_cast<std::uint64_t>(r.session_index));
}

/// The per-session noise realization privatize_motion applies.
struct MotionNoise {
    double head_offset_m = 0.0;  // added to every head (and hand) vertical sample
    double reach_factor = 1.0;   // multiplies hand horizontal/depth offsets from the head axis
};

inline MotionNoise draw_motion_noise(const SessionRecording& r, const AnthropometricEstimate& est,
                                     const PrivacyConfig& cfg) {
    const Interval& b = cfg.bounds_m;
    const double height = b.clamp(est.height_m);
    const double wingspan = b.clamp(est.wingspan_m);
    const std::uint64_t key = motion_noise_seed(cfg, r);
    SplitMix64 head_rng(derive_seed(key, "head"));
    SplitMix64 hand_rng(derive_seed(key, "hands"));
    MotionNoise noise;
    noise.head_offset_m =
        sample_bounded_laplace(height, b.width() / cfg.epsilon_head, b.lower, b.upper, head_rng) - height;
    noise.reach_factor =
        sample_bounded_laplace(wingspan, b.width() / cfg.epsilon_hand, b.lower, b.upper, hand_rng) / wingspan;
    return noise;
}

/// Perturbs height and wingspan with one noise draw per (stream kind, session).
/// Head: a constant vertical offset; horizontal and depth components pass
/// through. Hands: the horizontal/depth offset from the head axis is scaled by
/// the reach factor and the vertical component moves with the head offset.
inline SessionRecording privatize_motion(const SessionRecording& r, const std::optional<AnthropometricEstimate>& est,
                                         const PrivacyConfig& cfg) {
    validate(cfg);
    if (!est || !std::isfinite(est->height_m) || !std::isfinite(est->wingspan_m) || !(est->wingspan_m > 0.0))
        fail(Errc::MissingEstimate, "no anthropometric estimate for subject " + r.subject_id);
    const MotionNoise noise = draw_motion_noise(r, *est, cfg);
    SessionRecording out = r;
    if (noise.head_offset_m == 0.0 && noise.reach_factor == 1.0) return out;

    const TimeSeries* head = r.stream(StreamKind::Head);
    if (head) {
        std::vector<double> v(head->values().begin(), head->values().end());
        for (std::size_t i = 0; i < head->size(); ++i) v[i * 3 + 1] += noise.head_offset_m;
        out.streams[index_of(StreamKind::Head)] = TimeSeries(StreamKind::Head, head->rate_hz(), 3, std::move(v));
    }

    const TimeSeries* left = r.stream(StreamKind::LeftHand);
    const TimeSeries* right = r.stream(StreamKind::RightHand);
    for (const TimeSeries* hand : {left, right}) {
        if (!hand) continue;
        double mean_x = 0.0, mean_z = 0.0;
        std::size_t valid = 0;
        for (std::size_t i = 0; i < hand->size(); ++i)
            if (!hand->masked(i)) {
                mean_x += (*hand)(i, 0);
                mean_z += (*hand)(i, 2);
                ++valid;
            }
        if (valid > 0) {
            mean_x /= static_cast<double>(valid);
            mean_z /= static_cast<double>(valid);
        }
        // Axis per sample: head if valid, else the midpoint of both hands, else the hand's own mean.
        auto axis = [&](std::size_t i, double& ax, double& az) {
            if (head && i < head->size() && !head->masked(i)) {
                ax = (*head)(i, 0);
                az = (*head)(i, 2);
            } else if (left && right && i < left->size() && i < right->size() && !left->masked(i) &&
                       !right->masked(i)) {
                ax = 0.5 * ((*left)(i, 0) + (*right)(i, 0));
                az = 0.5 * ((*left)(i, 2) + (*right)(i, 2));
            } else {
                ax = mean_x;
                az = mean_z;
            }
        };
        std::vector<double> v(hand->values().begin(), hand->values().end());
        for (std::size_t i = 0; i < hand->size(); ++i) {
            double ax, az;
            axis(i, ax, az);
            v[i * 3 + 0] = ax + noise.reach_factor * (v[i * 3 + 0] - ax);
            v[i * 3 + 1] += noise.head_offset_m;
            v[i * 3 + 2] = az + noise.reach_factor * (v[i * 3 + 2] - az);
        }
        out.streams[index_of(hand->kind())] = TimeSeries(hand->kind(), hand->rate_hz(), 3, std::move(v));
    }
    return out;
}

/// Gaze is smoothed iff gaze_private; head and hands are perturbed iff
/// motion_private. Every other stream is copied bit-for-bit.
inline SessionRecording apply_privacy(const SessionRecording& r, const PrivacyConfig& cfg,
                                      const std::optional<AnthropometricEstimate>& est) {
    validate(cfg);
    SessionRecording out = r;
    if (cfg.gaze_private)
        if (const TimeSeries* g = r.stream(StreamKind::Gaze))
            out.streams[index_of(StreamKind::Gaze)] = smooth_stream(*g, cfg.window_b);
    const bool has_motion =
        r.has(StreamKind::Head) || r.has(StreamKind::LeftHand) || r.has(StreamKind::RightHand);
    if (cfg.motion_private && has_motion) {
        const SessionRecording moved = privatize_motion(r, est, cfg);
        for (auto k : {StreamKind::Head, StreamKind::LeftHand, StreamKind::RightHand})
            out.streams[index_of(k)] = moved.streams[index_of(k)];
    }
    return out;
}

/// Applies `cfg` to every recording, estimating anthropometrics from each
/// subject's earliest (unprivatized) session.
inline Dataset apply_privacy(const Dataset& d, const PrivacyConfig& cfg) {
    validate(cfg);
    std::vector<SessionRecording> out;
    out.reserve(d.size());
    std::map<std::string, AnthropometricEstimate> estimates;
    if (cfg.motion_private)
        for (const auto& subject : d.subjects())
            estimates[subject] = estimate_anthropometrics(*d.sessions_of(subject).front(), cfg.bounds_m);
    for (const auto& r : d.recordings()) {
        std::optional<AnthropometricEstimate> est;
        if (auto it = estimates.find(r.subject_id); it != estimates.end()) est = it->second;
        out.push_back(apply_privacy(r, cfg, est));
    }
    return Dataset(std::move(out));
}

inline nlohmann::json to_json(const PrivacyConfig& c) {
    return {{"gaze_private", c.gaze_private},
            {"motion_private", c.motion_private},
            {"B", c.window_b},
            {"epsilon_head", c.epsilon_head},
            {"epsilon_hand", c.epsilon_hand},
            {"bounds_m", {c.bounds_m.lower, c.bounds_m.upper}},
            {"noise_seed", c.noise_seed}};
}

/// Missing keys keep their defaults.
inline PrivacyConfig privacy_config_from_json(const nlohmann::json& j, PrivacyConfig c = {}) {
    try {
        c.gaze_private = j.value("gaze_private", c.gaze_private);
        c.motion_private = j.value("motion_private", c.motion_private);
        if (j.contains("B")) {
            const auto b = j.at("B").get<long long>();
            if (b < 1) fail(Errc::InvalidB, "B must be >= 1");
            c.window_b = static_cast<std::size_t>(b);
        }
        c.epsilon_head = j.value("epsilon_head", c.epsilon_head);
        c.epsilon_hand = j.value("epsilon_hand", c.epsilon_hand);
        if (j.contains("bounds_m")) {
            const auto b = j.at("bounds_m").get<std::vector<double>>();
            if (b.size() != 2) fail(Errc::InvalidBounds, "bounds_m must have two entries");
            c.bounds_m = {b[0], b[1]};
        }
        c.noise_seed = j.value("noise_seed", c.noise_seed);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::InvalidConfig, std::string("privacy config: ") + e.what());
    }
    validate(c);
    return c;
}

} // namespace vrleak
