#pragma once

// Deterministic synthetic VR telemetry.
//
// Signal model, per session at 90 Hz:
//   head   = (wander_x, height, wander_z) + per-axis sway sinusoids
//            + a slow Ornstein-Uhlenbeck walk on each axis
//   hands  = head + shoulder-anchored offset (scaled by height * arm_scale)
//            + tremor sinusoid + reaching drift
//   gaze   = fixation target + Poisson-timed saccades whose velocity decays
//            exponentially + white fixation noise + slow drift, emitted as a
//            unit direction vector
//
// Each subject parameter p is base(p) + strength * (draw(p) - base(p)), where
// base is the midpoint of the parameter range and draw is uniform on it. At
// strength 0 every subject shares one parameter set.
//
// Random streams are counter-based SplitMix64 keyed by
// (master seed, subject id[, session index]), so output is independent of
// generation order and thread count.

#include "core_model.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

namespace vrleak {

struct Oscillation {
    double amplitude = 0.0;    // meters
    double frequency_hz = 1.0;

    friend bool operator==(const Oscillation&, const Oscillation&) = default;
};

struct GazeStyle {
    double saccade_rate_hz = 2.0;
    double saccade_amplitude_deg = 12.0;
    double fixation_noise_deg = 0.08;

    friend bool operator==(const GazeStyle&, const GazeStyle&) = default;
};

struct SubjectProfile {
    std::string subject_id;
    double height_m = 1.65;
    double arm_scale = 1.0;
    Oscillation head_sway{0.025, 0.3};
    GazeStyle gaze_style;
    Oscillation hand_tremor{0.005, 7.0};
    std::uint64_t seed = 0;

    friend bool operator==(const SubjectProfile&, const SubjectProfile&) = default;
};

struct GeneratorConfig {
    std::size_t n_subjects = 38;
    std::size_t sessions_per_subject = 2;
    double session_duration_s = 60.0;
    double identity_strength = 1.0;
    std::uint64_t seed = 7;
};

/// Parameter ranges subjects are drawn from.
namespace synth_ranges {
inline constexpr double kHeight[2] = {1.40, 1.90};
inline constexpr double kArmScale[2] = {0.94, 1.06};
inline constexpr double kSwayAmplitude[2] = {0.010, 0.050};
inline constexpr double kSwayFrequency[2] = {0.20, 0.80};
inline constexpr double kSaccadeRate[2] = {1.0, 3.5};
inline constexpr double kSaccadeAmplitude[2] = {5.0, 20.0};
inline constexpr double kFixationNoise[2] = {0.03, 0.15};
inline constexpr double kTremorAmplitude[2] = {0.002, 0.008};
inline constexpr double kTremorFrequency[2] = {4.0, 10.0};
} // namespace synth_ranges

/// Session-level constants shared by every subject.
namespace synth_model {
inline constexpr double kSaccadeTau = 0.025;          // s, exponential velocity decay
inline constexpr double kSaccadeDeadTime = 0.15;      // s, minimum inter-saccade interval
inline constexpr double kGazeLimitAz = 20.0;          // deg
inline constexpr double kGazeLimitEl = 15.0;          // deg
inline constexpr double kGazeDriftSigma = 0.3;        // deg
inline constexpr double kGazeDriftTau = 1.0;          // s
inline constexpr double kHeadWanderSigma = 0.01;      // m, horizontal play-area wander
inline constexpr double kHeadWanderTau = 8.0;         // s
inline constexpr double kHeadBobSigma = 0.002;        // m, vertical walk
inline constexpr double kHeadBobTau = 3.0;            // s
inline constexpr double kHandLateral = 0.22;          // fraction of wingspan
inline constexpr double kHandForward = 0.30;          // fraction of wingspan
inline constexpr double kHandDrop = 0.30;             // fraction of height below the head
inline constexpr double kHandDriftSigma = 0.03;       // m
inline constexpr double kHandDriftTau = 1.5;          // s
} // namespace synth_model

inline std::string synthetic_subject_id(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%03zu", index + 1);
    return buf;
}

inline void validate(const GeneratorConfig& cfg) {
    if (cfg.n_subjects < 2) fail(Errc::InvalidConfig, "n_subjects must be >= 2");
    if (cfg.sessions_per_subject < 1) fail(Errc::InvalidConfig, "sessions_per_subject must be >= 1");
    if (!(cfg.session_duration_s >= 15.0)) fail(Errc::InvalidConfig, "session_duration_s must be >= 15");
    if (!(cfg.identity_strength >= 0.0 && cfg.identity_strength <= 1.0))
        fail(Errc::InvalidConfig, "identity_strength must lie in [0, 1]");
}

inline SubjectProfile make_profile(const GeneratorConfig& cfg, std::size_t index) {
    namespace R = synth_ranges;
    SubjectProfile p;
    p.subject_id = synthetic_subject_id(index);
    p.seed = derive_seed(cfg.seed, p.subject_id);
    SplitMix64 rng(derive_seed(p.seed, "profile"));
    const double s = cfg.identity_strength;
    // Always consume one draw per parameter so the draw order does not depend on strength.
    auto pick = [&](const double (&range)[2]) {
        const double base = 0.5 * (range[0] + range[1]);
        const double draw = rng.uniform(range[0], range[1]);
        return base + s * (draw - base);
    };
    p.height_m = pick(R::kHeight);
    p.arm_scale = pick(R::kArmScale);
    p.head_sway.amplitude = pick(R::kSwayAmplitude);
    p.head_sway.frequency_hz = pick(R::kSwayFrequency);
    p.gaze_style.saccade_rate_hz = pick(R::kSaccadeRate);
    p.gaze_style.saccade_amplitude_deg = pick(R::kSaccadeAmplitude);
    p.gaze_style.fixation_noise_deg = pick(R::kFixationNoise);
    p.hand_tremor.amplitude = pick(R::kTremorAmplitude);
    p.hand_tremor.frequency_hz = pick(R::kTremorFrequency);
    return p;
}

namespace detail {

/// Stationary discretized Ornstein-Uhlenbeck process.
class OuProcess {
public:
    OuProcess(double sigma, double tau_s, double dt, SplitMix64& rng)
        : a_(std::exp(-dt / tau_s)), drive_(sigma * std::sqrt(1.0 - a_ * a_)), x_(rng.normal(0.0, sigma)) {}

    double next(SplitMix64& rng) {
        const double out = x_;
        x_ = a_ * x_ + drive_ * rng.normal();
        return out;
    }

private:
    double a_, drive_, x_;
};

inline std::vector<double> gaze_angles(const SubjectProfile& p, std::size_t n, double rate, SplitMix64& rng) {
    namespace M = synth_model;
    const auto& g = p.gaze_style;
    const double dt = 1.0 / rate;
    std::vector<double> out(2 * n);

    double from_az = rng.normal(0.0, 5.0), from_el = rng.normal(0.0, 3.0);
    double to_az = from_az, to_el = from_el;
    double onset = -1e9;
    const double mean_gap = std::max(1.0 / g.saccade_rate_hz - M::kSaccadeDeadTime, 1e-3);
    double next_onset = rng.exponential(1.0 / g.saccade_rate_hz);

    OuProcess drift_az(M::kGazeDriftSigma, M::kGazeDriftTau, dt, rng);
    OuProcess drift_el(M::kGazeDriftSigma, M::kGazeDriftTau, dt, rng);

    auto position = [&](double t, double& az, double& el) {
        const double progress = t >= onset ? 1.0 - std::exp(-(t - onset) / M::kSaccadeTau) : 0.0;
        az = from_az + (to_az - from_az) * progress;
        el = from_el + (to_el - from_el) * progress;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        while (next_onset <= t) {
            double az, el;
            position(next_onset, az, el);
            const double amp = g.saccade_amplitude_deg * rng.uniform(0.75, 1.25);
            const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
            double daz = amp * std::cos(theta), del = amp * std::sin(theta);
            if (std::abs(az + daz) > M::kGazeLimitAz) daz = -daz;
            if (std::abs(el + del) > M::kGazeLimitEl) del = -del;
            from_az = az;
            from_el = el;
            to_az = az + daz;
            to_el = el + del;
            onset = next_onset;
            next_onset += M::kSaccadeDeadTime + rng.exponential(mean_gap);
        }
        double az, el;
        position(t, az, el);
        out[2 * i] = az + drift_az.next(rng) + rng.normal(0.0, g.fixation_noise_deg);
        out[2 * i + 1] = el + drift_el.next(rng) + rng.normal(0.0, g.fixation_noise_deg);
    }
    return out;
}

} // namespace detail

/// Unit gaze direction for (azimuth, elevation) in degrees; inverse of gaze_to_angles.
inline void direction_from_angles(double az_deg, double el_deg, double* xyz) noexcept {
    const double az = az_deg * std::numbers::pi / 180.0;
    const double el = el_deg * std::numbers::pi / 180.0;
    xyz[0] = std::cos(el) * std::sin(az);
    xyz[1] = std::sin(el);
    xyz[2] = std::cos(el) * std::cos(az);
}

inline SessionRecording generate_session(const SubjectProfile& p, double duration_s, std::uint64_t session_seed,
                                         int session_index = 1) {
    namespace M = synth_model;
    const double rate = kNominalRateHz;
    const double dt = 1.0 / rate;
    const auto n = static_cast<std::size_t>(std::llround(duration_s * rate));
    constexpr double two_pi = 2.0 * std::numbers::pi;

    SplitMix64 gaze_rng(derive_seed(session_seed, "gaze"));
    SplitMix64 head_rng(derive_seed(session_seed, "head"));
    SplitMix64 hand_rng(derive_seed(session_seed, "hands"));

    const auto angles = detail::gaze_angles(p, n, rate, gaze_rng);
    std::vector<double> gaze(3 * n);
    for (std::size_t i = 0; i < n; ++i) direction_from_angles(angles[2 * i], angles[2 * i + 1], &gaze[3 * i]);

    const double sway_phase[3] = {head_rng.uniform(0, two_pi), head_rng.uniform(0, two_pi),
                                  head_rng.uniform(0, two_pi)};
    detail::OuProcess wander_x(M::kHeadWanderSigma, M::kHeadWanderTau, dt, head_rng);
    detail::OuProcess wander_z(M::kHeadWanderSigma, M::kHeadWanderTau, dt, head_rng);
    detail::OuProcess bob(M::kHeadBobSigma, M::kHeadBobTau, dt, head_rng);
    const double a = p.head_sway.amplitude, f = p.head_sway.frequency_hz;
    std::vector<double> head(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        head[3 * i] = wander_x.next(head_rng) + a * std::sin(two_pi * f * t + sway_phase[0]);
        head[3 * i + 1] = p.height_m + bob.next(head_rng) + 0.25 * a * std::sin(two_pi * 2.0 * f * t + sway_phase[1]);
        head[3 * i + 2] = wander_z.next(head_rng) + 0.8 * a * std::sin(two_pi * 1.3 * f * t + sway_phase[2]);
    }

    const double wingspan = p.height_m * p.arm_scale;
    std::vector<double> hands[2] = {std::vector<double>(3 * n), std::vector<double>(3 * n)};
    for (int side = 0; side < 2; ++side) {
        const double lateral = (side == 0 ? -1.0 : 1.0) * M::kHandLateral * wingspan;
        double phase[3];
        for (double& ph : phase) ph = hand_rng.uniform(0, two_pi);
        detail::OuProcess drift[3] = {{M::kHandDriftSigma, M::kHandDriftTau, dt, hand_rng},
                                      {M::kHandDriftSigma, M::kHandDriftTau, dt, hand_rng},
                                      {M::kHandDriftSigma, M::kHandDriftTau, dt, hand_rng}};
        const double ta = p.hand_tremor.amplitude, tf = p.hand_tremor.frequency_hz;
        auto& h = hands[side];
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) * dt;
            const double offset[3] = {lateral, -M::kHandDrop * p.height_m, M::kHandForward * wingspan};
            for (int c = 0; c < 3; ++c)
                h[3 * i + c] = head[3 * i + c] + offset[c] + ta * std::sin(two_pi * tf * t + phase[c]) +
                               drift[c].next(hand_rng);
        }
    }

    SessionRecording r;
    r.subject_id = p.subject_id;
    r.session_index = session_index;
    r.streams[index_of(StreamKind::Gaze)] = TimeSeries(StreamKind::Gaze, rate, 3, std::move(gaze));
    r.streams[index_of(StreamKind::Head)] = TimeSeries(StreamKind::Head, rate, 3, std::move(head));
    r.streams[index_of(StreamKind::LeftHand)] = TimeSeries(StreamKind::LeftHand, rate, 3, std::move(hands[0]));
    r.streams[index_of(StreamKind::RightHand)] = TimeSeries(StreamKind::RightHand, rate, 3, std::move(hands[1]));
    return r;
}

inline std::uint64_t session_seed(const SubjectProfile& p, int session_index) noexcept {
    return derive_seed(p.seed, static_cast<std::uint64_t>(session_index));
}

inline Dataset generate_population(const GeneratorConfig& cfg, unsigned threads = 1) {
    validate(cfg);
    std::vector<SubjectProfile> profiles;
    profiles.reserve(cfg.n_subjects);
    for (std::size_t i = 0; i < cfg.n_subjects; ++i) profiles.push_back(make_profile(cfg, i));

    std::vector<SessionRecording> recordings(cfg.n_subjects * cfg.sessions_per_subject);
    parallel_for(recordings.size(), threads, [&](std::size_t slot) {
        const auto& p = profiles[slot / cfg.sessions_per_subject];
        const int session = static_cast<int>(slot % cfg.sessions_per_subject) + 1;
        recordings[slot] = generate_session(p, cfg.session_duration_s, session_seed(p, session), session);
    });
    return Dataset(std::move(recordings));
}

inline nlohmann::json to_json(const GeneratorConfig& c) {
    return {{"n_subjects", c.n_subjects},
            {"sessions_per_subject", c.sessions_per_subject},
            {"session_duration_s", c.session_duration_s},
            {"identity_strength", c.identity_strength},
            {"seed", c.seed}};
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    try {
        c.n_subjects = j.value("n_subjects", c.n_subjects);
        c.sessions_per_subject = j.value("sessions_per_subject", c.sessions_per_subject);
        c.session_duration_s = j.value("session_duration_s", c.session_duration_s);
        c.identity_strength = j.value("identity_strength", c.identity_strength);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::InvalidConfig, std::string("generator config: ") + e.what());
    }
    validate(c);
    return c;
}

} // namespace vrleak
