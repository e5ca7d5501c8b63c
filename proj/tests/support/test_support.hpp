#pragma once

// Hand-rolled generators for property tests. Every generator is a pure
// function of (seed, case index), so a failing case is reproducible from the
// INFO line Catch2 prints.

#include "vrleak/core_model.hpp"
#include "vrleak/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vrtest {

inline constexpr int kCases = 200;

inline vrleak::SplitMix64 case_rng(std::uint64_t suite, int index) {
    return vrleak::SplitMix64(vrleak::derive_seed(suite, static_cast<std::uint64_t>(index)));
}

inline std::vector<double> gen_vector(vrleak::SplitMix64& rng, std::size_t n, double lo = -10.0, double hi = 10.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

inline std::size_t gen_size(vrleak::SplitMix64& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

inline vrleak::TimeSeries gen_series(vrleak::SplitMix64& rng, vrleak::StreamKind kind, std::size_t n,
                                     std::size_t arity, double mask_prob = 0.0) {
    std::vector<double> v = gen_vector(rng, n * arity);
    if (mask_prob > 0.0)
        for (std::size_t i = 0; i < n; ++i)
            if (rng.uniform() < mask_prob) v[i * arity] = std::numeric_limits<double>::quiet_NaN();
    return vrleak::TimeSeries(kind, vrleak::kNominalRateHz, arity, std::move(v));
}

/// Recording with every stream present and realistic motion magnitudes.
inline vrleak::SessionRecording gen_recording(vrleak::SplitMix64& rng, std::string subject, int session,
                                              std::size_t n) {
    using vrleak::StreamKind;
    vrleak::SessionRecording r;
    r.subject_id = std::move(subject);
    r.session_index = session;
    std::vector<double> gaze(3 * n), head(3 * n), lh(3 * n), rh(3 * n);
    const double height = rng.uniform(1.4, 1.9);
    for (std::size_t i = 0; i < n; ++i) {
        double az = rng.uniform(-20, 20), el = rng.uniform(-15, 15);
        gaze[3 * i] = std::sin(az * 0.01745) * std::cos(el * 0.01745);
        gaze[3 * i + 1] = std::sin(el * 0.01745);
        gaze[3 * i + 2] = std::cos(az * 0.01745) * std::cos(el * 0.01745);
        head[3 * i] = rng.normal(0, 0.05);
        head[3 * i + 1] = height + rng.normal(0, 0.01);
        head[3 * i + 2] = rng.normal(0, 0.05);
        for (int c = 0; c < 3; ++c) {
            lh[3 * i + c] = head[3 * i + c] + rng.normal(c == 0 ? -0.3 : c == 1 ? -0.5 : 0.4, 0.05);
            rh[3 * i + c] = head[3 * i + c] + rng.normal(c == 0 ? 0.3 : c == 1 ? -0.5 : 0.4, 0.05);
        }
    }
    const double rate = vrleak::kNominalRateHz;
    r.streams[vrleak::index_of(StreamKind::Gaze)] = vrleak::TimeSeries(StreamKind::Gaze, rate, 3, std::move(gaze));
    r.streams[vrleak::index_of(StreamKind::Head)] = vrleak::TimeSeries(StreamKind::Head, rate, 3, std::move(head));
    r.streams[vrleak::index_of(StreamKind::LeftHand)] = vrleak::TimeSeries(StreamKind::LeftHand, rate, 3, std::move(lh));
    r.streams[vrleak::index_of(StreamKind::RightHand)] =
        vrleak::TimeSeries(StreamKind::RightHand, rate, 3, std::move(rh));
    return r;
}

inline std::vector<std::string> gen_subject_ids(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("P" + std::to_string(100 + i));
    return out;
}

} // namespace vrtest
