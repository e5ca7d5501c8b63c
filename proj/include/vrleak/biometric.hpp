#pragma once

// Feature-based biometric engine: window embeddings, centroid enrollment,
// cosine verification, ranked identification and subject-disjoint folds.
//
// Any type modelling WindowEmbedder can replace StatisticalEmbedder in the
// experiment runner.

#include "error.hpp"
#include "rng.hpp"
#include "signal_features.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vrleak {

inline constexpr std::array<std::string_view, 10> kFeatureNames{
    "mean", "std", "median", "iqr", "skewness", "kurtosis", "mean_abs_diff", "lag1_autocorr", "min", "max"};
inline constexpr std::size_t kFeaturesPerChannel = kFeatureNames.size();

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// "<channel>.<feature>" for every embedding slot, in order.
inline std::vector<std::string> feature_layout(const ChannelSelection& selection) {
    std::vector<std::string> out;
    for (const auto& ch : channel_names(selection))
        for (auto f : kFeatureNames) out.push_back(ch + "." + std::string(f));
    return out;
}

// ---------------------------------------------------------------------------
// Per-channel statistics

namespace detail {

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p) noexcept {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline constexpr double kDegenerateVariance = 1e-24;

/// Appends the ten channel features. Zero-variance conventions: skewness,
/// excess kurtosis and lag-1 autocorrelation are 0.
inline void channel_features(std::span<const double> x, std::vector<double>& out) {
    const std::size_t n = x.size();
    const double nd = static_cast<double>(n);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= nd;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nd;
    m3 /= nd;
    m4 /= nd;
    const bool flat = m2 <= kDegenerateVariance;

    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());

    double abs_diff = 0.0;
    for (std::size_t t = 1; t < n; ++t) abs_diff += std::abs(x[t] - x[t - 1]);
    if (n > 1) abs_diff /= nd - 1.0;

    // Pearson correlation of (x_t, x_{t+1}) pairs.
    double autocorr = 0.0;
    if (n > 2 && !flat) {
        double ma = 0.0, mb = 0.0;
        for (std::size_t t = 0; t + 1 < n; ++t) {
            ma += x[t];
            mb += x[t + 1];
        }
        ma /= nd - 1.0;
        mb /= nd - 1.0;
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::size_t t = 0; t + 1 < n; ++t) {
            const double a = x[t] - ma, b = x[t + 1] - mb;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        if (saa > kDegenerateVariance && sbb > kDegenerateVariance)
            autocorr = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
    }

    out.push_back(mean);
    out.push_back(std::sqrt(m2));
    out.push_back(quantile_sorted(sorted, 0.5));
    out.push_back(quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25));
    out.push_back(flat ? 0.0 : m3 / std::pow(m2, 1.5));
    out.push_back(flat ? 0.0 : m4 / (m2 * m2) - 3.0);
    out.push_back(abs_diff);
    out.push_back(autocorr);
    out.push_back(sorted.front());
    out.push_back(sorted.back());
}

} // namespace detail

/// Unstandardized features, channel-major. Depends only on the sample values.
inline std::vector<double> raw_features(const ChannelWindow& w) {
    std::vector<double> out;
    out.reserve(w.channels * kFeaturesPerChannel);
    for (std::size_t c = 0; c < w.channels; ++c) detail::channel_features(w.channel(c), out);
    return out;
}

struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> std;  // 0 marks a degenerate feature
};

inline FeatureScaler fit_feature_scaler(std::span<const std::vector<double>> training) {
    if (training.empty()) fail(Errc::NoTrainingData, "no training embeddings");
    const std::size_t d = training.front().size();
    FeatureScaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& f : training) {
        if (f.size() != d) fail(Errc::LengthMismatch, "training feature lengths differ");
        for (std::size_t i = 0; i < d; ++i) s.mean[i] += f[i];
    }
    const auto n = static_cast<double>(training.size());
    for (double& m : s.mean) m /= n;
    for (const auto& f : training)
        for (std::size_t i = 0; i < d; ++i) s.std[i] += (f[i] - s.mean[i]) * (f[i] - s.mean[i]);
    for (double& v : s.std) {
        v = std::sqrt(v / n);
        if (v < 1e-12) v = 0.0;
    }
    return s;
}

inline EmbeddingVector standardize(std::span<const double> features, const FeatureScaler& scaler) {
    if (features.size() != scaler.mean.size()) fail(Errc::LengthMismatch, "feature length does not match scaler");
    EmbeddingVector e;
    e.values.resize(features.size());
    for (std::size_t i = 0; i < features.size(); ++i)
        e.values[i] = scaler.std[i] == 0.0 ? 0.0 : (features[i] - scaler.mean[i]) / scaler.std[i];
    return e;
}

inline EmbeddingVector embed_window(const ChannelWindow& w, const FeatureScaler& scaler) {
    return standardize(raw_features(w), scaler);
}

template <class E>
concept WindowEmbedder = requires(E e, const E& ce, std::span<const ChannelWindow> training, const ChannelWindow& w) {
    { ce.id() } -> std::convertible_to<std::string>;
    e.fit(training);
    { ce.embed(w) } -> std::same_as<EmbeddingVector>;
};

/// Ten summary statistics per channel, z-scored with training-fit statistics.
class StatisticalEmbedder {
public:
    std::string id() const { return "statistical-10/1"; }

    void fit(std::span<const ChannelWindow> training) {
        std::vector<std::vector<double>> feats;
        feats.reserve(training.size());
        for (const auto& w : training) feats.push_back(raw_features(w));
        scaler_ = fit_feature_scaler(feats);
    }

    EmbeddingVector embed(const ChannelWindow& w) const { return embed_window(w, scaler_); }

    const FeatureScaler& scaler() const noexcept { return scaler_; }

private:
    FeatureScaler scaler_;
};

static_assert(WindowEmbedder<StatisticalEmbedder>);

// ---------------------------------------------------------------------------
// Templates and matching

struct EnrollmentTemplate {
    std::string subject_id;
    EmbeddingVector centroid;
    std::size_t window_count = 0;
};

inline EnrollmentTemplate enroll(std::string subject_id, std::span<const EmbeddingVector> embeddings) {
    if (embeddings.empty()) fail(Errc::EmptyEnrollment, "no enrollment windows for " + subject_id);
    const std::size_t d = embeddings.front().size();
    EnrollmentTemplate t{std::move(subject_id), EmbeddingVector{std::vector<double>(d, 0.0)}, embeddings.size()};
    for (const auto& e : embeddings) {
        if (e.size() != d) fail(Errc::LengthMismatch, "enrollment embedding lengths differ");
        for (std::size_t i = 0; i < d; ++i) t.centroid.values[i] += e.values[i];
    }
    for (double& v : t.centroid.values) v /= static_cast<double>(embeddings.size());
    return t;
}

/// Cosine similarity in [-1, 1]; 0 when either vector has zero norm.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(Errc::LengthMismatch, "embedding lengths differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

inline double verify(const EmbeddingVector& probe, const EnrollmentTemplate& tmpl) {
    return cosine_similarity(probe.values, tmpl.centroid.values);
}

struct Candidate {
    std::string subject_id;
    double score = 0.0;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Gallery ranked by descending score; ties go to the smaller subject id.
inline std::vector<Candidate> identify(const EmbeddingVector& probe, std::span<const EnrollmentTemplate> gallery) {
    if (gallery.empty()) fail(Errc::EmptyGallery, "identification needs a non-empty gallery");
    std::vector<Candidate> ranked;
    ranked.reserve(gallery.size());
    for (const auto& t : gallery) ranked.push_back({t.subject_id, verify(probe, t)});
    std::sort(ranked.begin(), ranked.end(), [](const Candidate& a, const Candidate& b) {
        return a.score != b.score ? a.score > b.score : a.subject_id < b.subject_id;
    });
    return ranked;
}

// ---------------------------------------------------------------------------
// Folds

struct Fold {
    std::vector<std::string> train;  // sorted
    std::vector<std::string> test;   // sorted
};

struct FoldAssignment {
    std::size_t k = 4;
    std::uint64_t seed = 0;
    std::vector<Fold> folds;
};

/// Seeded Fisher-Yates shuffle of the sorted subject list, cut into k
/// contiguous test blocks whose sizes differ by at most one (larger first).
inline FoldAssignment assign_folds(std::vector<std::string> subjects, std::size_t k, std::uint64_t seed) {
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    if (k < 2) fail(Errc::InvalidConfig, "k must be >= 2");
    if (subjects.size() < k)
        fail(Errc::TooFewSubjects, std::to_string(subjects.size()) + " subjects for " + std::to_string(k) + " folds");
    SplitMix64 rng(derive_seed(seed, "folds"));
    for (std::size_t i = subjects.size() - 1; i > 0; --i) std::swap(subjects[i], subjects[rng.below(i + 1)]);

    FoldAssignment out{k, seed, {}};
    const std::size_t base = subjects.size() / k, extra = subjects.size() % k;
    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        Fold fold;
        fold.test.assign(subjects.begin() + static_cast<std::ptrdiff_t>(start),
                         subjects.begin() + static_cast<std::ptrdiff_t>(start + size));
        for (std::size_t i = 0; i < subjects.size(); ++i)
            if (i < start || i >= start + size) fold.train.push_back(subjects[i]);
        std::sort(fold.test.begin(), fold.test.end());
        std::sort(fold.train.begin(), fold.train.end());
        out.folds.push_back(std::move(fold));
        start += size;
    }
    return out;
}

inline nlohmann::json to_json(const EnrollmentTemplate& t) {
    return {{"subject_id", t.subject_id}, {"window_count", t.window_count}, {"centroid", t.centroid.values}};
}

inline EnrollmentTemplate template_from_json(const nlohmann::json& j) {
    try {
        return {j.at("subject_id").get<std::string>(),
                EmbeddingVector{j.at("centroid").get<std::vector<double>>()},
                j.at("window_count").get<std::size_t>()};
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::ParseError, std::string("template: ") + e.what());
    }
}

} // namespace vrleak
