#pragma once

// Verification (ROC, EER) and identification (Rank-1) metrics, plus fold
// aggregation. Accept rule: score >= threshold.

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace vrleak {

struct ScoreSet {
    std::vector<double> genuine;
    std::vector<double> impostor;

    void append(const ScoreSet& other) {
        genuine.insert(genuine.end(), other.genuine.begin(), other.genuine.end());
        impostor.insert(impostor.end(), other.impostor.begin(), other.impostor.end());
    }
};

struct RocPoint {
    double threshold = 0.0;
    double far = 0.0;  // fraction of impostor scores accepted
    double frr = 0.0;  // fraction of genuine scores rejected
};

enum class AcceptDirection { HigherScores, LowerScores };

namespace detail {

inline void check_scores(const ScoreSet& s) {
    if (s.genuine.empty() || s.impostor.empty()) fail(Errc::EmptyScores, "genuine and impostor scores are required");
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(s.genuine) || !finite(s.impostor)) fail(Errc::EmptyScores, "scores must be finite");
}

inline ScoreSet negated(const ScoreSet& s) {
    ScoreSet out = s;
    for (double& v : out.genuine) v = -v;
    for (double& v : out.impostor) v = -v;
    return out;
}

} // namespace detail

/// Thresholds are -inf, the midpoints between consecutive distinct scores, and
/// +inf, in increasing order; FAR is non-increasing and FRR non-decreasing.
inline std::vector<RocPoint> compute_roc(const ScoreSet& s) {
    detail::check_scores(s);
    std::vector<double> gen = s.genuine, imp = s.impostor;
    std::sort(gen.begin(), gen.end());
    std::sort(imp.begin(), imp.end());
    std::vector<double> all;
    all.reserve(gen.size() + imp.size());
    std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(all));
    all.erase(std::unique(all.begin(), all.end()), all.end());

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> thresholds;
    thresholds.reserve(all.size() + 1);
    thresholds.push_back(-inf);
    for (std::size_t i = 1; i < all.size(); ++i) thresholds.push_back(0.5 * (all[i - 1] + all[i]));
    thresholds.push_back(inf);

    const auto ng = static_cast<double>(gen.size()), ni = static_cast<double>(imp.size());
    std::vector<RocPoint> roc;
    roc.reserve(thresholds.size());
    std::size_t gen_below = 0, imp_below = 0;  // counts of scores < threshold
    for (double t : thresholds) {
        while (gen_below < gen.size() && gen[gen_below] < t) ++gen_below;
        while (imp_below < imp.size() && imp[imp_below] < t) ++imp_below;
        roc.push_back({t, static_cast<double>(imp.size() - imp_below) / ni, static_cast<double>(gen_below) / ng});
    }
    return roc;
}

/// EER in percent, linearly interpolated between the two ROC points that
/// bracket FAR = FRR. If the curve meets FAR = FRR exactly, that value is
/// returned (over an interval it is constant, so the midpoint is the same).
inline double compute_eer(const ScoreSet& s, AcceptDirection direction = AcceptDirection::HigherScores) {
    if (direction == AcceptDirection::LowerScores) return compute_eer(detail::negated(s));
    const auto roc = compute_roc(s);
    for (std::size_t i = 1; i < roc.size(); ++i) {
        const double d = roc[i].far - roc[i].frr;
        if (d > 0.0) continue;
        if (d == 0.0) {
            std::size_t j = i;
            while (j + 1 < roc.size() && roc[j + 1].far - roc[j + 1].frr == 0.0) ++j;
            return 100.0 * 0.5 * (roc[i].far + roc[j].far);
        }
        const auto& a = roc[i - 1];
        const auto& b = roc[i];
        const double da = a.far - a.frr;
        const double lambda = da / (da - d);
        return 100.0 * (a.far + lambda * (b.far - a.far));
    }
    return 100.0 * roc.back().far;  // unreachable: the +inf point has FAR - FRR = -1
}

struct IdentificationTrial {
    std::string true_subject;
    std::string rank1_subject;
};

inline double compute_rank1(std::span<const IdentificationTrial> trials) {
    if (trials.empty()) fail(Errc::EmptyTrials, "no identification trials");
    const auto hits = std::count_if(trials.begin(), trials.end(),
                                    [](const auto& t) { return t.true_subject == t.rank1_subject; });
    return 100.0 * static_cast<double>(hits) / static_cast<double>(trials.size());
}

struct ChanceLevels {
    double eer_pct = 50.0;
    double ir_pct = 0.0;
};

inline ChanceLevels chance_levels(std::size_t n_subjects) {
    if (n_subjects < 2) fail(Errc::InvalidConfig, "chance levels need >= 2 subjects");
    return {50.0, 100.0 / static_cast<double>(n_subjects)};
}

struct FoldMetrics {
    double eer_pct = 0.0;
    double rank1_ir_pct = 0.0;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample (n - 1); 0 for a single value
};

struct MetricSummary {
    std::vector<FoldMetrics> per_fold;
    MeanStd eer_pct;
    MeanStd rank1_ir_pct;
};

inline MeanStd mean_and_sample_std(std::span<const double> v) {
    MeanStd out;
    if (v.empty()) return out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    if (v.size() < 2) return out;
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return out;
}

inline MetricSummary aggregate_folds(std::span<const FoldMetrics> per_fold) {
    if (per_fold.empty()) fail(Errc::InvalidConfig, "aggregate_folds needs at least one fold");
    MetricSummary out;
    out.per_fold.assign(per_fold.begin(), per_fold.end());
    std::vector<double> eer, ir;
    for (const auto& f : per_fold) {
        eer.push_back(f.eer_pct);
        ir.push_back(f.rank1_ir_pct);
    }
    out.eer_pct = mean_and_sample_std(eer);
    out.rank1_ir_pct = mean_and_sample_std(ir);
    return out;
}

inline void write_roc_csv(std::span<const RocPoint> roc, std::ostream& os) {
    os << "threshold,far,frr\n";
    os.precision(17);
    for (const auto& p : roc) {
        if (std::isinf(p.threshold))
            os << (p.threshold < 0 ? "-inf" : "inf");
        else
            os << p.threshold;
        os << ',' << p.far << ',' << p.frr << '\n';
    }
}

} // namespace vrleak
