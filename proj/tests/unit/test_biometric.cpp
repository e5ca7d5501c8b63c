#include "catch_amalgamated.hpp"
#include "test_support.hpp"

#include "vrleak/biometric.hpp"

#include <cmath>
#include <numeric>
#include <set>

using namespace vrleak;

namespace {

ChannelWindow window_of(const std::vector<std::vector<double>>& channels) {
    ChannelWindow w;
    w.samples = channels.front().size();
    w.channels = channels.size();
    w.data.resize(w.samples * w.channels);
    for (std::size_t t = 0; t < w.samples; ++t)
        for (std::size_t c = 0; c < w.channels; ++c) w(t, c) = channels[c][t];
    return w;
}

// Long-double reference for the ten features; quantiles by the R type-7 rule
// written from its definition, x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]).
std::vector<double> feature_oracle(std::vector<double> x) {
    using L = long double;
    const std::size_t n = x.size();
    L mean = 0;
    for (double v : x) mean += v;
    mean /= n;
    L m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        const L d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    L mad = 0;
    for (std::size_t t = 1; t < n; ++t) mad += std::fabs(L(x[t]) - L(x[t - 1]));
    mad /= (n - 1);
    std::vector<L> a(x.begin(), x.end() - 1), b(x.begin() + 1, x.end());
    const L ma = std::accumulate(a.begin(), a.end(), L(0)) / a.size();
    const L mb = std::accumulate(b.begin(), b.end(), L(0)) / b.size();
    L sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    std::sort(x.begin(), x.end());
    auto q = [&](L p) {
        const L h = (n - 1) * p;
        const auto lo = static_cast<std::size_t>(h);
        return lo + 1 < n ? x[lo] + (h - lo) * (x[lo + 1] - x[lo]) : L(x[lo]);
    };
    return {double(mean),
            double(std::sqrt(m2)),
            double(q(0.5L)),
            double(q(0.75L) - q(0.25L)),
            double(m3 / std::pow(m2, 1.5L)),
            double(m4 / (m2 * m2) - 3),
            double(mad),
            double(sab / std::sqrt(saa * sbb)),
            x.front(),
            x.back()};
}

EmbeddingVector random_embedding(SplitMix64& rng, std::size_t d) { return {vrtest::gen_vector(rng, d, -3, 3)}; }

} // namespace

TEST_CASE("channel features match the long-double oracle") {
    for (int i = 0; i < vrtest::kCases; ++i) {
        auto rng = vrtest::case_rng(51, i);
        const auto n = vrtest::gen_size(rng, 3, 500);
        auto x = vrtest::gen_vector(rng, n, -rng.uniform(0.1, 100), rng.uniform(0.1, 100));
        const auto f = raw_features(window_of({x}));
        const auto o = feature_oracle(x);
        REQUIRE(f.size() == kFeaturesPerChannel);
        for (std::size_t k = 0; k < f.size(); ++k) {
            INFO("case " << i << " feature " << kFeatureNames[k]);
            CHECK(f[k] == Catch::Approx(o[k]).epsilon(1e-9).margin(1e-9));
        }
    }
}

TEST_CASE("feature fixtures") {
    SECTION("alternating sequence has lag-1 autocorrelation -1") {
        std::vector<double> x(100);
        for (std::size_t t = 0; t < x.size(); ++t) x[t] = t % 2 ? 1.0 : -1.0;
        const auto f = raw_features(window_of({x}));
        CHECK(f[7] == Catch::Approx(-1.0).margin(1e-12));
        CHECK(f[6] == 2.0);  // mean |first difference|
        CHECK(f[1] == 1.0);  // population std
    }
    SECTION("constant channels use the degenerate conventions") {
        const auto f = raw_features(window_of({std::vector<double>(50, 3.0)}));
        const std::vector<double> expected{3, 0, 3, 0, 0, 0, 0, 0, 3, 3};
        CHECK(f == expected);
    }
    SECTION("known quantiles and moments") {
        const auto f = raw_features(window_of({{1, 2, 3, 4}}));
        CHECK(f[0] == 2.5);
        CHECK(f[2] == 2.5);
        CHECK(f[3] == 1.5);  // 3.25 - 1.75
        CHECK(f[4] == Catch::Approx(0.0).margin(1e-15));
        CHECK(f[5] == Catch::Approx(-1.36));  // excess kurtosis of a 4-point uniform grid
        CHECK(f[7] == Catch::Approx(1.0));
    }
}

TEST_CASE("features depend only on channel values") {
    auto rng = vrtest::case_rng(52, 0);
    auto w = window_of({vrtest::gen_vector(rng, 64), vrtest::gen_vector(rng, 64)});
    auto renamed = w;
    renamed.subject_id = "someone else";
    renamed.session_index = 9;
    renamed.window_index = 42;
    CHECK(raw_features(w) == raw_features(renamed));
    CHECK(feature_layout(ChannelSelection{true, false, false}).front() == "gaze_vx.mean");
    CHECK(feature_layout(ChannelSelection{true, true, true}).size() == 110);
}

TEST_CASE("feature scaler z-scores and zeroes degenerate features") {
    const std::vector<std::vector<double>> train{{1, 5}, {3, 5}};
    const auto s = fit_feature_scaler(train);
    CHECK(s.mean == std::vector<double>{2, 5});
    CHECK(s.std == std::vector<double>{1, 0});
    const auto e = standardize(std::vector<double>{4, 100}, s);
    CHECK(e.values == std::vector<double>{2, 0});
    CHECK_THROWS_AS(standardize(std::vector<double>{1}, s), Error);
    CHECK_THROWS_AS(fit_feature_scaler(std::vector<std::vector<double>>{}), Error);
}

TEST_CASE("enrollment centroid fixtures") {
    const EmbeddingVector e{{1, -2, 3}}, neg{{-1, 2, -3}};
    CHECK(enroll("A", std::vector{e}).centroid.values == e.values);
    CHECK(enroll("A", std::vector{e, e}).centroid.values == e.values);
    CHECK(enroll("A", std::vector{e, neg}).centroid.values == std::vector<double>{0, 0, 0});
    CHECK(enroll("A", std::vector{e, e, neg}).window_count == 3);
    CHECK_THROWS_AS(enroll("A", std::vector<EmbeddingVector>{}), Error);
}

TEST_CASE("verification score fixtures") {
    const EnrollmentTemplate t{"A", {{1, 2, 2}}, 1};
    CHECK(verify(EmbeddingVector{{1, 2, 2}}, t) == Catch::Approx(1.0));
    CHECK(verify(EmbeddingVector{{-1, -2, -2}}, t) == Catch::Approx(-1.0));
    CHECK(verify(EmbeddingVector{{2, -1, 0}}, t) == Catch::Approx(0.0).margin(1e-15));
    CHECK(verify(EmbeddingVector{{0, 0, 0}}, t) == 0.0);
    CHECK_THROWS_AS(verify(EmbeddingVector{{1, 2}}, t), Error);
}

TEST_CASE("identification invariants") {
    for (int i = 0; i < 100; ++i) {
        auto rng = vrtest::case_rng(53, i);
        const auto d = vrtest::gen_size(rng, 2, 30);
        std::vector<EnrollmentTemplate> gallery;
        for (std::size_t g = 0; g < vrtest::gen_size(rng, 1, 12); ++g)
            gallery.push_back({"G" + std::to_string(g), random_embedding(rng, d), 1});
        const auto probe = random_embedding(rng, d);
        const auto ranked = identify(probe, gallery);
        REQUIRE(ranked.size() == gallery.size());
        for (std::size_t k = 1; k < ranked.size(); ++k) CHECK(ranked[k - 1].score >= ranked[k].score);

        // Gallery order does not matter.
        auto shuffled = gallery;
        for (std::size_t k = shuffled.size() - 1; k > 0; --k) std::swap(shuffled[k], shuffled[rng.below(k + 1)]);
        CHECK(identify(probe, shuffled) == ranked);

        // Scaling every embedding by a positive constant keeps the order.
        const double c = rng.uniform(0.01, 100);
        auto scaled_gallery = gallery;
        for (auto& t : scaled_gallery)
            for (double& v : t.centroid.values) v *= c;
        auto scaled_probe = probe;
        for (double& v : scaled_probe.values) v *= c;
        const auto rescaled = identify(scaled_probe, scaled_gallery);
        for (std::size_t k = 0; k < ranked.size(); ++k) CHECK(rescaled[k].subject_id == ranked[k].subject_id);

        // The probe's own centroid dominates once inserted.
        gallery.push_back({"SELF", probe, 1});
        CHECK(identify(probe, gallery).front().subject_id == "SELF");
    }
    CHECK_THROWS_AS(identify(EmbeddingVector{{1.0}}, std::vector<EnrollmentTemplate>{}), Error);
}

TEST_CASE("identification dominance fixture and ties") {
    const std::vector<EnrollmentTemplate> g{{"B", {{0, 1}}, 1}, {"A", {{1, 0}}, 1}, {"C", {{1, 0}}, 1}};
    const auto r = identify(EmbeddingVector{{1, 0}}, g);
    CHECK(r[0].subject_id == "A");
    CHECK(r[1].subject_id == "C");
    CHECK(r[2].subject_id == "B");
}

TEST_CASE("fold assignment partitions subjects") {
    const auto ids = vrtest::gen_subject_ids(38);
    const auto a = assign_folds(ids, 4, 1);
    std::vector<std::size_t> sizes;
    std::multiset<std::string> seen;
    for (const auto& f : a.folds) {
        sizes.push_back(f.test.size());
        seen.insert(f.test.begin(), f.test.end());
        CHECK(f.train.size() + f.test.size() == 38);
        std::vector<std::string> overlap;
        std::set_intersection(f.train.begin(), f.train.end(), f.test.begin(), f.test.end(),
                              std::back_inserter(overlap));
        CHECK(overlap.empty());
    }
    CHECK(sizes == std::vector<std::size_t>{10, 10, 9, 9});
    CHECK(seen == std::multiset<std::string>(ids.begin(), ids.end()));

    // Deterministic in the seed and independent of input order.
    auto reversed = ids;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(assign_folds(reversed, 4, 1).folds[0].test == a.folds[0].test);
    CHECK(assign_folds(ids, 4, 2).folds[0].test != a.folds[0].test);

    try {
        assign_folds(vrtest::gen_subject_ids(3), 4, 1);
        FAIL("expected TooFewSubjects");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::TooFewSubjects);
    }
}

TEST_CASE("statistical embedder fits on training windows only") {
    auto rng = vrtest::case_rng(54, 0);
    std::vector<ChannelWindow> train;
    for (int i = 0; i < 10; ++i) train.push_back(window_of({vrtest::gen_vector(rng, 90), vrtest::gen_vector(rng, 90)}));
    StatisticalEmbedder e;
    e.fit(train);
    CHECK(e.id() == "statistical-10/1");
    // Training embeddings are z-scored: each feature has mean 0 over the training set.
    std::vector<double> sums(20, 0.0);
    for (const auto& w : train) {
        const auto v = e.embed(w);
        REQUIRE(v.size() == 20);
        for (std::size_t k = 0; k < 20; ++k) sums[k] += v.values[k];
    }
    for (double s : sums) CHECK(std::abs(s) < 1e-9);
    CHECK(e.embed(train[3]).values == e.embed(train[3]).values);
}

TEST_CASE("template JSON round trip") {
    const EnrollmentTemplate t{"S007", {{0.1, -2.5, 1e-17}}, 9};
    const auto back = template_from_json(to_json(t));
    CHECK(back.subject_id == t.subject_id);
    CHECK(back.window_count == 9);
    CHECK(back.centroid.values == t.centroid.values);
    CHECK_THROWS_AS(template_from_json(nlohmann::json::object()), Error);
}
