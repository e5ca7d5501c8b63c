#include "catch_amalgamated.hpp"
#include "test_support.hpp"

#include "vrleak/signal_features.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace vrleak;

namespace {

// Least-squares derivative weights via an SVD pseudoinverse of the
// Vandermonde matrix: row 1 of pinv(V) is d/du at the window center.
std::vector<double> sg_oracle(int window, int order, double at) {
    const int half = window / 2;
    Eigen::MatrixXd v(window, order + 1);
    for (int j = 0; j < window; ++j)
        for (int k = 0; k <= order; ++k) v(j, k) = std::pow(double(j - half), k);
    const Eigen::MatrixXd pinv = v.completeOrthogonalDecomposition().pseudoInverse();
    std::vector<double> c(window, 0.0);
    for (int k = 1; k <= order; ++k)
        for (int j = 0; j < window; ++j) c[j] += k * std::pow(at, k - 1) * pinv(k, j);
    return c;
}

SessionRecording motion_recording(std::size_t n) {
    auto rng = vrtest::case_rng(41, static_cast<int>(n));
    return vrtest::gen_recording(rng, "A", 1, n);
}

} // namespace

TEST_CASE("window-7 order-2 SG coefficients equal (-3..3)/28") {
    const auto c = sg_derivative_coefficients(7, 2);
    const auto oracle = sg_oracle(7, 2, 0.0);
    REQUIRE(c.size() == 7);
    for (int j = 0; j < 7; ++j) {
        CHECK(std::abs(c[j] - (j - 3) / 28.0) <= 1e-12);
        CHECK(std::abs(c[j] - oracle[j]) <= 1e-12);
    }
}

TEST_CASE("SG coefficients match the pseudoinverse oracle off-center and at other sizes") {
    for (int window : {5, 7, 9, 11})
        for (int order : {1, 2, 3})
            for (int at = -window / 2; at <= window / 2; ++at) {
                if (order >= window) continue;
                const auto c = sg_derivative_coefficients(window, order, at);
                const auto o = sg_oracle(window, order, at);
                for (int j = 0; j < window; ++j) CHECK(std::abs(c[j] - o[j]) <= 1e-10);
            }
    CHECK_THROWS_AS(sg_derivative_coefficients(6, 2), Error);
    CHECK_THROWS_AS(sg_derivative_coefficients(3, 3), Error);
}

TEST_CASE("SG derivative of linear and quadratic signals is exact") {
    const double rate = 90.0;
    for (int i = 0; i < 30; ++i) {
        auto rng = vrtest::case_rng(42, i);
        const double a = rng.uniform(-5, 5), b = rng.uniform(-50, 50), q = rng.uniform(-2, 2);
        const auto n = vrtest::gen_size(rng, 7, 200);
        std::vector<double> lin(n), quad(n);
        for (std::size_t t = 0; t < n; ++t) {
            const double s = double(t) / rate;
            lin[t] = a + b * s;
            quad[t] = a + b * s + q * s * s;
        }
        const auto dl = sg_derivative(lin, rate);
        const auto dq = sg_derivative(quad, rate);
        for (std::size_t t = 0; t < n; ++t) {
            CHECK(std::abs(dl[t] - b) <= 1e-9);
            CHECK(std::abs(dq[t] - (b + 2 * q * double(t) / rate)) <= 1e-8);
        }
    }
}

TEST_CASE("SG derivative propagates NaN only within the window") {
    std::vector<double> x(40);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = double(t);
    x[20] = std::numeric_limits<double>::quiet_NaN();
    const auto d = sg_derivative(x, 1.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        const bool touched = t >= 17 && t <= 23;
        CHECK(std::isnan(d[t]) == touched);
    }
    CHECK_THROWS_AS(sg_derivative(std::vector<double>(6, 0.0), 90.0), Error);
}

TEST_CASE("velocity clamp saturates at +-1000 deg/s and keeps NaN") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto v = clamp_velocity(std::vector<double>{-5000, -1000, 3, 1000.5, nan});
    CHECK(v[0] == -1000);
    CHECK(v[1] == -1000);
    CHECK(v[2] == 3);
    CHECK(v[3] == 1000);
    CHECK(std::isnan(v[4]));
}

TEST_CASE("gaze_to_angles converts direction vectors") {
    TimeSeries g(StreamKind::Gaze, 90, 3, {0, 0.5, std::sqrt(3.0) / 2, 1, 0, 0, 0, 0, 0, 0, 0, 2});
    const auto a = gaze_to_angles(g);
    CHECK(std::abs(a(0, 0)) <= 1e-12);
    CHECK(std::abs(a(0, 1) - 30.0) <= 1e-12);
    CHECK(std::abs(a(1, 0) - 90.0) <= 1e-12);
    CHECK(a.masked(2));
    CHECK(std::abs(a(3, 0)) <= 1e-12);
    CHECK(std::abs(a(3, 1)) <= 1e-12);
    TimeSeries two(StreamKind::Gaze, 90, 2, {1, 2});
    CHECK(bit_equal(gaze_to_angles(two), two));
}

TEST_CASE("windowing drops the remainder and keeps sample order") {
    std::vector<std::vector<double>> ch(2, std::vector<double>(1000));
    for (std::size_t t = 0; t < 1000; ++t) {
        ch[0][t] = double(t);
        ch[1][t] = -double(t);
    }
    const auto w = window_session(ch, 450, "A", 2);
    REQUIRE(w.size() == 2);
    CHECK(w[1](0, 0) == 450);
    CHECK(w[1](449, 1) == -899);
    CHECK(w[1].window_index == 1);
    CHECK(w[0].session_index == 2);
    ch[1].pop_back();
    CHECK_THROWS_AS(window_session(ch, 450), Error);
}

TEST_CASE("raw windows follow the selection's channel layout") {
    const auto r = motion_recording(1000);
    const ChannelSelection all{true, true, true};
    const auto w = build_raw_windows(r, all);
    REQUIRE(w.size() == 2);
    CHECK(w[0].channels == 11);
    CHECK(channel_names(all).size() == 11);
    const auto& head = *r.stream(StreamKind::Head);
    CHECK(w[1](3, 2) == head(453, 0));
    CHECK(w[1](3, 5 + 4) == (*r.stream(StreamKind::RightHand))(453, 1));
    for (const auto& win : w)
        for (std::size_t t = 0; t < win.samples; ++t) CHECK(std::abs(win(t, 0)) <= kVelocityLimitDegS);

    CHECK(build_raw_windows(motion_recording(449), all).empty());
    CHECK_THROWS_AS(build_raw_windows(r, ChannelSelection{}), Error);
    auto no_gaze = r;
    no_gaze.streams[index_of(StreamKind::Gaze)].reset();
    try {
        build_raw_windows(no_gaze, all);
        FAIL("expected MissingStream");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingStream);
    }
}

TEST_CASE("norm stats fit gaze channels with population std") {
    ChannelWindow w;
    w.samples = 2;
    w.channels = 5;
    w.data = {-1, 10, 7, 7, 7, 1, 10, 8, 8, 8};
    const auto s = fit_norm_stats(std::vector<ChannelWindow>{w}, ChannelSelection{true, true, false});
    CHECK(s.channels[0].mean == 0.0);
    CHECK(s.channels[0].std == 1.0);
    CHECK(s.channels[1].mean == 10.0);
    CHECK(s.channels[1].std == 1.0);  // zero variance falls back to 1
    CHECK(s.channels[1].normalized);
    for (std::size_t c = 2; c < 5; ++c) CHECK(s.channels[c] == ChannelNorm{});
    CHECK_THROWS_AS(fit_norm_stats(std::vector<ChannelWindow>{}, ChannelSelection{true, false, false}), Error);
}

TEST_CASE("normalized windows are NaN-free and motion channels pass through") {
    for (int i = 0; i < 20; ++i) {
        auto rng = vrtest::case_rng(43, i);
        auto r = vrtest::gen_recording(rng, "A", 1, 1000);
        r.streams[index_of(StreamKind::Gaze)] = vrtest::gen_series(rng, StreamKind::Gaze, 1000, 3, 0.05);
        const ChannelSelection sel{true, true, false};
        const auto raw = build_raw_windows(r, sel);
        const auto stats = fit_norm_stats(raw, sel);
        for (const auto& w : raw) {
            const auto n = normalize_window(w, stats);
            CHECK_FALSE(n.has_nan());
            for (std::size_t t = 0; t < n.samples; t += 13) {
                CHECK(n(t, 2) == w(t, 2));
                if (std::isnan(w(t, 0))) CHECK(n(t, 0) == 0.0);
                else CHECK(n(t, 0) == Catch::Approx((w(t, 0) - stats.channels[0].mean) / stats.channels[0].std));
            }
        }
        CHECK_THROWS_AS(normalize_window(raw[0], NormStats::identity(3)), Error);
    }
}

TEST_CASE("smoothed gaze pipeline has no NaN after normalization") {
    const auto r = motion_recording(900);
    const ChannelSelection sel{true, false, false};
    const auto stats = fit_norm_stats(build_raw_windows(r, sel), sel);
    for (const auto& w : build_windows(r, sel, stats)) CHECK_FALSE(w.has_nan());
}
