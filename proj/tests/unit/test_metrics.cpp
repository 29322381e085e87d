#include <doctest.h>

#include <cmath>
#include <random>

#include "sysid/errors.hpp"
#include "sysid/metrics.hpp"

using namespace sysid;

namespace {

// Tip track whose vertical coordinate is a sine starting `shift_s` seconds late.
Trajectory sine_track(double seconds, double fps, double shift_s, double freq = 0.3) {
    Trajectory t;
    t.fps = fps;
    const auto n = static_cast<int>(std::lround(seconds * fps));
    for (int i = 0; i < n; ++i) {
        const double time = i / fps - shift_s;
        t.frames.push_back({{0.0, 40.0 * std::sin(2.0 * 3.141592653589793 * freq * time) + 5.0 * std::sin(1.7 * time)}});
    }
    return t;
}

Trajectory random_traj(std::mt19937_64& rng, std::size_t frames, std::size_t points) {
    std::uniform_real_distribution<double> u(-100, 100);
    Trajectory t;
    t.fps = 10.0;
    for (std::size_t f = 0; f < frames; ++f) {
        Frame fr;
        for (std::size_t p = 0; p < points; ++p) fr.push_back({u(rng), u(rng)});
        t.frames.push_back(fr);
    }
    return t;
}

AlignedPair pair_of(Trajectory a, Trajectory b) {
    AlignedPair p;
    p.sim = std::move(a);
    p.real = std::move(b);
    return p;
}

Trajectory offset(Trajectory t, Point2 v) {
    for (auto& f : t.frames)
        for (auto& p : f) p = p + v;
    return t;
}

}  // namespace

TEST_SUITE("alignment_metrics") {

TEST_CASE("identical trajectories align at lag zero") {
    const auto t = sine_track(10, 30, 0);
    const auto p = align(t, t);
    CHECK(p.lag_frames == 0);
    CHECK(p.overlap() == 300);
    CHECK_FALSE(p.lag_clamped);
}

TEST_CASE("injected shifts are recovered") {
    const auto real = sine_track(12, 30, 0);
    for (double shift : {-0.9, -0.4, 0.4, 0.9}) {
        const auto sim = sine_track(12, 30, shift);
        const auto p = align(sim, real);
        CHECK(std::abs(p.lag_frames - std::lround(shift * 30)) <= 1);
        CHECK_FALSE(p.lag_clamped);
    }
    const auto far = align(sine_track(12, 30, 1.5), real);
    CHECK(std::abs(far.lag_frames) == 30);
    CHECK(far.lag_clamped);
}

TEST_CASE("align preconditions") {
    auto a = sine_track(10, 30, 0);
    auto b = sine_track(10, 25, 0);
    CHECK_THROWS_AS(align(a, b), InvalidArgument);
    CHECK_THROWS_AS(align(sine_track(1.5, 30, 0), sine_track(1.5, 30, 0)), InsufficientOverlap);
    CHECK_THROWS_AS(align(Trajectory{}, a), InvalidArgument);

    Trajectory flat;
    flat.fps = 30;
    flat.frames.assign(100, Frame{{1.0, 2.0}});
    const auto p = align(flat, flat);
    CHECK(p.flat_signal);
    CHECK(p.lag_frames == 0);
}

TEST_CASE("trim_transient") {
    const auto t = sine_track(10, 30, 0);
    const auto p = align(t, t);
    CHECK(trim_transient(p, 5.0).overlap() == 150);
    CHECK(trim_transient(p, 0.0).overlap() == 300);
    const auto short_pair = align(sine_track(4, 30, 0), sine_track(4, 30, 0));
    CHECK_THROWS_AS(trim_transient(short_pair, 5.0), InsufficientOverlap);
}

TEST_CASE("mae values") {
    std::mt19937_64 rng(1);
    const auto t = random_traj(rng, 6, 10);
    CHECK(mae_centerline(pair_of(t, t)) == 0.0);
    CHECK(mae_centerline(pair_of(t, offset(t, {3, 4}))) == doctest::Approx(5.0));

    const auto tip = random_traj(rng, 6, 1);
    CHECK(mae_tip(pair_of(tip, tip)) == 0.0);
    CHECK(mae_tip(pair_of(tip, offset(tip, {0, 7}))) == doctest::Approx(7.0));
    const auto other = random_traj(rng, 6, 1);
    CHECK(std::abs(mae_tip(pair_of(tip, other)) - mae_centerline(pair_of(tip, other))) <= 1e-12);
    CHECK_THROWS_AS(mae_tip(pair_of(t, t)), MetricMismatch);
}

TEST_CASE("mae matches a double-loop oracle and is a metric") {
    std::mt19937_64 rng(2);
    const auto a = random_traj(rng, 3, 2);
    const auto b = random_traj(rng, 3, 2);
    const auto c = random_traj(rng, 3, 2);
    double oracle = 0.0;
    for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t p = 0; p < 2; ++p)
            oracle += std::hypot(a.frames[f][p].x - b.frames[f][p].x, a.frames[f][p].y - b.frames[f][p].y);
    oracle /= 6.0;
    const double ab = mae_centerline(pair_of(a, b));
    CHECK(std::abs(ab - oracle) <= 1e-9);
    CHECK(ab == doctest::Approx(mae_centerline(pair_of(b, a))));
    CHECK(ab <= mae_centerline(pair_of(a, c)) + mae_centerline(pair_of(c, b)) + 1e-12);
    CHECK(ab > 0.0);
}

TEST_CASE("arc-length normalization") {
    const Frame line = [] {
        Frame f;
        for (int i = 0; i < 10; ++i) f.push_back({10.0 * i, 0.0});
        return f;
    }();
    CHECK(arc_length(line) == doctest::Approx(90.0));
    const auto same = arclength_normalize(line, 90.0);
    REQUIRE(same);
    for (std::size_t i = 0; i < line.size(); ++i) CHECK(distance((*same)[i], line[i]) <= 1e-12);

    const auto doubled = arclength_normalize(line, 180.0);
    REQUIRE(doubled);
    for (std::size_t i = 1; i < 10; ++i) CHECK(distance((*doubled)[i], (*doubled)[i - 1]) == doctest::Approx(20.0));

    const Frame bent{{0, 0}, {3, 4}, {3, 10}, {9, 18}};
    const auto half = arclength_normalize(bent, arc_length(bent) / 2.0);
    REQUIRE(half);
    for (std::size_t i = 1; i < bent.size(); ++i) {
        CHECK(distance((*half)[i], (*half)[i - 1]) == doctest::Approx(distance(bent[i], bent[i - 1]) / 2.0).epsilon(1e-12));
    }
    const auto target = arclength_normalize(bent, 123.4);
    CHECK(std::abs(arc_length(*target) - 123.4) <= 1e-9 * 123.4);

    CHECK_FALSE(arclength_normalize(Frame{{1, 1}, {1, 1}}, 5.0).has_value());
    CHECK_THROWS_AS(arclength_normalize(Frame{{1, 1}}, 5.0), InvalidArgument);
}

TEST_CASE("compare reports lag, size and flags") {
    const auto real = sine_track(10, 30, 0);
    const auto sim = offset(sine_track(10, 30, 0), {0, 2});
    const auto r = compare(sim, real);
    CHECK(r.lag_frames == 0);
    CHECK(r.frames == 150);
    CHECK(r.points == 1);
    CHECK(r.mae == doctest::Approx(2.0));
    const auto j = to_json(r);
    CHECK(j.at("T") == 150);
    CHECK(j.at("N") == 1);
    CHECK(j.contains("flags"));
}

}
