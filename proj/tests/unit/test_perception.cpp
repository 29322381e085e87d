#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "sysid/errors.hpp"
#include "sysid/perception.hpp"

using namespace sysid;

namespace {

MaskFrame rectangle(int x0, int y0, int w, int h, int W = 200, int H = 120) {
    MaskFrame m(W, H);
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) m.set(x, y);
    return m;
}

// 90 degrees clockwise: (x, y) -> (H - 1 - y, x).
MaskFrame rotate_cw(const MaskFrame& m) {
    MaskFrame r(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y)) r.set(m.height - 1 - y, x);
    return r;
}

void paint_disk(ColorFrame& f, double cx, double cy, double radius, Rgb c) {
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            if (std::hypot(x - cx, y - cy) <= radius) f.set(x, y, c);
}

const Rgb kRed{230, 20, 20};
const HsvRange kRedRange{340.0, 20.0, 0.5, 1.0, 0.4, 1.0};

double mean_point_error(const Frame& a, const Frame& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += distance(a[i], b[i]);
    return s / static_cast<double>(a.size());
}

}  // namespace

TEST_SUITE("raster_perception") {

TEST_CASE("rasterize a horizontal capsule") {
    const auto m = rasterize_rod({{10, 50}, {110, 50}}, 10.0, 200, 120);
    int xmin = 1 << 30, xmax = -1, ymin = 1 << 30, ymax = -1;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y)) {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
    CHECK(xmax - xmin + 1 == doctest::Approx(110).epsilon(0.05));
    CHECK(ymax - ymin + 1 == doctest::Approx(11).epsilon(0.1));
}

TEST_CASE("rasterized area matches the capsule") {
    // Off-grid axes: a centerline on integer rows puts both edges exactly on
    // pixel centers, which any symmetric rule rounds to 9 or 11 rows.
    const double area = 100.0 * 10.0 + std::numbers::pi * 25.0;
    const auto flat = rasterize_rod({{10.3, 50.5}, {110.3, 50.5}}, 10.0, 200, 120);
    CHECK(static_cast<double>(flat.count()) == doctest::Approx(area).epsilon(0.05));
    const Point2 a{20.37, 15.81};
    const Point2 b{20.37 + 100.0 * std::cos(0.52), 15.81 + 100.0 * std::sin(0.52)};
    for (double w : {8.0, 10.0, 12.0, 14.0}) {
        const double expect = 100.0 * w + std::numbers::pi * w * w / 4.0;
        CHECK(static_cast<double>(rasterize_rod({a, b}, w, 200, 120).count()) == doctest::Approx(expect).epsilon(0.05));
    }
}

TEST_CASE("rasterize rejects degenerate input and clips") {
    CHECK_THROWS_AS(rasterize_rod({{10, 10}, {10, 10}}, 10.0, 50, 50), InvalidArgument);
    CHECK_THROWS_AS(rasterize_rod({{10, 10}}, 10.0, 50, 50), InvalidArgument);
    CHECK_THROWS_AS(rasterize_rod({{10, 10}, {20, 10}}, 1.0, 50, 50), InvalidArgument);
    const auto clipped = rasterize_rod({{-20, 25}, {30, 25}}, 6.0, 50, 50);
    CHECK(clipped.count() > 0);
    CHECK(clipped.at(0, 25));
}

TEST_CASE("rectangle centerline lies on the midline") {
    const auto m = rectangle(10, 50, 100, 11);
    const auto c = extract_centerline(m, 10, BaseEdge::left);
    REQUIRE(c.has_value());
    REQUIRE(c->size() == 10);
    for (const auto& p : *c) CHECK(std::abs(p.y - 55.0) <= 1.0);
    CHECK(c->front().x < c->back().x);
    for (std::size_t i = 1; i < c->size(); ++i) CHECK((*c)[i].x - (*c)[i - 1].x == doctest::Approx(10.0).epsilon(0.15));
}

TEST_CASE("empty and degenerate masks") {
    CHECK_FALSE(extract_centerline(MaskFrame(40, 40)).has_value());
    MaskFrame dot(40, 40);
    dot.set(20, 20);
    CHECK_THROWS_AS(extract_centerline(dot), DegenerateMask);
}

TEST_CASE("base edge picks the starting end") {
    const auto m = rectangle(10, 50, 100, 11);
    const auto left = extract_centerline(m, 10, BaseEdge::left);
    const auto right = extract_centerline(m, 10, BaseEdge::right);
    REQUIRE(left);
    REQUIRE(right);
    CHECK(left->front().x < 40);
    CHECK(right->front().x > 80);
}

TEST_CASE("curved round trip") {
    std::vector<Point2> truth;
    for (int i = 0; i < 40; ++i) {
        const double s = i / 39.0;
        truth.push_back({320.0 + 60.0 * std::sin(2.5 * s), 60.0 + 300.0 * s});
    }
    const auto m = rasterize_rod(truth, 10.0, 640, 480);
    const auto c = extract_centerline(m, 10, BaseEdge::top);
    REQUIRE(c);
    std::vector<Point2> ref;
    // Reference: the true polyline resampled to 10 equidistant points.
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < truth.size(); ++i) cum.push_back(cum.back() + distance(truth[i - 1], truth[i]));
    for (int k = 0; k < 10; ++k) {
        const double s = cum.back() * k / 9.0;
        std::size_t j = 1;
        while (j + 1 < cum.size() && cum[j] < s) ++j;
        const double w = (s - cum[j - 1]) / (cum[j] - cum[j - 1]);
        ref.push_back((1 - w) * truth[j - 1] + w * truth[j]);
    }
    CHECK(mean_point_error(*c, ref) <= 2.0);
}

TEST_CASE("centerline has strictly increasing arc length") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Point2> pts;
        for (int i = 0; i < 20; ++i) pts.push_back({320 + 40 * u(rng) * i / 20.0, 60 + 15.0 * i});
        const auto c = extract_centerline(rasterize_rod(pts, 10.0, 640, 480), 10, BaseEdge::top);
        REQUIRE(c);
        REQUIRE(c->size() == 10);
        for (std::size_t i = 1; i < c->size(); ++i) CHECK(distance((*c)[i], (*c)[i - 1]) > 0.0);
    }
}

TEST_CASE("extraction is rotation equivariant") {
    std::vector<Point2> pts;
    for (int i = 0; i < 30; ++i) pts.push_back({20.0 + 5.0 * i, 60.0 + 20.0 * std::sin(i / 10.0)});
    const auto m = rasterize_rod(pts, 10.0, 200, 120);
    const auto a = extract_centerline(m, 10, BaseEdge::left);
    const auto b = extract_centerline(rotate_cw(m), 10, BaseEdge::top);
    REQUIRE(a);
    REQUIRE(b);
    for (std::size_t i = 0; i < 10; ++i) {
        const Point2 expected{m.height - 1 - (*a)[i].y, (*a)[i].x};
        CHECK(distance((*b)[i], expected) <= 1.5);
    }
}

TEST_CASE("track_marker finds the disk centroid") {
    ColorFrame f(160, 140, {20, 20, 20});
    paint_disk(f, 50, 60, 8, kRed);
    const auto c = track_marker(f, kRedRange, {0, 0, 160, 140});
    REQUIRE(c);
    CHECK(std::abs(c->x - 50) <= 0.5);
    CHECK(std::abs(c->y - 60) <= 0.5);

    const auto in_roi = track_marker(f, kRedRange, {30, 40, 50, 50});
    REQUIRE(in_roi);
    CHECK(std::abs(in_roi->x - 50) <= 0.5);
    CHECK_THROWS_AS(track_marker(f, kRedRange, {100, 100, 100, 100}), InvalidArgument);
}

TEST_CASE("track_marker selects the largest component") {
    ColorFrame f(200, 120, {0, 0, 0});
    paint_disk(f, 50, 60, std::sqrt(300.0 / std::numbers::pi), kRed);
    paint_disk(f, 150, 40, std::sqrt(80.0 / std::numbers::pi), kRed);
    const auto c = track_marker(f, kRedRange, {0, 0, 200, 120});
    REQUIRE(c);
    CHECK(std::abs(c->x - 50) <= 0.5);
    CHECK(std::abs(c->y - 60) <= 0.5);
}

TEST_CASE("track_marker reports missing and is translation equivariant") {
    ColorFrame f(100, 100, {0, 0, 0});
    paint_disk(f, 40, 40, 6, {20, 20, 230});
    CHECK_FALSE(track_marker(f, kRedRange, {0, 0, 100, 100}).has_value());

    for (int dx : {0, 3, 11}) {
        for (int dy : {0, 7}) {
            ColorFrame g(100, 100, {0, 0, 0});
            paint_disk(g, 30.3 + dx, 35.6 + dy, 6, kRed);
            ColorFrame g0(100, 100, {0, 0, 0});
            paint_disk(g0, 30.3, 35.6, 6, kRed);
            const auto a = track_marker(g0, kRedRange, {0, 0, 100, 100});
            const auto b = track_marker(g, kRedRange, {0, 0, 100, 100});
            REQUIRE(a);
            REQUIRE(b);
            CHECK(std::abs(b->x - a->x - dx) <= 0.5);
            CHECK(std::abs(b->y - a->y - dy) <= 0.5);
        }
    }
}

TEST_CASE("hsv conversion and hue wrap") {
    const auto h = rgb_to_hsv({255, 0, 0});
    CHECK(h.h == doctest::Approx(0.0));
    CHECK(h.s == doctest::Approx(1.0));
    CHECK(h.v == doctest::Approx(1.0));
    CHECK(rgb_to_hsv({0, 255, 0}).h == doctest::Approx(120.0));
    CHECK(kRedRange.contains({350.0, 0.9, 0.9}));
    CHECK(kRedRange.contains({10.0, 0.9, 0.9}));
    CHECK_FALSE(kRedRange.contains({180.0, 0.9, 0.9}));
}

TEST_CASE("interpolate_missing") {
    const Frame p{{0, 0}, {10, 10}};
    const Frame q{{4, 8}, {14, 2}};
    const auto mid = interpolate_missing({p, std::nullopt, q});
    CHECK(mid[1][0] == Point2{2, 4});
    CHECK(mid[1][1] == Point2{12, 6});

    const auto lead = interpolate_missing({std::nullopt, p, q, std::nullopt});
    CHECK(lead[0] == p);
    CHECK(lead[3] == q);

    const auto gap = interpolate_missing({p, std::nullopt, std::nullopt, std::nullopt, q});
    for (int k = 1; k <= 3; ++k) {
        CHECK(gap[static_cast<std::size_t>(k)][0].x == doctest::Approx(k));
        CHECK(gap[static_cast<std::size_t>(k)][0].y == doctest::Approx(2.0 * k));
    }

    const std::vector<std::optional<Frame>> full{p, q, p};
    const auto same = interpolate_missing(full);
    for (std::size_t i = 0; i < 3; ++i) CHECK(same[i] == *full[i]);

    CHECK_THROWS_AS(interpolate_missing({std::nullopt, std::nullopt}), UnrecoverablePerception);
}

TEST_CASE("mask sequence files round trip") {
    test::TempDir dir("masks");
    MaskSequence seq;
    seq.fps = 25.0;
    seq.frames.push_back(rectangle(10, 50, 100, 11));
    seq.frames.push_back(MaskFrame(200, 120));
    write_mask_sequence(seq, dir.path());
    const auto back = read_mask_sequence(dir.path());
    CHECK(back.fps == 25.0);
    REQUIRE(back.frames.size() == 2);
    CHECK(back.frames[0].bits == seq.frames[0].bits);
    CHECK(back.frames[1].count() == 0);

    const auto traj = centerlines_from_masks(back.frames, back.fps, 10, BaseEdge::left);
    CHECK(traj.frame_count() == 2);
    CHECK(traj.frames[1] == traj.frames[0]);
}

}
