#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "sysid/errors.hpp"
#include "sysid/param_space.hpp"
#include "sysid/surrogate.hpp"

using namespace sysid;

namespace {

ParameterBounds finger_physics() { return tuned_bounds(Platform::finger, builtin_bounds(Platform::finger)); }

ParameterVector finger_vec(double f, double d, double a, double rho) {
    return ParameterVector({"frictionloss", "damping", "armature", "density"}, {f, d, a, rho});
}

}  // namespace

TEST_SUITE("param_space") {

TEST_CASE("clamp projects onto the box") {
    const auto b = finger_physics();
    const auto out = clamp(finger_vec(200, 100, 1, 5), b);
    CHECK(out.at("frictionloss") == 150.0);
    CHECK(out.at("damping") == 100.0);
    CHECK(clamp(finger_vec(50, 5, 1, 5), b).at("damping") == 10.0);
    CHECK(clamp(finger_vec(-1, 300, 9, 0), b) == finger_vec(0, 200, 5, 1));
}

TEST_CASE("clamp is idempotent and in bounds") {
    const auto b = finger_physics();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> wide(-500, 500);
    for (int i = 0; i < 200; ++i) {
        const auto p = finger_vec(wide(rng), wide(rng), wide(rng), wide(rng));
        const auto once = clamp(p, b);
        CHECK(within_bounds(once, b));
        CHECK(clamp(once, b) == once);
    }
}

TEST_CASE("clamp rejects a layout mismatch") {
    const auto b = finger_physics();
    CHECK_THROWS_AS(clamp(ParameterVector({"damping"}, {1.0}), b), StructuralError);
    CHECK_THROWS_AS(clamp(finger_vec(1, 2, 3, 4), tuned_bounds(Platform::tentacle_air,
                                                              builtin_bounds(Platform::tentacle_air))),
                    StructuralError);
}

TEST_CASE("bounds constructor validates entries") {
    CHECK_THROWS_AS(ParameterBounds({{"a", 1.0, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(ParameterBounds({{"a", 2.0, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(ParameterBounds({{"a", 0.0, 1.0}, {"a", 0.0, 2.0}}), InvalidArgument);
}

TEST_CASE("sample_uniform is seeded and stays in bounds") {
    const auto b = finger_physics();
    CHECK(sample_uniform(b, 7) == sample_uniform(b, 7));
    CHECK_FALSE(sample_uniform(b, 7) == sample_uniform(b, 8));

    const ParameterBounds narrow({{"x", 1.0, 1.0 + 1e-12}});
    for (std::uint64_t s = 0; s < 50; ++s) CHECK(within_bounds(sample_uniform(narrow, s), narrow));

    std::mt19937_64 rng(11);
    std::vector<double> sum(b.size(), 0.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto u = normalize(sample_uniform(b, rng), b).unit;
        for (std::size_t k = 0; k < u.size(); ++k) sum[k] += u[k];
    }
    for (double s : sum) CHECK(s / n == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("normalize and denormalize") {
    const ParameterBounds b({{"damping", 10, 200}});
    const auto n = normalize(ParameterVector({"damping"}, {105}), b);
    CHECK(n.unit[0] == doctest::Approx(0.5));
    CHECK_FALSE(n.was_clamped);

    const auto oob = normalize(ParameterVector({"damping"}, {250}), b);
    CHECK(oob.unit[0] == 1.0);
    CHECK(oob.was_clamped);

    const auto fb = finger_physics();
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const auto p = sample_uniform(fb, rng);
        const auto back = denormalize(normalize(p, fb).unit, fb);
        for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(back[k] - p[k]) <= 1e-12 * std::max(1.0, std::abs(p[k])));
    }
}

TEST_CASE("relative error") {
    const auto r = relative_error(ParameterVector({"frictionloss"}, {88.0}), ParameterVector({"frictionloss"}, {90.4}));
    REQUIRE(r.percent[0].has_value());
    CHECK(*r.percent[0] == doctest::Approx(2.6549).epsilon(1e-4));

    const ParameterVector est({"youngs_mod", "rod_density", "poisson_ratio", "damping_const"}, {2.3e6, 1850, 0.30, 42.0});
    const ParameterVector gt({"youngs_mod", "rod_density", "poisson_ratio", "damping_const"}, {2.1e6, 1665, 0.353, 40.5});
    const auto t = relative_error(est, gt);
    const double expect[] = {9.5, 11.1, 15.0, 3.7};
    for (int i = 0; i < 4; ++i) CHECK(*t.percent[static_cast<std::size_t>(i)] == doctest::Approx(expect[i]).epsilon(0.01));

    // Zero ground truth is excluded rather than dividing by zero.
    const auto z = relative_error(ParameterVector({"a", "b"}, {1.0, 2.0}), ParameterVector({"a", "b"}, {0.0, 1.0}));
    CHECK_FALSE(z.percent[0].has_value());
    CHECK(z.excluded == 1);
    CHECK(z.mean_percent == doctest::Approx(100.0));
}

TEST_CASE("relative error is scale-free") {
    const ParameterVector est({"a", "b"}, {3.0, 7.5});
    const ParameterVector gt({"a", "b"}, {2.0, 5.0});
    const ParameterVector est_s({"a", "b"}, {3.0e4, 7.5e-3});
    const ParameterVector gt_s({"a", "b"}, {2.0e4, 5.0e-3});
    const auto r1 = relative_error(est, gt);
    const auto r2 = relative_error(est_s, gt_s);
    for (std::size_t i = 0; i < 2; ++i) CHECK(*r1.percent[i] == doctest::Approx(*r2.percent[i]));
}

TEST_CASE("normalized distance") {
    const auto b = finger_physics();
    const auto lo = finger_vec(0, 100, 1, 5);
    const auto hi = finger_vec(150, 100, 1, 5);
    CHECK(normalized_distance(lo, hi, b) == doctest::Approx(1.0));
    CHECK(normalized_distance(lo, lo, b) == 0.0);
    CHECK(normalized_distance(finger_vec(0, 10, 0.1, 1), finger_vec(150, 200, 5, 20), b) == doctest::Approx(2.0));
}

TEST_CASE("reorder follows the bounds layout") {
    const auto b = finger_physics();
    const ParameterVector shuffled({"density", "armature", "frictionloss", "damping", "extra"}, {4, 3, 1, 2, 9});
    CHECK(reorder(shuffled, b) == finger_vec(1, 2, 3, 4));
    CHECK_THROWS_AS(reorder(ParameterVector({"damping"}, {1}), b), StructuralError);
}

TEST_CASE("bounds file parsing") {
    const auto sections = parse_bounds("# comment\n[demo]\nalpha 0 1 0.5 - physics First value\n"
                                       "beta -2 2 0 m control Second\n");
    REQUIRE(sections.size() == 1);
    CHECK(sections[0].platform == "demo");
    const auto& b = sections[0].bounds;
    REQUIRE(b.size() == 2);
    CHECK(b[0].name == "alpha");
    CHECK(b[0].description == "First value");
    CHECK(b[1].kind == ParamKind::control);
    CHECK(b[1].min == -2.0);
    CHECK_THROWS_AS(parse_bounds("[x]\nalpha 1 0 0 - physics bad\n"), Error);
    CHECK_THROWS_AS(parse_bounds("[x]\nalpha one 2 0 - physics bad\n"), Error);

    for (Platform p : {Platform::finger, Platform::tentacle_air, Platform::tentacle_water}) {
        const auto file = load_bounds(test::data_path(std::string(to_string(p)) + ".bounds"), to_string(p));
        const auto builtin = builtin_bounds(p);
        REQUIRE(file.size() == builtin.size());
        for (std::size_t i = 0; i < file.size(); ++i) {
            CHECK(file[i].name == builtin[i].name);
            CHECK(file[i].min == builtin[i].min);
            CHECK(file[i].max == builtin[i].max);
        }
    }
}

TEST_CASE("table ground truth is in bounds") {
    CHECK(within_bounds(finger_vec(90.4, 114.3, 3.60, 11.4), finger_physics()));
}

}
