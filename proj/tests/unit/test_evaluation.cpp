#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "sysid/errors.hpp"
#include "sysid/evaluation.hpp"
#include "sysid/io.hpp"

using namespace sysid;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<SettingMeans> table1() {
    std::vector<SettingMeans> out;
    for (const auto& row : test::read_csv_rows(test::fixture_path("table1_means.csv"))) {
        if (out.empty() || out.back().setting != row.at("setting")) out.push_back({row.at("setting"), {}});
        out.back().means.emplace_back(row.at("method"), std::stod(row.at("mean")));
    }
    return out;
}

IterationRecord record(int k, ParameterVector p, double error, std::optional<double> conf = std::nullopt) {
    IterationRecord r;
    r.iteration = k;
    r.params = std::move(p);
    r.error = error;
    r.confidence = conf;
    return r;
}

}  // namespace

TEST_CASE("seed aggregation uses the population deviation") {
    const std::vector<double> vlm{8.2, 4.9, 19.5};
    const auto a = aggregate_seeds(vlm);
    CHECK(a.mean == doctest::Approx(10.8667).epsilon(1e-4));
    CHECK(a.std == doctest::Approx(6.254).epsilon(1e-3));
    CHECK(a.best == 4.9);

    const std::vector<double> golden{12.3, 12.2, 11.9};
    CHECK(aggregate_seeds(golden).mean == doctest::Approx(12.133).epsilon(1e-3));
    CHECK(aggregate_seeds(golden).std == doctest::Approx(0.17).epsilon(0.01));

    const std::vector<double> one{3.0};
    CHECK(aggregate_seeds(one).std == 0.0);
    CHECK_THROWS_AS(aggregate_seeds(std::span<const double>{}), InvalidArgument);
}

TEST_CASE("ranks with ties") {
    const std::vector<double> tie{5, 5, 5, 5};
    for (double r : rank_with_ties(tie)) CHECK(r == 2.5);
    const std::vector<double> pair{2.0, 1.0};
    CHECK(rank_with_ties(pair) == std::vector<double>{2.0, 1.0});
    const std::vector<double> partial{3.0, 1.0, 3.0};
    CHECK(rank_with_ties(partial) == std::vector<double>{2.5, 1.0, 2.5});

    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> pick(0, 5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(7);
        for (auto& x : v) x = pick(rng);
        const auto r = rank_with_ties(v);
        double sum = 0.0;
        for (double x : r) sum += x;
        CHECK(sum == doctest::Approx(7.0 * 8.0 / 2.0));
        // Strictly monotone transforms leave ranks unchanged.
        std::vector<double> w;
        for (double x : v) w.push_back(std::exp(0.3 * x) - 4.0);
        CHECK(rank_with_ties(w) == r);
    }
}

TEST_CASE("average rank over the summary table") {
    const auto table = table1();
    const auto ranks = average_rank(table);
    CHECK(ranks.excluded.empty());
    CHECK(ranks.settings.size() == 3);
    const std::map<std::string, std::string> expected{{"VLM", "1.7"},         {"cma-es", "2.7"}, {"golden-cd", "3.3"},
                                                      {"bo", "3.7"},          {"random", "4.3"}, {"nelder-mead", "5.3"}};
    for (const auto& [method, printed] : expected) {
        REQUIRE(ranks.average_of(method).has_value());
        CHECK(format_rank(*ranks.average_of(method)) == printed);
    }
    double total = 0.0;
    for (double a : ranks.average) total += a;
    CHECK(total == doctest::Approx(21.0));

    auto missing = table;
    missing[1].means.pop_back();
    const auto dropped = average_rank(missing);
    CHECK(dropped.excluded.size() == 1);
    CHECK(dropped.methods.size() == 5);

    const auto csv = ranks_csv(ranks, table);
    CHECK(csv.rfind("method,setting,mean,rank\n", 0) == 0);
    CHECK(csv.find("VLM,average,,") != std::string::npos);
}

TEST_CASE("confidence precision") {
    std::vector<ConfidenceRecord> all_good{{0.9, 10, 5}, {0.95, 8, 7}, {0.7, 8, 9}};
    CHECK(confidence_precision(all_good, 0.9).value == 1.0);
    CHECK(confidence_precision(all_good, 0.9).n == 2);
    CHECK(confidence_precision(all_good, 0.5).value == doctest::Approx(2.0 / 3.0));
    const auto none = confidence_precision(all_good, 0.99);
    CHECK_FALSE(none.value.has_value());
    CHECK(none.n == 0);

    // Records starting from a catastrophic error are skipped.
    std::vector<ConfidenceRecord> wild{{0.9, 500, 10}, {0.9, 20, 30}};
    CHECK(confidence_precision(wild, 0.9).value == 0.0);
    CHECK(confidence_precision(wild, 0.9).n == 1);
    CHECK(confidence_precision(wild, 0.9, kInf).n == 2);

    // Equal errors are not a success.
    CHECK_FALSE(ConfidenceRecord{0.9, 10, 10}.success());

    const std::vector<double> taus{0.5, 0.99};
    const auto csv = confidence_csv("vlm", all_good, taus);
    CHECK(csv == "method,tau,precision,n\nvlm,0.5,0.6666666667,3\nvlm,0.99,,0\n");
}

TEST_CASE("confidence records pair proposals with the error they started from") {
    const ParameterVector p({"a"}, {1.0});
    RunHistory h{record(1, p, 20.0), record(2, p, 15.0, 0.8), record(3, p, 18.0, 0.9), record(4, p, kInf, 0.6)};
    const auto recs = confidence_records(h);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].error_before == 20.0);
    CHECK(recs[0].success());
    CHECK_FALSE(recs[1].success());
    CHECK_FALSE(recs[2].success());
}

TEST_CASE("parameter recovery against the printed table") {
    const auto rows = test::read_csv_rows(test::fixture_path("parameter_recovery.csv"));
    std::vector<std::string> names;
    std::vector<double> gt, est;
    for (const auto& r : rows) {
        if (r.at("platform") != "finger" || r.at("method") != "VLM") continue;
        names.push_back(r.at("parameter"));
        gt.push_back(std::stod(r.at("gt")));
        est.push_back(std::stod(r.at("estimate")));
    }
    REQUIRE(names.size() == 4);
    const auto rel = relative_error(ParameterVector(names, est), ParameterVector(names, gt));
    const std::vector<double> expected{2.65, 4.99, 2.78, 7.89};
    for (std::size_t i = 0; i < 4; ++i) CHECK(*rel.percent[i] == doctest::Approx(expected[i]).epsilon(1e-2));
}

TEST_CASE("recovery report tracks the best-so-far distance") {
    const ParameterBounds bounds({{"a", 0, 10, 5, "", ParamKind::physics, ""}, {"b", 0, 10, 5, "", ParamKind::physics, ""}});
    const ParameterVector gt({"a", "b"}, {4.0, 6.0});
    RunHistory h{record(1, ParameterVector({"a", "b"}, {0.0, 0.0}), 10.0),
                 record(2, ParameterVector({"a", "b"}, {9.0, 9.0}), 12.0),
                 record(3, ParameterVector({"a", "b"}, {4.0, 6.0}), 1.0)};
    const auto rep = recovery_report(h, gt, bounds);
    REQUIRE(rep.distance.size() == 3);
    CHECK(rep.distance[0] == doctest::Approx(std::sqrt(0.16 + 0.36)));
    CHECK(rep.distance[1] == rep.distance[0]);  // iteration 2 was worse, best unchanged
    CHECK(rep.distance[2] == 0.0);
    CHECK(rep.relative.mean_percent == 0.0);

    const RecoveryReport far = recovery_report({h[0]}, gt, bounds);
    const std::vector<RecoveryReport> reports{far, rep};
    const std::vector<double> best{10.0, 1.0};
    const auto s = summarize_recovery(reports, best);
    CHECK(s.best_seed == 1);
    CHECK(s.best_seed_mean == 0.0);
    CHECK(s.cross_seed_mean == doctest::Approx(50.0));
    CHECK_THROWS_AS(summarize_recovery(reports, std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("holdout evaluation at the ground truth") {
    SimulationSettings s;
    s.duration_s = 8.0;
    const SurrogateSimulator sim(Platform::finger, s);
    auto shared = std::make_shared<SurrogateSimulator>(Platform::finger, s);
    const auto tuned = tuned_bounds(Platform::finger, builtin_bounds(Platform::finger));
    const auto gt = sample_uniform(tuned, 2);
    const SurrogateObservations source(shared, gt);
    const auto suite = holdout_suite(Rig::finger);

    auto report = evaluate_holdout(gt, suite, sim, source, 3);
    report.seed = 7;
    CHECK(report.entries.size() == 12);
    CHECK(report.complete());
    for (const auto& e : report.entries) CHECK(e.error == 0.0);
    CHECK(report.per_holdout().size() == 4);

    auto off = gt;
    off.set("damping", tuned.entry("damping").min);
    const auto worse = evaluate_holdout(off, suite, sim, source, 1);
    CHECK(worse.entries.size() == 4);
    CHECK(worse.mean() > 0.0);
}

TEST_CASE("holdout csv round trip with gaps") {
    HoldoutReport a;
    a.seed = 0;
    a.entries = {{"H1", 1, 2.5, false}, {"H1", 2, kInf, false}, {"H2", 1, std::nan(""), true}};
    HoldoutReport b;
    b.seed = 1;
    b.entries = {{"H1", 1, 4.0, false}};
    const std::vector<HoldoutReport> reports{a, b};
    const auto csv = holdout_csv(reports);
    CHECK(csv == "seed,holdout,repeat,error\n0,H1,1,2.5\n0,H1,2,inf\n0,H2,1,\n1,H1,1,4\n");

    test::TempDir dir("holdout");
    write_file_atomic(dir.path() / "holdout.csv", csv);
    const auto back = read_holdout_csv(dir.path() / "holdout.csv", "vlm");
    REQUIRE(back.size() == 2);
    CHECK(back[0].method == "vlm");
    CHECK(back[0].entries[1].error == kInf);
    CHECK(back[0].entries[2].missing);
    CHECK_FALSE(back[0].complete());
    CHECK(back[0].mean() == kInf);
    CHECK(back[1].mean() == 4.0);

    write_file_atomic(dir.path() / "bad.csv", "a,b\n");
    CHECK_THROWS_AS(read_holdout_csv(dir.path() / "bad.csv", "vlm"), ConfigError);
}

TEST_CASE("a missing holdout recording leaves a gap") {
    class OnlyFirst final : public ObservationSource {
    public:
        explicit OnlyFirst(std::shared_ptr<const Simulator> sim, ParameterVector gt, ControlProfile first)
            : inner_(std::move(sim), std::move(gt)), first_(std::move(first)) {}
        std::vector<Trajectory> observe(const ControlProfile& c, int repeats) const override {
            if (!(c == first_)) throw ConfigError("no recording");
            return inner_.observe(c, repeats);
        }

    private:
        SurrogateObservations inner_;
        ControlProfile first_;
    };
    SimulationSettings s;
    s.duration_s = 8.0;
    auto sim = std::make_shared<SurrogateSimulator>(Platform::finger, s);
    const auto gt = tuned_bounds(Platform::finger, builtin_bounds(Platform::finger)).nominal();
    const auto suite = holdout_suite(Rig::finger);
    const OnlyFirst source(sim, gt, suite[0]);
    const auto report = evaluate_holdout(gt, suite, *sim, source, 2);
    CHECK(report.entries.size() == 8);
    CHECK_FALSE(report.complete());
    CHECK_FALSE(report.entries[0].missing);
    CHECK(report.entries[2].missing);
    CHECK(report.mean() == 0.0);
}
