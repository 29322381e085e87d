#include "sysid/commands.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sysid/errors.hpp"
#include "sysid/experiment.hpp"
#include "sysid/io.hpp"

namespace sysid {

using nlohmann::json;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || item.front() == '-') throw ConfigError(fmt::format("--seeds: '{}' is not a seed", item));
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--seeds: no seeds given");
    return out;
}

ExperimentSpec load_spec(const std::filesystem::path& path, const SpecOverrides& o) {
    if (path.empty()) throw ConfigError("--spec is required");
    auto j = read_json_file(path);
    if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
    if (o.seeds) j["seeds"] = parse_seeds(*o.seeds);
    if (o.method) {
        j.erase("methods");
        j["method"] = *o.method;
    }
    if (o.flags) j["flags"] = *o.flags;
    if (o.budget) j["budget"] = *o.budget;
    try {
        return ExperimentSpec::from_json(j, path.parent_path());
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

std::string cell(double v, int precision = 1) {
    if (std::isnan(v)) return "-";
    if (std::isinf(v)) return "inf";
    return fmt::format("{:.{}f}", v, precision);
}

struct MethodResults {
    std::string method;
    std::vector<HoldoutReport> holdout;
    std::vector<RecoveryReport> recovery;
    std::vector<double> recovery_best_errors;
    std::vector<std::uint64_t> recovery_seeds;
    std::vector<ConfidenceRecord> confidence;
};

std::vector<std::filesystem::path> method_dirs(const std::filesystem::path& out) {
    std::vector<std::filesystem::path> dirs;
    if (!std::filesystem::is_directory(out)) return dirs;
    for (const auto& e : std::filesystem::directory_iterator(out)) {
        if (e.is_directory() && std::filesystem::exists(e.path() / "spec.json")) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

}  // namespace

int cmd_calibrate(const CalibrateOptions& options, std::ostream& log) {
    ExperimentSpec spec;
    try {
        spec = load_spec(options.spec, options.overrides);
        if (options.out.empty()) throw ConfigError("--out is required");
        for (auto m : spec.methods) {
            const auto dir = method_dir(options.out, m);
            if (std::filesystem::exists(dir) && !std::filesystem::is_empty(dir) && !options.force) {
                throw ConfigError(fmt::format("{} is not empty; pass --force to overwrite", dir.string()));
            }
        }
    } catch (const ConfigError& e) {
        log << "usage error: " << e.what() << "\n";
        return exit_usage;
    }

    bool failed = false;
    for (auto m : spec.methods) {
        const auto dir = method_dir(options.out, m);
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        auto single = spec;
        single.methods = {m};
        write_file_atomic(dir / "spec.json", single.to_json().dump(2) + "\n");
        for (auto seed : spec.seeds) {
            try {
                const auto r = run_seed(spec, m, seed, seed_dir(options.out, m, seed));
                log << fmt::format("{:<12} seed {:<4} best error {} at iteration {}{}\n", to_string(m), seed,
                                   cell(r.best_error, 3), r.best_iteration,
                                   r.partial ? " (partial: " + r.abort_reason + ")" : "");
                if (r.partial) failed = true;
            } catch (const ConfigError& e) {
                log << fmt::format("{} seed {}: configuration error: {}\n", to_string(m), seed, e.what());
                return exit_usage;
            } catch (const std::exception& e) {
                log << fmt::format("{} seed {}: run failed: {}\n", to_string(m), seed, e.what());
                failed = true;
            }
        }
    }
    return failed ? exit_run_failure : exit_ok;
}

int cmd_holdout(const HoldoutOptions& options, std::ostream& log) {
    std::vector<std::pair<ExperimentSpec, std::filesystem::path>> jobs;
    try {
        if (options.out.empty()) throw ConfigError("--out is required");
        const auto dirs = method_dirs(options.out);
        if (dirs.empty()) throw ConfigError(fmt::format("{} holds no calibrated methods", options.out.string()));
        for (const auto& dir : dirs) {
            auto spec = options.spec.empty() ? ExperimentSpec::load(dir / "spec.json") : load_spec(options.spec, {});
            const auto name = dir.filename().string();
            const auto method = parse_method(name);
            if (options.method && parse_method(*options.method) != method) continue;
            spec.methods = {method};
            if (options.repeats) spec.repeats = *options.repeats;
            spec.validate();
            if (std::filesystem::exists(dir / "holdout.csv") && !options.force) {
                throw ConfigError(fmt::format("{} exists; pass --force to overwrite", (dir / "holdout.csv").string()));
            }
            for (auto seed : spec.seeds) {
                if (!std::filesystem::exists(seed_dir(options.out, method, seed) / "history.csv")) {
                    throw ConfigError(fmt::format("missing history file for {} seed {}", name, seed));
                }
            }
            jobs.emplace_back(std::move(spec), dir);
        }
        if (jobs.empty()) throw ConfigError("no method matched --method");
    } catch (const Error& e) {
        log << "usage error: " << e.what() << "\n";
        return exit_usage;
    }

    bool failed = false;
    for (const auto& [spec, dir] : jobs) {
        const auto method = spec.methods.front();
        std::vector<HoldoutReport> reports;
        for (auto seed : spec.seeds) {
            try {
                const auto rows = read_history_csv(seed_dir(dir.parent_path(), method, seed) / "history.csv");
                std::vector<double> errors;
                for (const auto& r : rows) errors.push_back(r.error);
                const int best = select_best_iteration(errors);
                const auto setup = make_setup(spec, seed);
                const auto& row = rows[static_cast<std::size_t>(best - 1)];
                auto report = evaluate_holdout(row.params, setup.holdouts, *setup.sim, *setup.source, spec.repeats,
                                               setup.compare);
                report.method = std::string(to_string(method));
                report.seed = seed;
                report.platform = spec.platform;
                if (!report.complete()) {
                    log << fmt::format("{} seed {}: holdout report has gaps\n", to_string(method), seed);
                    failed = true;
                }
                log << fmt::format("{:<12} seed {:<4} iteration {:<3} holdout mean {}\n", to_string(method), seed, best,
                                   cell(report.mean(), 3));
                reports.push_back(std::move(report));
            } catch (const std::exception& e) {
                log << fmt::format("{} seed {}: holdout failed: {}\n", to_string(method), seed, e.what());
                failed = true;
            }
        }
        write_file_atomic(dir / "holdout.csv", holdout_csv(reports));
    }
    return failed ? exit_run_failure : exit_ok;
}

int cmd_report(const ReportOptions& options, std::ostream& log) {
    std::vector<std::pair<std::string, std::vector<MethodResults>>> settings;
    try {
        if (options.inputs.empty()) throw ConfigError("report needs at least one experiment directory");
        if (options.out.empty()) throw ConfigError("--out is required");
        prepare_output_dir(options.out, options.force);
        for (const auto& input : options.inputs) {
            std::vector<MethodResults> methods;
            std::string label;
            for (const auto& dir : method_dirs(input)) {
                const auto spec = ExperimentSpec::load(dir / "spec.json");
                if (label.empty()) label = std::string(to_string(spec.platform));
                MethodResults mr;
                mr.method = dir.filename().string();
                if (std::filesystem::exists(dir / "holdout.csv")) mr.holdout = read_holdout_csv(dir / "holdout.csv", mr.method);
                for (auto seed : spec.seeds) {
                    const auto sd = dir / fmt::format("seed_{}", seed);
                    if (!std::filesystem::exists(sd / "run.json")) continue;
                    const auto run = read_json_file(sd / "run.json");
                    RunHistory history;
                    const auto tuned = tuned_bounds(spec.platform, spec.bounds_file.empty()
                                                                       ? builtin_bounds(spec.platform)
                                                                       : load_bounds(spec.bounds_file, to_string(spec.platform)));
                    for (const auto& h : run.at("history")) {
                        auto rec = iteration_from_json(h);
                        rec.params = reorder(rec.params, tuned);
                        history.push_back(std::move(rec));
                    }
                    auto conf = confidence_records(history);
                    mr.confidence.insert(mr.confidence.end(), conf.begin(), conf.end());
                    if (run.contains("ground_truth") && !history.empty()) {
                        const auto setup = make_setup(spec, seed);
                        mr.recovery.push_back(recovery_report(history, *setup.ground_truth, setup.tuned));
                        mr.recovery_best_errors.push_back(run["best_error"].is_null() ? INFINITY : run["best_error"].get<double>());
                        mr.recovery_seeds.push_back(seed);
                    }
                }
                methods.push_back(std::move(mr));
            }
            if (methods.empty()) throw ConfigError(fmt::format("{} holds no calibrated methods", input.string()));
            for (const auto& [l, _] : settings) {
                if (l == label) label += " (" + input.filename().string() + ")";
            }
            settings.emplace_back(label, std::move(methods));
        }
    } catch (const Error& e) {
        log << "usage error: " << e.what() << "\n";
        return exit_usage;
    }

    // Seed aggregation and ranks over the methods that have holdout results.
    std::vector<SettingMeans> table;
    std::map<std::pair<std::string, std::string>, SeedAggregate> agg;
    for (const auto& [label, methods] : settings) {
        SettingMeans sm{label, {}};
        for (const auto& m : methods) {
            if (m.holdout.empty()) continue;
            std::vector<double> means;
            for (const auto& h : m.holdout) means.push_back(h.mean());
            const auto a = aggregate_seeds(means);
            agg[{label, m.method}] = a;
            sm.means.emplace_back(m.method, a.mean);
        }
        table.push_back(std::move(sm));
    }
    const auto ranks = average_rank(table);
    write_file_atomic(options.out / "ranks.csv", ranks_csv(ranks, table));

    std::string recovery = "method,setting,seed,metric,parameter,iteration,value\n";
    std::string confidence = "method,tau,precision,n\n";
    std::map<std::string, std::vector<ConfidenceRecord>> pooled;
    for (const auto& [label, methods] : settings) {
        for (const auto& m : methods) {
            for (std::size_t s = 0; s < m.recovery.size(); ++s) {
                const auto& r = m.recovery[s];
                for (std::size_t i = 0; i < r.distance.size(); ++i) {
                    recovery += fmt::format("{},{},{},distance,,{},{:.10g}\n", m.method, label, m.recovery_seeds[s], i + 1,
                                            r.distance[i]);
                }
                for (std::size_t p = 0; p < r.relative.names.size(); ++p) {
                    recovery += fmt::format("{},{},{},relative_error,{},,{}\n", m.method, label, m.recovery_seeds[s],
                                            r.relative.names[p],
                                            r.relative.percent[p] ? fmt::format("{:.10g}", *r.relative.percent[p]) : "");
                }
            }
            if (!m.recovery.empty()) {
                const auto sum = summarize_recovery(m.recovery, m.recovery_best_errors);
                for (std::size_t p = 0; p < sum.names.size(); ++p) {
                    const auto& b = sum.best_seed_percent[p];
                    const auto& c = sum.cross_seed_percent[p];
                    recovery += fmt::format("{},{},best,relative_error,{},,{}\n", m.method, label, sum.names[p],
                                            b ? fmt::format("{:.10g}", *b) : "");
                    recovery += fmt::format("{},{},mean,relative_error,{},,{}\n", m.method, label, sum.names[p],
                                            c ? fmt::format("{:.10g}", *c) : "");
                }
                recovery += fmt::format("{},{},best,mean_relative_error,,,{:.10g}\n", m.method, label, sum.best_seed_mean);
                recovery += fmt::format("{},{},mean,mean_relative_error,,,{:.10g}\n", m.method, label, sum.cross_seed_mean);
            }
            auto& pool = pooled[m.method];
            pool.insert(pool.end(), m.confidence.begin(), m.confidence.end());
        }
    }
    const std::vector<double> taus{0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
    for (const auto& [method, records] : pooled) {
        if (records.empty()) continue;
        const auto csv = confidence_csv(method, records, taus, options.catastrophic);
        confidence += csv.substr(csv.find('\n') + 1);
    }
    write_file_atomic(options.out / "recovery.csv", recovery);
    write_file_atomic(options.out / "confidence.csv", confidence);

    // Summary shaped like the main results table.
    std::string header = fmt::format("{:<14}", "Method");
    for (const auto& s : ranks.settings) header += fmt::format(" {:>26}", s);
    header += fmt::format(" {:>10}\n", "Avg. Rank");
    log << header;
    for (std::size_t m = 0; m < ranks.methods.size(); ++m) {
        std::string line = fmt::format("{:<14}", ranks.methods[m]);
        for (const auto& s : ranks.settings) {
            const auto& a = agg.at({s, ranks.methods[m]});
            line += fmt::format(" {:>26}", fmt::format("{} ± {} ({})", cell(a.mean), cell(a.std), cell(a.best)));
        }
        line += fmt::format(" {:>10}\n", format_rank(ranks.average[m]));
        log << line;
    }
    for (const auto& e : ranks.excluded) log << fmt::format("{} excluded from ranking (missing a setting)\n", e);
    return exit_ok;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulation parameter calibration from trajectory observations"};
    app.require_subcommand(1);
    app.fallthrough();
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Errors only");

    CalibrateOptions cal;
    std::string seeds, method, flags;
    int budget = -1;
    auto* c = app.add_subcommand("calibrate", "Run calibration for every (method, seed) of a spec");
    c->add_option("--spec", cal.spec, "Experiment spec (JSON)")->required();
    c->add_option("--out", cal.out, "Output directory")->required();
    c->add_option("--seeds", seeds, "Comma-separated seeds, e.g. 0,1,2");
    c->add_option("--budget", budget, "Iterations per run");
    c->add_option("--method", method, "random, nelder-mead, golden-cd, bo, cma-es, vlm or scripted");
    c->add_option("--flags", flags, "no-video,no-history,no-cot,fixed-control");
    c->add_flag("--force", cal.force, "Overwrite existing results");

    HoldoutOptions hold;
    int repeats = -1;
    auto* h = app.add_subcommand("holdout", "Evaluate each seed's best iteration on H1..H4");
    h->add_option("--out", hold.out, "Directory written by calibrate")->required();
    h->add_option("--spec", hold.spec, "Spec overriding the saved per-method specs");
    h->add_option("--method", method, "Restrict to one method");
    h->add_option("--repeats", repeats, "Repeats per holdout");
    h->add_flag("--force", hold.force, "Overwrite existing holdout.csv");

    ReportOptions rep;
    auto* r = app.add_subcommand("report", "Aggregate seeds, rank methods and summarize recovery and confidence");
    r->add_option("inputs", rep.inputs, "Experiment directories, one per setting")->required();
    r->add_option("--out", rep.out, "Report directory")->required();
    r->add_option("--catastrophic", rep.catastrophic, "Exclude confidence records whose prior error exceeds this");
    r->add_flag("--force", rep.force, "Overwrite an existing report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return exit_usage;
    }

    auto logger = spdlog::get("sysid-cli");
    if (!logger) logger = spdlog::stderr_color_mt("sysid-cli");
    spdlog::set_default_logger(logger);
    spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);

    try {
        if (c->parsed()) {
            if (!seeds.empty()) cal.overrides.seeds = seeds;
            if (!method.empty()) cal.overrides.method = method;
            if (!flags.empty()) cal.overrides.flags = flags;
            if (budget >= 0) cal.overrides.budget = budget;
            else if (c->count("--budget")) {
                err << "usage error: --budget must be non-negative\n";
                return exit_usage;
            }
            return cmd_calibrate(cal, out);
        }
        if (h->parsed()) {
            if (!method.empty()) hold.method = method;
            if (repeats > 0) hold.repeats = repeats;
            else if (h->count("--repeats")) {
                err << "usage error: --repeats must be at least 1\n";
                return exit_usage;
            }
            return cmd_holdout(hold, out);
        }
        return cmd_report(rep, out);
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_run_failure;
    }
}

}  // namespace sysid
