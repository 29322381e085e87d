#include "sysid/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sysid/errors.hpp"
#include "sysid/io.hpp"
#include "sysid/perception.hpp"

namespace sysid {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
}

double parse_double(const std::string& s) {
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError(fmt::format("bad number '{}'", s));
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

// ------------------------------------------------------ observation sources

SurrogateObservations::SurrogateObservations(std::shared_ptr<const Simulator> sim, ParameterVector gt,
                                             SurrogateObservationOptions options)
    : sim_(std::move(sim)), gt_(std::move(gt)), options_(options) {
    if (!sim_) throw InvalidArgument("observation source needs a simulator");
    if (options_.noise_sigma < 0.0) throw InvalidArgument("noise sigma must be non-negative");
}

Trajectory SurrogateObservations::clean(const ControlProfile& control) const {
    const auto key = profile_key(control);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto traj = sim_->simulate(gt_, control);
    if (options_.perception) {
        if (traj.space != CoordinateSpace::pixels || traj.point_count() < 2) {
            throw InvalidArgument("perception routing needs a pixel-space centerline trajectory");
        }
        const auto masks = render_masks(traj, options_.mask_thickness, options_.mask_width, options_.mask_height);
        auto extracted = centerlines_from_masks(masks, traj.fps, traj.point_count(), BaseEdge::top);
        extracted.metadata = traj.metadata;
        extracted.metadata["perception"] = true;
        traj = std::move(extracted);
    }
    traj.metadata["source"] = "ground_truth";
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(traj)).first->second;
}

std::vector<Trajectory> SurrogateObservations::observe(const ControlProfile& control, int repeats) const {
    if (repeats < 1) throw InvalidArgument("repeats must be at least 1");
    const auto base = clean(control);
    std::vector<Trajectory> out;
    for (int r = 0; r < repeats; ++r) {
        Trajectory t = base;
        if (options_.noise_sigma > 0.0) {
            const auto h = std::hash<std::string>{}(profile_key(control));
            std::seed_seq seq{static_cast<std::uint64_t>(options_.noise_seed), static_cast<std::uint64_t>(h),
                              static_cast<std::uint64_t>(r)};
            std::mt19937_64 rng(seq);
            std::normal_distribution<double> g(0.0, options_.noise_sigma);
            for (auto& f : t.frames) {
                for (auto& p : f) {
                    p.x += g(rng);
                    p.y += g(rng);
                }
            }
            t.metadata["noise_sigma"] = options_.noise_sigma;
        }
        t.metadata["repeat"] = r + 1;
        out.push_back(std::move(t));
    }
    return out;
}

ReplayObservations::ReplayObservations(std::vector<Recording> recordings, double default_fps)
    : recordings_(std::move(recordings)), default_fps_(default_fps) {
    if (recordings_.empty()) throw ConfigError("replay manifest lists no recordings");
}

ReplayObservations ReplayObservations::from_manifest(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    if (!j.contains("recordings") || !j["recordings"].is_array()) {
        throw ConfigError(fmt::format("{}: 'recordings' array missing", path.string()));
    }
    const auto dir = path.parent_path();
    std::vector<Recording> recs;
    for (const auto& r : j["recordings"]) {
        Recording rec;
        rec.control = control_from_json(r.at("control"));
        rec.stem = dir / r.at("trajectory").get<std::string>();
        rec.role = r.value("role", std::string("training"));
        rec.name = r.value("name", std::string());
        rec.repeat = r.value("repeat", 1);
        recs.push_back(std::move(rec));
    }
    return ReplayObservations(std::move(recs), j.value("fps", 0.0));
}

std::vector<Trajectory> ReplayObservations::observe(const ControlProfile& control, int repeats) const {
    const auto key = profile_key(control);
    std::vector<const Recording*> hits;
    for (const auto& r : recordings_) {
        if (profile_key(r.control) == key) hits.push_back(&r);
    }
    if (hits.empty()) throw ConfigError(fmt::format("no recording for control profile {}", key));
    std::stable_sort(hits.begin(), hits.end(), [](auto a, auto b) { return a->repeat < b->repeat; });
    std::vector<Trajectory> out;
    for (int i = 0; i < repeats; ++i) {
        if (i >= static_cast<int>(hits.size())) {
            throw ConfigError(fmt::format("profile {} has {} recordings, {} requested", key, hits.size(), repeats));
        }
        auto t = read_trajectory(hits[static_cast<std::size_t>(i)]->stem, default_fps_);
        t.metadata["source"] = hits[static_cast<std::size_t>(i)]->stem.string();
        out.push_back(std::move(t));
    }
    return out;
}

ControlProfile ReplayObservations::resolve(const ControlProfile& control) const {
    const auto key = profile_key(control);
    const Recording* best = nullptr;
    double best_d = kInf;
    for (const auto& r : recordings_) {
        if (r.control.rig != control.rig || r.control.channels.size() != control.channels.size()) continue;
        if (profile_key(r.control) == key) return r.control;
        double d = 0.0;
        for (std::size_t c = 0; c < control.channels.size(); ++c) {
            const auto& a = control.channels[c];
            const auto& b = r.control.channels[c];
            const double scale = std::max({std::abs(a.amplitude), std::abs(b.amplitude), 1e-9});
            d += std::pow((a.amplitude - b.amplitude) / scale, 2) + std::pow(a.frequency_hz - b.frequency_hz, 2) +
                 std::pow(a.phase_rad - b.phase_rad, 2);
        }
        // Prefer training recordings on equal distance.
        if (d < best_d || (d == best_d && best && best->role != "training" && r.role == "training")) {
            best_d = d;
            best = &r;
        }
    }
    if (!best) throw ConfigError("no recording matches the rig and channel layout of the proposed control");
    spdlog::warn("replay: no recording for {}, using nearest {}", key, profile_key(best->control));
    return best->control;
}

// ---------------------------------------------------------------- objective

TrajectoryEvaluator::TrajectoryEvaluator(std::shared_ptr<const Simulator> sim,
                                         std::shared_ptr<const ObservationSource> source, CompareOptions options,
                                         std::string unit)
    : sim_(std::move(sim)), source_(std::move(source)), options_(options), unit_(std::move(unit)) {}

EvalOutcome TrajectoryEvaluator::evaluate(const ParameterVector& params, const ControlProfile& control) const {
    EvalOutcome out;
    Trajectory real = source_->observe(control, 1).front();
    Trajectory sim;
    try {
        sim = sim_->simulate(params, control);
    } catch (const DivergedSimulation& e) {
        spdlog::warn("simulation diverged: {}", e.what());
        out.diverged = true;
        out.flags.emplace_back("diverged");
        out.real = std::move(real);
        return out;
    }
    try {
        const auto report = compare(sim, real, options_);
        out.error = report.mae;
        out.lag_frames = report.lag_frames;
        out.flags = report.flags;
        out.lag_clamped = std::find(report.flags.begin(), report.flags.end(), "lag_clamped") != report.flags.end();
    } catch (const InsufficientOverlap& e) {
        spdlog::warn("comparison failed: {}", e.what());
        out.flags.emplace_back("insufficient_overlap");
    }
    if (!std::isfinite(out.error)) out.error = kInf;
    out.sim = std::move(sim);
    out.real = std::move(real);
    return out;
}

EvalOutcome FunctionEvaluator::evaluate(const ParameterVector& params, const ControlProfile& control) const {
    EvalOutcome out;
    try {
        out.error = fn_(params, control);
    } catch (const DivergedSimulation&) {
        out.error = kInf;
        out.diverged = true;
    }
    if (std::isnan(out.error)) out.error = kInf;
    return out;
}

// --------------------------------------------------------------------- loop

int select_best_iteration(const std::vector<double>& errors) {
    int best = 0;
    double best_e = kInf;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (std::isfinite(errors[i]) && errors[i] < best_e) {
            best_e = errors[i];
            best = static_cast<int>(i) + 1;
        }
    }
    if (best == 0) throw NoValidIteration("no iteration has a finite training error");
    return best;
}

int select_best_iteration(const RunHistory& history) {
    std::vector<double> errors;
    errors.reserve(history.size());
    for (const auto& r : history) errors.push_back(r.error);
    return select_best_iteration(errors);
}

namespace {

struct Candidate {
    ParameterVector params;
    ControlProfile control;
    std::optional<double> confidence;
    std::string rationale;
};

std::vector<EvalOutcome> evaluate_all(const std::vector<Candidate>& cands, const Evaluator& evaluator, bool parallel) {
    std::vector<EvalOutcome> out(cands.size());
    if (!parallel || cands.size() == 1) {
        for (std::size_t i = 0; i < cands.size(); ++i) out[i] = evaluator.evaluate(cands[i].params, cands[i].control);
        return out;
    }
    std::vector<std::future<EvalOutcome>> futures;
    for (const auto& c : cands) {
        futures.push_back(std::async(std::launch::async, [&evaluator, &c] { return evaluator.evaluate(c.params, c.control); }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) out[i] = futures[i].get();
    return out;
}

ControlProfile clamp_proposed_control(const ControlProfile& proposed, const ControlProfile& current,
                                      const ControlBounds& bounds, bool tune_control) {
    if (current.channels.empty()) return current;
    if (!tune_control) return current;
    return clamp_control(proposed, bounds);
}

}  // namespace

CalibrationResult run_calibration(const CalibrationConfig& config, Recommender& recommender, const Evaluator& evaluator) {
    if (config.budget < 0) throw InvalidArgument("budget must be non-negative");
    CalibrationResult result;
    auto u0 = config.initial_control;
    if (!u0.channels.empty()) u0 = evaluator.resolve(clamp_control(u0, config.control_bounds));
    std::vector<Candidate> batch{{clamp(config.initial_params, config.bounds), u0, std::nullopt, "initial"}};
    result.best_params = batch.front().params;
    result.best_control = batch.front().control;
    if (config.run_dir) std::filesystem::create_directories(*config.run_dir);

    for (int k = 1; k <= config.budget; ++k) {
        const auto outcomes = evaluate_all(batch, evaluator, config.parallel);
        result.evaluations += static_cast<int>(batch.size());

        // Generation best; the first candidate wins ties.
        std::size_t gb = 0;
        for (std::size_t i = 1; i < outcomes.size(); ++i) {
            if (outcomes[i].error < outcomes[gb].error) gb = i;
        }
        const auto& cand = batch[gb];
        const auto& oc = outcomes[gb];
        IterationRecord rec;
        rec.iteration = k;
        rec.params = cand.params;
        rec.control = cand.control;
        rec.error = oc.error;
        rec.confidence = cand.confidence;
        rec.rationale = cand.rationale;
        rec.evaluations = static_cast<int>(batch.size());
        rec.lag_frames = oc.lag_frames;
        rec.lag_clamped = oc.lag_clamped;
        rec.diverged = oc.diverged;
        result.history.push_back(rec);
        spdlog::debug("iteration {}: error {:.4f}", k, rec.error);

        if (rec.error < result.best_error) {
            result.best_error = rec.error;
            result.best_params = rec.params;
            result.best_control = rec.control;
            result.best_iteration = k;
        }
        result.best_so_far.push_back(result.best_error);

        std::optional<MediaRefs> media;
        if (config.run_dir) {
            const auto stem = *config.run_dir / fmt::format("iter_{:03d}", k);
            if (oc.sim) write_trajectory(*oc.sim, stem.string() + "_sim");
            if (oc.real) write_trajectory(*oc.real, stem.string() + "_real");
            if (oc.sim && oc.real) media = MediaRefs{stem.string() + "_sim.csv", stem.string() + "_real.csv"};
        }

        if (k == config.budget) break;  // the last proposal would never be evaluated

        RecommendationRequest req;
        req.iteration = k;
        req.platform = config.platform;
        req.params = rec.params;
        req.control = rec.control;
        req.error = rec.error;
        req.error_unit = evaluator.error_unit();
        req.bounds = config.bounds;
        req.control_bounds = config.control_bounds;
        req.history = result.history;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            req.evaluations.push_back({batch[i].params, batch[i].control, outcomes[i].error});
        }
        req.media = media;
        req.flags = config.flags;

        std::vector<RecommendationResponse> proposals;
        try {
            proposals = recommender.recommend(req);
        } catch (const RecommenderUnavailable& e) {
            spdlog::error("recommender unavailable, stopping after iteration {}: {}", k, e.what());
            result.partial = true;
            result.abort_reason = e.what();
            break;
        } catch (const ParseFailure& e) {
            spdlog::warn("recommendation could not be parsed, keeping the current candidate: {}", e.what());
            proposals.clear();
            RecommendationResponse keep;
            keep.params = rec.params;
            keep.control = rec.control;
            keep.rationale = std::string("parse failure: ") + e.what();
            proposals.push_back(std::move(keep));
            proposals.back().confidence = std::numeric_limits<double>::quiet_NaN();
        }
        if (proposals.empty()) throw StructuralError(recommender.name() + " returned no proposal");

        batch.clear();
        for (auto& p : proposals) {
            Candidate c;
            c.params = clamp(p.params, config.bounds);
            c.control = clamp_proposed_control(p.control, rec.control, config.control_bounds, config.flags.tune_control);
            if (!c.control.channels.empty()) c.control = evaluator.resolve(c.control);
            if (std::isfinite(p.confidence)) c.confidence = std::clamp(p.confidence, 0.0, 1.0);
            c.rationale = std::move(p.rationale);
            batch.push_back(std::move(c));
        }
    }
    return result;
}

// ------------------------------------------------------------------ run dir

json to_json(const IterationRecord& r) {
    json params = json::object();
    for (std::size_t i = 0; i < r.params.size(); ++i) params[r.params.name(i)] = r.params[i];
    return {{"iteration", r.iteration},
            {"params", params},
            {"control", r.control.channels.empty() ? json(nullptr) : to_json(r.control)},
            {"error", std::isfinite(r.error) ? json(r.error) : json(nullptr)},
            {"confidence", r.confidence ? json(*r.confidence) : json(nullptr)},
            {"rationale", r.rationale},
            {"evaluations", r.evaluations},
            {"lag_frames", r.lag_frames},
            {"lag_clamped", r.lag_clamped},
            {"diverged", r.diverged}};
}

IterationRecord iteration_from_json(const json& j) {
    IterationRecord r;
    r.iteration = j.at("iteration").get<int>();
    std::vector<std::string> names;
    std::vector<double> values;
    for (const auto& [k, v] : j.at("params").items()) {
        names.push_back(k);
        values.push_back(v.get<double>());
    }
    r.params = ParameterVector(std::move(names), std::move(values));
    if (!j.at("control").is_null()) r.control = control_from_json(j["control"]);
    r.error = j.at("error").is_null() ? kInf : j["error"].get<double>();
    if (!j.at("confidence").is_null()) r.confidence = j["confidence"].get<double>();
    r.rationale = j.value("rationale", std::string());
    r.evaluations = j.value("evaluations", 1);
    r.lag_frames = j.value("lag_frames", 0);
    r.lag_clamped = j.value("lag_clamped", false);
    r.diverged = j.value("diverged", false);
    return r;
}

std::string history_csv(const RunHistory& history, const ParameterBounds& bounds, const ControlBounds& control_bounds) {
    std::string out = "iteration,error,best_error,confidence,lag_frames,lag_clamped,diverged,evaluations";
    for (const auto& n : bounds.names()) out += ",param:" + n;
    const bool has_control = !history.empty() && !history.front().control.channels.empty();
    if (has_control) {
        for (const auto& n : control_bounds.amplitude.names()) out += ",control:" + n;
    }
    out += '\n';
    double best = kInf;
    for (const auto& r : history) {
        best = std::min(best, r.error);
        out += fmt::format("{},{},{},{},{},{},{},{}", r.iteration, fmt_double(r.error), fmt_double(best),
                           r.confidence ? fmt_double(*r.confidence) : std::string(), r.lag_frames, r.lag_clamped ? 1 : 0,
                           r.diverged ? 1 : 0, r.evaluations);
        for (const auto& n : bounds.names()) out += "," + fmt_double(r.params.at(n));
        if (has_control) {
            for (const auto& ch : r.control.channels) out += "," + fmt_double(ch.amplitude);
        }
        out += '\n';
    }
    return out;
}

std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(fmt::format("{}: empty history", path.string()));
    const auto header = split(line, ',');
    auto col = [&](std::string_view name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ConfigError(fmt::format("{}: column '{}' missing", path.string(), name));
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_iter = col("iteration"), c_err = col("error"), c_conf = col("confidence");
    std::vector<std::pair<std::size_t, std::string>> pcols, ucols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i].rfind("param:", 0) == 0) pcols.emplace_back(i, header[i].substr(6));
        if (header[i].rfind("control:", 0) == 0) ucols.emplace_back(i, header[i].substr(8));
    }
    std::vector<HistoryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != header.size()) throw ConfigError(fmt::format("{}: ragged row '{}'", path.string(), line));
        HistoryRow row;
        row.iteration = std::stoi(f[c_iter]);
        row.error = parse_double(f[c_err]);
        if (std::isnan(row.error)) row.error = kInf;
        if (!f[c_conf].empty()) row.confidence = parse_double(f[c_conf]);
        std::vector<std::string> pn, un;
        std::vector<double> pv, uv;
        for (const auto& [i, n] : pcols) {
            pn.push_back(n);
            pv.push_back(parse_double(f[i]));
        }
        for (const auto& [i, n] : ucols) {
            un.push_back(n);
            uv.push_back(parse_double(f[i]));
        }
        row.params = ParameterVector(std::move(pn), std::move(pv));
        row.control = ParameterVector(std::move(un), std::move(uv));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_run_files(const std::filesystem::path& dir, const CalibrationConfig& config, const CalibrationResult& result,
                     const json& extra) {
    std::filesystem::create_directories(dir);
    json history = json::array();
    for (const auto& r : result.history) history.push_back(to_json(r));
    json best = json::object();
    for (std::size_t i = 0; i < result.best_params.size(); ++i) best[result.best_params.name(i)] = result.best_params[i];
    json run{{"platform", std::string(to_string(config.platform))},
             {"budget", config.budget},
             {"flags", config.flags.to_string()},
             {"param_names", config.bounds.names()},
             {"control_names", config.control_bounds.amplitude.names()},
             {"initial_control", config.initial_control.channels.empty() ? json(nullptr) : to_json(config.initial_control)},
             {"best_params", best},
             {"best_control", result.best_control.channels.empty() ? json(nullptr) : to_json(result.best_control)},
             {"best_error", std::isfinite(result.best_error) ? json(result.best_error) : json(nullptr)},
             {"best_iteration", result.best_iteration},
             {"evaluations", result.evaluations},
             {"partial", result.partial},
             {"abort_reason", result.abort_reason},
             {"history", history}};
    run.update(extra);
    write_file_atomic(dir / "run.json", run.dump(2) + "\n");
    write_file_atomic(dir / "history.csv", history_csv(result.history, config.bounds, config.control_bounds));
}

}  // namespace sysid
