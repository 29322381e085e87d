#include "sysid/experiment.hpp"

#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sysid/errors.hpp"
#include "sysid/io.hpp"

namespace sysid {

using nlohmann::json;

namespace {

ParameterVector params_from_json(const json& j, const std::string& field) {
    if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be an object of name: value", field));
    std::vector<std::string> names;
    std::vector<double> values;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) throw ConfigError(fmt::format("'{}.{}' must be a number", field, k));
        names.push_back(k);
        values.push_back(v.get<double>());
    }
    return ParameterVector(std::move(names), std::move(values));
}

json params_to_json(const ParameterVector& p) {
    json j = json::object();
    for (std::size_t i = 0; i < p.size(); ++i) j[p.name(i)] = p[i];
    return j;
}

ParameterVector in_layout(const ParameterVector& p, const ParameterBounds& bounds, const std::string& field) {
    try {
        return reorder(p, bounds);
    } catch (const StructuralError& e) {
        throw ConfigError(fmt::format("field '{}': {}", field, e.what()));
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const json& j, const std::filesystem::path& base) {
    if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
    ExperimentSpec s;
    auto field = [&](const char* name, auto fn) {
        if (!j.contains(name)) return;
        try {
            fn(j[name]);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(fmt::format("field '{}': {}", name, e.what()));
        }
    };
    field("platform", [&](const json& v) { s.platform = parse_platform(v.get<std::string>()); });
    field("mode", [&](const json& v) {
        const auto m = v.get<std::string>();
        if (m == "sim2sim") s.mode = ExperimentMode::sim2sim;
        else if (m == "replay") s.mode = ExperimentMode::replay;
        else throw ConfigError(fmt::format("field 'mode': unknown mode '{}'", m));
    });
    field("bounds", [&](const json& v) { s.bounds_file = resolve(base, v.get<std::string>()); });
    field("method", [&](const json& v) { s.methods = {parse_method(v.get<std::string>())}; });
    field("methods", [&](const json& v) {
        s.methods.clear();
        for (const auto& m : v) s.methods.push_back(parse_method(m.get<std::string>()));
    });
    field("flags", [&](const json& v) { s.flags = RecommenderFlags::parse(v.get<std::string>()); });
    field("seeds", [&](const json& v) { s.seeds = v.get<std::vector<std::uint64_t>>(); });
    field("budget", [&](const json& v) { s.budget = v.get<int>(); });
    field("repeats", [&](const json& v) { s.repeats = v.get<int>(); });
    field("manifest", [&](const json& v) { s.manifest = resolve(base, v.get<std::string>()); });
    field("endpoint", [&](const json& v) { s.endpoint = endpoint_from_json(v); });
    field("script", [&](const json& v) { s.script = resolve(base, v.get<std::string>()); });
    field("noise_sigma", [&](const json& v) { s.noise_sigma = v.get<double>(); });
    field("perception", [&](const json& v) { s.perception = v.get<bool>(); });
    field("normalize_arclength", [&](const json& v) { s.normalize_arclength = v.get<bool>(); });
    field("ground_truth", [&](const json& v) { s.ground_truth = params_from_json(v, "ground_truth"); });
    field("initial", [&](const json& v) { s.initial = params_from_json(v, "initial"); });
    field("frozen", [&](const json& v) { s.frozen = params_from_json(v, "frozen"); });
    field("parallel", [&](const json& v) { s.parallel = v.get<bool>(); });
    static const std::vector<std::string> known{"platform", "mode",        "bounds",    "method",  "methods",
                                                "flags",    "seeds",       "budget",    "repeats", "manifest",
                                                "endpoint", "script",      "noise_sigma", "perception",
                                                "normalize_arclength", "ground_truth", "initial", "frozen", "parallel"};
    for (const auto& [k, v] : j.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError(fmt::format("unknown field '{}'", k));
    }
    s.validate();
    return s;
}

ExperimentSpec ExperimentSpec::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path), path.parent_path());
}

json ExperimentSpec::to_json() const {
    json methods_j = json::array();
    for (auto m : methods) methods_j.push_back(std::string(sysid::to_string(m)));
    json j{{"platform", std::string(sysid::to_string(platform))},
           {"mode", mode == ExperimentMode::sim2sim ? "sim2sim" : "replay"},
           {"methods", methods_j},
           {"flags", flags.to_string()},
           {"seeds", seeds},
           {"budget", budget},
           {"repeats", repeats},
           {"noise_sigma", noise_sigma},
           {"perception", perception},
           {"normalize_arclength", normalize_arclength},
           {"parallel", parallel}};
    if (!bounds_file.empty()) j["bounds"] = std::filesystem::absolute(bounds_file).string();
    if (!manifest.empty()) j["manifest"] = std::filesystem::absolute(manifest).string();
    if (!script.empty()) j["script"] = std::filesystem::absolute(script).string();
    if (endpoint) {
        j["endpoint"] = {{"url", endpoint->url},
                         {"api_key_env", endpoint->api_key_env},
                         {"model", endpoint->model},
                         {"media", endpoint->media == MediaMode::path ? "path" : "base64"},
                         {"timeout_s", endpoint->timeout_s},
                         {"retries", endpoint->retries},
                         {"backoff_s", endpoint->backoff_s},
                         {"temperature", endpoint->temperature ? json(*endpoint->temperature) : json(nullptr)},
                         {"top_p", endpoint->top_p ? json(*endpoint->top_p) : json(nullptr)}};
    }
    if (ground_truth) j["ground_truth"] = params_to_json(*ground_truth);
    if (initial) j["initial"] = params_to_json(*initial);
    if (!frozen.empty()) j["frozen"] = params_to_json(frozen);
    return j;
}

void ExperimentSpec::validate() const {
    if (seeds.empty()) throw ConfigError("field 'seeds': at least one seed is required");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        for (std::size_t k = i + 1; k < seeds.size(); ++k) {
            if (seeds[i] == seeds[k]) throw ConfigError(fmt::format("field 'seeds': seed {} repeated", seeds[i]));
        }
    }
    if (budget < 0) throw ConfigError("field 'budget': must be non-negative");
    if (repeats < 1) throw ConfigError("field 'repeats': must be at least 1");
    if (methods.empty()) throw ConfigError("field 'methods': at least one method is required");
    if (mode == ExperimentMode::replay && manifest.empty()) {
        throw ConfigError("field 'manifest': replay mode needs a recordings manifest");
    }
    if (mode == ExperimentMode::replay && ground_truth) throw ConfigError("field 'ground_truth': only valid in sim2sim");
    for (auto m : methods) {
        if (m == Method::vlm && !endpoint) throw ConfigError("field 'endpoint': the vlm method needs an endpoint");
        if (m == Method::scripted && script.empty()) throw ConfigError("field 'script': the scripted method needs a script");
    }
    if (noise_sigma < 0.0) throw ConfigError("field 'noise_sigma': must be non-negative");
    if (perception && platform == Platform::finger) throw ConfigError("field 'perception': only rod platforms have masks");
}

ParameterVector seeded_sample(const ParameterBounds& bounds, std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{seed, stream};
    std::mt19937_64 rng(seq);
    return sample_uniform(bounds, rng);
}

ExperimentSetup make_setup(const ExperimentSpec& spec, std::uint64_t seed) {
    ExperimentSetup s;
    s.platform = spec.platform;
    s.table = spec.bounds_file.empty() ? builtin_bounds(spec.platform)
                                       : load_bounds(spec.bounds_file, to_string(spec.platform));
    s.tuned = tuned_bounds(spec.platform, s.table);
    s.control_bounds = make_control_bounds(rig_of(spec.platform), s.table);
    s.training = training_profile(s.control_bounds);
    s.holdouts = holdout_suite(rig_of(spec.platform));

    SimulationSettings settings;
    std::optional<ReplayObservations> replay;
    if (spec.mode == ExperimentMode::replay) {
        replay = ReplayObservations::from_manifest(spec.manifest);
        // The training recording fixes the initial control and coordinate space.
        const Recording* train = nullptr;
        for (const auto& r : replay->recordings()) {
            if (r.role == "training") {
                train = &r;
                break;
            }
        }
        if (!train) throw ConfigError("manifest has no training recording");
        s.training = train->control;
        settings.space = read_trajectory(train->stem, 0.0).space;
        for (std::size_t h = 0; h < 4; ++h) {
            for (const auto& r : replay->recordings()) {
                if (r.role == "holdout" && r.name == fmt::format("H{}", h + 1)) s.holdouts[h] = r.control;
            }
        }
    } else {
        settings.space = spec.platform == Platform::finger ? CoordinateSpace::millimeters : CoordinateSpace::pixels;
    }
    s.unit = settings.space == CoordinateSpace::millimeters ? "mm" : "px";
    s.sim = std::make_shared<SurrogateSimulator>(spec.platform, settings, spec.frozen);

    if (replay) {
        s.source = std::make_shared<ReplayObservations>(std::move(*replay));
    } else {
        s.ground_truth = spec.ground_truth ? in_layout(*spec.ground_truth, s.tuned, "ground_truth")
                                           : seeded_sample(s.tuned, seed, 1);
        if (!within_bounds(*s.ground_truth, s.tuned)) throw ConfigError("field 'ground_truth': outside the bounds");
        SurrogateObservationOptions opt;
        opt.noise_sigma = spec.noise_sigma;
        opt.noise_seed = seed;
        opt.perception = spec.perception;
        s.source = std::make_shared<SurrogateObservations>(s.sim, *s.ground_truth, opt);
    }
    s.initial = spec.initial ? in_layout(*spec.initial, s.tuned, "initial") : seeded_sample(s.tuned, seed, 2);
    s.compare.normalize_arclength = spec.normalize_arclength;
    return s;
}

std::unique_ptr<Recommender> make_recommender(const ExperimentSpec& spec, Method method, const ExperimentSetup& setup,
                                              std::uint64_t seed) {
    const OptimizerContext ctx{setup.tuned, spec.budget, seed};
    switch (method) {
        case Method::random: return make_random(ctx);
        case Method::nelder_mead: return make_nelder_mead(ctx);
        case Method::golden_cd: return make_golden_cd(ctx);
        case Method::bo: return make_bo(ctx);
        case Method::cmaes: return make_cmaes(ctx);
        case Method::vlm:
            if (!spec.endpoint) throw ConfigError("the vlm method needs an endpoint");
            return std::make_unique<VlmRecommender>(*spec.endpoint);
        case Method::scripted: return ScriptedRecommender::from_file(spec.script);
    }
    throw ConfigError("unknown method");
}

CalibrationResult run_seed(const ExperimentSpec& spec, Method method, std::uint64_t seed,
                           const std::filesystem::path& run_dir) {
    const auto setup = make_setup(spec, seed);
    auto recommender = make_recommender(spec, method, setup, seed);
    CalibrationConfig cfg;
    cfg.platform = spec.platform;
    cfg.bounds = setup.tuned;
    cfg.control_bounds = setup.control_bounds;
    cfg.initial_params = setup.initial;
    cfg.initial_control = setup.training;
    cfg.budget = spec.budget;
    cfg.flags = spec.flags;
    cfg.run_dir = run_dir;
    cfg.parallel = spec.parallel;
    const TrajectoryEvaluator evaluator(setup.sim, setup.source, setup.compare, setup.unit);
    spdlog::info("{} seed {}: {} iterations on {}", to_string(method), seed, spec.budget, to_string(spec.platform));
    const auto result = run_calibration(cfg, *recommender, evaluator);
    json extra{{"method", std::string(to_string(method))},
               {"seed", seed},
               {"unit", setup.unit},
               {"mode", spec.mode == ExperimentMode::sim2sim ? "sim2sim" : "replay"},
               {"initial_params", params_to_json(setup.initial)}};
    if (setup.ground_truth) extra["ground_truth"] = params_to_json(*setup.ground_truth);
    write_run_files(run_dir, cfg, result, extra);
    return result;
}

std::filesystem::path method_dir(const std::filesystem::path& out, Method method) {
    return out / std::string(to_string(method));
}

std::filesystem::path seed_dir(const std::filesystem::path& out, Method method, std::uint64_t seed) {
    return method_dir(out, method) / fmt::format("seed_{}", seed);
}

}  // namespace sysid
