#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sysid/calibration.hpp"
#include "sysid/evaluation.hpp"
#include "sysid/vlm.hpp"

namespace sysid {

enum class ExperimentMode { sim2sim, replay };

/// One experiment as described by its JSON spec file. Relative paths are
/// resolved against the spec file's directory.
struct ExperimentSpec {
    Platform platform = Platform::finger;
    ExperimentMode mode = ExperimentMode::sim2sim;
    /// Empty selects the compiled-in table.
    std::filesystem::path bounds_file;
    std::vector<Method> methods{Method::cmaes};
    RecommenderFlags flags;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int budget = 10;
    int repeats = 3;
    std::filesystem::path manifest;
    std::optional<VlmEndpoint> endpoint;
    std::filesystem::path script;
    /// sim2sim only: observation noise and optional mask round trip.
    double noise_sigma = 0.0;
    bool perception = false;
    bool normalize_arclength = false;
    /// Explicit values instead of seeded draws.
    std::optional<ParameterVector> ground_truth;
    std::optional<ParameterVector> initial;
    /// tentacle_water: body parameters held fixed.
    ParameterVector frozen;
    /// Evaluate CMA-ES generations concurrently.
    bool parallel = true;

    /// Throws ConfigError naming the offending field.
    static ExperimentSpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static ExperimentSpec load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    void validate() const;
};

/// Everything one seed of an experiment needs.
struct ExperimentSetup {
    Platform platform = Platform::finger;
    ParameterBounds table;
    ParameterBounds tuned;
    ControlBounds control_bounds;
    std::shared_ptr<const SurrogateSimulator> sim;
    std::shared_ptr<const ObservationSource> source;
    std::optional<ParameterVector> ground_truth;
    ParameterVector initial;
    ControlProfile training;
    std::array<ControlProfile, 4> holdouts;
    CompareOptions compare;
    std::string unit = "px";
};

/// Seeded streams: ground truth uses (seed, 1), the initial point (seed, 2).
ParameterVector seeded_sample(const ParameterBounds& bounds, std::uint64_t seed, std::uint64_t stream);

ExperimentSetup make_setup(const ExperimentSpec& spec, std::uint64_t seed);

std::unique_ptr<Recommender> make_recommender(const ExperimentSpec& spec, Method method, const ExperimentSetup& setup,
                                              std::uint64_t seed);

/// One calibration run written to `run_dir` (run.json, history.csv, trajectories).
CalibrationResult run_seed(const ExperimentSpec& spec, Method method, std::uint64_t seed,
                           const std::filesystem::path& run_dir);

std::filesystem::path method_dir(const std::filesystem::path& out, Method method);
std::filesystem::path seed_dir(const std::filesystem::path& out, Method method, std::uint64_t seed);

}  // namespace sysid
