#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sysid/control.hpp"
#include "sysid/param_space.hpp"
#include "sysid/platform.hpp"

namespace sysid {

/// Prompt and search features; each can be switched off for an ablation.
struct RecommenderFlags {
    bool include_video = true;
    bool include_history = true;
    bool chain_of_thought = true;
    bool tune_control = true;

    /// Comma-separated subset of no-video, no-history, no-cot, fixed-control.
    static RecommenderFlags parse(std::string_view list);
    std::string to_string() const;

    friend bool operator==(const RecommenderFlags&, const RecommenderFlags&) = default;
};

struct IterationRecord {
    int iteration = 0;
    ParameterVector params;
    ControlProfile control;
    /// +inf for a diverged simulation.
    double error = std::numeric_limits<double>::infinity();
    /// Confidence attached to the proposal that produced these params; empty for the initial point.
    std::optional<double> confidence;
    std::string rationale;
    int evaluations = 1;
    int lag_frames = 0;
    bool lag_clamped = false;
    bool diverged = false;
};

using RunHistory = std::vector<IterationRecord>;

/// One simulated candidate and its training error.
struct Evaluation {
    ParameterVector params;
    ControlProfile control;
    double error = std::numeric_limits<double>::infinity();
};

struct MediaRefs {
    std::filesystem::path sim;
    std::filesystem::path real;
};

struct RecommendationRequest {
    int iteration = 0;
    Platform platform = Platform::finger;
    ParameterVector params;
    ControlProfile control;
    double error = std::numeric_limits<double>::infinity();
    /// Unit of `error`, "px" or "mm"; names the metric in prompts.
    std::string error_unit = "px";
    /// Tuned parameters only; control amplitudes live in control_bounds.
    ParameterBounds bounds;
    ControlBounds control_bounds;
    RunHistory history;
    /// Every candidate simulated in the iteration just finished, in proposal order.
    std::vector<Evaluation> evaluations;
    std::optional<MediaRefs> media;
    RecommenderFlags flags;
};

/// What a recommender proposed, before the loop clamps it.
struct RecommendationResponse {
    ParameterVector params;
    ControlProfile control;
    double confidence = 0.5;
    std::string rationale;
    std::string analysis;
};

class Recommender {
public:
    virtual ~Recommender() = default;
    virtual std::string name() const = 0;
    /// One proposal for sequential methods, a whole generation for CMA-ES.
    virtual std::vector<RecommendationResponse> recommend(const RecommendationRequest& request) = 0;
};

enum class Method { random, nelder_mead, golden_cd, bo, cmaes, vlm, scripted };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

/// Per-run construction context shared by the black-box methods.
struct OptimizerContext {
    ParameterBounds bounds;
    /// Loop iterations, including the one that evaluates the initial point.
    int budget = 10;
    std::uint64_t seed = 0;
};

std::unique_ptr<Recommender> make_random(const OptimizerContext& ctx);
std::unique_ptr<Recommender> make_nelder_mead(const OptimizerContext& ctx);
std::unique_ptr<Recommender> make_golden_cd(const OptimizerContext& ctx);
std::unique_ptr<Recommender> make_bo(const OptimizerContext& ctx);
std::unique_ptr<Recommender> make_cmaes(const OptimizerContext& ctx);

/// 4 + floor(3 ln(d + 1)).
int cmaes_population(std::size_t dims);

/// Folds any real into [0, 1] by mirroring at the bounds: 1.2 -> 0.8, -0.3 -> 0.3.
double reflect_unit(double x);

}  // namespace sysid
