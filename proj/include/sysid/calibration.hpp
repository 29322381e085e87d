#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sysid/metrics.hpp"
#include "sysid/recommender.hpp"
#include "sysid/surrogate.hpp"
#include "sysid/trajectory.hpp"

namespace sysid {

// ------------------------------------------------------ observation sources

/// Where the "real" trajectories come from.
class ObservationSource {
public:
    virtual ~ObservationSource() = default;
    /// `repeats` observations of the device under `control`. Thread-safe.
    virtual std::vector<Trajectory> observe(const ControlProfile& control, int repeats = 1) const = 0;
    /// The control that will actually be observed for a proposal.
    virtual ControlProfile resolve(const ControlProfile& control) const { return control; }
};

struct SurrogateObservationOptions {
    /// Gaussian noise added to every coordinate of every observed point.
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
    /// Route each observation through mask rendering and centerline extraction
    /// (pixel-space rod trajectories only).
    bool perception = false;
    double mask_thickness = 10.0;
    int mask_width = 640;
    int mask_height = 480;
};

/// sim2sim: the ground-truth surrogate run under the requested control. Runs are cached by profile.
class SurrogateObservations final : public ObservationSource {
public:
    SurrogateObservations(std::shared_ptr<const Simulator> sim, ParameterVector gt,
                          SurrogateObservationOptions options = {});
    std::vector<Trajectory> observe(const ControlProfile& control, int repeats = 1) const override;
    const ParameterVector& ground_truth() const noexcept { return gt_; }

private:
    Trajectory clean(const ControlProfile& control) const;

    std::shared_ptr<const Simulator> sim_;
    ParameterVector gt_;
    SurrogateObservationOptions options_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, Trajectory> cache_;
};

struct Recording {
    ControlProfile control;
    std::filesystem::path stem;
    std::string role;   // "training" or "holdout"
    std::string name;   // e.g. "H1"
    int repeat = 1;
};

/// Imported recordings listed in a manifest:
///
///     {"platform": "finger", "fps": 30,
///      "recordings": [{"control": {...}, "trajectory": "train_r1", "role": "training"}, ...]}
///
/// Trajectory stems are relative to the manifest's directory.
class ReplayObservations final : public ObservationSource {
public:
    explicit ReplayObservations(std::vector<Recording> recordings, double default_fps = 0.0);
    static ReplayObservations from_manifest(const std::filesystem::path& path);

    std::vector<Trajectory> observe(const ControlProfile& control, int repeats = 1) const override;
    /// Nearest recorded profile (normalized amplitude distance), with a warning when it differs.
    ControlProfile resolve(const ControlProfile& control) const override;
    const std::vector<Recording>& recordings() const noexcept { return recordings_; }

private:
    std::vector<Recording> recordings_;
    double default_fps_;
};

// ---------------------------------------------------------------- objective

struct EvalOutcome {
    double error = std::numeric_limits<double>::infinity();
    int lag_frames = 0;
    bool lag_clamped = false;
    bool diverged = false;
    std::vector<std::string> flags;
    std::optional<Trajectory> sim;
    std::optional<Trajectory> real;
};

/// Scores a candidate. Implementations must be safe to call concurrently.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual EvalOutcome evaluate(const ParameterVector& params, const ControlProfile& control) const = 0;
    /// Unit of the error, "px" or "mm".
    virtual std::string error_unit() const { return "px"; }
    /// The control that can actually be observed for a proposal.
    virtual ControlProfile resolve(const ControlProfile& control) const { return control; }
};

/// Simulate, observe, then compare.
class TrajectoryEvaluator final : public Evaluator {
public:
    TrajectoryEvaluator(std::shared_ptr<const Simulator> sim, std::shared_ptr<const ObservationSource> source,
                        CompareOptions options = {}, std::string unit = "px");
    EvalOutcome evaluate(const ParameterVector& params, const ControlProfile& control) const override;
    std::string error_unit() const override { return unit_; }
    ControlProfile resolve(const ControlProfile& control) const override { return source_->resolve(control); }

private:
    std::shared_ptr<const Simulator> sim_;
    std::shared_ptr<const ObservationSource> source_;
    CompareOptions options_;
    std::string unit_;
};

/// Wraps a plain function; used for synthetic objectives.
class FunctionEvaluator final : public Evaluator {
public:
    using Fn = std::function<double(const ParameterVector&, const ControlProfile&)>;
    explicit FunctionEvaluator(Fn fn) : fn_(std::move(fn)) {}
    EvalOutcome evaluate(const ParameterVector& params, const ControlProfile& control) const override;

private:
    Fn fn_;
};

// --------------------------------------------------------------------- loop

struct CalibrationConfig {
    Platform platform = Platform::finger;
    /// Tuned parameters.
    ParameterBounds bounds;
    ControlBounds control_bounds;
    ParameterVector initial_params;
    ControlProfile initial_control;
    int budget = 10;
    RecommenderFlags flags;
    /// When set, per-iteration trajectories are written here and offered as media.
    std::optional<std::filesystem::path> run_dir;
    /// Evaluate CMA-ES generations on worker threads.
    bool parallel = true;
};

struct CalibrationResult {
    ParameterVector best_params;
    ControlProfile best_control;
    double best_error = std::numeric_limits<double>::infinity();
    /// 1-based; 0 when no iteration produced a finite error.
    int best_iteration = 0;
    RunHistory history;
    /// Best error after each iteration.
    std::vector<double> best_so_far;
    int evaluations = 0;
    bool partial = false;
    std::string abort_reason;
};

/// The iterative loop: evaluate, track the best, extend the history, ask for
/// the next proposal, clamp it. Diverged candidates score +inf. An unavailable
/// recommender ends the run early with `partial` set; an unparseable reply keeps
/// the current candidate. No recommendation is requested after the last iteration.
CalibrationResult run_calibration(const CalibrationConfig& config, Recommender& recommender, const Evaluator& evaluator);

/// 1-based index of the earliest minimum finite error; NoValidIteration when none is finite.
int select_best_iteration(const RunHistory& history);
int select_best_iteration(const std::vector<double>& errors);

// ------------------------------------------------------------------ run dir

nlohmann::json to_json(const IterationRecord& record);
/// Params come back in key order; reorder() them against the bounds.
IterationRecord iteration_from_json(const nlohmann::json& j);

/// history.csv: iteration,error,best_error,confidence,lag_frames,lag_clamped,diverged,evaluations,
/// then one param:<name> column per tuned parameter and one control:<name> column per amplitude.
std::string history_csv(const RunHistory& history, const ParameterBounds& bounds, const ControlBounds& control_bounds);

struct HistoryRow {
    int iteration = 0;
    double error = 0.0;
    std::optional<double> confidence;
    ParameterVector params;
    ParameterVector control;
};
std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path);

/// run.json plus history.csv; `extra` is merged into run.json.
void write_run_files(const std::filesystem::path& dir, const CalibrationConfig& config, const CalibrationResult& result,
                     const nlohmann::json& extra = nlohmann::json::object());

}  // namespace sysid
