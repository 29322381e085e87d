#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sysid/trajectory.hpp"

namespace sysid {

/// Scalar per frame used to estimate the lag.
enum class AlignmentSignal { mean_y, mean_x };

struct AlignOptions {
    double max_lag_s = 1.0;
    double min_overlap_s = 2.0;
    AlignmentSignal signal = AlignmentSignal::mean_y;
};

/// Cropped, time-matched pair. sim.frames[t] corresponds to real.frames[t].
struct AlignedPair {
    Trajectory sim;
    Trajectory real;
    /// Positive when the simulation lags the observation: sim[t + lag] matches real[t].
    int lag_frames = 0;
    /// The correlation peak sat on the edge of the lag window.
    bool lag_clamped = false;
    /// No lag had a defined correlation (a flat signal); lag 0 was used.
    bool flat_signal = false;

    std::size_t overlap() const noexcept { return sim.frame_count(); }
};

/// Normalized cross-correlation of the per-frame signal over lags within
/// +-max_lag; ties go to the smallest |lag|. Throws InsufficientOverlap when
/// fewer than min_overlap_s of frames overlap, InvalidArgument on fps or point
/// count mismatch.
AlignedPair align(const Trajectory& sim, const Trajectory& real, const AlignOptions& options = {});

/// Drops the first round(skip_s * fps) frames of both sides.
AlignedPair trim_transient(const AlignedPair& pair, double skip_s = 5.0);

/// Mean Euclidean distance over all frames and points.
double mae_centerline(const AlignedPair& pair);
/// Same for single-point tracks; throws MetricMismatch otherwise.
double mae_tip(const AlignedPair& pair);

double arc_length(const Frame& frame);
/// Frame scaled about its first point to the target arc length; nullopt when degenerate.
std::optional<Frame> arclength_normalize(const Frame& frame, double target_length);
/// Every frame normalized; degenerate frames are filled from their neighbours.
Trajectory arclength_normalize(const Trajectory& traj, double target_length);
double median_arc_length(const Trajectory& traj);

struct CompareOptions {
    AlignOptions align;
    double skip_s = 5.0;
    /// Scale both sides to the observation's median arc length first.
    bool normalize_arclength = false;
};

struct MetricsReport {
    int lag_frames = 0;
    double mae = 0.0;
    std::size_t frames = 0;
    std::size_t points = 0;
    std::vector<std::string> flags;
};

nlohmann::json to_json(const MetricsReport& report);

/// Optional arc-length normalization, align, trim, then the tip or centerline MAE.
MetricsReport compare(const Trajectory& sim, const Trajectory& real, const CompareOptions& options = {});

}  // namespace sysid
