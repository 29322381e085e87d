#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sysid {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
double distance(Point2 a, Point2 b);

enum class CoordinateSpace { pixels, millimeters };

std::string_view to_string(CoordinateSpace space);
CoordinateSpace parse_coordinate_space(std::string_view text);

using Frame = std::vector<Point2>;

/// Fixed-rate sequence of point sets. One point per frame is a tip track,
/// ten is a base-to-tip centerline.
struct Trajectory {
    double fps = 30.0;
    CoordinateSpace space = CoordinateSpace::pixels;
    std::vector<Frame> frames;
    /// Free-form provenance (generating parameters, control, source file).
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t frame_count() const noexcept { return frames.size(); }
    /// Points per frame; 0 for an empty trajectory.
    std::size_t point_count() const noexcept { return frames.empty() ? 0 : frames.front().size(); }
    double duration_seconds() const noexcept { return static_cast<double>(frames.size()) / fps; }

    friend bool operator==(const Trajectory& a, const Trajectory& b) {
        return a.fps == b.fps && a.space == b.space && a.frames == b.frames;
    }
};

/// Throws InvalidArgument on fps <= 0, ragged frames or non-finite coordinates.
void validate(const Trajectory& traj);

/// Writes `<stem>.csv` (frame,point,x,y) and `<stem>.json` (fps, space, metadata).
void write_trajectory(const Trajectory& traj, const std::filesystem::path& stem);
/// Reads the pair written by write_trajectory. A missing sidecar is a ConfigError
/// unless `default_fps` is positive.
Trajectory read_trajectory(const std::filesystem::path& stem, double default_fps = 0.0);

std::string to_csv(const Trajectory& traj);
Trajectory from_csv(std::string_view text, double fps, CoordinateSpace space);

}  // namespace sysid
