#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "sysid/platform.hpp"
#include "sysid/trajectory.hpp"

namespace sysid {

/// Binary mask, row-major, one byte per pixel (0 background, 1 foreground).
/// Pixel (col, row) has its center at image coordinates (col, row).
struct MaskFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    MaskFrame() = default;
    /// Throws InvalidArgument unless both dimensions are positive.
    MaskFrame(int w, int h);

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool on = true) { bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0; }
    bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    std::size_t count() const;
};

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

struct ColorFrame {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;

    ColorFrame() = default;
    ColorFrame(int w, int h, Rgb fill = {});

    Rgb at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    void set(int x, int y, Rgb c) { pixels[static_cast<std::size_t>(y) * width + x] = c; }
};

/// Hue in degrees [0, 360), saturation and value in [0, 1].
struct Hsv {
    double h = 0.0, s = 0.0, v = 0.0;
};

Hsv rgb_to_hsv(Rgb c);

/// Inclusive HSV box. A hue range with h_min > h_max wraps through 0.
struct HsvRange {
    double h_min = 0.0, h_max = 360.0;
    double s_min = 0.0, s_max = 1.0;
    double v_min = 0.0, v_max = 1.0;

    bool contains(const Hsv& c) const;
};

struct Roi {
    int x = 0, y = 0, width = 0, height = 0;
};

/// Frame edge the body is attached to; the centerline starts at the skeleton end nearest it.
enum class BaseEdge { left, right, top, bottom };

BaseEdge default_base_edge(Rig rig);

/// Foreground = pixels within thickness/2 of the polyline. Points outside the
/// frame are drawn clipped, with a warning.
MaskFrame rasterize_rod(const std::vector<Point2>& centerline, double thickness, int width, int height);

/// Base-to-tip centerline with `n_points` equidistant points, or nullopt for an
/// empty mask. Throws DegenerateMask when the skeleton is shorter than 3 px.
std::optional<Frame> extract_centerline(const MaskFrame& mask, std::size_t n_points = 10,
                                        BaseEdge base = BaseEdge::left);

/// Centroid of the largest 8-connected in-range blob inside `roi`, in frame coordinates.
std::optional<Point2> track_marker(const ColorFrame& frame, const HsvRange& range, const Roi& roi);

/// Linear interpolation across gaps, nearest-valid copy at the ends. Throws
/// UnrecoverablePerception when every frame is missing.
std::vector<Frame> interpolate_missing(const std::vector<std::optional<Frame>>& frames);

/// One mask per trajectory frame, drawn through each frame's points.
std::vector<MaskFrame> render_masks(const Trajectory& traj, double thickness, int width, int height);

/// Extract and repair a centerline trajectory from a mask sequence. Masks whose
/// skeleton is degenerate are treated as missing.
Trajectory centerlines_from_masks(const std::vector<MaskFrame>& masks, double fps, std::size_t n_points,
                                  BaseEdge base);

void write_pgm(const MaskFrame& mask, const std::filesystem::path& path);
MaskFrame read_pgm(const std::filesystem::path& path);

struct MaskSequence {
    double fps = 0.0;
    std::vector<MaskFrame> frames;
};

/// `dir/index.json` plus `dir/frame_NNNNN.pgm`.
void write_mask_sequence(const MaskSequence& seq, const std::filesystem::path& dir);
MaskSequence read_mask_sequence(const std::filesystem::path& dir);

}  // namespace sysid
