#include "sysid/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/ximgproc.hpp>

#include "sysid/errors.hpp"
#include "sysid/io.hpp"
#include "sysid/surrogate.hpp"

namespace sysid {

MaskFrame::MaskFrame(int w, int h) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw InvalidArgument("mask dimensions must be positive");
    bits.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
}

std::size_t MaskFrame::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

ColorFrame::ColorFrame(int w, int h, Rgb fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw InvalidArgument("frame dimensions must be positive");
    pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

Hsv rgb_to_hsv(Rgb c) {
    const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    Hsv out;
    out.v = mx;
    out.s = mx > 0.0 ? delta / mx : 0.0;
    if (delta > 0.0) {
        if (mx == r) {
            out.h = 60.0 * std::fmod((g - b) / delta, 6.0);
        } else if (mx == g) {
            out.h = 60.0 * ((b - r) / delta + 2.0);
        } else {
            out.h = 60.0 * ((r - g) / delta + 4.0);
        }
        if (out.h < 0.0) out.h += 360.0;
    }
    return out;
}

bool HsvRange::contains(const Hsv& c) const {
    const bool hue = h_min <= h_max ? (c.h >= h_min && c.h <= h_max) : (c.h >= h_min || c.h <= h_max);
    return hue && c.s >= s_min && c.s <= s_max && c.v >= v_min && c.v <= v_max;
}

BaseEdge default_base_edge(Rig rig) {
    return rig == Rig::finger ? BaseEdge::left : BaseEdge::top;
}

namespace {

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

cv::Mat to_mat(const MaskFrame& mask) {
    cv::Mat m(mask.height, mask.width, CV_8U);
    for (int y = 0; y < mask.height; ++y) {
        auto* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width; ++x) row[x] = mask.at(x, y) ? 255 : 0;
    }
    return m;
}

double polyline_length(const std::vector<Point2>& pts) {
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) total += distance(pts[i - 1], pts[i]);
    return total;
}

// Point at arc distance s from the start of the polyline.
Point2 point_at(const std::vector<Point2>& pts, double s) {
    double acc = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double seg = distance(pts[i - 1], pts[i]);
        if (acc + seg >= s && seg > 0.0) {
            const double w = (s - acc) / seg;
            return (1.0 - w) * pts[i - 1] + w * pts[i];
        }
        acc += seg;
    }
    return pts.back();
}

// Index of the first polyline vertex at arc distance >= s.
std::size_t index_at(const std::vector<Point2>& pts, double s) {
    double acc = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        acc += distance(pts[i - 1], pts[i]);
        if (acc >= s) return i;
    }
    return pts.size() - 1;
}

// Longest shortest-path (graph diameter by double sweep) through the largest
// 8-connected skeleton component.
std::vector<Point2> longest_skeleton_path(const cv::Mat& skeleton) {
    cv::Mat labels, stats, centroids;
    const int count = cv::connectedComponentsWithStats(skeleton, labels, stats, centroids, 8, CV_32S);
    if (count <= 1) return {};
    int best = 1;
    for (int l = 2; l < count; ++l) {
        if (stats.at<int>(l, cv::CC_STAT_AREA) > stats.at<int>(best, cv::CC_STAT_AREA)) best = l;
    }
    const int w = skeleton.cols, h = skeleton.rows;
    std::vector<int> pixels;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (labels.at<int>(y, x) == best) pixels.push_back(y * w + x);
        }
    }

    auto sweep = [&](int source, std::vector<int>& parent) {
        std::vector<double> dist(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
        parent.assign(dist.size(), -1);
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
        dist[source] = 0.0;
        queue.push({0.0, source});
        while (!queue.empty()) {
            auto [d, idx] = queue.top();
            queue.pop();
            if (d > dist[idx]) continue;
            const int x = idx % w, y = idx / w;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h || labels.at<int>(ny, nx) != best) continue;
                    const int n = ny * w + nx;
                    const double nd = d + ((dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0);
                    if (nd < dist[n]) {
                        dist[n] = nd;
                        parent[n] = idx;
                        queue.push({nd, n});
                    }
                }
            }
        }
        int far = source;
        for (int p : pixels) {
            if (dist[p] > dist[far]) far = p;
        }
        return far;
    };

    std::vector<int> parent;
    const int a = sweep(pixels.front(), parent);
    const int b = sweep(a, parent);
    std::vector<Point2> path;
    for (int idx = b; idx != -1; idx = parent[idx]) path.push_back({double(idx % w), double(idx / w)});
    return path;
}

double edge_distance(Point2 p, BaseEdge base, int width, int height) {
    switch (base) {
        case BaseEdge::left: return p.x;
        case BaseEdge::right: return width - 1 - p.x;
        case BaseEdge::top: return p.y;
        case BaseEdge::bottom: return height - 1 - p.y;
    }
    return p.x;
}

double dt_at(const cv::Mat& dt, Point2 p) {
    const int x = std::clamp(static_cast<int>(std::lround(p.x)), 0, dt.cols - 1);
    const int y = std::clamp(static_cast<int>(std::lround(p.y)), 0, dt.rows - 1);
    return dt.at<float>(y, x);
}

// Re-seat the end of `path` (its last vertex) at the medial end of the body:
// march from a point one radius inside along the local axis to the mask
// boundary, then step back by the local radius.
void seat_end(std::vector<Point2>& path, const MaskFrame& mask, const cv::Mat& dt) {
    const double total = polyline_length(path);
    std::vector<Point2> reversed(path.rbegin(), path.rend());
    std::vector<double> radii;
    for (std::size_t i = 0; i < reversed.size(); ++i) {
        if (polyline_length({reversed.begin(), reversed.begin() + static_cast<long>(i) + 1}) > 0.25 * total) break;
        radii.push_back(dt_at(dt, reversed[i]));
    }
    std::nth_element(radii.begin(), radii.begin() + static_cast<long>(radii.size() / 2), radii.end());
    const double radius = std::max(0.0, radii[radii.size() / 2] - 0.5);

    const double sa = std::min(1.5 * radius, 0.25 * total);
    const double sb = std::min(3.0 * radius, 0.45 * total);
    if (!(sb > sa)) return;
    const Point2 anchor = point_at(reversed, sa);
    const Point2 back = point_at(reversed, sb);
    Point2 dir = anchor - back;
    const double norm = std::hypot(dir.x, dir.y);
    if (norm <= 0.0) return;
    dir = (1.0 / norm) * dir;

    constexpr double kStep = 0.25;
    double t = 0.0;
    while (true) {
        const Point2 p = anchor + (t + kStep) * dir;
        const int x = static_cast<int>(std::lround(p.x)), y = static_cast<int>(std::lround(p.y));
        if (!mask.inside(x, y) || !mask.at(x, y)) break;
        t += kStep;
        if (t > mask.width + mask.height) break;
    }
    const double reach = t + kStep - radius;
    const std::size_t keep = index_at(reversed, sa);
    std::vector<Point2> out(path.begin(), path.end() - static_cast<long>(keep));
    if (reach > 0.0) {
        out.push_back(anchor);
        out.push_back(anchor + reach * dir);
    } else {
        out.push_back(anchor);
    }
    path = std::move(out);
}

// Distance from p along dir to the first background sample.
double march(const MaskFrame& mask, Point2 p, Point2 dir, double step, double limit) {
    double t = 0.0;
    while (t < limit) {
        const Point2 q = p + (t + step) * dir;
        const int x = static_cast<int>(std::lround(q.x)), y = static_cast<int>(std::lround(q.y));
        if (!mask.inside(x, y) || !mask.at(x, y)) return t + 0.5 * step;
        t += step;
    }
    return limit;
}

// Move each interior point to the middle of its cross-section. Thinning leaves
// even-width bodies half a pixel off their midline.
void recenter(std::vector<Point2>& path, const MaskFrame& mask) {
    const int n = static_cast<int>(path.size());
    const double limit = mask.width + mask.height;
    std::vector<Point2> out = path;
    for (int i = 1; i + 1 < n; ++i) {
        const Point2 a = path[std::max(0, i - 3)];
        const Point2 b = path[std::min(n - 1, i + 3)];
        Point2 tangent = b - a;
        const double len = std::hypot(tangent.x, tangent.y);
        if (len <= 0.0) continue;
        tangent = (1.0 / len) * tangent;
        const Point2 nrm{-tangent.y, tangent.x};
        const double plus = march(mask, path[i], nrm, 0.05, limit);
        const double minus = march(mask, path[i], -1.0 * nrm, 0.05, limit);
        out[i] = path[i] + (0.5 * (plus - minus)) * nrm;
    }
    path = std::move(out);
}

std::vector<Point2> smooth(const std::vector<Point2>& path, int half_window) {
    if (path.size() < 3) return path;
    std::vector<Point2> out = path;
    const int n = static_cast<int>(path.size());
    for (int i = 1; i + 1 < n; ++i) {
        const int k = std::min({half_window, i, n - 1 - i});
        Point2 acc;
        for (int j = i - k; j <= i + k; ++j) acc = acc + path[j];
        out[i] = (1.0 / (2 * k + 1)) * acc;
    }
    return out;
}

}  // namespace

MaskFrame rasterize_rod(const std::vector<Point2>& centerline, double thickness, int width, int height) {
    if (centerline.size() < 2) throw InvalidArgument("rasterize needs at least two points");
    if (!(thickness >= 2.0)) throw InvalidArgument("rasterize thickness must be at least 2 px");
    if (!(polyline_length(centerline) > 0.0)) throw InvalidArgument("rasterize got a zero-length polyline");
    MaskFrame mask(width, height);
    const double r = thickness / 2.0;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    bool outside = false;
    for (const auto& p : centerline) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
        if (p.x < 0 || p.y < 0 || p.x > width - 1 || p.y > height - 1) outside = true;
    }
    if (outside) spdlog::warn("rasterize: centerline leaves the {}x{} frame; mask clipped", width, height);
    const int x0 = std::max(0, static_cast<int>(std::floor(xmin - r)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(xmax + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(ymin - r)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(ymax + r)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const Point2 p{double(x), double(y)};
            for (std::size_t i = 1; i < centerline.size(); ++i) {
                if (point_segment_distance(p, centerline[i - 1], centerline[i]) <= r) {
                    mask.set(x, y);
                    break;
                }
            }
        }
    }
    return mask;
}

std::optional<Frame> extract_centerline(const MaskFrame& mask, std::size_t n_points, BaseEdge base) {
    if (n_points < 2) throw InvalidArgument("centerline needs at least two points");
    if (mask.count() == 0) return std::nullopt;
    const cv::Mat image = to_mat(mask);
    cv::Mat skeleton;
    cv::ximgproc::thinning(image, skeleton, cv::ximgproc::THINNING_ZHANGSUEN);
    auto path = longest_skeleton_path(skeleton);
    if (path.size() < 2 || polyline_length(path) < 3.0) {
        throw DegenerateMask(fmt::format("skeleton is {} px long, need at least 3", polyline_length(path)));
    }
    if (edge_distance(path.back(), base, mask.width, mask.height) <
        edge_distance(path.front(), base, mask.width, mask.height)) {
        std::reverse(path.begin(), path.end());
    }
    path = smooth(path, 2);
    recenter(path, mask);
    path = smooth(path, 4);

    cv::Mat padded;
    cv::copyMakeBorder(image, padded, 1, 1, 1, 1, cv::BORDER_CONSTANT, 0);
    cv::Mat dt_padded;
    cv::distanceTransform(padded, dt_padded, cv::DIST_L2, cv::DIST_MASK_PRECISE);
    const cv::Mat dt = dt_padded(cv::Rect(1, 1, mask.width, mask.height));

    seat_end(path, mask, dt);
    std::reverse(path.begin(), path.end());
    seat_end(path, mask, dt);
    std::reverse(path.begin(), path.end());
    if (!(polyline_length(path) > 0.0)) throw DegenerateMask("centerline collapsed to a point");
    return resample_polyline(path, n_points);
}

std::optional<Point2> track_marker(const ColorFrame& frame, const HsvRange& range, const Roi& roi) {
    if (roi.width <= 0 || roi.height <= 0 || roi.x < 0 || roi.y < 0 || roi.x + roi.width > frame.width ||
        roi.y + roi.height > frame.height) {
        throw InvalidArgument("marker roi must lie within the frame");
    }
    cv::Mat binary(roi.height, roi.width, CV_8U);
    for (int y = 0; y < roi.height; ++y) {
        for (int x = 0; x < roi.width; ++x) {
            binary.at<std::uint8_t>(y, x) = range.contains(rgb_to_hsv(frame.at(roi.x + x, roi.y + y))) ? 255 : 0;
        }
    }
    cv::Mat labels, stats, centroids;
    const int count = cv::connectedComponentsWithStats(binary, labels, stats, centroids, 8, CV_32S);
    if (count <= 1) return std::nullopt;
    int best = 1;
    for (int l = 2; l < count; ++l) {
        if (stats.at<int>(l, cv::CC_STAT_AREA) > stats.at<int>(best, cv::CC_STAT_AREA)) best = l;
    }
    return Point2{centroids.at<double>(best, 0) + roi.x, centroids.at<double>(best, 1) + roi.y};
}

std::vector<Frame> interpolate_missing(const std::vector<std::optional<Frame>>& frames) {
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i]) valid.push_back(i);
    }
    if (valid.empty()) throw UnrecoverablePerception("every frame is missing");
    const std::size_t n = frames[valid.front()]->size();
    for (std::size_t i : valid) {
        if (frames[i]->size() != n) throw InvalidArgument("frames differ in point count");
    }
    std::vector<Frame> out(frames.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i]) {
            out[i] = *frames[i];
            continue;
        }
        while (k + 1 < valid.size() && valid[k + 1] < i) ++k;
        if (i < valid.front()) {
            out[i] = *frames[valid.front()];
        } else if (i > valid.back()) {
            out[i] = *frames[valid.back()];
        } else {
            const std::size_t lo = valid[k], hi = valid[k + 1];
            const double w = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
            Frame f(n);
            for (std::size_t p = 0; p < n; ++p) f[p] = (1.0 - w) * (*frames[lo])[p] + w * (*frames[hi])[p];
            out[i] = std::move(f);
        }
    }
    return out;
}

std::vector<MaskFrame> render_masks(const Trajectory& traj, double thickness, int width, int height) {
    std::vector<MaskFrame> masks;
    masks.reserve(traj.frame_count());
    for (const auto& f : traj.frames) masks.push_back(rasterize_rod(f, thickness, width, height));
    return masks;
}

Trajectory centerlines_from_masks(const std::vector<MaskFrame>& masks, double fps, std::size_t n_points,
                                  BaseEdge base) {
    std::vector<std::optional<Frame>> raw;
    raw.reserve(masks.size());
    std::size_t missing = 0;
    for (const auto& m : masks) {
        try {
            raw.push_back(extract_centerline(m, n_points, base));
        } catch (const DegenerateMask&) {
            raw.push_back(std::nullopt);
        }
        if (!raw.back()) ++missing;
    }
    if (missing > 0) spdlog::warn("perception: {} of {} frames missing, interpolated", missing, masks.size());
    Trajectory traj;
    traj.fps = fps;
    traj.frames = interpolate_missing(raw);
    return traj;
}

void write_pgm(const MaskFrame& mask, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), to_mat(mask))) throw ConfigError("cannot write " + path.string());
}

MaskFrame read_pgm(const std::filesystem::path& path) {
    const cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw ConfigError("cannot read mask " + path.string());
    MaskFrame mask(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) mask.set(x, y, m.at<std::uint8_t>(y, x) >= 128);
    }
    return mask;
}

void write_mask_sequence(const MaskSequence& seq, const std::filesystem::path& dir) {
    if (seq.frames.empty()) throw InvalidArgument("mask sequence is empty");
    std::filesystem::create_directories(dir);
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const auto name = fmt::format("frame_{:05d}.pgm", i);
        write_pgm(seq.frames[i], dir / name);
        files.push_back(name);
    }
    const nlohmann::json index = {{"fps", seq.fps},
                                  {"width", seq.frames.front().width},
                                  {"height", seq.frames.front().height},
                                  {"frames", files}};
    write_file_atomic(dir / "index.json", index.dump(2) + "\n");
}

MaskSequence read_mask_sequence(const std::filesystem::path& dir) {
    const auto index = read_json_file(dir / "index.json");
    MaskSequence seq;
    seq.fps = index.at("fps").get<double>();
    const int w = index.at("width").get<int>();
    const int h = index.at("height").get<int>();
    for (const auto& name : index.at("frames")) {
        auto mask = read_pgm(dir / name.get<std::string>());
        if (mask.width != w || mask.height != h) {
            throw ConfigError(fmt::format("{} is {}x{}, index says {}x{}", name.get<std::string>(), mask.width,
                                          mask.height, w, h));
        }
        seq.frames.push_back(std::move(mask));
    }
    return seq;
}

}  // namespace sysid
