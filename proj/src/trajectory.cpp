#include "sysid/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "sysid/errors.hpp"
#include "sysid/io.hpp"

namespace sysid {

double distance(Point2 a, Point2 b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

std::string_view to_string(CoordinateSpace space) {
    return space == CoordinateSpace::pixels ? "pixels" : "millimeters";
}

CoordinateSpace parse_coordinate_space(std::string_view text) {
    if (text == "pixels" || text == "px") return CoordinateSpace::pixels;
    if (text == "millimeters" || text == "mm") return CoordinateSpace::millimeters;
    throw InvalidArgument("unknown coordinate space '" + std::string(text) + "'");
}

void validate(const Trajectory& traj) {
    if (!(traj.fps > 0.0) || !std::isfinite(traj.fps)) throw InvalidArgument("trajectory fps must be positive");
    const std::size_t n = traj.point_count();
    for (std::size_t f = 0; f < traj.frames.size(); ++f) {
        if (traj.frames[f].size() != n) {
            throw InvalidArgument(fmt::format("trajectory frame {} has {} points, expected {}", f,
                                              traj.frames[f].size(), n));
        }
        for (const auto& p : traj.frames[f]) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                throw InvalidArgument(fmt::format("trajectory frame {} has a non-finite point", f));
            }
        }
    }
}

std::string to_csv(const Trajectory& traj) {
    std::string out = "frame,point,x,y\n";
    for (std::size_t f = 0; f < traj.frames.size(); ++f) {
        for (std::size_t i = 0; i < traj.frames[f].size(); ++i) {
            const auto& p = traj.frames[f][i];
            out += fmt::format("{},{},{:.17g},{:.17g}\n", f, i, p.x, p.y);
        }
    }
    return out;
}

Trajectory from_csv(std::string_view text, double fps, CoordinateSpace space) {
    std::map<std::size_t, std::map<std::size_t, Point2>> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "frame,point,x,y") throw ConfigError("trajectory CSV header must be 'frame,point,x,y'");
            continue;
        }
        std::istringstream fields(line);
        std::string a, b, c, d;
        if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') || !std::getline(fields, c, ',') ||
            !std::getline(fields, d)) {
            throw ConfigError(fmt::format("trajectory CSV line {}: expected 4 fields", line_no));
        }
        try {
            rows[std::stoul(a)][std::stoul(b)] = {std::stod(c), std::stod(d)};
        } catch (const std::logic_error&) {
            throw ConfigError(fmt::format("trajectory CSV line {}: malformed number", line_no));
        }
    }
    Trajectory traj;
    traj.fps = fps;
    traj.space = space;
    std::size_t expected_frame = 0;
    for (auto& [frame, points] : rows) {
        if (frame != expected_frame++) throw ConfigError(fmt::format("trajectory CSV is missing frame {}", frame - 1));
        Frame pts;
        std::size_t expected_point = 0;
        for (auto& [idx, p] : points) {
            if (idx != expected_point++) throw ConfigError(fmt::format("trajectory CSV frame {} skips a point", frame));
            pts.push_back(p);
        }
        traj.frames.push_back(std::move(pts));
    }
    validate(traj);
    return traj;
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& stem) {
    validate(traj);
    auto csv = stem;
    csv += ".csv";
    auto sidecar = stem;
    sidecar += ".json";
    nlohmann::json meta = {{"fps", traj.fps},
                           {"coordinate_space", std::string(to_string(traj.space))},
                           {"frames", traj.frame_count()},
                           {"points", traj.point_count()},
                           {"metadata", traj.metadata}};
    write_file_atomic(csv, to_csv(traj));
    write_file_atomic(sidecar, meta.dump(2) + "\n");
}

Trajectory read_trajectory(const std::filesystem::path& stem, double default_fps) {
    auto csv = stem;
    auto sidecar = stem;
    if (stem.extension() == ".csv") {
        sidecar.replace_extension(".json");
    } else {
        csv += ".csv";
        sidecar += ".json";
    }
    double fps = default_fps;
    CoordinateSpace space = CoordinateSpace::pixels;
    nlohmann::json metadata = nlohmann::json::object();
    if (std::filesystem::exists(sidecar)) {
        const auto meta = read_json_file(sidecar);
        fps = meta.at("fps").get<double>();
        space = parse_coordinate_space(meta.value("coordinate_space", std::string("pixels")));
        metadata = meta.value("metadata", nlohmann::json::object());
    } else if (!(default_fps > 0.0)) {
        throw ConfigError("trajectory sidecar " + sidecar.string() + " not found and no fps given");
    }
    auto traj = from_csv(read_text_file(csv), fps, space);
    traj.metadata = std::move(metadata);
    return traj;
}

}  // namespace sysid
