#include "sysid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "sysid/errors.hpp"
#include "sysid/perception.hpp"

namespace sysid {

namespace {

std::vector<double> signal_of(const Trajectory& traj, AlignmentSignal which) {
    std::vector<double> out;
    out.reserve(traj.frame_count());
    for (const auto& f : traj.frames) {
        double acc = 0.0;
        for (const auto& p : f) acc += which == AlignmentSignal::mean_y ? p.y : p.x;
        out.push_back(acc / static_cast<double>(f.size()));
    }
    return out;
}

// Pearson correlation of sim[t + lag] against real[t] over the overlap; nullopt
// when either side has zero variance.
std::optional<double> ncc(const std::vector<double>& sim, const std::vector<double>& real, int lag) {
    const long t0 = std::max<long>(0, -lag);
    const long t1 = std::min<long>(static_cast<long>(real.size()), static_cast<long>(sim.size()) - lag);
    const long n = t1 - t0;
    if (n < 2) return std::nullopt;
    double ms = 0.0, mr = 0.0;
    for (long t = t0; t < t1; ++t) {
        ms += sim[t + lag];
        mr += real[t];
    }
    ms /= n;
    mr /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (long t = t0; t < t1; ++t) {
        const double a = sim[t + lag] - ms;
        const double b = real[t] - mr;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx <= 1e-12 * n || syy <= 1e-12 * n) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

void check_comparable(const Trajectory& a, const Trajectory& b) {
    if (a.frames.empty() || b.frames.empty()) throw InvalidArgument("cannot compare an empty trajectory");
    if (std::abs(a.fps - b.fps) > 1e-9 * std::max(a.fps, b.fps)) {
        throw InvalidArgument(fmt::format("fps mismatch: {} vs {}", a.fps, b.fps));
    }
    if (a.point_count() != b.point_count()) {
        throw InvalidArgument(fmt::format("point count mismatch: {} vs {}", a.point_count(), b.point_count()));
    }
}

double mean_distance(const AlignedPair& pair) {
    if (pair.sim.frame_count() != pair.real.frame_count()) throw InvalidArgument("aligned pair has unequal lengths");
    if (pair.sim.frames.empty()) throw InvalidArgument("aligned pair is empty");
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < pair.sim.frames.size(); ++t) {
        const auto& s = pair.sim.frames[t];
        const auto& r = pair.real.frames[t];
        if (s.size() != r.size() || s.empty()) throw InvalidArgument("aligned frames differ in point count");
        for (std::size_t i = 0; i < s.size(); ++i) total += distance(s[i], r[i]);
        count += s.size();
    }
    return total / static_cast<double>(count);
}

}  // namespace

AlignedPair align(const Trajectory& sim, const Trajectory& real, const AlignOptions& options) {
    check_comparable(sim, real);
    const auto window = static_cast<int>(std::floor(options.max_lag_s * real.fps + 1e-9));
    const auto min_overlap = static_cast<long>(std::ceil(options.min_overlap_s * real.fps - 1e-9));
    const auto s = signal_of(sim, options.signal);
    const auto r = signal_of(real, options.signal);

    AlignedPair pair;
    std::optional<double> best;
    int best_lag = 0;
    // Visit lags by increasing |k| so that strict improvement keeps the smallest on ties.
    for (int mag = 0; mag <= window; ++mag) {
        for (int lag : {mag, -mag}) {
            if (mag == 0 && lag < 0) continue;
            const long overlap = std::min<long>(static_cast<long>(r.size()), static_cast<long>(s.size()) - lag) -
                                 std::max<long>(0, -lag);
            if (overlap < min_overlap) continue;
            const auto c = ncc(s, r, lag);
            if (c && (!best || *c > *best)) {
                best = c;
                best_lag = lag;
            }
        }
    }
    pair.flat_signal = !best;
    pair.lag_frames = best ? best_lag : 0;
    pair.lag_clamped = best && window > 0 && std::abs(best_lag) == window;

    const long t0 = std::max(0, -pair.lag_frames);
    const long t1 = std::min<long>(static_cast<long>(r.size()), static_cast<long>(s.size()) - pair.lag_frames);
    if (t1 - t0 < min_overlap || t1 <= t0) {
        throw InsufficientOverlap(fmt::format("aligned overlap is {} frames, need {}", std::max(0L, t1 - t0),
                                              min_overlap));
    }
    pair.sim.fps = sim.fps;
    pair.sim.space = sim.space;
    pair.sim.metadata = sim.metadata;
    pair.real.fps = real.fps;
    pair.real.space = real.space;
    pair.real.metadata = real.metadata;
    for (long t = t0; t < t1; ++t) {
        pair.sim.frames.push_back(sim.frames[static_cast<std::size_t>(t + pair.lag_frames)]);
        pair.real.frames.push_back(real.frames[static_cast<std::size_t>(t)]);
    }
    return pair;
}

AlignedPair trim_transient(const AlignedPair& pair, double skip_s) {
    if (!(skip_s >= 0.0)) throw InvalidArgument("transient skip must be non-negative");
    const auto skip = static_cast<std::size_t>(std::lround(skip_s * pair.real.fps));
    if (skip == 0) return pair;
    if (pair.overlap() <= skip) {
        throw InsufficientOverlap(fmt::format("overlap of {} frames does not exceed the {} frame transient",
                                              pair.overlap(), skip));
    }
    AlignedPair out = pair;
    out.sim.frames.erase(out.sim.frames.begin(), out.sim.frames.begin() + static_cast<long>(skip));
    out.real.frames.erase(out.real.frames.begin(), out.real.frames.begin() + static_cast<long>(skip));
    return out;
}

double mae_centerline(const AlignedPair& pair) { return mean_distance(pair); }

double mae_tip(const AlignedPair& pair) {
    if (pair.sim.point_count() != 1 || pair.real.point_count() != 1) {
        throw MetricMismatch(fmt::format("tip MAE needs one point per frame, got {}", pair.sim.point_count()));
    }
    return mean_distance(pair);
}

double arc_length(const Frame& frame) {
    double total = 0.0;
    for (std::size_t i = 1; i < frame.size(); ++i) total += distance(frame[i - 1], frame[i]);
    return total;
}

std::optional<Frame> arclength_normalize(const Frame& frame, double target_length) {
    if (frame.size() < 2) throw InvalidArgument("arc-length normalization needs at least two points");
    if (!(target_length > 0.0)) throw InvalidArgument("target arc length must be positive");
    const double len = arc_length(frame);
    if (!(len > 0.0) || !std::isfinite(len)) return std::nullopt;
    const double scale = target_length / len;
    Frame out;
    out.reserve(frame.size());
    const Point2 base = frame.front();
    for (const auto& p : frame) out.push_back(base + scale * (p - base));
    return out;
}

Trajectory arclength_normalize(const Trajectory& traj, double target_length) {
    std::vector<std::optional<Frame>> frames;
    frames.reserve(traj.frame_count());
    for (const auto& f : traj.frames) frames.push_back(arclength_normalize(f, target_length));
    Trajectory out = traj;
    out.frames = interpolate_missing(frames);
    return out;
}

double median_arc_length(const Trajectory& traj) {
    if (traj.frames.empty()) throw InvalidArgument("median arc length of an empty trajectory");
    std::vector<double> lengths;
    lengths.reserve(traj.frame_count());
    for (const auto& f : traj.frames) lengths.push_back(arc_length(f));
    std::sort(lengths.begin(), lengths.end());
    const std::size_t n = lengths.size();
    return n % 2 ? lengths[n / 2] : 0.5 * (lengths[n / 2 - 1] + lengths[n / 2]);
}

nlohmann::json to_json(const MetricsReport& report) {
    return {{"lag_frames", report.lag_frames},
            {"mae", report.mae},
            {"T", report.frames},
            {"N", report.points},
            {"flags", report.flags}};
}

MetricsReport compare(const Trajectory& sim, const Trajectory& real, const CompareOptions& options) {
    const Trajectory* s = &sim;
    const Trajectory* r = &real;
    Trajectory sim_n, real_n;
    MetricsReport report;
    if (options.normalize_arclength && real.point_count() >= 2) {
        const double target = median_arc_length(real);
        sim_n = arclength_normalize(sim, target);
        real_n = arclength_normalize(real, target);
        s = &sim_n;
        r = &real_n;
        report.flags.emplace_back("arclength_normalized");
    }
    const auto pair = trim_transient(align(*s, *r, options.align), options.skip_s);
    report.lag_frames = pair.lag_frames;
    report.frames = pair.overlap();
    report.points = pair.sim.point_count();
    report.mae = report.points == 1 ? mae_tip(pair) : mae_centerline(pair);
    if (pair.lag_clamped) report.flags.emplace_back("lag_clamped");
    if (pair.flat_signal) report.flags.emplace_back("flat_signal");
    return report;
}

}  // namespace sysid
