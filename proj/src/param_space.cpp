#include "sysid/param_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "sysid/errors.hpp"

namespace sysid {

std::string_view to_string(ParamKind kind) {
    switch (kind) {
        case ParamKind::physics: return "physics";
        case ParamKind::environment: return "environment";
        case ParamKind::control: return "control";
    }
    return "physics";
}

ParamKind parse_param_kind(std::string_view text) {
    if (text == "physics") return ParamKind::physics;
    if (text == "environment") return ParamKind::environment;
    if (text == "control") return ParamKind::control;
    throw InvalidArgument("unknown parameter kind '" + std::string(text) + "'");
}

ParameterBounds::ParameterBounds(std::vector<BoundEntry> entries) : entries_(std::move(entries)) {
    std::set<std::string> seen;
    for (const auto& e : entries_) {
        if (!(e.min < e.max)) {
            throw InvalidArgument("bound '" + e.name + "' requires min < max");
        }
        if (!seen.insert(e.name).second) {
            throw InvalidArgument("duplicate bound name '" + e.name + "'");
        }
    }
}

std::optional<std::size_t> ParameterBounds::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) return i;
    }
    return std::nullopt;
}

const BoundEntry& ParameterBounds::entry(std::string_view name) const {
    auto idx = index_of(name);
    if (!idx) throw StructuralError("no bound named '" + std::string(name) + "'");
    return entries_[*idx];
}

std::vector<std::string> ParameterBounds::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

ParameterBounds ParameterBounds::subset(std::initializer_list<ParamKind> kinds) const {
    std::vector<BoundEntry> kept;
    for (const auto& e : entries_) {
        if (std::find(kinds.begin(), kinds.end(), e.kind) != kinds.end()) kept.push_back(e);
    }
    return ParameterBounds(std::move(kept));
}

ParameterVector ParameterBounds::nominal() const {
    std::vector<double> values;
    values.reserve(entries_.size());
    for (const auto& e : entries_) values.push_back(e.nominal);
    return ParameterVector(names(), std::move(values));
}

ParameterVector::ParameterVector(std::vector<std::string> names, std::vector<double> values)
    : names_(std::move(names)), values_(std::move(values)) {
    if (names_.size() != values_.size()) {
        throw StructuralError("parameter names and values differ in length");
    }
}

bool ParameterVector::contains(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

double ParameterVector::at(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw StructuralError("no parameter named '" + std::string(name) + "'");
    return values_[static_cast<std::size_t>(it - names_.begin())];
}

void ParameterVector::set(std::string_view name, double value) {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw StructuralError("no parameter named '" + std::string(name) + "'");
    values_[static_cast<std::size_t>(it - names_.begin())] = value;
}

bool ParameterVector::same_layout(const ParameterBounds& bounds) const {
    if (bounds.size() != names_.size()) return false;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (bounds[i].name != names_[i]) return false;
    }
    return true;
}

ParameterVector ParameterVector::merged_with(const ParameterVector& other) const {
    ParameterVector out = *this;
    for (std::size_t i = 0; i < other.size(); ++i) {
        if (out.contains(other.name(i))) {
            out.set(other.name(i), other[i]);
        } else {
            out.names_.push_back(other.name(i));
            out.values_.push_back(other[i]);
        }
    }
    return out;
}

namespace {

void require_layout(const ParameterVector& params, const ParameterBounds& bounds) {
    if (!params.same_layout(bounds)) {
        throw StructuralError("parameter vector layout does not match its bounds");
    }
}

}  // namespace

ParameterVector clamp(const ParameterVector& params, const ParameterBounds& bounds) {
    require_layout(params, bounds);
    ParameterVector out = params;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = out[i];
        if (std::isnan(v)) v = bounds[i].min;
        out[i] = std::clamp(v, bounds[i].min, bounds[i].max);
    }
    return out;
}

ParameterVector reorder(const ParameterVector& params, const ParameterBounds& bounds) {
    std::vector<double> values;
    values.reserve(bounds.size());
    for (const auto& e : bounds.entries()) {
        if (!params.contains(e.name)) throw StructuralError("parameter '" + e.name + "' missing");
        values.push_back(params.at(e.name));
    }
    return ParameterVector(bounds.names(), std::move(values));
}

bool within_bounds(const ParameterVector& params, const ParameterBounds& bounds) {
    if (!params.same_layout(bounds)) return false;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!(params[i] >= bounds[i].min && params[i] <= bounds[i].max)) return false;
    }
    return true;
}

ParameterVector sample_uniform(const ParameterBounds& bounds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_uniform(bounds, rng);
}

ParameterVector sample_uniform(const ParameterBounds& bounds, std::mt19937_64& rng) {
    std::vector<double> values;
    values.reserve(bounds.size());
    for (const auto& e : bounds.entries()) {
        std::uniform_real_distribution<double> dist(e.min, e.max);
        values.push_back(std::clamp(dist(rng), e.min, e.max));
    }
    return ParameterVector(bounds.names(), std::move(values));
}

NormalizedVector normalize(const ParameterVector& params, const ParameterBounds& bounds) {
    require_layout(params, bounds);
    NormalizedVector out;
    out.unit.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = bounds[i];
        double v = params[i];
        if (!(v >= e.min && v <= e.max)) {
            out.was_clamped = true;
            v = std::isnan(v) ? e.min : std::clamp(v, e.min, e.max);
        }
        out.unit.push_back((v - e.min) / (e.max - e.min));
    }
    return out;
}

ParameterVector denormalize(std::span<const double> unit, const ParameterBounds& bounds) {
    if (unit.size() != bounds.size()) {
        throw StructuralError("normalized vector length does not match bounds");
    }
    std::vector<double> values;
    values.reserve(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) {
        const auto& e = bounds[i];
        values.push_back(e.min + unit[i] * (e.max - e.min));
    }
    return ParameterVector(bounds.names(), std::move(values));
}

RelativeErrorReport relative_error(const ParameterVector& estimate, const ParameterVector& ground_truth) {
    if (!estimate.same_layout(ground_truth)) {
        throw StructuralError("estimate and ground truth have different layouts");
    }
    RelativeErrorReport report;
    report.names = estimate.names();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        const double gt = ground_truth[i];
        if (gt == 0.0) {
            spdlog::warn("relative error undefined for '{}' (ground truth is zero); excluded from mean",
                         estimate.name(i));
            report.percent.emplace_back(std::nullopt);
            ++report.excluded;
            continue;
        }
        const double pct = std::abs((estimate[i] - gt) / gt) * 100.0;
        report.percent.emplace_back(pct);
        sum += pct;
        ++count;
    }
    report.mean_percent = count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
    return report;
}

double normalized_distance(const ParameterVector& estimate, const ParameterVector& ground_truth,
                           const ParameterBounds& bounds) {
    const auto a = normalize(estimate, bounds);
    const auto b = normalize(ground_truth, bounds);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.unit.size(); ++i) {
        const double d = a.unit[i] - b.unit[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

std::vector<BoundsSection> parse_bounds(std::string_view text) {
    std::vector<BoundsSection> sections;
    std::vector<BoundEntry> current;
    std::string current_name;
    bool open = false;

    auto flush = [&] {
        if (open) sections.push_back({current_name, ParameterBounds(std::move(current))});
        current.clear();
    };

    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        line = line.substr(first);
        if (line.front() == '[') {
            const auto close = line.find(']');
            if (close == std::string::npos) {
                throw ConfigError("bounds line " + std::to_string(line_no) + ": unterminated section header");
            }
            flush();
            current_name = line.substr(1, close - 1);
            open = true;
            continue;
        }
        if (!open) {
            throw ConfigError("bounds line " + std::to_string(line_no) + ": entry before any [section]");
        }
        std::istringstream fields(line);
        BoundEntry e;
        std::string kind;
        if (!(fields >> e.name >> e.min >> e.max >> e.nominal >> e.unit >> kind)) {
            throw ConfigError("bounds line " + std::to_string(line_no) +
                              ": expected 'name min max nominal unit kind [description]'");
        }
        e.kind = parse_param_kind(kind);
        std::getline(fields >> std::ws, e.description);
        if (!e.description.empty() && e.description.back() == '\r') e.description.pop_back();
        current.push_back(std::move(e));
    }
    flush();
    return sections;
}

std::vector<BoundsSection> load_bounds_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open bounds file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_bounds(buffer.str());
}

ParameterBounds load_bounds(const std::filesystem::path& path, std::string_view platform) {
    auto sections = load_bounds_file(path);
    if (platform.empty()) {
        if (sections.size() != 1) {
            throw ConfigError(path.string() + " has " + std::to_string(sections.size()) +
                              " sections; name the platform");
        }
        return sections.front().bounds;
    }
    for (auto& s : sections) {
        if (s.platform == platform) return s.bounds;
    }
    throw ConfigError(path.string() + " has no section [" + std::string(platform) + "]");
}

}  // namespace sysid
