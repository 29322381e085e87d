#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sysid {

enum class ParamKind { physics, environment, control };

std::string_view to_string(ParamKind kind);
ParamKind parse_param_kind(std::string_view text);

class ParameterVector;

struct BoundEntry {
    std::string name;
    double min = 0.0;
    double max = 1.0;
    double nominal = 0.0;
    std::string unit;
    ParamKind kind = ParamKind::physics;
    std::string description;
};

/// Ordered, named box bounds. The entry order defines the vector layout every
/// optimizer indexes by. Endpoints are inclusive.
class ParameterBounds {
public:
    ParameterBounds() = default;
    /// Throws InvalidArgument unless every min < max and names are unique.
    explicit ParameterBounds(std::vector<BoundEntry> entries);

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<BoundEntry>& entries() const noexcept { return entries_; }
    const BoundEntry& operator[](std::size_t i) const { return entries_.at(i); }
    std::optional<std::size_t> index_of(std::string_view name) const;
    const BoundEntry& entry(std::string_view name) const;
    std::vector<std::string> names() const;

    /// Entries whose kind is listed, in original order.
    ParameterBounds subset(std::initializer_list<ParamKind> kinds) const;

    ParameterVector nominal() const;

private:
    std::vector<BoundEntry> entries_;
};

/// Named real values laid out like a ParameterBounds.
class ParameterVector {
public:
    ParameterVector() = default;
    ParameterVector(std::vector<std::string> names, std::vector<double> values);

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    double operator[](std::size_t i) const { return values_.at(i); }
    double& operator[](std::size_t i) { return values_.at(i); }

    bool contains(std::string_view name) const;
    double at(std::string_view name) const;
    void set(std::string_view name, double value);

    bool same_layout(const ParameterBounds& bounds) const;
    bool same_layout(const ParameterVector& other) const { return names_ == other.names_; }

    /// Values of `other` overwrite matching names; names not present here are appended.
    ParameterVector merged_with(const ParameterVector& other) const;

    friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

private:
    std::vector<std::string> names_;
    std::vector<double> values_;
};

/// Project every coordinate onto [min, max]. Throws StructuralError on layout mismatch.
ParameterVector clamp(const ParameterVector& params, const ParameterBounds& bounds);

bool within_bounds(const ParameterVector& params, const ParameterBounds& bounds);

/// The values of `params` reordered into the layout of `bounds`. Extra names are
/// dropped; a missing name is a StructuralError.
ParameterVector reorder(const ParameterVector& params, const ParameterBounds& bounds);

ParameterVector sample_uniform(const ParameterBounds& bounds, std::uint64_t seed);
ParameterVector sample_uniform(const ParameterBounds& bounds, std::mt19937_64& rng);

struct NormalizedVector {
    std::vector<double> unit;
    bool was_clamped = false;
};

/// (v - min) / (max - min) per coordinate. Out-of-bounds input is clamped first and flagged.
NormalizedVector normalize(const ParameterVector& params, const ParameterBounds& bounds);

/// Linear inverse of normalize. Values outside [0, 1] map outside the box; no clamping.
ParameterVector denormalize(std::span<const double> unit, const ParameterBounds& bounds);

struct RelativeErrorReport {
    std::vector<std::string> names;
    /// |(est - gt) / gt| * 100; empty where gt == 0.
    std::vector<std::optional<double>> percent;
    /// Mean over defined entries; NaN when none are defined.
    double mean_percent = 0.0;
    std::size_t excluded = 0;
};

RelativeErrorReport relative_error(const ParameterVector& estimate, const ParameterVector& ground_truth);

/// Euclidean norm of normalize(estimate) - normalize(ground_truth).
double normalized_distance(const ParameterVector& estimate, const ParameterVector& ground_truth,
                           const ParameterBounds& bounds);

struct BoundsSection {
    std::string platform;
    ParameterBounds bounds;
};

/// Parse the whitespace-table bounds format:
///
///     [finger]
///     # name  min  max  nominal  unit  kind  description...
///     damping 10   200  100      Ns/m  physics Velocity-dependent viscous damping
std::vector<BoundsSection> parse_bounds(std::string_view text);
std::vector<BoundsSection> load_bounds_file(const std::filesystem::path& path);
/// Section named `platform`, or the only section when `platform` is empty.
ParameterBounds load_bounds(const std::filesystem::path& path, std::string_view platform = {});

}  // namespace sysid
