#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "sysid/param_space.hpp"
#include "sysid/platform.hpp"

namespace sysid {

/// One actuated channel: u(t) = amplitude * sin(2*pi*frequency*t + phase).
/// Amplitude is in channel units (degrees for the finger, radians for the tentacle).
struct ControlChannel {
    double amplitude = 0.0;
    double frequency_hz = 1.0;
    double phase_rad = 0.0;

    friend bool operator==(const ControlChannel&, const ControlChannel&) = default;
};

struct ControlProfile {
    Rig rig = Rig::finger;
    std::vector<ControlChannel> channels;

    friend bool operator==(const ControlProfile&, const ControlProfile&) = default;
};

/// Amplitude bounds per channel plus the fixed training frequency and phase.
struct ControlBounds {
    Rig rig = Rig::finger;
    /// Control entries of the platform bounds table, one per channel, channel order.
    ParameterBounds amplitude;
    std::vector<double> training_frequency_hz;
    std::vector<double> training_phase_rad;

    std::size_t channel_count() const noexcept { return amplitude.size(); }
};

/// Control bounds from the `control` entries of a platform table.
ControlBounds make_control_bounds(Rig rig, const ParameterBounds& table);

/// Training profile at the table's nominal amplitudes.
ControlProfile training_profile(const ControlBounds& bounds);

double evaluate(const ControlProfile& profile, std::size_t channel, double t);
/// First and second time derivatives of evaluate().
double evaluate_rate(const ControlProfile& profile, std::size_t channel, double t);
double evaluate_acceleration(const ControlProfile& profile, std::size_t channel, double t);

/// H1..H4 for the rig, a 2x2 factorial over the corners of the control space.
std::array<ControlProfile, 4> holdout_suite(Rig rig);

/// Amplitudes projected into bounds; frequency and phase reset to the training values.
ControlProfile clamp_control(const ControlProfile& proposed, const ControlBounds& bounds);

/// Amplitudes as a named vector laid out like bounds.amplitude.
ParameterVector control_as_params(const ControlProfile& profile, const ControlBounds& bounds);
/// Copy of `profile` with amplitudes taken from matching names in `values`.
ControlProfile with_amplitudes(const ControlProfile& profile, const ControlBounds& bounds,
                               const ParameterVector& values);

/// Throws InvalidArgument when a frequency is not strictly positive or a value is non-finite.
void validate(const ControlProfile& profile);

/// Stable text key used to look up recordings by profile.
std::string profile_key(const ControlProfile& profile);

nlohmann::json to_json(const ControlProfile& profile);
ControlProfile control_from_json(const nlohmann::json& j);

}  // namespace sysid
