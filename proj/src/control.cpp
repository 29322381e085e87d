#include "sysid/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sysid/errors.hpp"

namespace sysid {

std::string_view to_string(Rig rig) {
    return rig == Rig::finger ? "finger" : "tentacle";
}

std::string_view to_string(Platform platform) {
    switch (platform) {
        case Platform::finger: return "finger";
        case Platform::tentacle_air: return "tentacle_air";
        case Platform::tentacle_water: return "tentacle_water";
    }
    return "finger";
}

Platform parse_platform(std::string_view text) {
    if (text == "finger") return Platform::finger;
    if (text == "tentacle" || text == "tentacle_air") return Platform::tentacle_air;
    if (text == "tentacle_water") return Platform::tentacle_water;
    throw InvalidArgument("unknown platform '" + std::string(text) + "'");
}

Rig rig_of(Platform platform) {
    return platform == Platform::finger ? Rig::finger : Rig::tentacle;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDeg = std::numbers::pi / 180.0;

// Finger channels run at fixed f0 / f1; the tentacle trains at 0.15 Hz.
constexpr double kFingerF0 = 0.30;
constexpr double kFingerF1 = 0.35;
constexpr double kFingerHoldoutPhase1 = 45.0 * kDeg;
constexpr double kTentacleTrainHz = 0.15;

const ControlChannel& channel_at(const ControlProfile& profile, std::size_t channel) {
    if (channel >= profile.channels.size()) {
        throw InvalidArgument(fmt::format("control channel {} out of range ({} channels)", channel,
                                          profile.channels.size()));
    }
    return profile.channels[channel];
}

void require_time(double t) {
    if (!(t >= 0.0)) throw InvalidArgument("control evaluated at negative time");
}

}  // namespace

ControlBounds make_control_bounds(Rig rig, const ParameterBounds& table) {
    ControlBounds b;
    b.rig = rig;
    b.amplitude = table.subset({ParamKind::control});
    if (rig == Rig::finger) {
        if (b.amplitude.size() != 2) throw ConfigError("finger table needs two control amplitudes");
        b.training_frequency_hz = {kFingerF0, kFingerF1};
        b.training_phase_rad = {0.0, 0.0};
    } else {
        if (b.amplitude.size() != 1) throw ConfigError("tentacle table needs one control amplitude");
        b.training_frequency_hz = {kTentacleTrainHz};
        b.training_phase_rad = {0.0};
    }
    return b;
}

ControlProfile training_profile(const ControlBounds& bounds) {
    ControlProfile p;
    p.rig = bounds.rig;
    for (std::size_t c = 0; c < bounds.channel_count(); ++c) {
        p.channels.push_back({bounds.amplitude[c].nominal, bounds.training_frequency_hz[c],
                              bounds.training_phase_rad[c]});
    }
    return p;
}

double evaluate(const ControlProfile& profile, std::size_t channel, double t) {
    const auto& ch = channel_at(profile, channel);
    require_time(t);
    return ch.amplitude * std::sin(kTwoPi * ch.frequency_hz * t + ch.phase_rad);
}

double evaluate_rate(const ControlProfile& profile, std::size_t channel, double t) {
    const auto& ch = channel_at(profile, channel);
    require_time(t);
    const double w = kTwoPi * ch.frequency_hz;
    return ch.amplitude * w * std::cos(w * t + ch.phase_rad);
}

double evaluate_acceleration(const ControlProfile& profile, std::size_t channel, double t) {
    const auto& ch = channel_at(profile, channel);
    require_time(t);
    const double w = kTwoPi * ch.frequency_hz;
    return -ch.amplitude * w * w * std::sin(w * t + ch.phase_rad);
}

std::array<ControlProfile, 4> holdout_suite(Rig rig) {
    std::array<ControlProfile, 4> suite;
    if (rig == Rig::finger) {
        constexpr std::array<std::array<double, 2>, 4> amps{{{50, 50}, {50, 8}, {8, 50}, {8, 8}}};
        for (std::size_t h = 0; h < 4; ++h) {
            suite[h].rig = Rig::finger;
            suite[h].channels = {{amps[h][0], kFingerF0, 0.0}, {amps[h][1], kFingerF1, kFingerHoldoutPhase1}};
        }
    } else {
        constexpr std::array<std::array<double, 2>, 4> af{{{0.9, 0.5}, {0.9, 0.15}, {0.3, 0.5}, {0.3, 0.15}}};
        for (std::size_t h = 0; h < 4; ++h) {
            suite[h].rig = Rig::tentacle;
            suite[h].channels = {{af[h][0], af[h][1], 0.0}};
        }
    }
    return suite;
}

ControlProfile clamp_control(const ControlProfile& proposed, const ControlBounds& bounds) {
    if (proposed.channels.size() != bounds.channel_count() || proposed.rig != bounds.rig) {
        throw StructuralError("control profile layout does not match control bounds");
    }
    ControlProfile out = proposed;
    for (std::size_t c = 0; c < out.channels.size(); ++c) {
        auto& ch = out.channels[c];
        const auto& e = bounds.amplitude[c];
        double a = std::isnan(ch.amplitude) ? e.min : ch.amplitude;
        ch.amplitude = std::clamp(a, e.min, e.max);
        if (ch.frequency_hz != bounds.training_frequency_hz[c] || ch.phase_rad != bounds.training_phase_rad[c]) {
            spdlog::warn("control channel {}: frequency/phase are not tunable; reset to {} Hz", c,
                         bounds.training_frequency_hz[c]);
            ch.frequency_hz = bounds.training_frequency_hz[c];
            ch.phase_rad = bounds.training_phase_rad[c];
        }
    }
    return out;
}

ParameterVector control_as_params(const ControlProfile& profile, const ControlBounds& bounds) {
    if (profile.channels.size() != bounds.channel_count()) {
        throw StructuralError("control profile layout does not match control bounds");
    }
    std::vector<double> values;
    for (const auto& ch : profile.channels) values.push_back(ch.amplitude);
    return ParameterVector(bounds.amplitude.names(), std::move(values));
}

ControlProfile with_amplitudes(const ControlProfile& profile, const ControlBounds& bounds,
                               const ParameterVector& values) {
    ControlProfile out = profile;
    for (std::size_t c = 0; c < bounds.channel_count() && c < out.channels.size(); ++c) {
        const auto& name = bounds.amplitude[c].name;
        if (values.contains(name)) out.channels[c].amplitude = values.at(name);
    }
    return out;
}

void validate(const ControlProfile& profile) {
    for (const auto& ch : profile.channels) {
        if (!std::isfinite(ch.amplitude) || !std::isfinite(ch.phase_rad)) {
            throw InvalidArgument("control channel has a non-finite amplitude or phase");
        }
        if (!(ch.frequency_hz > 0.0) || !std::isfinite(ch.frequency_hz)) {
            throw InvalidArgument("control frequency must be strictly positive");
        }
    }
}

std::string profile_key(const ControlProfile& profile) {
    std::string key(to_string(profile.rig));
    for (const auto& ch : profile.channels) {
        key += fmt::format("|{:.9g},{:.9g},{:.9g}", ch.amplitude, ch.frequency_hz, ch.phase_rad);
    }
    return key;
}

nlohmann::json to_json(const ControlProfile& profile) {
    nlohmann::json channels = nlohmann::json::array();
    for (const auto& ch : profile.channels) {
        channels.push_back({{"amplitude", ch.amplitude}, {"frequency_hz", ch.frequency_hz}, {"phase_rad", ch.phase_rad}});
    }
    return {{"rig", std::string(to_string(profile.rig))}, {"channels", channels}};
}

ControlProfile control_from_json(const nlohmann::json& j) {
    ControlProfile p;
    const auto rig = j.at("rig").get<std::string>();
    if (rig == "finger") {
        p.rig = Rig::finger;
    } else if (rig == "tentacle") {
        p.rig = Rig::tentacle;
    } else {
        throw ConfigError("unknown rig '" + rig + "' in control profile");
    }
    for (const auto& ch : j.at("channels")) {
        p.channels.push_back({ch.at("amplitude").get<double>(), ch.at("frequency_hz").get<double>(),
                              ch.value("phase_rad", 0.0)});
    }
    validate(p);
    return p;
}

}  // namespace sysid
