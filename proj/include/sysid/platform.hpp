#pragma once

#include <string>
#include <string_view>

namespace sysid {

/// Physical rig. The tentacle rig runs in two settings (air, water).
enum class Rig { finger, tentacle };

/// Calibration setting: which rig, which parameters are tuned, which forces are on.
enum class Platform { finger, tentacle_air, tentacle_water };

std::string_view to_string(Rig rig);
std::string_view to_string(Platform platform);
Platform parse_platform(std::string_view text);
Rig rig_of(Platform platform);

}  // namespace sysid
