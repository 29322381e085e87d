#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "sysid/control.hpp"
#include "sysid/param_space.hpp"
#include "sysid/platform.hpp"
#include "sysid/trajectory.hpp"

namespace sysid {

struct SimulationSettings {
    /// Recorded span after the settle period.
    double duration_s = 10.0;
    /// Simulated but not recorded; the controller runs from t = 0.
    double settle_s = 2.0;
    /// 0 selects the platform camera rate.
    double fps = 0.0;
    double step_s = 1e-3;
    CoordinateSpace space = CoordinateSpace::pixels;
    /// Any |angle| or |angular rate| above this counts as divergence.
    double divergence_guard = 1e3;
};

double default_fps(Platform platform);

// ---------------------------------------------------------------- finger

/// Planar three-link chain, joint-space PD tracking. Channel 0 drives joint 0,
/// channel 1 drives joints 1 and 2 (coupled PIP/DIP).
struct FingerModel {
    std::array<double, 3> link_length_m{0.045, 0.030, 0.025};
    double frictionloss = 50.0;
    double damping = 100.0;
    double armature = 1.0;
    double density = 5.0;
    double kp = 1000.0;
    /// Link mass per unit of `density`.
    double mass_per_density = 10.0;
    double friction_epsilon = 1e-3;
};

/// Overrides the four tunables by name; other fields keep their defaults.
FingerModel finger_from_params(const ParameterVector& params, FingerModel base = {});

struct FingerCamera {
    double px_per_mm = 4.0;
    Point2 base_px{600.0, 540.0};
    int width = 1920;
    int height = 1080;
};

class FingerStepper {
public:
    explicit FingerStepper(const FingerModel& model);

    /// One linearly implicit Euler step toward joint targets (radians).
    /// Returns false when the linear solve fails.
    bool step(const std::array<double, 3>& target, double h);

    Eigen::Matrix3d mass_matrix() const;
    /// Kinetic energy plus PD spring energy about `target`.
    double mechanical_energy(const std::array<double, 3>& target) const;
    /// Tip position in millimeters, base at origin, y up.
    Point2 tip_mm() const;

    Eigen::Vector3d q = Eigen::Vector3d::Zero();
    Eigen::Vector3d v = Eigen::Vector3d::Zero();

private:
    FingerModel model_;
    std::array<double, 3> mass_{};
    std::array<double, 3> inertia_{};
};

/// Tip track, one point per frame.
Trajectory run_finger(const FingerModel& model, const ControlProfile& control, const SimulationSettings& settings = {},
                      const FingerCamera& camera = {});

// ---------------------------------------------------------------- rod

/// Hanging slender rod: N inextensible segments, absolute segment angles as
/// coordinates, point masses at the nodes. The clamp angle is set by the motor.
struct RodModel {
    int segments = 20;
    double length_m = 0.20;
    double radius_m = 0.015;
    double youngs_modulus = 2e5;
    double rod_density = 1050.0;
    double poisson_ratio = 0.5;
    /// Mass-proportional velocity damping rate (1/s).
    double damping_const = 3.0;
    double fluid_density = 1000.0;
    double perp_drag = 1.0;
    double tang_drag = 0.1;
    double shear_correction = 0.9;
    double gravity = 9.81;

    double area() const;
    double second_moment() const;
    double shear_modulus() const;
    /// Bending stiffness per joint with the shear-flexibility correction.
    double joint_stiffness() const;
};

RodModel rod_from_params(const ParameterVector& params, RodModel base = {});

struct RodCamera {
    double px_per_m = 1400.0;
    Point2 base_px{320.0, 80.0};
    int width = 640;
    int height = 480;
};

class RodStepper {
public:
    RodStepper(const RodModel& model, bool environment);

    /// One linearly implicit Euler step with the clamp at absolute angle `clamp_angle`.
    bool step(double clamp_angle, double h);

    Eigen::MatrixXd mass_matrix() const;
    double kinetic_energy() const;
    /// Kinetic + bending + gravity (net of buoyancy when the environment is on).
    double mechanical_energy(double clamp_angle) const;
    /// Node positions in meters, node 0 at the clamp, y up.
    std::vector<Point2> nodes_m() const;

    Eigen::VectorXd phi;
    Eigen::VectorXd phidot;

    static constexpr double kRestAngle = -1.5707963267948966;

private:
    void accumulate_drag(Eigen::VectorXd& force, Eigen::MatrixXd& damping) const;

    RodModel model_;
    bool environment_;
    double segment_length_;
    double joint_stiffness_;
    std::vector<double> mass_;
    std::vector<double> weight_;
    /// Suffix sums of mass_ and weight_.
    std::vector<double> mass_below_;
    std::vector<double> weight_below_;
};

/// `n` points at equal arc-length spacing along a polyline, first to last.
std::vector<Point2> resample_polyline(const std::vector<Point2>& polyline, std::size_t n);

/// Ten-point base-to-tip centerline per frame.
Trajectory run_rod(const RodModel& model, bool environment, const ControlProfile& control,
                   const SimulationSettings& settings = {}, const RodCamera& camera = {});

// ---------------------------------------------------------------- platforms

/// Compiled-in copy of the shipped bounds table for the platform.
ParameterBounds builtin_bounds(Platform platform);
/// The entries a calibration tunes: physics for finger and tentacle_air,
/// environment for tentacle_water.
ParameterBounds tuned_bounds(Platform platform, const ParameterBounds& table);

class Simulator {
public:
    virtual ~Simulator() = default;
    /// Throws DivergedSimulation on blow-up.
    virtual Trajectory simulate(const ParameterVector& tuned, const ControlProfile& control) const = 0;
};

class SurrogateSimulator final : public Simulator {
public:
    /// `frozen` overrides fixed body parameters (tentacle_water only).
    explicit SurrogateSimulator(Platform platform, SimulationSettings settings = {}, ParameterVector frozen = {});

    Trajectory simulate(const ParameterVector& tuned, const ControlProfile& control) const override;

    Platform platform() const noexcept { return platform_; }
    const SimulationSettings& settings() const noexcept { return settings_; }

private:
    Platform platform_;
    SimulationSettings settings_;
    ParameterVector frozen_;
};

struct GroundTruthScenario {
    ParameterVector gt;
    ControlProfile training;
    Trajectory training_observation;
    std::array<ControlProfile, 4> holdouts;
    std::array<Trajectory, 4> holdout_observations;
};

/// gt drawn uniformly from `bounds` with `seed`, observed under training and holdout controls.
GroundTruthScenario ground_truth_scenario(const Simulator& sim, Platform platform, const ParameterBounds& bounds,
                                          const ControlBounds& control_bounds, std::uint64_t seed);
/// Same, with gt supplied.
GroundTruthScenario ground_truth_scenario(const Simulator& sim, Platform platform, const ParameterVector& gt,
                                          const ControlBounds& control_bounds);

}  // namespace sysid
