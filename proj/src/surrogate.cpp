#include "sysid/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "sysid/errors.hpp"

namespace sysid {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

constexpr const char* kFingerTable = R"(
[finger]
frictionloss   0     150    50     Nm       physics  Joint dry friction torque
damping        10    200    100    Nms/rad  physics  Velocity-dependent viscous damping
armature       0.1   5.0    1.0    kgm2     physics  Rotor inertia added to each joint
density        1.0   20.0   5.0    kg/m3    physics  Density of body geometries
amp_deg0       0     60     10     deg      control  MCP joint oscillation amplitude
amp_deg1       0     60     10     deg      control  PIP/DIP joint oscillation amplitude
)";

constexpr const char* kTentacleAirTable = R"(
[tentacle_air]
youngs_mod       5e3   5e6    2e5    Pa      physics      Rod stiffness
rod_density      500   5000   1050   kg/m3   physics      Material density
poisson_ratio    0.2   0.5    0.5    -       physics      Lateral-to-axial strain ratio
damping_const    0     100    3.0    -       physics      Linear (Rayleigh) damping coefficient
perp_drag        0     50     1.0    -       environment  Perpendicular fluid drag coefficient
tang_drag        0     50     0.1    -       environment  Tangential fluid drag coefficient
motor_amplitude  0.2   1.0    1.0    rad     control      Oscillation amplitude, tuned via active learning
)";

constexpr const char* kTentacleWaterTable = R"(
[tentacle_water]
fluid_density    0     2000   1000   kg/m3   environment  Surrounding fluid density
perp_drag        0     100    10     -       environment  Perpendicular fluid drag coefficient
tang_drag        0     100    10     -       environment  Tangential fluid drag coefficient
motor_amplitude  0.2   1.0    1.0    rad     control      Oscillation amplitude, tuned via active learning
)";

double required(const ParameterVector& params, std::string_view name) {
    if (!params.contains(name)) throw StructuralError("simulator input lacks parameter '" + std::string(name) + "'");
    return params.at(name);
}

void apply_if_present(const ParameterVector& params, std::string_view name, double& field) {
    if (params.contains(name)) field = params.at(name);
}

Eigen::Vector2d unit(double a) { return {std::cos(a), std::sin(a)}; }
Eigen::Vector2d normal(double a) { return {-std::sin(a), std::cos(a)}; }

// Frame f is sampled before step index frame_steps[f] is taken.
std::vector<long> frame_steps(const SimulationSettings& s, double fps) {
    if (!(s.duration_s > 0.0)) throw InvalidArgument("simulation duration must be positive");
    if (!(s.settle_s >= 0.0)) throw InvalidArgument("settle time must be non-negative");
    if (!(s.step_s > 0.0)) throw InvalidArgument("simulation step must be positive");
    if (!(fps > 0.0)) throw InvalidArgument("fps must be positive");
    const auto frames = static_cast<long>(std::lround(s.duration_s * fps));
    std::vector<long> steps;
    steps.reserve(static_cast<std::size_t>(frames));
    for (long f = 0; f < frames; ++f) {
        steps.push_back(std::lround((s.settle_s + static_cast<double>(f) / fps) / s.step_s));
    }
    return steps;
}

[[noreturn]] void diverged(const char* what, long step, double h) {
    throw DivergedSimulation(fmt::format("{} diverged at step {} (t = {:.3f} s)", what, step, step * h), step,
                             step * h);
}

}  // namespace

double default_fps(Platform platform) {
    switch (platform) {
        case Platform::finger: return 30.0;
        case Platform::tentacle_air: return 25.0;
        case Platform::tentacle_water: return 120.0;
    }
    return 30.0;
}

// ---------------------------------------------------------------- finger

FingerModel finger_from_params(const ParameterVector& params, FingerModel base) {
    base.frictionloss = required(params, "frictionloss");
    base.damping = required(params, "damping");
    base.armature = required(params, "armature");
    base.density = required(params, "density");
    return base;
}

FingerStepper::FingerStepper(const FingerModel& model) : model_(model) {
    for (std::size_t i = 0; i < 3; ++i) {
        const double len = model.link_length_m[i];
        mass_[i] = model.density * model.mass_per_density * len / model.link_length_m[0];
        inertia_[i] = mass_[i] * len * len / 12.0;
    }
    if (!(model.armature + inertia_[2] > 0.0)) throw InvalidArgument("finger inertia must be positive");
}

Eigen::Matrix3d FingerStepper::mass_matrix() const {
    const auto& len = model_.link_length_m;
    std::array<double, 3> abs{q[0], q[0] + q[1], q[0] + q[1] + q[2]};
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity() * model_.armature;
    for (int i = 0; i < 3; ++i) {
        Eigen::Matrix<double, 2, 3> jc = Eigen::Matrix<double, 2, 3>::Zero();
        for (int k = 0; k <= i; ++k) {
            for (int j = k; j <= i; ++j) jc.col(k) += (j < i ? len[j] : 0.5 * len[i]) * normal(abs[j]);
        }
        Eigen::RowVector3d jw = Eigen::RowVector3d::Zero();
        jw.head(i + 1).setOnes();
        m += mass_[i] * jc.transpose() * jc + inertia_[i] * jw.transpose() * jw;
    }
    return m;
}

bool FingerStepper::step(const std::array<double, 3>& target, double h) {
    const auto& len = model_.link_length_m;
    std::array<double, 3> abs{q[0], q[0] + q[1], q[0] + q[1] + q[2]};
    std::array<double, 3> rate{v[0], v[0] + v[1], v[0] + v[1] + v[2]};

    // Velocity-product terms: sum_i m_i Jc_i^T (dJc_i/dt qdot).
    Eigen::Vector3d coriolis = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) {
        Eigen::Matrix<double, 2, 3> jc = Eigen::Matrix<double, 2, 3>::Zero();
        Eigen::Vector2d centripetal = Eigen::Vector2d::Zero();
        for (int j = 0; j <= i; ++j) {
            const double r = j < i ? len[j] : 0.5 * len[i];
            centripetal -= r * rate[j] * rate[j] * unit(abs[j]);
            for (int k = 0; k <= j; ++k) jc.col(k) += r * normal(abs[j]);
        }
        coriolis += mass_[i] * jc.transpose() * centripetal;
    }

    Eigen::Vector3d tau;
    Eigen::Matrix3d a = mass_matrix();
    for (int j = 0; j < 3; ++j) {
        // Friction as a secant viscous coefficient F tanh(v/eps) / v, applied
        // implicitly so that it can only remove energy.
        const double x = v[j] / model_.friction_epsilon;
        const double secant = std::abs(x) < 1e-8 ? 1.0 / model_.friction_epsilon : std::tanh(x) / v[j];
        const double dissipation = model_.damping + model_.frictionloss * secant;
        tau[j] = model_.kp * (target[j] - q[j]) - dissipation * v[j] - coriolis[j];
        a(j, j) += h * dissipation + h * h * model_.kp;
    }
    const Eigen::Vector3d rhs = h * tau - h * h * model_.kp * v;
    Eigen::LLT<Eigen::Matrix3d> llt(a);
    if (llt.info() != Eigen::Success) return false;
    v += llt.solve(rhs);
    q += h * v;
    return true;
}

double FingerStepper::mechanical_energy(const std::array<double, 3>& target) const {
    double spring = 0.0;
    for (int j = 0; j < 3; ++j) spring += 0.5 * model_.kp * (target[j] - q[j]) * (target[j] - q[j]);
    return 0.5 * v.dot(mass_matrix() * v) + spring;
}

Point2 FingerStepper::tip_mm() const {
    const auto& len = model_.link_length_m;
    double a = 0.0;
    Point2 tip;
    for (int j = 0; j < 3; ++j) {
        a += q[j];
        tip.x += 1000.0 * len[j] * std::cos(a);
        tip.y += 1000.0 * len[j] * std::sin(a);
    }
    return tip;
}

Trajectory run_finger(const FingerModel& model, const ControlProfile& control, const SimulationSettings& settings,
                      const FingerCamera& camera) {
    if (control.channels.size() != 2) throw StructuralError("finger control needs two channels");
    validate(control);
    const double fps = settings.fps > 0.0 ? settings.fps : default_fps(Platform::finger);
    const auto frames = frame_steps(settings, fps);
    const double h = settings.step_s;
    const long total = frames.empty() ? 0 : frames.back() + 1;

    Trajectory traj;
    traj.fps = fps;
    traj.space = settings.space;
    traj.frames.reserve(frames.size());

    FingerStepper stepper(model);
    std::size_t next = 0;
    for (long s = 0; s < total; ++s) {
        if (next < frames.size() && frames[next] == s) {
            const Point2 tip = stepper.tip_mm();
            if (settings.space == CoordinateSpace::millimeters) {
                traj.frames.push_back({{tip.x, -tip.y}});
            } else {
                traj.frames.push_back(
                    {{camera.base_px.x + camera.px_per_mm * tip.x, camera.base_px.y - camera.px_per_mm * tip.y}});
            }
            ++next;
        }
        const double t = static_cast<double>(s + 1) * h;
        const double u0 = evaluate(control, 0, t) * kDegToRad;
        const double u1 = evaluate(control, 1, t) * kDegToRad;
        if (!stepper.step({u0, u1, u1}, h)) diverged("finger", s + 1, h);
        for (int j = 0; j < 3; ++j) {
            if (!std::isfinite(stepper.q[j]) || !std::isfinite(stepper.v[j]) ||
                std::abs(stepper.q[j]) > settings.divergence_guard ||
                std::abs(stepper.v[j]) > settings.divergence_guard) {
                diverged("finger", s + 1, h);
            }
        }
    }
    return traj;
}

// ---------------------------------------------------------------- rod

double RodModel::area() const { return std::numbers::pi * radius_m * radius_m; }

double RodModel::second_moment() const { return std::numbers::pi * std::pow(radius_m, 4) / 4.0; }

double RodModel::shear_modulus() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }

double RodModel::joint_stiffness() const {
    const double l = length_m / segments;
    const double bending = youngs_modulus * second_moment() / l;
    // Shear flexibility of the whole rod as a tip-loaded cantilever: the
    // shear-to-bending deflection ratio is 3 E I / (kappa G A L^2).
    const double ratio =
        3.0 * youngs_modulus * second_moment() / (shear_correction * shear_modulus() * area() * length_m * length_m);
    return bending / (1.0 + ratio);
}

RodModel rod_from_params(const ParameterVector& params, RodModel base) {
    apply_if_present(params, "youngs_mod", base.youngs_modulus);
    apply_if_present(params, "rod_density", base.rod_density);
    apply_if_present(params, "poisson_ratio", base.poisson_ratio);
    apply_if_present(params, "damping_const", base.damping_const);
    apply_if_present(params, "fluid_density", base.fluid_density);
    apply_if_present(params, "perp_drag", base.perp_drag);
    apply_if_present(params, "tang_drag", base.tang_drag);
    return base;
}

RodStepper::RodStepper(const RodModel& model, bool environment)
    : model_(model), environment_(environment), segment_length_(model.length_m / model.segments) {
    if (model.segments < 2) throw InvalidArgument("rod needs at least two segments");
    if (!(model.youngs_modulus > 0.0) || !(model.rod_density > 0.0) || !(model.radius_m > 0.0)) {
        throw InvalidArgument("rod modulus, density and radius must be positive");
    }
    if (!(model.shear_modulus() > 0.0)) throw InvalidArgument("rod shear modulus must be positive");
    joint_stiffness_ = model.joint_stiffness();
    const auto n = static_cast<std::size_t>(model.segments);
    const double node_volume = model.area() * segment_length_;
    mass_.assign(n, model.rod_density * node_volume);
    mass_.back() *= 0.5;
    weight_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double displaced = environment ? model.fluid_density * node_volume * (j + 1 == n ? 0.5 : 1.0) : 0.0;
        weight_[j] = (mass_[j] - displaced) * model.gravity;
    }
    mass_below_.assign(n, 0.0);
    weight_below_.assign(n, 0.0);
    double ms = 0.0, ws = 0.0;
    for (std::size_t j = n; j-- > 0;) {
        ms += mass_[j];
        ws += weight_[j];
        mass_below_[j] = ms;
        weight_below_[j] = ws;
    }
    phi = Eigen::VectorXd::Constant(model.segments, kRestAngle);
    phidot = Eigen::VectorXd::Zero(model.segments);
}

Eigen::MatrixXd RodStepper::mass_matrix() const {
    const int n = model_.segments;
    const double l2 = segment_length_ * segment_length_;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            m(i, j) = l2 * std::cos(phi[i] - phi[j]) * mass_below_[static_cast<std::size_t>(j)];
            m(j, i) = m(i, j);
        }
    }
    return m;
}

void RodStepper::accumulate_drag(Eigen::VectorXd& force, Eigen::MatrixXd& damping) const {
    const int n = model_.segments;
    const double l = segment_length_;
    const double coef = 0.5 * model_.fluid_density * 2.0 * model_.radius_m * l;
    std::vector<Eigen::Vector2d> f(static_cast<std::size_t>(n));
    std::vector<Eigen::Matrix2d> c(static_cast<std::size_t>(n));
    Eigen::Vector2d end_velocity = Eigen::Vector2d::Zero();
    for (int j = 0; j < n; ++j) {
        const Eigen::Vector2d t = unit(phi[j]);
        const Eigen::Vector2d nn = normal(phi[j]);
        const Eigen::Vector2d mid = end_velocity + 0.5 * l * phidot[j] * nn;
        end_velocity += l * phidot[j] * nn;
        const double vt = mid.dot(t);
        const double vn = mid.dot(nn);
        f[j] = -coef * (model_.perp_drag * std::abs(vn) * vn * nn + model_.tang_drag * std::abs(vt) * vt * t);
        c[j] = 2.0 * coef * (model_.perp_drag * std::abs(vn) * nn * nn.transpose() +
                             model_.tang_drag * std::abs(vt) * t * t.transpose());
    }
    // Suffix sums over segments strictly beyond each index.
    std::vector<Eigen::Vector2d> f_beyond(static_cast<std::size_t>(n), Eigen::Vector2d::Zero());
    std::vector<Eigen::Matrix2d> c_beyond(static_cast<std::size_t>(n), Eigen::Matrix2d::Zero());
    for (int j = n - 2; j >= 0; --j) {
        f_beyond[j] = f_beyond[j + 1] + f[j + 1];
        c_beyond[j] = c_beyond[j + 1] + c[j + 1];
    }
    for (int a = 0; a < n; ++a) {
        const Eigen::Vector2d na = normal(phi[a]);
        force[a] += l * na.dot(f_beyond[a]) + 0.5 * l * na.dot(f[a]);
        damping(a, a) += l * l * na.dot(c_beyond[a] * na) + 0.25 * l * l * na.dot(c[a] * na);
        for (int b = a + 1; b < n; ++b) {
            const Eigen::Vector2d nb = normal(phi[b]);
            const double v = l * l * na.dot(c_beyond[b] * nb) + 0.5 * l * l * na.dot(c[b] * nb);
            damping(a, b) += v;
            damping(b, a) += v;
        }
    }
}

bool RodStepper::step(double clamp_angle, double h) {
    const int n = model_.segments;
    const double l = segment_length_;
    const double k = joint_stiffness_;
    const Eigen::MatrixXd m = mass_matrix();

    Eigen::VectorXd force = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd damping = model_.damping_const * m;
    Eigen::MatrixXd stiffness = Eigen::MatrixXd::Zero(n, n);

    for (int j = 0; j < n; ++j) {
        const double prev = j == 0 ? clamp_angle : phi[j - 1];
        double bend = -(phi[j] - prev);
        if (j + 1 < n) bend += phi[j + 1] - phi[j];
        force[j] += k * bend;
        stiffness(j, j) += j + 1 < n ? 2.0 * k : k;
        if (j + 1 < n) {
            stiffness(j, j + 1) -= k;
            stiffness(j + 1, j) -= k;
        }
        const double w = weight_below_[static_cast<std::size_t>(j)];
        force[j] -= l * w * std::cos(phi[j]);
        stiffness(j, j) += std::max(0.0, -l * w * std::sin(phi[j]));
    }
    force -= model_.damping_const * (m * phidot);

    // Velocity-product terms: l^2 sum_j sin(phi_i - phi_j) phidot_j^2 S_max(i,j).
    const double l2 = l * l;
    for (int i = 0; i < n; ++i) {
        double c = 0.0;
        for (int j = 0; j < n; ++j) {
            c += std::sin(phi[i] - phi[j]) * phidot[j] * phidot[j] *
                 mass_below_[static_cast<std::size_t>(std::max(i, j))];
        }
        force[i] -= l2 * c;
    }

    if (environment_) accumulate_drag(force, damping);

    const Eigen::MatrixXd a = m + h * damping + h * h * stiffness;
    const Eigen::VectorXd rhs = h * force - h * h * (stiffness * phidot);
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return false;
    phidot += llt.solve(rhs);
    phi += h * phidot;
    return true;
}

double RodStepper::kinetic_energy() const { return 0.5 * phidot.dot(mass_matrix() * phidot); }

double RodStepper::mechanical_energy(double clamp_angle) const {
    const int n = model_.segments;
    double bend = 0.0;
    double gravity = 0.0;
    for (int j = 0; j < n; ++j) {
        const double prev = j == 0 ? clamp_angle : phi[j - 1];
        bend += 0.5 * joint_stiffness_ * (phi[j] - prev) * (phi[j] - prev);
        gravity += segment_length_ * weight_below_[static_cast<std::size_t>(j)] * std::sin(phi[j]);
    }
    return kinetic_energy() + bend + gravity;
}

std::vector<Point2> RodStepper::nodes_m() const {
    std::vector<Point2> out{{0.0, 0.0}};
    Point2 p;
    for (int j = 0; j < model_.segments; ++j) {
        p.x += segment_length_ * std::cos(phi[j]);
        p.y += segment_length_ * std::sin(phi[j]);
        out.push_back(p);
    }
    return out;
}

std::vector<Point2> resample_polyline(const std::vector<Point2>& polyline, std::size_t n) {
    if (polyline.size() < 2) throw InvalidArgument("resampling needs at least two points");
    if (n < 2) throw InvalidArgument("resampling needs n >= 2");
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < polyline.size(); ++i) cum.push_back(cum.back() + distance(polyline[i - 1], polyline[i]));
    const double total = cum.back();
    std::vector<Point2> out;
    out.reserve(n);
    std::size_t seg = 1;
    for (std::size_t k = 0; k < n; ++k) {
        const double s = total * static_cast<double>(k) / static_cast<double>(n - 1);
        while (seg + 1 < cum.size() && cum[seg] < s) ++seg;
        const double span = cum[seg] - cum[seg - 1];
        const double w = span > 0.0 ? std::clamp((s - cum[seg - 1]) / span, 0.0, 1.0) : 0.0;
        out.push_back((1.0 - w) * polyline[seg - 1] + w * polyline[seg]);
    }
    return out;
}

Trajectory run_rod(const RodModel& model, bool environment, const ControlProfile& control,
                   const SimulationSettings& settings, const RodCamera& camera) {
    if (control.channels.size() != 1) throw StructuralError("tentacle control needs one channel");
    validate(control);
    const double fps = settings.fps > 0.0
                           ? settings.fps
                           : default_fps(environment ? Platform::tentacle_water : Platform::tentacle_air);
    const auto frames = frame_steps(settings, fps);
    const double h = settings.step_s;
    const long total = frames.empty() ? 0 : frames.back() + 1;

    Trajectory traj;
    traj.fps = fps;
    traj.space = settings.space;
    traj.frames.reserve(frames.size());

    RodStepper stepper(model, environment);
    std::size_t next = 0;
    for (long s = 0; s < total; ++s) {
        if (next < frames.size() && frames[next] == s) {
            auto pts = resample_polyline(stepper.nodes_m(), 10);
            for (auto& p : pts) {
                if (settings.space == CoordinateSpace::millimeters) {
                    p = {1000.0 * p.x, -1000.0 * p.y};
                } else {
                    p = {camera.base_px.x + camera.px_per_m * p.x, camera.base_px.y - camera.px_per_m * p.y};
                }
            }
            traj.frames.push_back(std::move(pts));
            ++next;
        }
        const double t = static_cast<double>(s + 1) * h;
        const double clamp = RodStepper::kRestAngle + evaluate(control, 0, t);
        if (!stepper.step(clamp, h)) diverged("rod", s + 1, h);
        for (int j = 0; j < model.segments; ++j) {
            if (!std::isfinite(stepper.phi[j]) || !std::isfinite(stepper.phidot[j]) ||
                std::abs(stepper.phi[j]) > settings.divergence_guard ||
                std::abs(stepper.phidot[j]) > settings.divergence_guard) {
                diverged("rod", s + 1, h);
            }
        }
    }
    return traj;
}

// ---------------------------------------------------------------- platforms

ParameterBounds builtin_bounds(Platform platform) {
    const char* text = platform == Platform::finger         ? kFingerTable
                       : platform == Platform::tentacle_air ? kTentacleAirTable
                                                            : kTentacleWaterTable;
    return parse_bounds(text).front().bounds;
}

ParameterBounds tuned_bounds(Platform platform, const ParameterBounds& table) {
    return platform == Platform::tentacle_water ? table.subset({ParamKind::environment})
                                                : table.subset({ParamKind::physics});
}

SurrogateSimulator::SurrogateSimulator(Platform platform, SimulationSettings settings, ParameterVector frozen)
    : platform_(platform), settings_(settings), frozen_(std::move(frozen)) {
    if (settings_.fps <= 0.0) settings_.fps = default_fps(platform);
}

Trajectory SurrogateSimulator::simulate(const ParameterVector& tuned, const ControlProfile& control) const {
    Trajectory traj;
    switch (platform_) {
        case Platform::finger:
            traj = run_finger(finger_from_params(tuned), control, settings_);
            break;
        case Platform::tentacle_air: {
            for (const char* name : {"youngs_mod", "rod_density", "poisson_ratio", "damping_const"}) required(tuned, name);
            traj = run_rod(rod_from_params(tuned), false, control, settings_);
            break;
        }
        case Platform::tentacle_water: {
            for (const char* name : {"fluid_density", "perp_drag", "tang_drag"}) required(tuned, name);
            const auto body = builtin_bounds(Platform::tentacle_air).subset({ParamKind::physics}).nominal();
            const RodModel model = rod_from_params(tuned, rod_from_params(frozen_, rod_from_params(body)));
            traj = run_rod(model, true, control, settings_);
            break;
        }
    }
    nlohmann::json params = nlohmann::json::object();
    for (std::size_t i = 0; i < tuned.size(); ++i) params[tuned.name(i)] = tuned[i];
    traj.metadata = {{"source", "surrogate"},
                     {"platform", std::string(to_string(platform_))},
                     {"params", params},
                     {"control", to_json(control)}};
    return traj;
}

GroundTruthScenario ground_truth_scenario(const Simulator& sim, Platform platform, const ParameterBounds& bounds,
                                          const ControlBounds& control_bounds, std::uint64_t seed) {
    return ground_truth_scenario(sim, platform, sample_uniform(bounds, seed), control_bounds);
}

GroundTruthScenario ground_truth_scenario(const Simulator& sim, Platform platform, const ParameterVector& gt,
                                          const ControlBounds& control_bounds) {
    if (rig_of(platform) != control_bounds.rig) throw StructuralError("control bounds belong to another rig");
    GroundTruthScenario s;
    s.gt = gt;
    s.training = training_profile(control_bounds);
    s.training_observation = sim.simulate(gt, s.training);
    s.holdouts = holdout_suite(control_bounds.rig);
    for (std::size_t h = 0; h < 4; ++h) s.holdout_observations[h] = sim.simulate(gt, s.holdouts[h]);
    return s;
}

}  // namespace sysid
