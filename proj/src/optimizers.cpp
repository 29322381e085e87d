#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sysid/errors.hpp"
#include "sysid/gp.hpp"
#include "sysid/recommender.hpp"

namespace sysid {

namespace {

using Point = std::vector<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double f) { return std::isfinite(f) ? f : kInf; }

void clip_unit(Point& x) {
    for (auto& v : x) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
}

// Black-box search in the unit cube. Each call reports the points evaluated
// since the last call and returns the next batch.
class UnitSearch {
public:
    virtual ~UnitSearch() = default;
    virtual std::vector<Point> step(const std::vector<Point>& xs, const std::vector<double>& fs) = 0;
    const std::string& note() const { return note_; }

protected:
    std::string note_;
};

class OptimizerRecommender final : public Recommender {
public:
    OptimizerRecommender(std::string name, ParameterBounds bounds, std::unique_ptr<UnitSearch> search)
        : name_(std::move(name)), bounds_(std::move(bounds)), search_(std::move(search)) {}

    std::string name() const override { return name_; }

    std::vector<RecommendationResponse> recommend(const RecommendationRequest& req) override {
        std::vector<Point> xs;
        std::vector<double> fs;
        if (req.evaluations.empty()) {
            xs.push_back(normalize(req.params, bounds_).unit);
            fs.push_back(finite_or_inf(req.error));
        }
        for (const auto& e : req.evaluations) {
            if (!e.params.same_layout(bounds_)) {
                throw StructuralError(fmt::format("{}: evaluation layout does not match the tuned bounds", name_));
            }
            xs.push_back(normalize(e.params, bounds_).unit);
            fs.push_back(finite_or_inf(e.error));
        }
        auto batch = search_->step(xs, fs);
        std::vector<RecommendationResponse> out;
        out.reserve(batch.size());
        for (auto& x : batch) {
            clip_unit(x);
            RecommendationResponse r;
            r.params = clamp(denormalize(x, bounds_), bounds_);
            r.control = req.control;
            r.confidence = 0.5;
            r.rationale = search_->note();
            out.push_back(std::move(r));
        }
        return out;
    }

private:
    std::string name_;
    ParameterBounds bounds_;
    std::unique_ptr<UnitSearch> search_;
};

// ---------------------------------------------------------------- random

class RandomSearch final : public UnitSearch {
public:
    RandomSearch(std::size_t dims, std::uint64_t seed) : dims_(dims), rng_(seed) { note_ = "random"; }

    std::vector<Point> step(const std::vector<Point>&, const std::vector<double>&) override {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Point x(dims_);
        for (auto& v : x) v = u(rng_);
        return {x};
    }

private:
    std::size_t dims_;
    std::mt19937_64 rng_;
};

// ----------------------------------------------------------- Nelder-Mead

class NelderMead final : public UnitSearch {
public:
    explicit NelderMead(std::size_t dims) : n_(dims) {}

    std::vector<Point> step(const std::vector<Point>& xs, const std::vector<double>& fs) override {
        if (xs.size() != 1) throw InvalidArgument("nelder-mead expects exactly one evaluation per step");
        return {advance(xs[0], fs[0])};
    }

private:
    enum class Phase { start, init, reflect, expand, contract_out, contract_in, shrink };

    static Point affine(const Point& a, double wa, const Point& b, double wb) {
        Point out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
        clip_unit(out);
        return out;
    }

    Point propose(Point x, Phase phase, std::string note) {
        phase_ = phase;
        note_ = "nelder-mead: " + std::move(note);
        return x;
    }

    // Per-coordinate perturbation of the anchor vertex; steps that would leave
    // the cube are taken in the other direction.
    void build_simplex(const Point& anchor, double anchor_f) {
        sim_.assign(n_ + 1, anchor);
        fsim_.assign(n_ + 1, kInf);
        fsim_[0] = anchor_f;
        for (std::size_t k = 0; k < n_; ++k) {
            double step = anchor[k] != 0.0 ? 0.05 * anchor[k] : 0.00025;
            if (anchor[k] != 0.0 && std::abs(step) < 1e-6) step = 1e-6;
            double v = anchor[k] + step;
            if (v > 1.0) v = anchor[k] - step;
            sim_[k + 1][k] = std::clamp(v, 0.0, 1.0);
        }
        index_ = 1;
    }

    bool degenerate() const {
        double spread = 0.0;
        for (std::size_t j = 1; j <= n_; ++j) {
            for (std::size_t i = 0; i < n_; ++i) spread = std::max(spread, std::abs(sim_[j][i] - sim_[0][i]));
        }
        return spread < 1e-12;
    }

    Point begin_iteration() {
        std::vector<std::size_t> order(n_ + 1);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fsim_[a] < fsim_[b]; });
        std::vector<Point> s;
        std::vector<double> f;
        for (auto i : order) {
            s.push_back(sim_[i]);
            f.push_back(fsim_[i]);
        }
        sim_ = std::move(s);
        fsim_ = std::move(f);
        if (degenerate()) {
            spdlog::warn("nelder-mead: simplex collapsed, re-perturbing around the best vertex");
            build_simplex(sim_[0], fsim_[0]);
            return propose(sim_[1], Phase::init, "restart vertex 1");
        }
        xbar_.assign(n_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            for (std::size_t i = 0; i < n_; ++i) xbar_[i] += sim_[j][i] / static_cast<double>(n_);
        }
        return propose(affine(xbar_, 1.0 + kRho, sim_[n_], -kRho), Phase::reflect, "reflect");
    }

    void replace_worst(const Point& x, double f) {
        sim_[n_] = x;
        fsim_[n_] = f;
    }

    Point start_shrink() {
        for (std::size_t j = 1; j <= n_; ++j) {
            sim_[j] = affine(sim_[0], 1.0 - kSigma, sim_[j], kSigma);
            fsim_[j] = kInf;
        }
        index_ = 1;
        return propose(sim_[1], Phase::shrink, "shrink 1");
    }

    Point advance(const Point& x, double f) {
        switch (phase_) {
            case Phase::start:
                build_simplex(x, f);
                return propose(sim_[1], Phase::init, "initial vertex 1");
            case Phase::init:
            case Phase::shrink: {
                sim_[index_] = x;
                fsim_[index_] = f;
                ++index_;
                if (index_ <= n_) {
                    const auto label = phase_ == Phase::init ? "initial vertex " : "shrink ";
                    return propose(sim_[index_], phase_, label + std::to_string(index_));
                }
                return begin_iteration();
            }
            case Phase::reflect:
                xr_ = x;
                fxr_ = f;
                if (f < fsim_[0]) return propose(affine(xbar_, 1.0 + kRho * kChi, sim_[n_], -kRho * kChi), Phase::expand, "expand");
                if (f < fsim_[n_ - 1]) {
                    replace_worst(x, f);
                    return begin_iteration();
                }
                if (f < fsim_[n_]) {
                    return propose(affine(xbar_, 1.0 + kPsi * kRho, sim_[n_], -kPsi * kRho), Phase::contract_out,
                                   "contract outside");
                }
                return propose(affine(xbar_, 1.0 - kPsi, sim_[n_], kPsi), Phase::contract_in, "contract inside");
            case Phase::expand:
                if (f < fxr_) replace_worst(x, f);
                else replace_worst(xr_, fxr_);
                return begin_iteration();
            case Phase::contract_out:
                if (f <= fxr_) {
                    replace_worst(x, f);
                    return begin_iteration();
                }
                return start_shrink();
            case Phase::contract_in:
                if (f < fsim_[n_]) {
                    replace_worst(x, f);
                    return begin_iteration();
                }
                return start_shrink();
        }
        return begin_iteration();
    }

    static constexpr double kRho = 1.0, kChi = 2.0, kPsi = 0.5, kSigma = 0.5;

    std::size_t n_;
    Phase phase_ = Phase::start;
    std::vector<Point> sim_;
    std::vector<double> fsim_;
    std::size_t index_ = 0;
    Point xbar_, xr_;
    double fxr_ = kInf;
};

// ------------------------------------------------ golden-section coordinates

class GoldenCoordinate final : public UnitSearch {
public:
    GoldenCoordinate(std::size_t dims, int budget) : n_(dims), remaining_(std::max(budget - 1, 0)) {}

    std::vector<Point> step(const std::vector<Point>& xs, const std::vector<double>& fs) override {
        if (xs.size() != 1) throw InvalidArgument("golden-cd expects exactly one evaluation per step");
        if (!started_) {
            started_ = true;
            best_ = xs[0];
            fbest_ = fs[0];
            start_sweep(1.0);
            return {next()};
        }
        record(xs[0][coord_], fs[0]);
        return {next()};
    }

private:
    static constexpr double kRatio = 0.6180339887498949;
    static constexpr double kTol = 1e-3;

    // Splits the remaining evaluations evenly over the coordinates, earlier
    // coordinates taking the remainder.
    void start_sweep(double width) {
        width_ = width;
        alloc_.assign(n_, 0);
        const int dims = static_cast<int>(n_);
        const int avail = remaining_ > 0 ? remaining_ : dims;
        for (int i = 0; i < dims; ++i) alloc_[static_cast<std::size_t>(i)] = avail / dims + (i < avail % dims ? 1 : 0);
        coord_ = 0;
        begin_coord();
    }

    void begin_coord() {
        const double c = best_[coord_];
        a_ = std::max(0.0, c - 0.5 * width_);
        b_ = std::min(1.0, c + 0.5 * width_);
        if (width_ >= 1.0) {
            a_ = 0.0;
            b_ = 1.0;
        }
        left_ = a_ + (1.0 - kRatio) * (b_ - a_);
        right_ = a_ + kRatio * (b_ - a_);
        fleft_ = fright_ = std::numeric_limits<double>::quiet_NaN();
        coord_best_x_ = best_[coord_];
        coord_best_f_ = fbest_;
        used_ = 0;
    }

    void record(double x, double f) {
        ++used_;
        if (remaining_ > 0) --remaining_;
        if (pending_ == Pending::left) fleft_ = f;
        else fright_ = f;
        if (f < coord_best_f_) {
            coord_best_f_ = f;
            coord_best_x_ = x;
        }
        if (std::isnan(fleft_) || std::isnan(fright_)) return;
        // Both interior points known: keep the sub-interval around the better one.
        if (fleft_ < fright_) {
            b_ = right_;
            right_ = left_;
            fright_ = fleft_;
            left_ = a_ + (1.0 - kRatio) * (b_ - a_);
            fleft_ = std::numeric_limits<double>::quiet_NaN();
        } else {
            a_ = left_;
            left_ = right_;
            fleft_ = fright_;
            right_ = a_ + kRatio * (b_ - a_);
            fright_ = std::numeric_limits<double>::quiet_NaN();
        }
    }

    void finish_coord() {
        if (coord_best_f_ < fbest_) {
            fbest_ = coord_best_f_;
            best_[coord_] = coord_best_x_;
        }
    }

    Point next() {
        for (;;) {
            const bool exhausted = used_ >= alloc_[coord_] || (b_ - a_) < kTol;
            if (!exhausted) break;
            finish_coord();
            ++coord_;
            if (coord_ >= n_) {
                // Budget left after a full sweep: search again in a narrower window.
                start_sweep(std::max(width_ * 0.5, 4.0 * kTol));
            } else {
                begin_coord();
            }
        }
        Point x = best_;
        const int left_over = alloc_[coord_] - used_;
        if (std::isnan(fleft_) && std::isnan(fright_) && left_over == 1) {
            // A single evaluation: probe the golden point farther from the incumbent.
            const double c = best_[coord_];
            const bool use_left = std::abs(left_ - c) >= std::abs(right_ - c);
            pending_ = use_left ? Pending::left : Pending::right;
        } else {
            pending_ = std::isnan(fleft_) ? Pending::left : Pending::right;
        }
        x[coord_] = pending_ == Pending::left ? left_ : right_;
        note_ = fmt::format("golden-cd: coordinate {} in [{:.4f}, {:.4f}]", coord_, a_, b_);
        return x;
    }

    enum class Pending { left, right };

    std::size_t n_;
    int remaining_;
    bool started_ = false;
    Point best_;
    double fbest_ = kInf;
    std::vector<int> alloc_;
    std::size_t coord_ = 0;
    double width_ = 1.0;
    double a_ = 0.0, b_ = 1.0, left_ = 0.0, right_ = 1.0;
    double fleft_ = 0.0, fright_ = 0.0;
    double coord_best_x_ = 0.0, coord_best_f_ = kInf;
    int used_ = 0;
    Pending pending_ = Pending::left;
};

// --------------------------------------------------- Bayesian optimization

class BayesOpt final : public UnitSearch {
public:
    BayesOpt(std::size_t dims, std::uint64_t seed) : n_(dims), rng_(seed) {}

    std::vector<Point> step(const std::vector<Point>& xs, const std::vector<double>& fs) override {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            xs_.push_back(xs[i]);
            fs_.push_back(fs[i]);
        }
        if (random_left_ > 0) {
            --random_left_;
            note_ = "bo: initial random sample";
            return {uniform()};
        }
        return {acquire()};
    }

private:
    Point uniform() {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Point x(n_);
        for (auto& v : x) v = u(rng_);
        return x;
    }

    Point acquire() {
        const auto m = static_cast<Eigen::Index>(xs_.size());
        const auto d = static_cast<Eigen::Index>(n_);
        double worst = -kInf;
        for (double f : fs_) {
            if (std::isfinite(f)) worst = std::max(worst, f);
        }
        if (!std::isfinite(worst)) worst = 1.0;
        Eigen::MatrixXd x(m, d);
        Eigen::VectorXd y(m);
        std::size_t best_i = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) x(i, j) = xs_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const double f = fs_[static_cast<std::size_t>(i)];
            y(i) = std::isfinite(f) ? f : worst;
            if (y(i) < y(static_cast<Eigen::Index>(best_i))) best_i = static_cast<std::size_t>(i);
        }
        GaussianProcess gp;
        if (!gp.fit(x, y)) {
            spdlog::warn("bo: GP fit failed, falling back to a random proposal");
            note_ = "bo: random fallback";
            return uniform();
        }
        const double best = y(static_cast<Eigen::Index>(best_i));

        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> g(0.0, 0.05);
        Point shift(n_);
        for (auto& s : shift) s = u(rng_);
        Point arg = xs_[best_i];
        double best_ei = -1.0;
        Eigen::VectorXd c(d);
        auto consider = [&](const Point& p) {
            for (Eigen::Index j = 0; j < d; ++j) c(j) = p[static_cast<std::size_t>(j)];
            const auto pred = gp.predict(c);
            const double ei = expected_improvement(pred.mean, pred.std, best);
            if (ei > best_ei) {
                best_ei = ei;
                arg = p;
            }
        };
        for (std::size_t k = 0; k < 2048; ++k) {
            auto p = halton(k, n_);
            for (std::size_t j = 0; j < n_; ++j) p[j] = std::fmod(p[j] + shift[j], 1.0);
            consider(p);
        }
        for (std::size_t k = 0; k < 256; ++k) {
            Point p = xs_[best_i];
            for (auto& v : p) v = std::clamp(v + g(rng_), 0.0, 1.0);
            consider(p);
        }
        note_ = fmt::format("bo: max EI {:.4g} (length scale {:.3g})", best_ei, gp.length_scale());
        return arg;
    }

    std::size_t n_;
    std::mt19937_64 rng_;
    int random_left_ = 3;
    std::vector<Point> xs_;
    std::vector<double> fs_;
};

// ----------------------------------------------------------------- CMA-ES

class Cmaes final : public UnitSearch {
public:
    Cmaes(std::size_t dims, std::uint64_t seed) : n_(dims), lambda_(cmaes_population(dims)), rng_(seed) {
        const auto n = static_cast<double>(n_);
        mu_ = lambda_ / 2;
        weights_.resize(mu_);
        for (int i = 0; i < mu_; ++i) weights_(i) = std::log(mu_ + 0.5) - std::log(i + 1.0);
        weights_ /= weights_.sum();
        mueff_ = 1.0 / weights_.squaredNorm();
        cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
        cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
        c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
        cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
        damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
        chin_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        const auto d = static_cast<Eigen::Index>(n_);
        pc_ = Eigen::VectorXd::Zero(d);
        ps_ = Eigen::VectorXd::Zero(d);
        c_ = Eigen::MatrixXd::Identity(d, d);
        b_ = Eigen::MatrixXd::Identity(d, d);
        diag_ = Eigen::VectorXd::Ones(d);
    }

    std::vector<Point> step(const std::vector<Point>& xs, const std::vector<double>& fs) override {
        if (!started_) {
            started_ = true;
            mean_ = to_vec(xs.at(0));
        } else {
            if (xs.size() != static_cast<std::size_t>(lambda_)) {
                throw InvalidArgument(fmt::format("cma-es expects {} evaluations per generation, got {}", lambda_,
                                                  xs.size()));
            }
            update(xs, fs);
        }
        ++generation_;
        note_ = fmt::format("cma-es: generation {} (sigma {:.4g})", generation_, sigma_);
        return sample();
    }

private:
    static Eigen::VectorXd to_vec(const Point& p) { return Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())); }

    std::vector<Point> sample() {
        std::normal_distribution<double> g(0.0, 1.0);
        const auto d = static_cast<Eigen::Index>(n_);
        std::vector<Point> out;
        for (int k = 0; k < lambda_; ++k) {
            Eigen::VectorXd z(d);
            for (Eigen::Index i = 0; i < d; ++i) z(i) = g(rng_);
            const Eigen::VectorXd x = mean_ + sigma_ * (b_ * diag_.cwiseProduct(z));
            Point p(n_);
            for (std::size_t i = 0; i < n_; ++i) p[i] = reflect_unit(x(static_cast<Eigen::Index>(i)));
            out.push_back(std::move(p));
        }
        return out;
    }

    void update(const std::vector<Point>& xs, const std::vector<double>& fs) {
        const auto n = static_cast<double>(n_);
        const auto d = static_cast<Eigen::Index>(n_);
        std::vector<std::size_t> order(xs.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fs[a] < fs[b]; });

        // Lamarckian: the reflected points are the ones that were evaluated, so
        // the update uses them.
        const Eigen::VectorXd old = mean_;
        Eigen::MatrixXd ysel(d, mu_);
        Eigen::VectorXd next = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < mu_; ++i) {
            const Eigen::VectorXd x = to_vec(xs[order[static_cast<std::size_t>(i)]]);
            next += weights_(i) * x;
            ysel.col(i) = (x - old) / sigma_;
        }
        mean_ = next;
        const Eigen::VectorXd ymean = (mean_ - old) / sigma_;
        const Eigen::MatrixXd inv_sqrt = b_ * diag_.cwiseInverse().asDiagonal() * b_.transpose();
        ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * (inv_sqrt * ymean);
        const double psn = ps_.norm();
        const double denom = std::sqrt(1.0 - std::pow(1.0 - cs_, 2.0 * generation_));
        const bool hsig = psn / denom / chin_ < 1.4 + 2.0 / (n + 1.0);
        pc_ = (1.0 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mueff_) : 0.0) * ymean;
        const Eigen::MatrixXd rank_mu = ysel * weights_.asDiagonal() * ysel.transpose();
        c_ = (1.0 - c1_ - cmu_) * c_ + c1_ * (pc_ * pc_.transpose() + (hsig ? 0.0 : cc_ * (2.0 - cc_)) * c_) +
             cmu_ * rank_mu;
        sigma_ *= std::exp((cs_ / damps_) * (psn / chin_ - 1.0));
        sigma_ = std::clamp(sigma_, 1e-12, 1e3);

        c_ = 0.5 * (c_ + c_.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c_);
        Eigen::VectorXd ev = eig.eigenvalues();
        bool repaired = false;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (!(ev(i) > 1e-14)) {
                ev(i) = 1e-14;
                repaired = true;
            }
        }
        if (repaired) {
            spdlog::warn("cma-es: covariance not positive definite, eigenvalues floored at 1e-14");
            c_ = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
        }
        b_ = eig.eigenvectors();
        diag_ = ev.cwiseSqrt();
    }

    std::size_t n_;
    int lambda_;
    int mu_ = 0;
    std::mt19937_64 rng_;
    Eigen::VectorXd weights_;
    double mueff_ = 1.0, cc_ = 0.0, cs_ = 0.0, c1_ = 0.0, cmu_ = 0.0, damps_ = 1.0, chin_ = 1.0;
    double sigma_ = 0.3;
    Eigen::VectorXd mean_, pc_, ps_, diag_;
    Eigen::MatrixXd c_, b_;
    bool started_ = false;
    int generation_ = 0;
};

std::size_t dims_of(const OptimizerContext& ctx) {
    if (ctx.bounds.empty()) throw InvalidArgument("optimizer needs at least one tuned parameter");
    return ctx.bounds.size();
}

}  // namespace

int cmaes_population(std::size_t dims) {
    return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dims) + 1.0)));
}

double reflect_unit(double x) {
    if (!std::isfinite(x)) return 0.0;
    double r = std::fmod(x, 2.0);
    if (r < 0.0) r += 2.0;
    return r > 1.0 ? 2.0 - r : r;
}

std::unique_ptr<Recommender> make_random(const OptimizerContext& ctx) {
    return std::make_unique<OptimizerRecommender>("random", ctx.bounds,
                                                  std::make_unique<RandomSearch>(dims_of(ctx), ctx.seed));
}

std::unique_ptr<Recommender> make_nelder_mead(const OptimizerContext& ctx) {
    return std::make_unique<OptimizerRecommender>("nelder-mead", ctx.bounds,
                                                  std::make_unique<NelderMead>(dims_of(ctx)));
}

std::unique_ptr<Recommender> make_golden_cd(const OptimizerContext& ctx) {
    return std::make_unique<OptimizerRecommender>("golden-cd", ctx.bounds,
                                                  std::make_unique<GoldenCoordinate>(dims_of(ctx), ctx.budget));
}

std::unique_ptr<Recommender> make_bo(const OptimizerContext& ctx) {
    return std::make_unique<OptimizerRecommender>("bo", ctx.bounds, std::make_unique<BayesOpt>(dims_of(ctx), ctx.seed));
}

std::unique_ptr<Recommender> make_cmaes(const OptimizerContext& ctx) {
    return std::make_unique<OptimizerRecommender>("cma-es", ctx.bounds, std::make_unique<Cmaes>(dims_of(ctx), ctx.seed));
}

}  // namespace sysid
