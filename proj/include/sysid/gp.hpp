#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace sysid {

/// Matern 5/2 correlation at distance r.
double matern52(double r, double length_scale);

double normal_pdf(double z);
double normal_cdf(double z);

/// Expected improvement below `best` for a Gaussian prediction (minimization).
/// With std == 0 it reduces to max(best - mean, 0).
double expected_improvement(double mean, double std, double best);

/// Point `index` (0-based, skipping the origin) of the Halton sequence in [0, 1)^dims.
std::vector<double> halton(std::size_t index, std::size_t dims);

struct Prediction {
    double mean = 0.0;
    double std = 0.0;
};

/// Zero-mean GP on standardized targets with an isotropic Matern 5/2 kernel.
/// The length scale is chosen from a log grid by maximum marginal likelihood
/// with the signal variance profiled out.
class GaussianProcess {
public:
    /// Returns false when no grid length scale gives a positive definite kernel.
    bool fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double jitter = 1e-6);
    /// Fit with a fixed length scale.
    bool fit_fixed(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double length_scale, double jitter = 1e-6);

    /// Prediction in the units of the training targets.
    Prediction predict(const Eigen::VectorXd& x) const;

    double length_scale() const noexcept { return length_scale_; }
    double log_marginal_likelihood() const noexcept { return log_ml_; }

    static std::vector<double> default_grid();

private:
    bool factor(double length_scale, double jitter);

    Eigen::MatrixXd x_;
    Eigen::VectorXd z_;
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
    double length_scale_ = 1.0;
    double signal_var_ = 1.0;
    double log_ml_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
};

}  // namespace sysid
