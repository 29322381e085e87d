#include "sysid/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace sysid {

double matern52(double r, double length_scale) {
    const double s = std::sqrt(5.0) * std::abs(r) / length_scale;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mean, double std, double best) {
    const double gain = best - mean;
    if (!(std > 0.0)) return std::max(gain, 0.0);
    const double z = gain / std;
    return gain * normal_cdf(z) + std * normal_pdf(z);
}

std::vector<double> halton(std::size_t index, std::size_t dims) {
    static constexpr unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                          41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
    std::vector<double> out(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        const unsigned base = primes[d % std::size(primes)];
        double f = 1.0, r = 0.0;
        for (std::size_t i = index + 1; i > 0; i /= base) {
            f /= base;
            r += f * static_cast<double>(i % base);
        }
        out[d] = r;
    }
    return out;
}

std::vector<double> GaussianProcess::default_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 24; ++i) grid.push_back(0.02 * std::pow(10.0, i / 12.0));  // 0.02 .. 2
    return grid;
}

bool GaussianProcess::factor(double length_scale, double jitter) {
    const auto n = x_.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            k(i, j) = k(j, i) = matern52((x_.row(i) - x_.row(j)).norm(), length_scale);
        }
        k(i, i) += jitter;
    }
    llt_.compute(k);
    if (llt_.info() != Eigen::Success) return false;
    alpha_ = llt_.solve(z_);
    // Profiled signal variance and the matching log marginal likelihood.
    signal_var_ = std::max(z_.dot(alpha_) / static_cast<double>(n), 1e-12);
    const Eigen::MatrixXd l = llt_.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(l(i, i));
    log_ml_ = -0.5 * static_cast<double>(n) * (std::log(signal_var_) + 1.0) - 0.5 * log_det;
    length_scale_ = length_scale;
    return true;
}

namespace {

void standardize(const Eigen::VectorXd& y, Eigen::VectorXd& z, double& mean, double& scale) {
    mean = y.mean();
    const double var = (y.array() - mean).square().mean();
    scale = var > 1e-24 ? std::sqrt(var) : 1.0;
    z = (y.array() - mean) / scale;
}

}  // namespace

bool GaussianProcess::fit_fixed(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double length_scale,
                                double jitter) {
    x_ = x;
    standardize(y, z_, y_mean_, y_scale_);
    return factor(length_scale, jitter);
}

bool GaussianProcess::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double jitter) {
    x_ = x;
    standardize(y, z_, y_mean_, y_scale_);
    double best_ls = 0.0;
    double best_ml = -std::numeric_limits<double>::infinity();
    for (double ls : default_grid()) {
        if (factor(ls, jitter) && log_ml_ > best_ml) {
            best_ml = log_ml_;
            best_ls = ls;
        }
    }
    if (best_ls == 0.0) return false;
    return factor(best_ls, jitter);
}

Prediction GaussianProcess::predict(const Eigen::VectorXd& x) const {
    const auto n = x_.rows();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k(i) = matern52((x_.row(i).transpose() - x).norm(), length_scale_);
    const double mean = k.dot(alpha_);
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    const double var = std::max(1.0 - v.squaredNorm(), 0.0) * signal_var_;
    return {y_mean_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

}  // namespace sysid
