#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmadl/loss.hpp"

namespace gmadl {

/// Default step for central-difference checks.
inline constexpr double kDefaultFdStep = 1e-6;

/// dL/drhat_i = -(1/N) * a * r_i * s'(u_i) * |r_i|^b with u_i = a*r_i*rhat_i.
std::vector<double> gmadl_grad(std::span<const double> r, std::span<const double> rhat,
                               const GmadlParams& p);

/// (2/N)(rhat_i - r_i).
std::vector<double> mse_grad(std::span<const double> r, std::span<const double> rhat);

/// (1/N) sign(rhat_i - r_i); the subgradient at a tie is 0.
std::vector<double> mae_grad(std::span<const double> r, std::span<const double> rhat);

/// Analytic gradient for the differentiable losses. MADL has none and throws
/// ValidationError; use madl_numeric_grad to inspect it.
std::vector<double> loss_grad(LossKind kind, std::span<const double> r,
                              std::span<const double> rhat, const GmadlParams& p = {});

/// Central-difference gradient of a separable loss. Each component perturbs a
/// single forecast and differences only the affected term, which avoids
/// cancellation against the other N-1 terms of the mean.
std::vector<double> numeric_grad(LossKind kind, std::span<const double> r,
                                 std::span<const double> rhat, const GmadlParams& p, double h);

/// Central-difference gradient of MADL. Exactly zero on every component whose
/// forecast lies farther than h from 0: the sign term is locally constant.
std::vector<double> madl_numeric_grad(std::span<const double> r, std::span<const double> rhat,
                                      double h = kDefaultFdStep);

/// Derivative of the logistic function, evaluated as sigmoid(|u|)*sigmoid(-|u|).
double sigmoid_derivative(double u);

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t num_points = 0;
    std::size_t worst_index = 0;
    double worst_r = 0.0;
    double worst_rhat = 0.0;
};

/// Compares analytic and central-difference gradients componentwise. Relative
/// error uses the denominator max(1e-12, |analytic|, |numeric|).
GradCheckReport check_gradient(LossKind kind, std::span<const double> r,
                               std::span<const double> rhat, const GmadlParams& p = {},
                               double h = kDefaultFdStep);

}  // namespace gmadl
