#include "gmadl/gradients.hpp"

#include <algorithm>
#include <cmath>

#include "gmadl/error.hpp"

namespace gmadl {

double sigmoid_derivative(double u) {
    const double m = std::abs(u);
    return sigmoid(m) * sigmoid(-m);
}

std::vector<double> gmadl_grad(std::span<const double> r, std::span<const double> rhat,
                               const GmadlParams& p) {
    p.validate();
    check_aligned(r, rhat);
    const double inv_n = 1.0 / static_cast<double>(r.size());
    std::vector<double> g(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i] == 0.0) {
            g[i] = 0.0;
            continue;
        }
        const double u = p.a * (r[i] * rhat[i]);
        g[i] = -inv_n * p.a * r[i] * sigmoid_derivative(u) * abs_pow(r[i], p.b);
    }
    return g;
}

std::vector<double> mse_grad(std::span<const double> r, std::span<const double> rhat) {
    check_aligned(r, rhat);
    const double scale = 2.0 / static_cast<double>(r.size());
    std::vector<double> g(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        g[i] = scale * (rhat[i] - r[i]);
    }
    return g;
}

std::vector<double> mae_grad(std::span<const double> r, std::span<const double> rhat) {
    check_aligned(r, rhat);
    const double inv_n = 1.0 / static_cast<double>(r.size());
    std::vector<double> g(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double d = rhat[i] - r[i];
        g[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    return g;
}

std::vector<double> loss_grad(LossKind kind, std::span<const double> r,
                              std::span<const double> rhat, const GmadlParams& p) {
    switch (kind) {
        case LossKind::mse:
            return mse_grad(r, rhat);
        case LossKind::mae:
            return mae_grad(r, rhat);
        case LossKind::gmadl:
            return gmadl_grad(r, rhat, p);
        case LossKind::madl:
            break;
    }
    throw ValidationError("madl has no analytic gradient (zero almost everywhere)");
}

std::vector<double> numeric_grad(LossKind kind, std::span<const double> r,
                                 std::span<const double> rhat, const GmadlParams& p, double h) {
    if (!std::isfinite(h) || !(h > 0.0)) {
        throw ValidationError("finite-difference step must be > 0");
    }
    check_aligned(r, rhat);
    if (kind == LossKind::gmadl) {
        p.validate();
    }
    const double inv_n = 1.0 / static_cast<double>(r.size());
    std::vector<double> g(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double up = rhat[i] + h;
        const double down = rhat[i] - h;
        const double diff = loss_term(kind, r[i], up, p) - loss_term(kind, r[i], down, p);
        g[i] = inv_n * diff / (up - down);
    }
    return g;
}

std::vector<double> madl_numeric_grad(std::span<const double> r, std::span<const double> rhat,
                                      double h) {
    return numeric_grad(LossKind::madl, r, rhat, {}, h);
}

GradCheckReport check_gradient(LossKind kind, std::span<const double> r,
                               std::span<const double> rhat, const GmadlParams& p, double h) {
    const std::vector<double> analytic = loss_grad(kind, r, rhat, p);
    const std::vector<double> numeric = numeric_grad(kind, r, rhat, p, h);

    GradCheckReport report;
    report.num_points = analytic.size();
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double abs_err = std::abs(analytic[i] - numeric[i]);
        const double denom = std::max({1e-12, std::abs(analytic[i]), std::abs(numeric[i])});
        const double rel_err = abs_err / denom;
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        if (i == 0 || rel_err > report.max_rel_error) {
            report.max_rel_error = rel_err;
            report.worst_index = i;
            report.worst_r = r[i];
            report.worst_rhat = rhat[i];
        }
    }
    return report;
}

}  // namespace gmadl
