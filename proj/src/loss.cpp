#include "gmadl/loss.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "gmadl/error.hpp"

namespace gmadl {

namespace {

double sign_of(double x) {
    if (x > 0.0) {
        return 1.0;
    }
    if (x < 0.0) {
        return -1.0;
    }
    return 0.0;
}

template <typename Term>
double mean_of_terms(std::span<const double> r, std::span<const double> rhat, Term term) {
    check_aligned(r, rhat);
    double sum = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        sum += term(r[i], rhat[i]);
    }
    return sum / static_cast<double>(r.size());
}

}  // namespace

void ReturnSeries::validate() const {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw ValidationError("return series: non-finite value at index " + std::to_string(i));
        }
    }
    if (timestamps.empty()) {
        return;
    }
    if (timestamps.size() != values.size()) {
        throw ValidationError("return series: timestamps and values differ in length");
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (timestamps[i] <= timestamps[i - 1]) {
            throw ValidationError("return series: timestamps not strictly increasing at index " +
                                  std::to_string(i));
        }
    }
}

void GmadlParams::validate() const {
    if (!std::isfinite(a) || !(a > 0.0)) {
        throw ValidationError("gmadl: parameter a must be finite and > 0");
    }
    if (!std::isfinite(b) || !(b > 0.0)) {
        throw ValidationError("gmadl: parameter b must be finite and > 0");
    }
}

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::mse:
            return "mse";
        case LossKind::mae:
            return "mae";
        case LossKind::madl:
            return "madl";
        case LossKind::gmadl:
            return "gmadl";
    }
    return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "mse") {
        return LossKind::mse;
    }
    if (name == "mae") {
        return LossKind::mae;
    }
    if (name == "madl") {
        return LossKind::madl;
    }
    if (name == "gmadl") {
        return LossKind::gmadl;
    }
    throw ValidationError("unknown loss kind '" + std::string(name) + "'");
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double centered_sigmoid(double x) { return 0.5 * std::tanh(0.5 * x); }

double abs_pow(double r, double b) {
    if (r == 0.0) {
        return 0.0;
    }
    return std::pow(std::abs(r), b);
}

double gmadl_term(double r, double rhat, const GmadlParams& p) {
    p.validate();
    // + 0.0 folds -0 into +0.
    return -centered_sigmoid(p.a * (r * rhat)) * abs_pow(r, p.b) + 0.0;
}

double madl_term(double r, double rhat) {
    return -(sign_of(r) * sign_of(rhat)) * std::abs(r) + 0.0;
}

void check_aligned(std::span<const double> r, std::span<const double> rhat) {
    if (r.size() != rhat.size()) {
        throw ValidationError("length mismatch: " + std::to_string(r.size()) + " returns vs " +
                              std::to_string(rhat.size()) + " forecasts");
    }
    if (r.empty()) {
        throw ValidationError("empty series");
    }
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!std::isfinite(r[i]) || !std::isfinite(rhat[i])) {
            throw ValidationError("non-finite input at index " + std::to_string(i));
        }
    }
}

double mse(std::span<const double> r, std::span<const double> rhat) {
    return mean_of_terms(r, rhat, [](double ri, double xi) {
        const double d = xi - ri;
        return d * d;
    });
}

double mae(std::span<const double> r, std::span<const double> rhat) {
    return mean_of_terms(r, rhat, [](double ri, double xi) { return std::abs(xi - ri); });
}

double madl(std::span<const double> r, std::span<const double> rhat) {
    return mean_of_terms(r, rhat, madl_term);
}

double gmadl(std::span<const double> r, std::span<const double> rhat, const GmadlParams& p) {
    p.validate();
    return mean_of_terms(r, rhat, [&p](double ri, double xi) {
        return -centered_sigmoid(p.a * (ri * xi)) * abs_pow(ri, p.b);
    });
}

double evaluate_loss(LossKind kind, std::span<const double> r, std::span<const double> rhat,
                     const GmadlParams& p) {
    switch (kind) {
        case LossKind::mse:
            return mse(r, rhat);
        case LossKind::mae:
            return mae(r, rhat);
        case LossKind::madl:
            return madl(r, rhat);
        case LossKind::gmadl:
            return gmadl(r, rhat, p);
    }
    throw ValidationError("unknown loss kind");
}

double loss_term(LossKind kind, double r, double rhat, const GmadlParams& p) {
    switch (kind) {
        case LossKind::mse:
            return (rhat - r) * (rhat - r);
        case LossKind::mae:
            return std::abs(rhat - r);
        case LossKind::madl:
            return madl_term(r, rhat);
        case LossKind::gmadl:
            return gmadl_term(r, rhat, p);
    }
    throw ValidationError("unknown loss kind");
}

std::vector<double> AxisRange::points() const {
    if (n < 2) {
        throw ValidationError("axis range needs at least 2 points");
    }
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw ValidationError("axis range needs finite lo < hi");
    }
    std::vector<double> out(n);
    // Weighted form keeps mirrored ranges exactly antisymmetric and hits both ends.
    const double span = static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / span;
        const double u = static_cast<double>(n - 1 - k) / span;
        out[k] = lo * u + hi * t;
    }
    return out;
}

SurfaceGrid surface_grid(LossKind loss, std::optional<GmadlParams> p, const AxisRange& r_range,
                         const AxisRange& rhat_range) {
    if (loss != LossKind::madl && loss != LossKind::gmadl) {
        throw ValidationError("surface grids are defined for madl and gmadl only");
    }
    if (loss == LossKind::gmadl) {
        if (!p) {
            throw ValidationError("gmadl surface requires parameters a and b");
        }
        p->validate();
    } else {
        p.reset();
    }

    SurfaceGrid grid;
    grid.loss = loss;
    grid.params = p;
    grid.r_axis = r_range.points();
    grid.rhat_axis = rhat_range.points();
    grid.z.reserve(grid.r_axis.size() * grid.rhat_axis.size());
    for (double r : grid.r_axis) {
        for (double x : grid.rhat_axis) {
            grid.z.push_back(loss == LossKind::gmadl ? gmadl_term(r, x, *p) : madl_term(r, x));
        }
    }
    return grid;
}

void write_surface_csv(std::ostream& out, const SurfaceGrid& grid) {
    out << "r,rhat,z\n";
    char line[128];
    for (std::size_t i = 0; i < grid.r_axis.size(); ++i) {
        for (std::size_t j = 0; j < grid.rhat_axis.size(); ++j) {
            std::snprintf(line, sizeof(line), "%.12e,%.12e,%.12e\n", grid.r_axis[i],
                          grid.rhat_axis[j], grid.at(i, j));
            out << line;
        }
    }
}

}  // namespace gmadl
