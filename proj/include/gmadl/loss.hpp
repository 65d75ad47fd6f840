#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gmadl {

/// Observed simple returns R_i, optionally stamped with epoch seconds.
struct ReturnSeries {
    std::vector<double> values;
    std::vector<std::int64_t> timestamps;  // empty or same length as values

    std::size_t size() const { return values.size(); }
    /// Throws ValidationError on non-finite values or bad timestamps.
    void validate() const;
};

/// Predicted returns aligned one-to-one with a ReturnSeries.
struct ForecastSeries {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

/// Slope `a` and magnitude exponent `b` of the generalized directional loss.
struct GmadlParams {
    double a = 1000.0;
    double b = 1.0;

    void validate() const;
    friend bool operator==(const GmadlParams&, const GmadlParams&) = default;
};

enum class LossKind { mse, mae, madl, gmadl };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// Logistic function 1/(1+exp(-x)), evaluated without overflow for any finite x.
double sigmoid(double x);

/// sigmoid(x) - 0.5, computed as 0.5*tanh(x/2). Exactly odd in x.
double centered_sigmoid(double x);

/// |r|^b with the r == 0 case pinned to exactly 0.
double abs_pow(double r, double b);

/// Single-observation generalized directional loss term.
double gmadl_term(double r, double rhat, const GmadlParams& p);

/// Single-observation directional loss term: -sign(r*rhat)*|r|, sign(0) = 0.
double madl_term(double r, double rhat);

// Series losses. All require equal, non-zero lengths and finite values and
// throw ValidationError otherwise. Sums run left to right.
double mse(std::span<const double> r, std::span<const double> rhat);
double mae(std::span<const double> r, std::span<const double> rhat);
double madl(std::span<const double> r, std::span<const double> rhat);
double gmadl(std::span<const double> r, std::span<const double> rhat, const GmadlParams& p);

/// Dispatch on `kind`; `p` is only read for LossKind::gmadl.
double evaluate_loss(LossKind kind, std::span<const double> r, std::span<const double> rhat,
                     const GmadlParams& p = {});

/// Per-observation term of the selected loss, so that the series loss equals
/// the mean of terms.
double loss_term(LossKind kind, double r, double rhat, const GmadlParams& p = {});

/// Validates a pair of aligned series for loss evaluation.
void check_aligned(std::span<const double> r, std::span<const double> rhat);

struct AxisRange {
    double lo = -1.0;
    double hi = 1.0;
    std::size_t n = 101;

    std::vector<double> points() const;
};

struct SurfaceGrid {
    std::vector<double> r_axis;
    std::vector<double> rhat_axis;
    std::vector<double> z;  // row-major, rows follow r_axis
    LossKind loss = LossKind::madl;
    std::optional<GmadlParams> params;  // empty for MADL

    double at(std::size_t i, std::size_t j) const { return z[i * rhat_axis.size() + j]; }
};

/// Samples the per-term loss on a regular (r, rhat) grid. Only MADL and GMADL
/// surfaces are supported; `p` is required for GMADL.
SurfaceGrid surface_grid(LossKind loss, std::optional<GmadlParams> p, const AxisRange& r_range,
                         const AxisRange& rhat_range);

/// CSV with header `r,rhat,z`, one row per grid point, `%.12e` formatting.
void write_surface_csv(std::ostream& out, const SurfaceGrid& grid);

}  // namespace gmadl
