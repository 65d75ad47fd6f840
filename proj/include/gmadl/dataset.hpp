#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gmadl {

/// Supervised samples: row i holds `lookback` lagged returns, target i is the
/// return of the interval right after that window.
struct WindowedDataset {
    std::size_t lookback = 0;
    std::vector<double> features;  // row-major, size() * lookback
    std::vector<double> targets;

    std::size_t size() const { return targets.size(); }
    bool empty() const { return targets.empty(); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features).subspan(i * lookback, lookback);
    }
    /// Rows [begin, end) as a new dataset.
    WindowedDataset slice(std::size_t begin, std::size_t end) const;
};

}  // namespace gmadl
