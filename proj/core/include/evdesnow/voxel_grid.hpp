#pragma once

#include "evdesnow/events.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace evdesnow {

/// B x H x W temporal binning of an event window. Bin k is centred at
/// t0 + (k + 0.5) * (t1 - t0) / B and each event splits its polarity
/// linearly between the two nearest centres (clamped at the outer centres).
class VoxelGrid {
public:
    VoxelGrid(std::size_t bins, TimeWindow window, Geometry geometry);

    std::size_t bins() const noexcept { return bins_; }
    TimeWindow window() const noexcept { return window_; }
    Geometry geometry() const noexcept { return geometry_; }

    double at(std::size_t bin, std::size_t x, std::size_t y) const noexcept {
        return data_[(bin * geometry_.height + y) * geometry_.width + x];
    }
    double& at(std::size_t bin, std::size_t x, std::size_t y) noexcept {
        return data_[(bin * geometry_.height + y) * geometry_.width + x];
    }
    std::span<const double> values() const noexcept { return data_; }
    std::span<const double> bin(std::size_t k) const noexcept {
        return std::span<const double>(data_).subspan(k * geometry_.pixels(), geometry_.pixels());
    }

    /// Sum over every cell; equals the in-window polarity sum.
    double total() const noexcept;

private:
    std::size_t bins_;
    TimeWindow window_;
    Geometry geometry_;
    std::vector<double> data_;
};

/// Throws InvalidBins if bins == 0, InvalidWindow if end <= begin.
VoxelGrid voxelize(const EventStream& stream, std::size_t bins, TimeWindow window);

} // namespace evdesnow
