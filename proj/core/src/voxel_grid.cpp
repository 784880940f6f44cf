#include "evdesnow/voxel_grid.hpp"

#include "evdesnow/error.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace evdesnow {

VoxelGrid::VoxelGrid(std::size_t bins, TimeWindow window, Geometry geometry)
    : bins_(bins), window_(window), geometry_(geometry), data_(bins * geometry.pixels(), 0.0) {}

double VoxelGrid::total() const noexcept {
    return std::accumulate(data_.begin(), data_.end(), 0.0);
}

VoxelGrid voxelize(const EventStream& stream, std::size_t bins, TimeWindow window) {
    if (bins == 0) throw Error(ErrorCode::InvalidBins, "bin count must be >= 1");
    if (window.end <= window.begin)
        throw Error(ErrorCode::InvalidWindow, "window [" + std::to_string(window.begin) + ", " +
                                                  std::to_string(window.end) + ") is empty");
    VoxelGrid grid(bins, window, stream.geometry);
    const double bin_width = static_cast<double>(window.end - window.begin) / static_cast<double>(bins);
    const auto last = static_cast<std::int64_t>(bins) - 1;
    const auto& g = stream.geometry;

    // Sequential accumulation in stream order keeps the result bit-reproducible.
    for (std::size_t i = 0; i < stream.events.size(); ++i) {
        const Event& e = stream.events[i];
        if (!window.contains(e.t)) continue;
        if (e.x >= g.width || e.y >= g.height)
            throw Error(ErrorCode::OutOfBounds, "event " + std::to_string(i),
                        static_cast<std::int64_t>(i));
        const double u = static_cast<double>(e.t - window.begin) / bin_width - 0.5;
        const auto k = static_cast<std::int64_t>(std::floor(u));
        const double frac = u - static_cast<double>(k);
        const double p = e.p;
        if (k < 0) {
            grid.at(0, e.x, e.y) += p;
        } else if (k >= last) {
            grid.at(static_cast<std::size_t>(last), e.x, e.y) += p;
        } else {
            grid.at(static_cast<std::size_t>(k), e.x, e.y) += p * (1.0 - frac);
            grid.at(static_cast<std::size_t>(k + 1), e.x, e.y) += p * frac;
        }
    }
    return grid;
}

} // namespace evdesnow
