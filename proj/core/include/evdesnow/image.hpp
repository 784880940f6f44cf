#pragma once

#include "evdesnow/error.hpp"
#include "evdesnow/events.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace evdesnow {

/// Row-major H x W field of doubles. The tag keeps intensities, masks and
/// depth maps from being mixed up at call sites.
template <typename Tag>
class Plane {
public:
    Plane() = default;
    Plane(std::size_t width, std::size_t height, double fill = 0.0)
        : width_(width), height_(height), data_(width * height, fill) {}
    explicit Plane(Geometry g, double fill = 0.0) : Plane(g.width, g.height, fill) {}
    Plane(std::size_t width, std::size_t height, std::vector<double> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (data_.size() != width_ * height_)
            throw Error(ErrorCode::DimensionMismatch,
                        "plane data size " + std::to_string(data_.size()) + " != " +
                            std::to_string(width_) + "x" + std::to_string(height_));
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    Geometry geometry() const noexcept {
        return {static_cast<std::uint32_t>(width_), static_cast<std::uint32_t>(height_)};
    }

    double& operator()(std::size_t x, std::size_t y) noexcept { return data_[y * width_ + x]; }
    double operator()(std::size_t x, std::size_t y) const noexcept { return data_[y * width_ + x]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    template <typename Other>
    bool same_shape(const Plane<Other>& o) const noexcept {
        return width_ == o.width() && height_ == o.height();
    }

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

struct IntensityTag {};
struct MaskTag {};
struct DepthTag {};

/// Luminance in [0, 1].
using IntensityImage = Plane<IntensityTag>;
/// 1 = snow-occluded, 0 = clear; always within [0, 1].
using OcclusionMask = Plane<MaskTag>;
/// Non-negative scene depth used for the transmission map.
using DepthMap = Plane<DepthTag>;

template <typename To, typename From>
Plane<To> plane_cast(const Plane<From>& p) {
    return Plane<To>(p.width(), p.height(),
                     std::vector<double>(p.values().begin(), p.values().end()));
}

template <typename A, typename B>
void require_same_shape(const Plane<A>& a, const Plane<B>& b, const char* what) {
    if (!a.same_shape(b))
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + ": " + std::to_string(a.width()) + "x" +
                        std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                        std::to_string(b.height()));
}

inline double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

} // namespace evdesnow
