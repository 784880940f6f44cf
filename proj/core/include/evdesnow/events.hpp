#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace evdesnow {

/// Microseconds since the stream epoch.
using Timestamp = std::uint64_t;

struct Event {
    Timestamp t = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t p = 1; ///< +1 or -1, never 0

    friend bool operator==(const Event&, const Event&) = default;
};

/// Canonical order: t, then y, x, p ascending.
inline bool canonical_less(const Event& a, const Event& b) noexcept {
    if (a.t != b.t) return a.t < b.t;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.p < b.p;
}

struct Geometry {
    std::uint32_t width = 0;
    std::uint32_t height = 0;

    bool contains(std::int64_t x, std::int64_t y) const noexcept {
        return x >= 0 && y >= 0 && x < static_cast<std::int64_t>(width) &&
               y < static_cast<std::int64_t>(height);
    }
    std::size_t pixels() const noexcept { return std::size_t{width} * height; }
    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Half-open interval [begin, end) in microseconds.
struct TimeWindow {
    Timestamp begin = 0;
    Timestamp end = 0;

    bool contains(Timestamp t) const noexcept { return t >= begin && t < end; }
    Timestamp length() const noexcept { return end > begin ? end - begin : 0; }
    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct EventStream {
    Geometry geometry;
    std::vector<Event> events;

    std::size_t size() const noexcept { return events.size(); }
    bool empty() const noexcept { return events.empty(); }
    friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// 3x3 projective map acting on (x, y, 1). Stored row-major with the last
/// entry normalised to 1.
class Homography {
public:
    Homography() noexcept;
    /// Throws SingularHomography if |det| <= 1e-12 or h[8] == 0.
    explicit Homography(const std::array<double, 9>& h);

    static Homography identity() noexcept { return Homography{}; }
    static Homography translation(double dx, double dy);

    const std::array<double, 9>& matrix() const noexcept { return h_; }
    double determinant() const noexcept;
    Homography inverse() const;

    /// Maps (x, y); returns false when the point goes to infinity (w <= 0).
    bool map(double x, double y, double& out_x, double& out_y) const noexcept;

    friend bool operator==(const Homography&, const Homography&) = default;

private:
    std::array<double, 9> h_;
};

/// Throws OutOfBounds(index) for the first event outside the sensor.
void validate(const EventStream& stream);

EventStream canonicalize(EventStream stream);
bool is_canonical(std::span<const Event> events) noexcept;

/// Timestamps become round-half-up(t * s). Order is preserved since s > 0.
EventStream scale_time(const EventStream& stream, double s);

/// x -> width - 1 - x, then canonical re-sort.
EventStream flip_horizontal(const EventStream& stream);

/// Nearest-pixel warp; events landing outside the sensor are dropped.
EventStream apply_homography(const EventStream& stream, const Homography& h);

/// Shifts every timestamp by `offset`; throws TimestampOverflow on wrap.
EventStream shift_time(const EventStream& stream, Timestamp offset);

/// Events with t in [begin, end); `stream` must be canonical.
EventStream slice(const EventStream& stream, TimeWindow window);

/// Index range [first, last) of the canonical events inside `window`.
std::pair<std::size_t, std::size_t> window_range(std::span<const Event> events,
                                                 TimeWindow window) noexcept;

/// Multiset union of several streams sharing one geometry, canonicalised.
EventStream merge(std::span<const EventStream> streams);

/// Signed polarity sum.
std::int64_t polarity_sum(std::span<const Event> events) noexcept;

} // namespace evdesnow
