#include "evdesnow/events.hpp"

#include "evdesnow/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace evdesnow {

namespace {

constexpr double kMinDeterminant = 1e-12;

std::int64_t round_half_up(double v) noexcept {
    return static_cast<std::int64_t>(std::floor(v + 0.5));
}

} // namespace

Homography::Homography() noexcept : h_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Homography::Homography(const std::array<double, 9>& h) : h_(h) {
    if (h_[8] == 0.0 || !std::isfinite(h_[8]))
        throw Error(ErrorCode::SingularHomography, "h33 must be finite and non-zero");
    const double scale = h_[8];
    for (auto& v : h_) v /= scale;
    const double det = determinant();
    if (!std::isfinite(det) || std::abs(det) <= kMinDeterminant)
        throw Error(ErrorCode::SingularHomography,
                    "determinant magnitude " + std::to_string(std::abs(det)) + " <= 1e-12");
}

Homography Homography::translation(double dx, double dy) {
    return Homography({1, 0, dx, 0, 1, dy, 0, 0, 1});
}

double Homography::determinant() const noexcept {
    const auto& m = h_;
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Homography Homography::inverse() const {
    const auto& m = h_;
    const double det = determinant();
    std::array<double, 9> inv{
        (m[4] * m[8] - m[5] * m[7]) / det, (m[2] * m[7] - m[1] * m[8]) / det,
        (m[1] * m[5] - m[2] * m[4]) / det, (m[5] * m[6] - m[3] * m[8]) / det,
        (m[0] * m[8] - m[2] * m[6]) / det, (m[2] * m[3] - m[0] * m[5]) / det,
        (m[3] * m[7] - m[4] * m[6]) / det, (m[1] * m[6] - m[0] * m[7]) / det,
        (m[0] * m[4] - m[1] * m[3]) / det,
    };
    return Homography(inv);
}

bool Homography::map(double x, double y, double& out_x, double& out_y) const noexcept {
    const auto& m = h_;
    const double w = m[6] * x + m[7] * y + m[8];
    if (!(w > 0.0)) return false;
    out_x = (m[0] * x + m[1] * y + m[2]) / w;
    out_y = (m[3] * x + m[4] * y + m[5]) / w;
    return std::isfinite(out_x) && std::isfinite(out_y);
}

void validate(const EventStream& stream) {
    const auto& g = stream.geometry;
    for (std::size_t i = 0; i < stream.events.size(); ++i) {
        const Event& e = stream.events[i];
        if (e.x >= g.width || e.y >= g.height)
            throw Error(ErrorCode::OutOfBounds,
                        "event " + std::to_string(i) + " at (" + std::to_string(e.x) + "," +
                            std::to_string(e.y) + ") outside " + std::to_string(g.width) + "x" +
                            std::to_string(g.height),
                        static_cast<std::int64_t>(i));
        if (e.p != 1 && e.p != -1)
            throw Error(ErrorCode::CorruptRecord,
                        "event " + std::to_string(i) + " has polarity " + std::to_string(e.p),
                        static_cast<std::int64_t>(i));
    }
}

bool is_canonical(std::span<const Event> events) noexcept {
    return std::is_sorted(events.begin(), events.end(), canonical_less);
}

EventStream canonicalize(EventStream stream) {
    validate(stream);
    if (!is_canonical(stream.events))
        std::sort(stream.events.begin(), stream.events.end(), canonical_less);
    return stream;
}

EventStream scale_time(const EventStream& stream, double s) {
    if (!(s > 0.0) || !std::isfinite(s))
        throw Error(ErrorCode::InvalidArgument, "time scale must be positive and finite");
    EventStream out{stream.geometry, {}};
    out.events.reserve(stream.events.size());
    constexpr long double kLimit = 18446744073709551616.0L; // 2^64
    const long double scale = s;
    for (const Event& e : stream.events) {
        const long double v = std::floor(static_cast<long double>(e.t) * scale + 0.5L);
        if (v >= kLimit)
            throw Error(ErrorCode::TimestampOverflow,
                        "t=" + std::to_string(e.t) + " scaled by " + std::to_string(s));
        Event scaled = e;
        scaled.t = static_cast<Timestamp>(v);
        out.events.push_back(scaled);
    }
    // Rounding keeps t monotone but can merge distinct timestamps.
    if (!is_canonical(out.events))
        std::sort(out.events.begin(), out.events.end(), canonical_less);
    return out;
}

EventStream flip_horizontal(const EventStream& stream) {
    EventStream out{stream.geometry, stream.events};
    const auto last = static_cast<int>(stream.geometry.width) - 1;
    for (Event& e : out.events) e.x = static_cast<std::uint16_t>(last - e.x);
    std::sort(out.events.begin(), out.events.end(), canonical_less);
    return out;
}

EventStream apply_homography(const EventStream& stream, const Homography& h) {
    EventStream out{stream.geometry, {}};
    out.events.reserve(stream.events.size());
    for (const Event& e : stream.events) {
        double mx = 0, my = 0;
        if (!h.map(e.x, e.y, mx, my)) continue;
        if (std::abs(mx) > 1e9 || std::abs(my) > 1e9) continue;
        const auto px = round_half_up(mx);
        const auto py = round_half_up(my);
        if (!stream.geometry.contains(px, py)) continue;
        Event w = e;
        w.x = static_cast<std::uint16_t>(px);
        w.y = static_cast<std::uint16_t>(py);
        out.events.push_back(w);
    }
    std::sort(out.events.begin(), out.events.end(), canonical_less);
    return out;
}

EventStream shift_time(const EventStream& stream, Timestamp offset) {
    EventStream out{stream.geometry, stream.events};
    for (Event& e : out.events) {
        if (e.t > std::numeric_limits<Timestamp>::max() - offset)
            throw Error(ErrorCode::TimestampOverflow, "shift by " + std::to_string(offset));
        e.t += offset;
    }
    return out;
}

std::pair<std::size_t, std::size_t> window_range(std::span<const Event> events,
                                                 TimeWindow window) noexcept {
    auto by_time = [](const Event& e, Timestamp t) { return e.t < t; };
    auto first = std::lower_bound(events.begin(), events.end(), window.begin, by_time);
    auto last = std::lower_bound(first, events.end(), std::max(window.begin, window.end), by_time);
    return {static_cast<std::size_t>(first - events.begin()),
            static_cast<std::size_t>(last - events.begin())};
}

EventStream slice(const EventStream& stream, TimeWindow window) {
    const auto [first, last] = window_range(stream.events, window);
    EventStream out{stream.geometry, {}};
    out.events.assign(stream.events.begin() + static_cast<std::ptrdiff_t>(first),
                      stream.events.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
}

EventStream merge(std::span<const EventStream> streams) {
    EventStream out;
    if (streams.empty()) return out;
    out.geometry = streams.front().geometry;
    std::size_t total = 0;
    for (const auto& s : streams) {
        if (s.geometry != out.geometry)
            throw Error(ErrorCode::GeometryMismatch, "merging streams of different geometry");
        total += s.events.size();
    }
    out.events.reserve(total);
    for (const auto& s : streams) out.events.insert(out.events.end(), s.events.begin(), s.events.end());
    std::sort(out.events.begin(), out.events.end(), canonical_less);
    return out;
}

std::int64_t polarity_sum(std::span<const Event> events) noexcept {
    std::int64_t sum = 0;
    for (const Event& e : events) sum += e.p;
    return sum;
}

} // namespace evdesnow
