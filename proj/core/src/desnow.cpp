#include "evdesnow/desnow.hpp"

#include "evdesnow/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace evdesnow::desnow {

namespace {

std::int64_t round_half_up(double v) noexcept {
    return static_cast<std::int64_t>(std::floor(v + 0.5));
}

void require_window(TimeWindow window) {
    if (window.end <= window.begin)
        throw Error(ErrorCode::EmptyWindow, "window [" + std::to_string(window.begin) + ", " +
                                                std::to_string(window.end) + ") is empty");
}

const EventStream& canonical_view(const EventStream& stream, EventStream& storage) {
    if (is_canonical(stream.events)) return stream;
    storage = canonicalize(stream);
    return storage;
}

} // namespace

void ContrastModel::validate() const {
    if (!(contrast > 0.0 && contrast < 1.0))
        throw Error(ErrorCode::InvalidArgument, "contrast threshold must lie in (0, 1)");
    if (!(flake_intensity > 0.0 && flake_intensity <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "flake intensity must lie in (0, 1]");
}

double accumulate_polarity(const EventStream& stream, std::uint32_t x, std::uint32_t y,
                           TimeWindow window) {
    if (!stream.geometry.contains(x, y))
        throw Error(ErrorCode::OutOfBounds,
                    "pixel (" + std::to_string(x) + "," + std::to_string(y) + ")");
    EventStream storage;
    const EventStream& s = canonical_view(stream, storage);
    const auto [first, last] = window_range(s.events, window);
    std::int64_t sum = 0;
    for (std::size_t i = first; i < last; ++i) {
        const Event& e = s.events[i];
        if (e.x == x && e.y == y) sum += e.p;
    }
    return static_cast<double>(sum);
}

double estimate_background_static(const ContrastModel& model, double accumulated) {
    return clamp01(model.flake_intensity - model.contrast * accumulated);
}

EventStream warp_events(const EventStream& stream, Velocity velocity, Timestamp t_ref) {
    EventStream out{stream.geometry, {}};
    out.events.reserve(stream.events.size());
    for (const Event& e : stream.events) {
        const double dt = (static_cast<double>(t_ref) - static_cast<double>(e.t)) * 1e-6;
        const auto x = round_half_up(e.x + velocity.vx * dt);
        const auto y = round_half_up(e.y + velocity.vy * dt);
        if (!stream.geometry.contains(x, y)) continue;
        Event w = e;
        w.x = static_cast<std::uint16_t>(x);
        w.y = static_cast<std::uint16_t>(y);
        out.events.push_back(w);
    }
    if (!is_canonical(out.events))
        std::sort(out.events.begin(), out.events.end(), canonical_less);
    return out;
}

Footprint rasterize_footprint(std::span<const Streak> streaks, Geometry geometry,
                              const FootprintQuery& query) {
    Footprint fp{OcclusionMask(geometry),
                 std::vector<double>(geometry.pixels(), std::numeric_limits<double>::quiet_NaN())};
    std::vector<double> best_distance(geometry.pixels(), std::numeric_limits<double>::infinity());
    const double t_ref = static_cast<double>(query.t_ref);
    const double sweep_begin = t_ref - static_cast<double>(query.exposure);

    for (const Streak& s : streaks) {
        const double speed = s.velocity.speed();
        // Trailing-edge events stop once a slow flake has crossed its last pixel.
        const double slack = speed > 0.0 ? (1.0 + s.tolerance) / speed * 1e6 : 0.0;
        const double lo = std::max(sweep_begin, static_cast<double>(s.t_start) - slack);
        const double hi = std::min(t_ref, static_cast<double>(s.t_end) + slack);
        if (lo > hi) continue;
        const double radius = query.radius >= 0.0 ? query.radius : s.radius + query.margin;

        const double ax = s.x_at(lo), ay = s.y_at(lo);
        const double bx = s.x_at(hi), by = s.y_at(hi);
        const double sx = bx - ax, sy = by - ay;
        const double seg2 = sx * sx + sy * sy;

        const double reach = radius + 1.0;
        const auto x_begin = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(ax, bx) - reach)));
        const auto x_end = std::min<std::int64_t>(geometry.width - 1, static_cast<std::int64_t>(std::ceil(std::max(ax, bx) + reach)));
        const auto y_begin = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(ay, by) - reach)));
        const auto y_end = std::min<std::int64_t>(geometry.height - 1, static_cast<std::int64_t>(std::ceil(std::max(ay, by) + reach)));

        for (std::int64_t y = y_begin; y <= y_end; ++y) {
            for (std::int64_t x = x_begin; x <= x_end; ++x) {
                double u = 0.0;
                if (seg2 > 0.0)
                    u = std::clamp(((x - ax) * sx + (y - ay) * sy) / seg2, 0.0, 1.0);
                const double d = std::hypot(x - (ax + u * sx), y - (ay + u * sy));
                double w = 0.0;
                if (d <= radius) w = 1.0;
                else if (d < reach) w = reach - d;
                if (w <= 0.0) continue;
                const auto i = static_cast<std::size_t>(y) * geometry.width + static_cast<std::size_t>(x);
                if (w > fp.mask[i] || (w == fp.mask[i] && d < best_distance[i])) {
                    fp.mask[i] = w;
                    best_distance[i] = d;
                    fp.closest_time_us[i] = lo + u * (hi - lo);
                }
            }
        }
    }
    return fp;
}

OcclusionMask build_occlusion_mask(std::span<const Streak> streaks, Timestamp t_ref,
                                   Geometry geometry, double radius) {
    if (!(radius >= 0.0)) throw Error(ErrorCode::InvalidArgument, "mask radius must be >= 0");
    OcclusionMask mask = rasterize_footprint(streaks, geometry, FootprintQuery{t_ref, 0, radius, 0.0}).mask;
    for (double& m : mask.values()) m = m >= 1.0 ? 1.0 : 0.0;
    return mask;
}

namespace {

IntensityImage estimate_over_footprint(const ContrastModel& model, const EventStream& stream,
                                       const Footprint& fp, Velocity flow, Timestamp t_ref,
                                       TimeWindow window, const MotionEstimateOptions& options) {
    const Geometry g = stream.geometry;
    std::vector<std::int64_t> accumulated(g.pixels(), 0);
    const auto [first, last] = window_range(stream.events, window);
    for (std::size_t k = first; k < last; ++k) {
        const Event& e = stream.events[k];
        const double dt = (static_cast<double>(t_ref) - static_cast<double>(e.t)) * 1e-6;
        const auto x = round_half_up(e.x + flow.vx * dt);
        const auto y = round_half_up(e.y + flow.vy * dt);
        if (!g.contains(x, y)) continue;
        const auto i = static_cast<std::size_t>(y) * g.width + static_cast<std::size_t>(x);
        if (fp.mask[i] <= 0.0) continue;
        if (static_cast<double>(e.t) > fp.closest_time_us[i]) continue;
        accumulated[i] += e.p;
    }

    IntensityImage out(g, std::numeric_limits<double>::quiet_NaN());
    const bool observed = options.source == FlakeIntensitySource::Observed;
    for (std::size_t i = 0; i < g.pixels(); ++i) {
        if (fp.mask[i] <= 0.0 || accumulated[i] == 0) continue;
        const double flake = observed ? (*options.observed)[i] : model.flake_intensity;
        out[i] = clamp01(flake - model.contrast * static_cast<double>(accumulated[i]));
    }
    return out;
}

void check_motion_inputs(const ContrastModel& model, const EventStream& stream, TimeWindow window,
                         const MotionEstimateOptions& options) {
    model.validate();
    require_window(window);
    if (options.source == FlakeIntensitySource::Observed) {
        if (options.observed == nullptr)
            throw Error(ErrorCode::InvalidArgument, "observed flake intensity needs an image");
        if (options.observed->geometry() != stream.geometry)
            throw Error(ErrorCode::DimensionMismatch, "observed image vs event geometry");
    }
}

} // namespace

IntensityImage estimate_background_motion(const ContrastModel& model, const EventStream& stream,
                                          std::span<const Streak> streaks,
                                          Velocity background_flow, Timestamp t_ref,
                                          TimeWindow window, const MotionEstimateOptions& options) {
    check_motion_inputs(model, stream, window, options);
    EventStream storage;
    const EventStream& s = canonical_view(stream, storage);
    const Footprint fp = rasterize_footprint(
        streaks, s.geometry, FootprintQuery{t_ref, options.exposure, -1.0, options.footprint_margin});
    return estimate_over_footprint(model, s, fp, background_flow, t_ref, window, options);
}

IntensityImage fuse(const IntensityImage& input, const IntensityImage& predicted,
                    const OcclusionMask& mask) {
    require_same_shape(input, predicted, "fuse input/predicted");
    require_same_shape(input, mask, "fuse input/mask");
    IntensityImage out(input.width(), input.height());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double m = std::clamp(mask[i], 0.0, 1.0);
        const double a = input[i];
        const double b = predicted[i];
        const double v = m * b + (1.0 - m) * a;
        out[i] = clamp01(std::clamp(v, std::min(a, b), std::max(a, b)));
    }
    return out;
}

Restoration restore_image(const IntensityImage& image, const EventStream& stream,
                          const RestoreOptions& options) {
    if (image.geometry() != stream.geometry)
        throw Error(ErrorCode::DimensionMismatch, "image vs event stream geometry");
    options.model.validate();
    options.prior.validate();
    require_window(options.window);

    EventStream storage;
    const EventStream& canonical = canonical_view(stream, storage);
    const EventStream windowed = slice(canonical, options.window);
    const Timestamp t_ref = options.window.end;

    Restoration result;
    result.streaks = detect_streaks(windowed, options.prior, options.min_support, options.detector);

    MotionEstimateOptions motion{options.source, &image, options.exposure, options.footprint_margin};
    const Footprint fp = rasterize_footprint(
        result.streaks, windowed.geometry,
        FootprintQuery{t_ref, options.exposure, -1.0, options.footprint_margin});
    IntensityImage predicted = estimate_over_footprint(options.model, windowed, fp,
                                                       options.background_flow, t_ref,
                                                       options.window, motion);
    result.mask = fp.mask;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!std::isnan(predicted[i])) continue;
        predicted[i] = image[i];
        result.mask[i] = 0.0;
    }

    result.image = fuse(image, predicted, result.mask);
    return result;
}

Restoration restore_image(const IntensityImage& image, const EventStream& stream,
                          const ContrastModel& model, const VelocityPrior& prior,
                          Velocity background_flow, TimeWindow window) {
    RestoreOptions options;
    options.model = model;
    options.prior = prior;
    options.background_flow = background_flow;
    options.window = window;
    return restore_image(image, stream, options);
}

} // namespace evdesnow::desnow
