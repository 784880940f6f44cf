#include "evdesnow/synth.hpp"

#include "evdesnow/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace evdesnow::synth {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double sample_bilinear(const IntensityImage& img, double x, double y) noexcept {
    const double max_x = static_cast<double>(img.width() - 1);
    const double max_y = static_cast<double>(img.height() - 1);
    x = std::clamp(x, 0.0, max_x);
    y = std::clamp(y, 0.0, max_y);
    const auto x0 = static_cast<std::size_t>(std::floor(x));
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    const double top = img(x0, y0) * (1.0 - fx) + img(x1, y0) * fx;
    const double bottom = img(x0, y1) * (1.0 - fx) + img(x1, y1) * fx;
    return top * (1.0 - fy) + bottom * fy;
}

void validate_scene(const FlakeScene& scene) {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidScene, what); };
    if (scene.background.empty()) fail("background is empty");
    if (scene.duration == 0) fail("duration must be positive");
    if (!(scene.contrast > 0.0 && scene.contrast < 1.0)) fail("contrast must lie in (0, 1)");
    if (!(scene.rate_hz > 0.0) || scene.rate_hz > 1e6) fail("rate must lie in (0, 1e6] Hz");
    if (!std::isfinite(scene.flow_x) || !std::isfinite(scene.flow_y)) fail("flow must be finite");
    const double w = static_cast<double>(scene.background.width());
    const double h = static_cast<double>(scene.background.height());
    for (std::size_t i = 0; i < scene.flakes.size(); ++i) {
        const Flake& f = scene.flakes[i];
        const std::string tag = "flake " + std::to_string(i) + ": ";
        if (!(f.intensity > 0.0 && f.intensity <= 1.0)) fail(tag + "intensity must lie in (0, 1]");
        if (!(f.radius > 0.0)) fail(tag + "radius must be positive");
        if (f.death <= f.birth) fail(tag + "death must follow birth");
        if (!(f.x >= 0.0 && f.x <= w - 1.0 && f.y >= 0.0 && f.y <= h - 1.0))
            fail(tag + "centre outside the sensor at birth");
        if (!std::isfinite(f.vx) || !std::isfinite(f.vy)) fail(tag + "velocity must be finite");
    }
    for (Timestamp t : scene.frame_times)
        if (t > scene.duration) fail("frame time " + std::to_string(t) + " after scene end");
}

// Calls paint(pixel, flake intensity) for every pixel whose centre lies inside
// a flake alive at t; later flakes in the list paint last.
template <typename Paint>
void for_each_covered(const FlakeScene& scene, Timestamp t, Paint&& paint) {
    const auto w = static_cast<std::int64_t>(scene.background.width());
    const auto h = static_cast<std::int64_t>(scene.background.height());
    for (const Flake& f : scene.flakes) {
        if (t < f.birth || t >= f.death) continue;
        const double age = static_cast<double>(t - f.birth) * 1e-6;
        const double cx = f.x + f.vx * age;
        const double cy = f.y + f.vy * age;
        const double r2 = f.radius * f.radius;
        const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(cx - f.radius)));
        const auto x1 = std::min<std::int64_t>(w - 1, static_cast<std::int64_t>(std::floor(cx + f.radius)));
        const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(cy - f.radius)));
        const auto y1 = std::min<std::int64_t>(h - 1, static_cast<std::int64_t>(std::floor(cy + f.radius)));
        for (std::int64_t y = y0; y <= y1; ++y)
            for (std::int64_t x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) - cx;
                const double dy = static_cast<double>(y) - cy;
                if (dx * dx + dy * dy <= r2)
                    paint(static_cast<std::size_t>(y * w + x), f.intensity);
            }
    }
}

IntensityImage render_frame(const FlakeScene& scene, Timestamp t) {
    IntensityImage frame = background_at(scene, t);
    for_each_covered(scene, t, [&](std::size_t i, double v) { frame[i] = v; });
    return frame;
}

std::vector<Timestamp> sample_times(const FlakeScene& scene) {
    const double step = 1e6 / scene.rate_hz;
    const auto steps = static_cast<std::size_t>(std::ceil(static_cast<double>(scene.duration) / step - 1e-9));
    std::vector<Timestamp> times;
    times.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        const auto t = static_cast<Timestamp>(std::llround(static_cast<double>(k) * step));
        const Timestamp clamped = std::min(t, scene.duration);
        if (times.empty() || clamped > times.back()) times.push_back(clamped);
    }
    if (times.back() != scene.duration) times.push_back(scene.duration);
    return times;
}

} // namespace

void HazeParams::validate() const {
    if (!(atmospheric_light >= 0.0 && atmospheric_light <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "atmospheric light must lie in [0, 1]");
    if (!(beta >= 0.0) || !std::isfinite(beta))
        throw Error(ErrorCode::InvalidArgument, "beta must be a finite non-negative number");
}

void CompositeConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
    if (!(contrast > 0.0 && contrast < 1.0))
        throw Error(ErrorCode::InvalidArgument, "contrast must lie in (0, 1)");
    if (!(snow_intensity > 0.0 && snow_intensity <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "snow intensity must lie in (0, 1]");
    if (overlap_window == 0)
        throw Error(ErrorCode::InvalidArgument, "overlap window must be positive");
    for (const auto& aug : augmentations) {
        if (const auto* st = std::get_if<Stagger>(&aug)) {
            if (st->offsets.empty() || st->offsets.size() != st->homographies.size())
                throw Error(ErrorCode::InvalidArgument,
                            "stagger needs one homography per offset and at least one copy");
            for (std::size_t k = 1; k < st->offsets.size(); ++k)
                if (st->offsets[k] <= st->offsets[k - 1])
                    throw Error(ErrorCode::InvalidArgument, "stagger offsets must be strictly increasing");
        }
        if (const auto* sc = std::get_if<ScaleTime>(&aug); sc && !(sc->factor > 0.0))
            throw Error(ErrorCode::InvalidArgument, "time scale must be positive");
    }
}

IntensityImage render_haze(const IntensityImage& clean, const DepthMap& depth,
                           const HazeParams& params) {
    require_same_shape(clean, depth, "render_haze image/depth");
    params.validate();
    IntensityImage out(clean.width(), clean.height());
    const double a = params.atmospheric_light;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double d = depth[i];
        if (!(d >= 0.0))
            throw Error(ErrorCode::NegativeDepth, "depth " + std::to_string(d) + " at index " +
                                                      std::to_string(i));
        const double t = std::exp(-params.beta * d);
        const double j = clean[i];
        const double v = j * t + a * (1.0 - t);
        out[i] = clamp01(std::clamp(v, std::min(j, a), std::max(j, a)));
    }
    return out;
}

SnowLayer rasterize_snow_layer(const EventStream& snow, TimeWindow window, double snow_intensity) {
    if (window.end <= window.begin) throw Error(ErrorCode::EmptyWindow, "snow layer window is empty");
    const Geometry g = snow.geometry;
    const auto w = static_cast<std::int64_t>(g.width);
    const auto h = static_cast<std::int64_t>(g.height);
    std::vector<char> hit(g.pixels(), 0);
    for (const Event& e : snow.events)
        if (e.p > 0 && window.contains(e.t) && e.x < g.width && e.y < g.height)
            hit[std::size_t{e.y} * g.width + e.x] = 1;

    // Closing: 3x3 dilation then 3x3 erosion (out-of-sensor neighbours ignored).
    auto pass = [&](const std::vector<char>& in, bool dilate) {
        std::vector<char> out(in.size(), 0);
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) {
                bool any = false, all = true;
                for (std::int64_t dy = -1; dy <= 1; ++dy)
                    for (std::int64_t dx = -1; dx <= 1; ++dx) {
                        const auto nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const bool v = in[static_cast<std::size_t>(ny * w + nx)] != 0;
                        any = any || v;
                        all = all && v;
                    }
                out[static_cast<std::size_t>(y * w + x)] = dilate ? any : all;
            }
        return out;
    };
    const auto closed = pass(pass(hit, true), false);

    SnowLayer result{IntensityImage(g), OcclusionMask(g)};
    for (std::size_t i = 0; i < closed.size(); ++i) {
        if (!closed[i]) continue;
        result.layer[i] = snow_intensity;
        result.mask[i] = 1.0;
    }
    return result;
}

IntensityImage render_snow_image(const IntensityImage& hazy, const IntensityImage& layer,
                                 const OcclusionMask& mask, double alpha) {
    require_same_shape(hazy, layer, "render_snow_image hazy/layer");
    require_same_shape(hazy, mask, "render_snow_image hazy/mask");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
    IntensityImage out(hazy.width(), hazy.height());
    for (std::size_t i = 0; i < hazy.size(); ++i)
        out[i] = clamp01(hazy[i] + alpha * mask[i] * layer[i]);
    return out;
}

EventStream composite_events(const EventStream& background, const EventStream& snow,
                             const IntensityImage& hazy, const CompositeConfig& config) {
    if (background.geometry != snow.geometry || hazy.geometry() != background.geometry)
        throw Error(ErrorCode::GeometryMismatch, "background, snow and hazy image must share geometry");
    config.validate();
    validate(background);
    validate(snow);
    const Geometry g = background.geometry;

    std::vector<Event> admitted_snow;
    admitted_snow.reserve(snow.events.size());
    for (const Event& e : snow.events)
        if (std::abs(hazy(e.x, e.y) - config.snow_intensity) > config.contrast)
            admitted_snow.push_back(e);

    // Per-pixel sorted timestamps of admitted snow events (counting sort by pixel).
    std::vector<std::size_t> offsets(g.pixels() + 1, 0);
    for (const Event& e : admitted_snow) ++offsets[std::size_t{e.y} * g.width + e.x + 1];
    for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
    std::vector<Timestamp> times(admitted_snow.size());
    {
        std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
        for (const Event& e : admitted_snow) times[cursor[std::size_t{e.y} * g.width + e.x]++] = e.t;
        for (std::size_t p = 0; p < g.pixels(); ++p)
            std::sort(times.begin() + static_cast<std::ptrdiff_t>(offsets[p]),
                      times.begin() + static_cast<std::ptrdiff_t>(offsets[p + 1]));
    }

    EventStream out{g, std::move(admitted_snow)};
    const Timestamp window = config.overlap_window;
    for (const Event& e : background.events) {
        const std::size_t p = std::size_t{e.y} * g.width + e.x;
        const auto first = times.begin() + static_cast<std::ptrdiff_t>(offsets[p]);
        const auto last = times.begin() + static_cast<std::ptrdiff_t>(offsets[p + 1]);
        const Timestamp lo = e.t > window ? e.t - window : 0;
        const auto it = std::lower_bound(first, last, lo);
        const Timestamp hi = e.t > UINT64_MAX - window ? UINT64_MAX : e.t + window;
        const bool collides = it != last && *it <= hi;
        if (!collides) out.events.push_back(e);
    }
    std::sort(out.events.begin(), out.events.end(), canonical_less);
    return out;
}

EventStream apply_augmentation(const EventStream& stream, const Augmentation& augmentation) {
    return std::visit(
        overloaded{
            [&](const ScaleTime& s) { return scale_time(stream, s.factor); },
            [&](const FlipHorizontal&) { return flip_horizontal(stream); },
            [&](const Warp& w) { return apply_homography(stream, w.homography); },
            [&](const Stagger& s) {
                if (s.offsets.empty() || s.offsets.size() != s.homographies.size())
                    throw Error(ErrorCode::InvalidArgument, "stagger lists must have equal, non-zero length");
                std::vector<EventStream> copies;
                copies.reserve(s.offsets.size());
                for (std::size_t k = 0; k < s.offsets.size(); ++k)
                    copies.push_back(shift_time(apply_homography(stream, s.homographies[k]), s.offsets[k]));
                return merge(copies);
            },
        },
        augmentation);
}

EventStream augment_foreground(const EventStream& snow, const CompositeConfig& config) {
    config.validate();
    EventStream current = canonicalize(snow);
    for (const auto& aug : config.augmentations) current = apply_augmentation(current, aug);
    return current;
}

IntensityImage background_at(const FlakeScene& scene, Timestamp t) {
    if (scene.flow_x == 0.0 && scene.flow_y == 0.0) return scene.background;
    const double seconds = static_cast<double>(t) * 1e-6;
    const double sx = scene.flow_x * seconds;
    const double sy = scene.flow_y * seconds;
    IntensityImage out(scene.background.width(), scene.background.height());
    for (std::size_t y = 0; y < out.height(); ++y)
        for (std::size_t x = 0; x < out.width(); ++x)
            out(x, y) = sample_bilinear(scene.background, static_cast<double>(x) - sx,
                                        static_cast<double>(y) - sy);
    return out;
}

SimulatedScene simulate_flake_scene(const FlakeScene& scene) {
    validate_scene(scene);
    const Geometry g = scene.background.geometry();
    const double c = scene.contrast;
    const auto times = sample_times(scene);

    SimulatedScene result;
    result.events.geometry = g;

    // Reference level of pixel i is base[i] + level[i] * C.
    IntensityImage previous = render_frame(scene, times.front());
    const std::vector<double> base(previous.values().begin(), previous.values().end());
    std::vector<std::int64_t> level(g.pixels(), 0);

    for (std::size_t k = 1; k < times.size(); ++k) {
        const Timestamp t_prev = times[k - 1];
        const Timestamp t_cur = times[k];
        const double span = static_cast<double>(t_cur - t_prev);
        IntensityImage current = render_frame(scene, t_cur);
        for (std::size_t i = 0; i < g.pixels(); ++i) {
            const double reference = base[i] + static_cast<double>(level[i]) * c;
            const double diff = current[i] - reference;
            const auto n = static_cast<std::int64_t>(std::floor(std::abs(diff) / c + 1e-9));
            if (n == 0) continue;
            const std::int64_t sign = diff > 0 ? 1 : -1;
            const double change = current[i] - previous[i];
            for (std::int64_t j = 1; j <= n; ++j) {
                const double crossing = base[i] + static_cast<double>(level[i] + sign * j) * c;
                double frac = change != 0.0 ? (crossing - previous[i]) / change : 1.0;
                frac = std::clamp(frac, 0.0, 1.0);
                const auto t = t_prev + static_cast<Timestamp>(std::llround(frac * span));
                result.events.events.push_back(
                    Event{t, static_cast<std::uint16_t>(i % g.width),
                          static_cast<std::uint16_t>(i / g.width), static_cast<std::int8_t>(sign)});
            }
            level[i] += sign * n;
        }
        previous = std::move(current);
    }
    std::sort(result.events.events.begin(), result.events.events.end(), canonical_less);

    std::vector<Timestamp> frame_times = scene.frame_times;
    if (frame_times.empty()) frame_times.push_back(scene.duration);
    for (Timestamp ft : frame_times) {
        SceneFrame frame;
        frame.t = ft;
        frame.ground_truth = background_at(scene, ft);
        frame.snowy = frame.ground_truth;
        frame.occlusion = OcclusionMask(g);
        std::vector<Timestamp> exposure_samples;
        const Timestamp from = ft > scene.exposure ? ft - scene.exposure : 0;
        for (Timestamp t : times)
            if (t >= from && t < ft) exposure_samples.push_back(t);
        exposure_samples.push_back(ft);
        for (Timestamp t : exposure_samples)
            for_each_covered(scene, t, [&](std::size_t i, double v) {
                frame.snowy[i] = v;
                frame.occlusion[i] = 1.0;
            });
        result.frames.push_back(std::move(frame));
    }
    return result;
}

IntensityImage smooth_background(Geometry geometry, double low, double high, double cell,
                                 std::uint64_t seed) {
    if (!(cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "cell size must be positive");
    std::mt19937_64 rng(seed);
    const auto nodes_x = static_cast<std::size_t>(std::ceil(geometry.width / cell)) + 2;
    const auto nodes_y = static_cast<std::size_t>(std::ceil(geometry.height / cell)) + 2;
    std::vector<double> nodes(nodes_x * nodes_y);
    for (auto& v : nodes)
        v = low + (high - low) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    auto smooth = [](double f) { return f * f * (3.0 - 2.0 * f); };
    IntensityImage out(geometry);
    for (std::size_t y = 0; y < geometry.height; ++y)
        for (std::size_t x = 0; x < geometry.width; ++x) {
            const double gx = static_cast<double>(x) / cell;
            const double gy = static_cast<double>(y) / cell;
            const auto ix = static_cast<std::size_t>(gx);
            const auto iy = static_cast<std::size_t>(gy);
            const double fx = smooth(gx - static_cast<double>(ix));
            const double fy = smooth(gy - static_cast<double>(iy));
            auto node = [&](std::size_t a, std::size_t b) { return nodes[b * nodes_x + a]; };
            const double top = node(ix, iy) * (1 - fx) + node(ix + 1, iy) * fx;
            const double bottom = node(ix, iy + 1) * (1 - fx) + node(ix + 1, iy + 1) * fx;
            out(x, y) = top * (1 - fy) + bottom * fy;
        }
    return out;
}

} // namespace evdesnow::synth
