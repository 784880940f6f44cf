#pragma once

#include "evdesnow/desnow.hpp"
#include "evdesnow/events.hpp"
#include "evdesnow/image.hpp"
#include "evdesnow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace evtest {

using namespace evdesnow;

inline constexpr int kPropertyCases = 100;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::uint64_t uniform_int(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

/// Unsorted events with timestamps in [0, t_max].
inline EventStream random_stream(std::mt19937_64& rng, Geometry g, std::size_t n, Timestamp t_max) {
    EventStream s{g, {}};
    s.events.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Event e;
        e.t = uniform_int(rng, 0, t_max);
        e.x = static_cast<std::uint16_t>(uniform_int(rng, 0, g.width - 1));
        e.y = static_cast<std::uint16_t>(uniform_int(rng, 0, g.height - 1));
        e.p = uniform_int(rng, 0, 1) ? 1 : -1;
        s.events.push_back(e);
    }
    return s;
}

template <typename Tag>
Plane<Tag> random_plane(std::mt19937_64& rng, std::size_t w, std::size_t h, double lo = 0.0, double hi = 1.0) {
    Plane<Tag> p(w, h);
    for (double& v : p.values()) v = uniform(rng, lo, hi);
    return p;
}

inline IntensityImage random_image(std::mt19937_64& rng, std::size_t w, std::size_t h) {
    return random_plane<IntensityTag>(rng, w, h);
}

/// True when every value of `p` lies within `tol` of `v`.
template <typename Tag>
bool all_near(const Plane<Tag>& p, double v, double tol = 0.0) {
    return std::all_of(p.values().begin(), p.values().end(), [&](double x) { return std::abs(x - v) <= tol; });
}

inline std::vector<Event> sorted_copy(std::vector<Event> v) {
    std::stable_sort(v.begin(), v.end(), [](const Event& a, const Event& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.y != b.y) return a.y < b.y;
        if (a.x != b.x) return a.x < b.x;
        return a.p < b.p;
    });
    return v;
}

/// Applies both compositing rules with a plain double loop.
inline std::vector<Event> composite_oracle(const EventStream& background, const EventStream& snow,
                                           const IntensityImage& hazy, double snow_intensity,
                                           double contrast, Timestamp overlap) {
    std::vector<Event> kept_snow;
    for (const Event& e : snow.events)
        if (std::abs(hazy(e.x, e.y) - snow_intensity) > contrast) kept_snow.push_back(e);
    std::vector<Event> out = kept_snow;
    for (const Event& b : background.events) {
        bool hit = false;
        for (const Event& s : kept_snow) {
            const Timestamp dt = b.t > s.t ? b.t - s.t : s.t - b.t;
            if (s.x == b.x && s.y == b.y && dt <= overlap) {
                hit = true;
                break;
            }
        }
        if (!hit) out.push_back(b);
    }
    return sorted_copy(out);
}

inline double psnr_oracle(const IntensityImage& a, const IntensityImage& b) {
    long double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const long double d = static_cast<long double>(a[i]) - b[i];
        sum += d * d;
    }
    const double mse = static_cast<double>(sum / a.size());
    if (mse < 1e-12) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

/// Direct 11x11 Gaussian-window SSIM over every valid window position.
inline double ssim_oracle(const IntensityImage& a, const IntensityImage& b) {
    constexpr int k = 11;
    constexpr double sigma = 1.5;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double w[k][k];
    double norm = 0.0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const double di = i - 5, dj = j - 5;
            w[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
            norm += w[i][j];
        }
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + k <= a.height(); ++y)
        for (std::size_t x = 0; x + k <= a.width(); ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    ma += w[i][j] / norm * a(x + j, y + i);
                    mb += w[i][j] / norm * b(x + j, y + i);
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    const double da = a(x + j, y + i) - ma, db = b(x + j, y + i) - mb;
                    va += w[i][j] / norm * da * da;
                    vb += w[i][j] / norm * db * db;
                    cov += w[i][j] / norm * da * db;
                }
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

/// One flake crossing a constant background; the flake is born after t = 0.
inline synth::FlakeScene single_flake_scene(std::size_t size, double background, double flake,
                                            double contrast, double vx, double vy, double x0, double y0,
                                            double radius, Timestamp duration) {
    synth::FlakeScene scene;
    scene.background = IntensityImage(size, size, background);
    scene.contrast = contrast;
    scene.duration = duration;
    synth::Flake f;
    f.radius = radius;
    f.intensity = flake;
    f.x = x0;
    f.y = y0;
    f.vx = vx;
    f.vy = vy;
    f.birth = 1000;
    scene.flakes.push_back(f);
    scene.frame_times = {duration};
    return scene;
}

struct Recovery {
    double mae = 0.0;        ///< over ground-truth occluded pixels
    std::size_t occluded = 0;
    std::size_t streaks = 0;
    IntensityImage restored;
};

/// Simulates `scene`, restores its last frame from the events in
/// [t - window, t) and scores the occluded pixels against ground truth.
inline Recovery recover_last_frame(const synth::FlakeScene& scene, desnow::RestoreOptions options,
                                   Timestamp window) {
    const auto sim = synth::simulate_flake_scene(scene);
    const auto& frame = sim.frames.back();
    options.window = {frame.t > window ? frame.t - window : 0, frame.t};
    options.model.contrast = scene.contrast;
    options.background_flow = {scene.flow_x, scene.flow_y};
    const auto result = desnow::restore_image(frame.snowy, sim.events, options);
    Recovery r;
    r.streaks = result.streaks.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < frame.occlusion.size(); ++i) {
        if (frame.occlusion[i] < 0.5) continue;
        sum += std::abs(result.image[i] - frame.ground_truth[i]);
        ++r.occluded;
    }
    r.mae = r.occluded ? sum / static_cast<double>(r.occluded) : 0.0;
    r.restored = result.image;
    return r;
}

} // namespace evtest
