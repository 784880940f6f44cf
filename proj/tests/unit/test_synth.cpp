#include "support.hpp"

#include "evdesnow/error.hpp"
#include "evdesnow/synth.hpp"

#include <doctest.h>

#include <numbers>
#include <set>
#include <tuple>

using namespace evdesnow;
using namespace evdesnow::synth;
using evtest::kPropertyCases;

TEST_CASE("render_haze") {
    const IntensityImage j(4, 3, 0.8);
    CHECK(render_haze(j, DepthMap(4, 3, 7.0), {0.3, 0.0}) == j);
    CHECK(evtest::all_near(render_haze(j, DepthMap(4, 3, 1e9), {0.2, 1.0}), 0.2, 1e-12));
    CHECK(evtest::all_near(render_haze(j, DepthMap(4, 3, std::numbers::ln2), {0.2, 1.0}), 0.5, 1e-9));
    CHECK_THROWS_AS(render_haze(j, DepthMap(4, 3, -1.0), {}), Error);
    CHECK_THROWS_AS(render_haze(j, DepthMap(3, 3), {}), Error);
}

TEST_CASE("render_haze matches the scalar formula and stays between J and A") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < kPropertyCases; ++i) {
        const auto j = evtest::random_image(rng, 7, 5);
        const auto d = evtest::random_plane<DepthTag>(rng, 7, 5, 0.0, 50.0);
        const HazeParams h{evtest::uniform(rng, 0, 1), evtest::uniform(rng, 0, 0.3)};
        const auto out = render_haze(j, d, h);
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double t = std::exp(-h.beta * d[k]);
            CHECK(std::abs(out[k] - (j[k] * t + h.atmospheric_light * (1 - t))) <= 1e-9);
            CHECK(out[k] >= std::min(j[k], h.atmospheric_light));
            CHECK(out[k] <= std::max(j[k], h.atmospheric_light));
        }
    }
}

TEST_CASE("rasterize_snow_layer") {
    const Geometry g{20, 20};
    const auto empty = rasterize_snow_layer(EventStream{g, {}}, {0, 100}, 0.9);
    for (double v : empty.layer.values()) CHECK(v == 0.0);
    for (double v : empty.mask.values()) CHECK(v == 0.0);

    const auto one = rasterize_snow_layer(EventStream{g, {{10, 10, 10, 1}}}, {0, 100}, 0.9);
    CHECK(one.layer(10, 10) == 0.9);
    CHECK(one.mask(10, 10) == 1.0);
    CHECK(one.mask(12, 12) == 0.0);

    // Negative events and events outside the window leave no mark.
    const auto neg = rasterize_snow_layer(EventStream{g, {{10, 3, 3, -1}, {200, 5, 5, 1}}}, {0, 100}, 0.9);
    CHECK(neg.mask(3, 3) == 0.0);
    CHECK(neg.mask(5, 5) == 0.0);
    CHECK_THROWS_AS(rasterize_snow_layer(EventStream{g, {}}, {5, 5}, 0.9), Error);
}

TEST_CASE("rasterize_snow_layer mask area tracks the swept disc") {
    FlakeScene scene;
    scene.background = IntensityImage(64, 64, 0.0);
    scene.contrast = 0.1;
    scene.duration = 20'000;
    Flake f;
    f.radius = 3.0;
    f.intensity = 0.9;
    f.x = 20;
    f.y = 10;
    f.vx = 300;
    f.vy = 1500;
    f.birth = 1000;
    scene.flakes.push_back(f);
    const auto sim = simulate_flake_scene(scene);
    const TimeWindow w{5000, 15000};
    const auto layer = rasterize_snow_layer(sim.events, w, 0.9);
    double area = 0.0;
    for (double v : layer.mask.values()) area += v;

    // Swept-disc oracle: pixel centres within r of the centre path over the window.
    double oracle = 0.0;
    const double t0 = (w.begin - 1000) * 1e-6, t1 = (w.end - 1000) * 1e-6;
    const double ax = f.x + f.vx * t0, ay = f.y + f.vy * t0;
    const double bx = f.x + f.vx * t1, by = f.y + f.vy * t1;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const double sx = bx - ax, sy = by - ay;
            const double u = std::clamp(((x - ax) * sx + (y - ay) * sy) / (sx * sx + sy * sy), 0.0, 1.0);
            if (std::hypot(x - ax - u * sx, y - ay - u * sy) <= f.radius) oracle += 1.0;
        }
    CAPTURE(area);
    CAPTURE(oracle);
    CHECK(std::abs(area - oracle) <= 0.2 * oracle);
}

TEST_CASE("render_snow_image") {
    const IntensityImage hazy(3, 3, 0.4), layer(3, 3, 0.8);
    CHECK(render_snow_image(hazy, layer, OcclusionMask(3, 3, 1.0), 0.0) == hazy);
    CHECK(render_snow_image(hazy, layer, OcclusionMask(3, 3, 0.0), 0.7) == hazy);
    CHECK(evtest::all_near(render_snow_image(hazy, layer, OcclusionMask(3, 3, 1.0), 0.5), 0.8, 1e-9));

    std::mt19937_64 rng(42);
    for (int i = 0; i < kPropertyCases; ++i) {
        const auto h = evtest::random_image(rng, 6, 4);
        const auto l = evtest::random_image(rng, 6, 4);
        const auto m = evtest::random_plane<MaskTag>(rng, 6, 4);
        const double alpha = evtest::uniform(rng, 0, 1);
        const auto z = render_snow_image(h, l, m, alpha);
        for (std::size_t k = 0; k < z.size(); ++k)
            CHECK(std::abs(z[k] - std::clamp(h[k] + alpha * m[k] * l[k], 0.0, 1.0)) <= 1e-9);
        CHECK(render_snow_image(h, l, m, 0.0) == h);
    }
}

TEST_CASE("composite_events") {
    const Geometry g{8, 8};
    EventStream bg{g, {{0, 1, 1, 1}, {500, 2, 2, -1}}};
    CompositeConfig cfg;
    cfg.snow_intensity = 0.9;
    cfg.contrast = 0.1;
    CHECK(composite_events(bg, EventStream{g, {}}, IntensityImage(8, 8, 0.2), cfg) == bg);

    EventStream snow{g, {{10, 1, 1, 1}, {20, 5, 5, -1}}};
    CHECK(composite_events(bg, snow, IntensityImage(8, 8, 0.95), cfg) == bg);

    // Kept snow event at (1, 1) within 100 us of the background event removes it.
    const auto e = composite_events(bg, snow, IntensityImage(8, 8, 0.2), cfg);
    CHECK(e.events == std::vector<Event>{{10, 1, 1, 1}, {20, 5, 5, -1}, {500, 2, 2, -1}});
}

TEST_CASE("composite_events matches the brute-force oracle and never fabricates events") {
    std::mt19937_64 rng(43);
    const Geometry g{12, 10};
    for (int i = 0; i < kPropertyCases; ++i) {
        const auto bg = evtest::random_stream(rng, g, evtest::uniform_int(rng, 0, 300), 20'000);
        const auto snow = evtest::random_stream(rng, g, evtest::uniform_int(rng, 0, 300), 20'000);
        const auto hazy = evtest::random_image(rng, g.width, g.height);
        CompositeConfig cfg;
        cfg.contrast = evtest::uniform(rng, 0.01, 0.5);
        cfg.snow_intensity = evtest::uniform(rng, 0.1, 1.0);
        cfg.overlap_window = evtest::uniform_int(rng, 1, 2000);
        const auto out = composite_events(bg, snow, hazy, cfg);
        CHECK(out.events ==
              evtest::composite_oracle(bg, snow, hazy, cfg.snow_intensity, cfg.contrast, cfg.overlap_window));

        // Raising C never admits more snow events.
        CompositeConfig higher = cfg;
        higher.contrast = std::min(0.99, cfg.contrast + evtest::uniform(rng, 0.0, 0.3));
        const EventStream no_bg{g, {}};
        CHECK(composite_events(no_bg, snow, hazy, higher).size() <= composite_events(no_bg, snow, hazy, cfg).size());
        // Output is a sub-multiset of the two inputs.
        std::multiset<std::tuple<Timestamp, int, int, int>> pool;
        for (const Event& e : snow.events) pool.emplace(e.t, e.x, e.y, e.p);
        for (const Event& e : bg.events) pool.emplace(e.t, e.x, e.y, e.p);
        for (const Event& e : out.events) {
            const auto it = pool.find({e.t, e.x, e.y, e.p});
            REQUIRE(it != pool.end());
            pool.erase(it);
        }
    }
}

TEST_CASE("augment_foreground") {
    std::mt19937_64 rng(44);
    const Geometry g{32, 32};
    const auto s = canonicalize(evtest::random_stream(rng, g, 10, 500));
    CompositeConfig cfg;
    CHECK(augment_foreground(s, cfg) == s);

    cfg.augmentations = {Stagger{{0, 1000}, {Homography::identity(), Homography::identity()}}};
    const auto doubled = augment_foreground(s, cfg);
    CHECK(doubled.size() == 20);
    std::vector<Event> expected = s.events;
    for (Event e : s.events) {
        e.t += 1000;
        expected.push_back(e);
    }
    CHECK(doubled.events == evtest::sorted_copy(expected));

    cfg.augmentations = {Stagger{{1000, 1000}, {Homography::identity(), Homography::identity()}}};
    CHECK_THROWS_AS(augment_foreground(s, cfg), Error);
}

TEST_CASE("augment_foreground equals the composition of primitives") {
    std::mt19937_64 rng(45);
    const Geometry g{40, 30};
    for (int i = 0; i < kPropertyCases; ++i) {
        const auto s = evtest::random_stream(rng, g, 200, 10'000);
        CompositeConfig cfg;
        EventStream expected = canonicalize(s);
        const auto steps = evtest::uniform_int(rng, 0, 4);
        for (std::uint64_t k = 0; k < steps; ++k) {
            switch (evtest::uniform_int(rng, 0, 3)) {
            case 0: {
                const double f = evtest::uniform(rng, 0.5, 2.0);
                cfg.augmentations.emplace_back(ScaleTime{f});
                expected = scale_time(expected, f);
                break;
            }
            case 1:
                cfg.augmentations.emplace_back(FlipHorizontal{});
                expected = flip_horizontal(expected);
                break;
            case 2: {
                const auto h = Homography::translation(evtest::uniform(rng, -4, 4), evtest::uniform(rng, -4, 4));
                cfg.augmentations.emplace_back(Warp{h});
                expected = apply_homography(expected, h);
                break;
            }
            default: {
                const auto h = Homography::translation(evtest::uniform(rng, -4, 4), 0);
                const Timestamp off = evtest::uniform_int(rng, 1, 5000);
                cfg.augmentations.emplace_back(Stagger{{0, off}, {Homography::identity(), h}});
                const std::vector<EventStream> parts{expected, shift_time(apply_homography(expected, h), off)};
                expected = merge(parts);
                break;
            }
            }
        }
        CHECK(augment_foreground(s, cfg) == expected);
    }
}

TEST_CASE("simulate_flake_scene") {
    FlakeScene empty;
    empty.background = synth::smooth_background({16, 16}, 0.2, 0.6, 5.0, 1);
    const auto quiet = simulate_flake_scene(empty);
    CHECK(quiet.events.empty());
    REQUIRE(quiet.frames.size() == 1);
    CHECK(quiet.frames[0].snowy == quiet.frames[0].ground_truth);

    // A flake crossing pixel (10, 10) completely: 6 onset then 6 offset events.
    const auto scene = evtest::single_flake_scene(24, 0.3, 0.9, 0.1, 0.0, 400.0, 10.0, 2.0, 2.0, 50'000);
    const auto sim = simulate_flake_scene(scene);
    std::vector<std::int8_t> pol;
    for (const Event& e : sim.events.events)
        if (e.x == 10 && e.y == 10) pol.push_back(e.p);
    REQUIRE(pol.size() == 12);
    for (std::size_t k = 0; k < 12; ++k) CHECK(pol[k] == (k < 6 ? 1 : -1));

    FlakeScene bad = scene;
    bad.contrast = 0.0;
    CHECK_THROWS_AS(simulate_flake_scene(bad), Error);
}

TEST_CASE("simulated event count is stable under time refinement") {
    std::mt19937_64 rng(46);
    for (int i = 0; i < 10; ++i) {
        FlakeScene scene;
        scene.background = synth::smooth_background({48, 48}, 0.1, 0.5, 12.0, i);
        scene.contrast = 0.1;
        scene.duration = 40'000;
        scene.flow_x = 20.0;
        for (int k = 0; k < 3; ++k) {
            Flake f;
            f.radius = evtest::uniform(rng, 1.0, 3.0);
            f.x = evtest::uniform(rng, 5, 43);
            f.y = evtest::uniform(rng, 0, 10);
            f.vy = evtest::uniform(rng, 300, 900);
            scene.flakes.push_back(f);
        }
        const double coarse = static_cast<double>(simulate_flake_scene(scene).events.size());
        scene.rate_hz = 2000.0;
        const double fine = static_cast<double>(simulate_flake_scene(scene).events.size());
        CHECK(std::abs(fine - coarse) <= 0.05 * coarse);
    }
}

TEST_CASE("simulation is deterministic") {
    const auto scene = evtest::single_flake_scene(32, 0.2, 0.9, 0.05, 100, 500, 10, 2, 2.5, 30'000);
    CHECK(simulate_flake_scene(scene).events == simulate_flake_scene(scene).events);
}
