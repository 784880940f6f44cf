#include "support.hpp"

#include "evdesnow/desnow.hpp"
#include "evdesnow/error.hpp"
#include "evdesnow/synth.hpp"

#include <doctest.h>

#include <set>

using namespace evdesnow;
using namespace evdesnow::desnow;
using evtest::kPropertyCases;

TEST_CASE("accumulate_polarity") {
    const Geometry g{8, 8};
    EventStream s{g, {}};
    CHECK(accumulate_polarity(s, 1, 1, {0, 100}) == 0.0);
    s.events = {{1, 3, 4, 1}, {2, 3, 4, 1}, {3, 3, 4, -1}, {4, 2, 4, 1}};
    CHECK(accumulate_polarity(s, 3, 4, {0, 100}) == 1.0);
    CHECK(accumulate_polarity(s, 3, 4, {0, 3}) == 2.0);
    CHECK_THROWS_AS(accumulate_polarity(s, 8, 0, {0, 1}), Error);

    std::mt19937_64 rng(31);
    for (int i = 0; i < kPropertyCases; ++i) {
        const auto r = evtest::random_stream(rng, {4, 4}, 100, 1000);
        const TimeWindow w{evtest::uniform_int(rng, 0, 500), evtest::uniform_int(rng, 500, 1001)};
        const auto x = static_cast<std::uint32_t>(evtest::uniform_int(rng, 0, 3));
        const auto y = static_cast<std::uint32_t>(evtest::uniform_int(rng, 0, 3));
        double expected = 0.0;
        for (const Event& e : r.events)
            if (e.x == x && e.y == y && e.t >= w.begin && e.t < w.end) expected += e.p;
        CHECK(accumulate_polarity(r, x, y, w) == expected);
    }
}

TEST_CASE("estimate_background_static") {
    const ContrastModel m{0.2, 1.0};
    CHECK(estimate_background_static(m, 0.0) == 1.0);
    CHECK(estimate_background_static(m, 1.0) == doctest::Approx(0.8).epsilon(1e-12));
    // A brighter flake gives E > 0 and an estimate below I_r.
    CHECK(estimate_background_static(ContrastModel{0.1, 0.9}, 3.0) < 0.9);
}

TEST_CASE("static estimate inverts the ideal sensor at an occluded pixel") {
    // Disc of radius 3 moving down over background 0.3; pixel (16, 16) is
    // fully covered once the centre reaches it.
    const auto scene = evtest::single_flake_scene(32, 0.3, 0.9, 0.1, 0.0, 500.0, 16.0, 2.0, 3.0, 40'000);
    const auto sim = synth::simulate_flake_scene(scene);
    const Timestamp covered = 1000 + static_cast<Timestamp>((16.0 - 2.0) / 500.0 * 1e6);
    const double e = accumulate_polarity(sim.events, 16, 16, {0, covered + 1});
    CHECK(e == 6.0);
    const double ib = estimate_background_static(ContrastModel{0.1, 0.9}, e);
    CHECK(ib >= 0.3 - 0.1);
    CHECK(ib <= 0.3 + 0.1);
}

TEST_CASE("detect_streaks") {
    CHECK(detect_streaks(EventStream{{16, 16}, {}}, VelocityPrior{}, 5).empty());

    SUBCASE("single flake") {
        const auto scene = evtest::single_flake_scene(96, 0.3, 0.9, 0.1, 20.0, 100.0, 40.0, 10.0, 1.5, 400'000);
        const auto sim = synth::simulate_flake_scene(scene);
        VelocityPrior prior;
        prior.tolerance = 3.0;
        const auto streaks = detect_streaks(sim.events, prior, 5);
        REQUIRE(streaks.size() == 1);
        CHECK(std::abs(streaks[0].velocity.vx - 20.0) <= 2.0);
        CHECK(std::abs(streaks[0].velocity.vy - 100.0) <= 10.0);
    }

    SUBCASE("stationary flicker is gated by the speed prior") {
        EventStream s{{64, 64}, {}};
        for (std::uint16_t k = 0; k < 60; ++k)
            for (std::uint16_t p = 0; p < 4; ++p)
                s.events.push_back({Timestamp{k} * 1000, static_cast<std::uint16_t>(5 + 30 * (p % 2)),
                                    static_cast<std::uint16_t>(5 + 30 * (p / 2)),
                                    static_cast<std::int8_t>(k % 2 ? -1 : 1)});
        s = canonicalize(s);
        VelocityPrior prior;
        prior.v_min = 50.0;
        CHECK(detect_streaks(s, prior, 5).empty());
    }

    CHECK_THROWS_AS(detect_streaks(EventStream{{4, 4}, {}}, VelocityPrior{}, 1), Error);
    VelocityPrior bad;
    bad.v_min = 10;
    bad.v_max = 5;
    CHECK_THROWS_AS(detect_streaks(EventStream{{4, 4}, {}}, bad, 5), Error);
}

TEST_CASE("detect_streaks supports are disjoint, within tolerance, and seed-deterministic") {
    std::mt19937_64 rng(32);
    for (int i = 0; i < kPropertyCases; ++i) {
        synth::FlakeScene scene;
        scene.background = IntensityImage(48, 48, evtest::uniform(rng, 0.1, 0.5));
        scene.contrast = 0.1;
        scene.duration = 30'000;
        scene.frame_times = {scene.duration};
        const auto flakes = evtest::uniform_int(rng, 1, 4);
        for (std::uint64_t f = 0; f < flakes; ++f) {
            synth::Flake flake;
            flake.radius = evtest::uniform(rng, 1.0, 2.0);
            flake.x = evtest::uniform(rng, 5, 43);
            flake.y = evtest::uniform(rng, 0, 20);
            flake.vx = evtest::uniform(rng, -200, 200);
            flake.vy = evtest::uniform(rng, 300, 1200);
            flake.birth = evtest::uniform_int(rng, 1, 5000);
            scene.flakes.push_back(flake);
        }
        auto events = synth::simulate_flake_scene(scene).events;
        // Sprinkle noise so the detector also sees unrelated events.
        const auto noise = evtest::random_stream(rng, events.geometry, 50, scene.duration);
        events.events.insert(events.events.end(), noise.events.begin(), noise.events.end());
        events = canonicalize(events);

        VelocityPrior prior;
        prior.tolerance = 3.0;
        DetectorOptions opt;
        opt.seed = i;
        const auto streaks = detect_streaks(events, prior, 5, opt);
        std::set<std::size_t> seen;
        for (const Streak& s : streaks) {
            CHECK(s.support.size() >= 5);
            CHECK(s.t_end >= s.t_start);
            CHECK(prior.admits(s.velocity));
            for (std::size_t idx : s.support) {
                CHECK(seen.insert(idx).second);
                const Event& e = events.events[idx];
                const double t = static_cast<double>(e.t);
                CHECK(std::hypot(e.x - s.x_at(t), e.y - s.y_at(t)) <= s.tolerance + 1e-9);
            }
        }
        const auto again = detect_streaks(events, prior, 5, opt);
        REQUIRE(again.size() == streaks.size());
        for (std::size_t k = 0; k < again.size(); ++k) {
            CHECK(again[k].support == streaks[k].support);
            CHECK(again[k].velocity == streaks[k].velocity);
        }
    }
}

TEST_CASE("warp_events") {
    const Geometry g{64, 64};
    EventStream s{g, {{0, 10, 3, 1}, {500'000, 20, 9, -1}}};
    CHECK(warp_events(s, {0, 0}, 1'000'000) == s);
    const auto w = warp_events(EventStream{g, {{0, 10, 0, 1}}}, {5, 0}, 1'000'000);
    REQUIRE(w.size() == 1);
    CHECK(w.events[0].x == 15);
}

TEST_CASE("warp_events round trip recovers at least 95% of pixels") {
    std::mt19937_64 rng(33);
    const Geometry g{128, 128};
    for (int i = 0; i < kPropertyCases; ++i) {
        const Velocity v{evtest::uniform(rng, -300, 300), evtest::uniform(rng, -300, 300)};
        const Timestamp t_ref = 50'000;
        EventStream s{g, {}};
        for (std::uint64_t k = 0; k < 200; ++k)
            s.events.push_back({k * 250, static_cast<std::uint16_t>(evtest::uniform_int(rng, 30, 97)),
                                static_cast<std::uint16_t>(evtest::uniform_int(rng, 30, 97)), 1});
        const auto forward = warp_events(s, v, t_ref);
        // Backward pass: -v from t_ref maps each event home.
        std::size_t recovered = 0;
        for (const Event& e : forward.events) {
            const auto back = warp_events(EventStream{g, {e}}, {-v.vx, -v.vy}, t_ref);
            const Event& original = s.events[e.t / 250];
            if (back.size() == 1 && back.events[0].x == original.x && back.events[0].y == original.y)
                ++recovered;
        }
        CHECK(recovered >= 190);
    }
}

TEST_CASE("build_occlusion_mask") {
    const Geometry g{100, 100};
    CHECK(evtest::all_near(build_occlusion_mask({}, 0, g, 2.0), 0.0));

    Streak s;
    s.x0 = 50;
    s.y0 = 50;
    s.t0 = 1000;
    s.t_start = 0;
    s.t_end = 2000;
    s.velocity = {100, 0};
    const std::vector<Streak> one{s};
    const auto m = build_occlusion_mask(one, 1000, g, 2.0);
    CHECK(m(50, 50) == 1.0);
    CHECK(m(60, 60) == 0.0);
    CHECK_THROWS_AS(build_occlusion_mask(one, 1000, g, -1.0), Error);
}

TEST_CASE("build_occlusion_mask equals point-in-disc rasterization") {
    std::mt19937_64 rng(34);
    const Geometry g{40, 30};
    for (int i = 0; i < kPropertyCases; ++i) {
        std::vector<Streak> streaks;
        const auto n = evtest::uniform_int(rng, 1, 4);
        const Timestamp t_ref = 10'000;
        for (std::uint64_t k = 0; k < n; ++k) {
            Streak s;
            s.velocity = {evtest::uniform(rng, -500, 500), evtest::uniform(rng, -500, 500)};
            s.x0 = evtest::uniform(rng, -5, 45);
            s.y0 = evtest::uniform(rng, -5, 35);
            s.t0 = evtest::uniform_int(rng, 0, 20'000);
            s.t_start = 0;
            s.t_end = 20'000;
            streaks.push_back(s);
        }
        const double radius = evtest::uniform(rng, 0.5, 6.0);
        const auto mask = build_occlusion_mask(streaks, t_ref, g, radius);
        for (std::uint32_t y = 0; y < g.height; ++y)
            for (std::uint32_t x = 0; x < g.width; ++x) {
                bool inside = false;
                for (const Streak& s : streaks) {
                    const double cx = s.x_at(static_cast<double>(t_ref));
                    const double cy = s.y_at(static_cast<double>(t_ref));
                    inside = inside || std::hypot(x - cx, y - cy) <= radius;
                }
                CHECK(mask(x, y) == (inside ? 1.0 : 0.0));
            }
    }
}

TEST_CASE("fuse") {
    IntensityImage in(3, 2, 0.2), pred(3, 2, 0.6);
    CHECK(fuse(in, pred, OcclusionMask(3, 2, 0.0)) == in);
    CHECK(fuse(in, pred, OcclusionMask(3, 2, 1.0)) == pred);
    CHECK(evtest::all_near(fuse(in, pred, OcclusionMask(3, 2, 0.5)), 0.4, 1e-12));
    CHECK_THROWS_AS(fuse(in, IntensityImage(2, 2), OcclusionMask(3, 2)), Error);
}

TEST_CASE("fuse is a pixelwise convex combination") {
    std::mt19937_64 rng(35);
    for (int i = 0; i < kPropertyCases; ++i) {
        const auto a = evtest::random_image(rng, 9, 7);
        const auto b = evtest::random_image(rng, 9, 7);
        const auto m = evtest::random_plane<MaskTag>(rng, 9, 7);
        const auto out = fuse(a, b, m);
        for (std::size_t k = 0; k < out.size(); ++k) {
            CHECK(out[k] >= std::min(a[k], b[k]));
            CHECK(out[k] <= std::max(a[k], b[k]));
            CHECK(std::abs(out[k] - (m[k] * b[k] + (1 - m[k]) * a[k])) <= 1e-9);
        }
    }
}

TEST_CASE("motion estimate with zero flow and static streaks equals the static estimate") {
    std::mt19937_64 rng(36);
    const Geometry g{24, 24};
    for (int i = 0; i < kPropertyCases; ++i) {
        const auto stream = canonicalize(evtest::random_stream(rng, g, 400, 20'000));
        const TimeWindow w{evtest::uniform_int(rng, 0, 5000), evtest::uniform_int(rng, 10'000, 20'000)};
        std::vector<Streak> streaks;
        for (int k = 0; k < 3; ++k) {
            Streak s;
            s.x0 = evtest::uniform(rng, 0, 24);
            s.y0 = evtest::uniform(rng, 0, 24);
            s.t_start = w.begin;
            s.t_end = w.end;
            s.radius = evtest::uniform(rng, 1, 4);
            streaks.push_back(s);
        }
        const ContrastModel model{evtest::uniform(rng, 0.05, 0.3), evtest::uniform(rng, 0.5, 1.0)};
        const auto est = estimate_background_motion(model, stream, streaks, {0, 0}, w.end, w);
        const auto fp = rasterize_footprint(streaks, g, FootprintQuery{w.end, 0, -1.0, 1.0});
        for (std::uint32_t y = 0; y < g.height; ++y)
            for (std::uint32_t x = 0; x < g.width; ++x) {
                const double e = accumulate_polarity(stream, x, y, w);
                const double v = est(x, y);
                if (fp.mask(x, y) > 0.0 && e != 0.0) {
                    CHECK(std::abs(v - estimate_background_static(model, e)) <= 1e-9);
                } else {
                    CHECK(std::isnan(v));
                }
            }
    }
}

TEST_CASE("restore_image") {
    std::mt19937_64 rng(37);
    const auto image = evtest::random_image(rng, 20, 16);
    RestoreOptions opt;
    opt.window = {0, 10'000};
    const auto r = restore_image(image, EventStream{image.geometry(), {}}, opt);
    CHECK(r.image == image);
    for (double m : r.mask.values()) CHECK(m == 0.0);
    CHECK(r.streaks.empty());

    CHECK_THROWS_AS(restore_image(image, EventStream{{5, 5}, {}}, opt), Error);
    opt.window = {10, 10};
    CHECK_THROWS_AS(restore_image(image, EventStream{image.geometry(), {}}, opt), Error);
}

TEST_CASE("translating background with one flake recovers occluded pixels within C") {
    auto scene = evtest::single_flake_scene(64, 0.0, 0.9, 0.1, 60.0, 700.0, 20.0, 4.0, 1.5, 40'000);
    scene.background = synth::smooth_background({64, 64}, 0.15, 0.5, 24.0, 7);
    scene.flow_x = 10.0;
    RestoreOptions opt;
    opt.prior.tolerance = 3.0;
    const auto r = evtest::recover_last_frame(scene, opt, 10'000);
    CHECK(r.occluded > 0);
    CHECK(r.streaks == 1);
    CHECK(r.mae <= 0.1);
}

TEST_CASE("five flakes at up to 20% coverage recover within 2C") {
    std::mt19937_64 rng(38);
    for (double coverage : {0.05, 0.1, 0.2}) {
        synth::FlakeScene scene;
        scene.background = synth::smooth_background({64, 64}, 0.1, 0.5, 20.0, 3);
        scene.contrast = 0.1;
        scene.duration = 30'000;
        scene.frame_times = {scene.duration};
        const double radius = std::sqrt(coverage * 64 * 64 / 5.0 / 3.14159);
        for (int f = 0; f < 5; ++f) {
            synth::Flake flake;
            flake.radius = radius;
            flake.x = 8 + 12 * f;
            flake.y = evtest::uniform(rng, 5, 25);
            flake.vx = evtest::uniform(rng, -50, 50);
            flake.vy = evtest::uniform(rng, 800, 1200);
            flake.birth = 2000;
            scene.flakes.push_back(flake);
        }
        RestoreOptions opt;
        opt.prior.tolerance = radius + 1.5;
        const auto r = evtest::recover_last_frame(scene, opt, 10'000);
        CAPTURE(coverage);
        CAPTURE(r.streaks);
        CHECK(r.occluded > 0);
        CHECK(r.mae <= 0.2);
    }
}
