#include "evdesnow/desnow.hpp"
#include "evdesnow/events.hpp"
#include "evdesnow/metrics.hpp"
#include "evdesnow/synth.hpp"
#include "evdesnow/voxel_grid.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace evdesnow;

namespace {

EventStream random_stream(std::size_t n, Geometry g, Timestamp t_max, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    EventStream s{g, {}};
    s.events.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        s.events.push_back({rng() % (t_max + 1), static_cast<std::uint16_t>(rng() % g.width),
                            static_cast<std::uint16_t>(rng() % g.height), static_cast<std::int8_t>(rng() % 2 ? 1 : -1)});
    return s;
}

IntensityImage noise_image(Geometry g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    IntensityImage img(g);
    for (double& v : img.values()) v = u(rng);
    return img;
}

void BM_Canonicalize(benchmark::State& state) {
    const auto s = random_stream(state.range(0), {640, 480}, 1'000'000, 1);
    for (auto _ : state) benchmark::DoNotOptimize(canonicalize(s));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Canonicalize)->Arg(10'000)->Arg(1'000'000);

void BM_Voxelize(benchmark::State& state) {
    const auto s = canonicalize(random_stream(state.range(0), {640, 480}, 50'000, 2));
    for (auto _ : state) benchmark::DoNotOptimize(voxelize(s, 5, {0, 50'000}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Voxelize)->Arg(100'000)->Arg(1'000'000);

void BM_CompositeEvents(benchmark::State& state) {
    const Geometry g{346, 260};
    const auto bg = random_stream(state.range(0), g, 10'000, 3);
    const auto snow = random_stream(state.range(0), g, 10'000, 4);
    const auto hazy = noise_image(g, 5);
    const synth::CompositeConfig config;
    for (auto _ : state) benchmark::DoNotOptimize(synth::composite_events(bg, snow, hazy, config));
    state.SetItemsProcessed(state.iterations() * 2 * state.range(0));
}
BENCHMARK(BM_CompositeEvents)->Arg(10'000)->Arg(200'000);

void BM_DetectStreaks(benchmark::State& state) {
    synth::FlakeScene scene;
    scene.background = synth::smooth_background({128, 128}, 0.1, 0.5, 32, 6);
    scene.contrast = 0.1;
    scene.duration = 30'000;
    std::mt19937_64 rng(7);
    for (int k = 0; k < state.range(0); ++k) {
        synth::Flake f;
        f.radius = 2.0;
        f.x = static_cast<double>(rng() % 120) + 4;
        f.y = static_cast<double>(rng() % 40);
        f.vx = static_cast<double>(rng() % 200) - 100;
        f.vy = 600 + static_cast<double>(rng() % 600);
        f.birth = 1000;
        scene.flakes.push_back(f);
    }
    const auto sim = synth::simulate_flake_scene(scene);
    desnow::VelocityPrior prior;
    prior.tolerance = 3.5;
    for (auto _ : state) benchmark::DoNotOptimize(desnow::detect_streaks(sim.events, prior, 5));
    state.counters["events"] = static_cast<double>(sim.events.size());
}
BENCHMARK(BM_DetectStreaks)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
    const Geometry g{static_cast<std::uint32_t>(state.range(0)), static_cast<std::uint32_t>(state.range(0))};
    const auto a = noise_image(g, 8), b = noise_image(g, 9);
    for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(256)->Arg(640)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
