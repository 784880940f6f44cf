#pragma once

#include "evdesnow/events.hpp"
#include "evdesnow/image.hpp"
#include "evdesnow/synth.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace evdesnow::dataset {

/// root/{images,events,gt,masks}/NNNNNN.{png,evs,png,pfm} + root/manifest.json
struct DatasetLayout {
    std::filesystem::path root;

    std::filesystem::path images() const { return root / "images"; }
    std::filesystem::path events() const { return root / "events"; }
    std::filesystem::path gt() const { return root / "gt"; }
    std::filesystem::path masks() const { return root / "masks"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }

    static std::string frame_name(std::size_t index);
    void create_directories() const;
    /// Frame stems present in images/, sorted. Throws InvalidArgument when a
    /// frame lacks its events/ or gt/ entry.
    std::vector<std::string> frames() const;
};

inline constexpr int kManifestVersion = 1;
inline constexpr int kSceneVersion = 1;

nlohmann::ordered_json to_json(const synth::CompositeConfig& config);
synth::CompositeConfig composite_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const synth::HazeParams& haze);
synth::HazeParams haze_from_json(const nlohmann::json& j);

/// Stagger of `copies` copies: offsets k * spacing, copy 0 unwarped, the rest
/// translated by seeded offsets within a quarter of the sensor.
synth::Stagger make_stagger(std::size_t copies, Timestamp spacing, Geometry geometry,
                            std::uint64_t seed);

struct ComposeInputs {
    EventStream background_events;
    std::vector<IntensityImage> backgrounds; ///< clean J per frame
    std::vector<DepthMap> depths;            ///< one per frame, or a single shared map, or none
    EventStream snow_events;
    std::vector<Timestamp> frame_times;      ///< empty = (k + 1) * window
};

struct ComposeSettings {
    synth::CompositeConfig config;
    synth::HazeParams haze;
    Timestamp window = 10'000;
    std::uint64_t seed = 0;
};

struct ComposedFrame {
    Timestamp t = 0;
    IntensityImage snowy;  ///< Z
    IntensityImage hazy;   ///< I_haze, the snow-free target
    OcclusionMask mask;
    EventStream events;    ///< composite events in [t - window, t)
};

/// Runs haze -> augmentation -> snow layer -> snow rendering -> event
/// compositing for every frame.
std::vector<ComposedFrame> compose_frames(const ComposeInputs& inputs, const ComposeSettings& settings);

nlohmann::ordered_json compose_manifest(const ComposeSettings& settings, Geometry geometry,
                                        const std::vector<ComposedFrame>& frames);

/// Writes images/, events/, gt/, masks/ and the manifest in frame order.
void write_dataset(const DatasetLayout& layout, const std::vector<ComposedFrame>& frames,
                   const nlohmann::ordered_json& manifest);

struct SceneDocument {
    synth::FlakeScene scene;
    Timestamp window = 10'000; ///< per-frame event slice
};

/// Parses a versioned scene document; relative background paths resolve
/// against `base_dir`.
SceneDocument parse_scene(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Frames and per-frame event slices of a simulated scene.
std::vector<ComposedFrame> simulate_frames(const SceneDocument& doc);

/// EVDESNOW_THREADS caps the worker count; unset or 0 means hardware concurrency.
std::size_t worker_count();

/// Calls fn(i) for i in [0, n) on up to worker_count() threads. The first
/// exception is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        next = n;
                    }
                }
            });
    }
    if (error) std::rethrow_exception(error);
}

} // namespace evdesnow::dataset
