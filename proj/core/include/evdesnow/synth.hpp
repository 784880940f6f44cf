#pragma once

#include "evdesnow/events.hpp"
#include "evdesnow/image.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace evdesnow::synth {

struct HazeParams {
    double atmospheric_light = 0.8;
    double beta = 0.05;

    void validate() const;
    friend bool operator==(const HazeParams&, const HazeParams&) = default;
};

// Foreground augmentations, applied in list order.
struct ScaleTime {
    double factor = 1.0;
    friend bool operator==(const ScaleTime&, const ScaleTime&) = default;
};
struct FlipHorizontal {
    friend bool operator==(const FlipHorizontal&, const FlipHorizontal&) = default;
};
struct Warp {
    Homography homography;
    friend bool operator==(const Warp&, const Warp&) = default;
};
/// Union of offsets.size() copies, copy k warped by homographies[k] and
/// delayed by offsets[k]. Offsets must be strictly increasing.
struct Stagger {
    std::vector<Timestamp> offsets;
    std::vector<Homography> homographies;
    friend bool operator==(const Stagger&, const Stagger&) = default;
};
using Augmentation = std::variant<ScaleTime, FlipHorizontal, Warp, Stagger>;

struct CompositeConfig {
    double alpha = 0.7;
    double contrast = 0.15;
    double snow_intensity = 0.9;
    Timestamp overlap_window = 100;
    std::vector<Augmentation> augmentations;

    void validate() const;
    friend bool operator==(const CompositeConfig&, const CompositeConfig&) = default;
};

struct SnowLayer {
    IntensityImage layer;
    OcclusionMask mask;
};

/// I_haze = J t + A (1 - t), t = exp(-beta * depth).
IntensityImage render_haze(const IntensityImage& clean, const DepthMap& depth,
                           const HazeParams& params);

/// Pixels with a positive snow event in the window, closed once with a 3x3
/// structuring element, take `snow_intensity` in the layer and 1 in the mask.
SnowLayer rasterize_snow_layer(const EventStream& snow, TimeWindow window, double snow_intensity);

/// Z = clamp(I_haze + alpha * mask * layer, 0, 1).
IntensityImage render_snow_image(const IntensityImage& hazy, const IntensityImage& layer,
                                 const OcclusionMask& mask, double alpha);

/// Chroma-key merge of background and foreground event streams:
///  - a snow event is kept iff |I_haze(x, y) - snow_intensity| > contrast;
///  - a background event is kept iff no kept snow event shares its pixel
///    within overlap_window microseconds.
/// Output is canonical and contains only input events.
EventStream composite_events(const EventStream& background, const EventStream& snow,
                             const IntensityImage& hazy, const CompositeConfig& config);

EventStream augment_foreground(const EventStream& snow, const CompositeConfig& config);
EventStream apply_augmentation(const EventStream& stream, const Augmentation& augmentation);

struct Flake {
    double radius = 1.5;
    double intensity = 0.9;
    double x = 0.0; ///< centre at birth
    double y = 0.0;
    double vx = 0.0; ///< pixels per second
    double vy = 0.0;
    Timestamp birth = 0;
    Timestamp death = UINT64_MAX;
};

/// Oracle scene: a translating background with bright discs moving over it,
/// observed by an ideal linear-contrast sensor.
struct FlakeScene {
    IntensityImage background; ///< background at t = 0
    double flow_x = 0.0;        ///< background translation, pixels per second
    double flow_y = 0.0;
    std::vector<Flake> flakes;
    Timestamp duration = 100'000;
    double contrast = 0.15;
    double rate_hz = 1000.0;
    std::vector<Timestamp> frame_times; ///< empty = one frame at `duration`
    Timestamp exposure = 0;             ///< flakes seen during [t - exposure, t] appear in the frame
};

struct SceneFrame {
    Timestamp t = 0;
    IntensityImage ground_truth; ///< background alone at t
    IntensityImage snowy;        ///< what the frame camera records
    OcclusionMask occlusion;     ///< pixels covered by a flake in the frame
};

struct SimulatedScene {
    EventStream events;
    std::vector<SceneFrame> frames;
};

/// Renders the scene at `rate_hz`; each pixel keeps a reference level and
/// emits floor(|I - L| / C) events of sign(I - L) whenever its intensity
/// moves a full threshold away, timestamps interpolated within the step.
SimulatedScene simulate_flake_scene(const FlakeScene& scene);

/// Background intensity of `scene` at time t (no flakes).
IntensityImage background_at(const FlakeScene& scene, Timestamp t);

/// Smooth value noise in [low, high] on a grid with the given cell size.
IntensityImage smooth_background(Geometry geometry, double low, double high, double cell,
                                 std::uint64_t seed);

} // namespace evdesnow::synth
