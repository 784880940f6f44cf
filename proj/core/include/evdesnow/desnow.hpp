#pragma once

#include "evdesnow/events.hpp"
#include "evdesnow/image.hpp"

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace evdesnow::desnow {

/// Pixels per second.
struct Velocity {
    double vx = 0.0;
    double vy = 0.0;

    double speed() const noexcept;
    friend bool operator==(const Velocity&, const Velocity&) = default;
};

/// Linear contrast model: one event per `contrast` of intensity change, a
/// snowflake renders at `flake_intensity`.
struct ContrastModel {
    double contrast = 0.15;
    double flake_intensity = 0.9;

    /// Throws InvalidArgument unless 0 < contrast < 1 and 0 < flake_intensity <= 1.
    void validate() const;
};

struct VelocityPrior {
    double v_min = 30.0;
    double v_max = 3000.0;
    double direction_x = 0.0; ///< cone axis, need not be normalised
    double direction_y = 1.0;
    double half_angle = std::numbers::pi;
    double tolerance = 1.5; ///< max pixel distance of a member event from the streak line

    void validate() const;
    bool admits(Velocity v) const noexcept;
};

/// A constant-velocity track x(t) = x0 + vx (t - t0), y(t) = y0 + vy (t - t0).
struct Streak {
    Velocity velocity;
    double x0 = 0.0;
    double y0 = 0.0;
    Timestamp t0 = 0;
    Timestamp t_start = 0;
    Timestamp t_end = 0;
    std::vector<std::size_t> support; ///< indices into the detected stream
    double tolerance = 0.0;
    double radius = 0.0; ///< median distance of the support from the line

    double x_at(double t_us) const noexcept;
    double y_at(double t_us) const noexcept;
};

struct DetectorOptions {
    std::uint64_t seed = 0;
    std::size_t hypotheses = 256;   ///< RANSAC draws per extracted streak
    std::size_t refinements = 4;    ///< least-squares refit rounds per hypothesis
    double max_pair_distance = 24.0; ///< pixels between the two sampled events
};

/// Image intensity behind the flake: a scalar (ContrastModel::flake_intensity)
/// or the value observed in the snowy image at each pixel.
enum class FlakeIntensitySource { Constant, Observed };

/// Where and how long a footprint is rasterized.
struct FootprintQuery {
    Timestamp t_ref = 0;
    Timestamp exposure = 0; ///< sweep over [t_ref - exposure, t_ref]; 0 = disc at t_ref
    double radius = -1.0;   ///< uniform radius; < 0 uses each streak's radius + margin
    double margin = 1.0;
};

/// Per-pixel footprint: mask weight and the instant the covering streak is
/// closest to the pixel.
struct Footprint {
    OcclusionMask mask;
    std::vector<double> closest_time_us;
};

/// Sum of p over events at exactly (x, y) with t in [begin, end).
double accumulate_polarity(const EventStream& stream, std::uint32_t x, std::uint32_t y,
                           TimeWindow window);

/// I_b = clamp(I_r - C * E, 0, 1).
double estimate_background_static(const ContrastModel& model, double accumulated);

/// Greedy RANSAC extraction of constant-velocity streaks gated by `prior`.
/// Streaks are returned in extraction order; supports are disjoint.
std::vector<Streak> detect_streaks(const EventStream& stream, const VelocityPrior& prior,
                                   std::size_t min_support, const DetectorOptions& options = {});

/// Moves each event to where it would be at t_ref under `velocity`, rounding
/// to the nearest pixel and dropping events that leave the sensor.
EventStream warp_events(const EventStream& stream, Velocity velocity, Timestamp t_ref);

Footprint rasterize_footprint(std::span<const Streak> streaks, Geometry geometry,
                              const FootprintQuery& query);

/// 1 within `radius` of each streak's position at t_ref, 0 elsewhere.
OcclusionMask build_occlusion_mask(std::span<const Streak> streaks, Timestamp t_ref,
                                   Geometry geometry, double radius);

struct MotionEstimateOptions {
    FlakeIntensitySource source = FlakeIntensitySource::Constant;
    const IntensityImage* observed = nullptr; ///< required for Observed
    Timestamp exposure = 0;
    double footprint_margin = 1.0;
};

/// Background intensity over the streak footprint at t_ref. All events in the
/// window are carried along the background flow to t_ref and their polarity
/// summed per pixel up to the pixel's occlusion instant. Pixels outside the
/// footprint, or with no net polarity there, are NaN.
IntensityImage estimate_background_motion(const ContrastModel& model, const EventStream& stream,
                                          std::span<const Streak> streaks,
                                          Velocity background_flow, Timestamp t_ref,
                                          TimeWindow window,
                                          const MotionEstimateOptions& options = {});

/// out = mask * predicted + (1 - mask) * input, clamped to [0, 1].
IntensityImage fuse(const IntensityImage& input, const IntensityImage& predicted,
                    const OcclusionMask& mask);

struct RestoreOptions {
    ContrastModel model;
    VelocityPrior prior;
    std::size_t min_support = 5;
    Velocity background_flow;
    TimeWindow window;
    FlakeIntensitySource source = FlakeIntensitySource::Constant;
    Timestamp exposure = 0;
    double footprint_margin = 1.0;
    DetectorOptions detector;
};

struct Restoration {
    IntensityImage image;
    OcclusionMask mask;
    std::vector<Streak> streaks;
};

/// detect_streaks -> estimate_background_motion -> footprint mask -> fuse,
/// with t_ref at the end of the window.
Restoration restore_image(const IntensityImage& image, const EventStream& stream,
                          const RestoreOptions& options);

Restoration restore_image(const IntensityImage& image, const EventStream& stream,
                          const ContrastModel& model, const VelocityPrior& prior,
                          Velocity background_flow, TimeWindow window);

} // namespace evdesnow::desnow
