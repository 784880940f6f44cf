#pragma once

#include "evdesnow/image.hpp"

#include <optional>
#include <string>
#include <vector>

namespace evdesnow::metrics {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE); kPsnrCap when MSE < 1e-12.
double psnr(const IntensityImage& pred, const IntensityImage& gt, double peak = 1.0);

/// Mean local SSIM over all valid 11x11 Gaussian windows (sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1). Needs both sides >= 11.
double ssim(const IntensityImage& pred, const IntensityImage& gt);

/// Fraction of pixels with mask > threshold.
double occlusion_fraction(const OcclusionMask& mask, double threshold = 0.5);

struct FrameMetrics {
    std::string frame;
    double psnr_db = 0.0;
    double ssim = 0.0;
    std::optional<double> occlusion_fraction;
};

struct MetricReport {
    std::vector<FrameMetrics> frames;

    double mean_psnr() const;
    double mean_ssim() const;
    std::optional<double> mean_occlusion_fraction() const;

    /// "key: value" lines, one block per frame followed by the means.
    std::string to_text() const;
    /// {"frames": [{frame, psnr_db, ssim, occlusion_fraction}...],
    ///  "mean": {psnr_db, ssim, occlusion_fraction}}
    std::string to_json() const;
};

FrameMetrics evaluate_frame(std::string name, const IntensityImage& pred, const IntensityImage& gt,
                            const OcclusionMask* mask = nullptr);

} // namespace evdesnow::metrics
