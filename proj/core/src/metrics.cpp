#include "evdesnow/metrics.hpp"

#include "evdesnow/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace evdesnow::metrics {

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> taps{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kRadius;
        taps[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
        sum += taps[static_cast<std::size_t>(i)];
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

// Separable 'valid' Gaussian filter: output is (W-10) x (H-10).
std::vector<double> filter_valid(const std::vector<double>& in, std::size_t w, std::size_t h,
                                 const std::array<double, kWindow>& taps) {
    const std::size_t ow = w - (kWindow - 1);
    const std::size_t oh = h - (kWindow - 1);
    std::vector<double> rows(ow * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * in[y * w + x + k];
            rows[y * ow + x] = acc;
        }
    std::vector<double> out(ow * oh);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * rows[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    return out;
}

double mean_of(const std::vector<FrameMetrics>& frames, double FrameMetrics::*field) {
    if (frames.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& f : frames) sum += f.*field;
    return sum / static_cast<double>(frames.size());
}

} // namespace

double psnr(const IntensityImage& pred, const IntensityImage& gt, double peak) {
    require_same_shape(pred, gt, "psnr");
    if (pred.empty()) throw Error(ErrorCode::TooSmall, "psnr of an empty image");
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(pred.size());
    if (mse < 1e-12) return kPsnrCap;
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const IntensityImage& pred, const IntensityImage& gt) {
    require_same_shape(pred, gt, "ssim");
    const std::size_t w = pred.width(), h = pred.height();
    if (w < kWindow || h < kWindow)
        throw Error(ErrorCode::TooSmall, "ssim needs both sides >= 11, got " + std::to_string(w) +
                                             "x" + std::to_string(h));
    const auto taps = gaussian_taps();
    std::vector<double> x(pred.values().begin(), pred.values().end());
    std::vector<double> y(gt.values().begin(), gt.values().end());
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mu_x = filter_valid(x, w, h, taps);
    const auto mu_y = filter_valid(y, w, h, taps);
    const auto e_xx = filter_valid(xx, w, h, taps);
    const auto e_yy = filter_valid(yy, w, h, taps);
    const auto e_xy = filter_valid(xy, w, h, taps);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x[i], my = mu_y[i];
        const double vx = e_xx[i] - mx * mx;
        const double vy = e_yy[i] - my * my;
        const double cxy = e_xy[i] - mx * my;
        const double num = (2.0 * mx * my + kC1) * (2.0 * cxy + kC2);
        const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
        sum += num / den;
    }
    return std::clamp(sum / static_cast<double>(mu_x.size()), -1.0, 1.0);
}

double occlusion_fraction(const OcclusionMask& mask, double threshold) {
    if (mask.empty()) return 0.0;
    std::size_t count = 0;
    for (double v : mask.values())
        if (v > threshold) ++count;
    return static_cast<double>(count) / static_cast<double>(mask.size());
}

double MetricReport::mean_psnr() const { return mean_of(frames, &FrameMetrics::psnr_db); }
double MetricReport::mean_ssim() const { return mean_of(frames, &FrameMetrics::ssim); }

std::optional<double> MetricReport::mean_occlusion_fraction() const {
    if (frames.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& f : frames) {
        if (!f.occlusion_fraction) return std::nullopt;
        sum += *f.occlusion_fraction;
    }
    return sum / static_cast<double>(frames.size());
}

std::string MetricReport::to_text() const {
    std::ostringstream os;
    os << std::setprecision(10);
    for (const auto& f : frames) {
        os << "frame: " << f.frame << '\n';
        os << "psnr_db: " << f.psnr_db << '\n';
        os << "ssim: " << f.ssim << '\n';
        if (f.occlusion_fraction) os << "occlusion_fraction: " << *f.occlusion_fraction << '\n';
        os << '\n';
    }
    os << "frames: " << frames.size() << '\n';
    os << "mean_psnr_db: " << mean_psnr() << '\n';
    os << "mean_ssim: " << mean_ssim() << '\n';
    if (auto occ = mean_occlusion_fraction()) os << "mean_occlusion_fraction: " << *occ << '\n';
    return os.str();
}

std::string MetricReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["frames"] = nlohmann::ordered_json::array();
    for (const auto& f : frames) {
        nlohmann::ordered_json j;
        j["frame"] = f.frame;
        j["psnr_db"] = f.psnr_db;
        j["ssim"] = f.ssim;
        j["occlusion_fraction"] = f.occlusion_fraction ? nlohmann::ordered_json(*f.occlusion_fraction)
                                                       : nlohmann::ordered_json(nullptr);
        doc["frames"].push_back(std::move(j));
    }
    const auto occ = mean_occlusion_fraction();
    doc["mean"] = {{"psnr_db", mean_psnr()},
                   {"ssim", mean_ssim()},
                   {"occlusion_fraction", occ ? nlohmann::ordered_json(*occ) : nlohmann::ordered_json(nullptr)}};
    return doc.dump(2) + "\n";
}

FrameMetrics evaluate_frame(std::string name, const IntensityImage& pred, const IntensityImage& gt,
                            const OcclusionMask* mask) {
    FrameMetrics m;
    m.frame = std::move(name);
    m.psnr_db = psnr(pred, gt);
    m.ssim = ssim(pred, gt);
    if (mask) m.occlusion_fraction = occlusion_fraction(*mask);
    return m;
}

} // namespace evdesnow::metrics
