#include "evdesnow/dataset.hpp"
#include "evdesnow/desnow.hpp"
#include "evdesnow/error.hpp"
#include "evdesnow/event_io.hpp"
#include "evdesnow/image_io.hpp"
#include "evdesnow/metrics.hpp"
#include "evdesnow/voxel_grid.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace evdesnow;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, std::size_t expected, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string(flag) + ": '" + item + "' is not a number");
        }
    }
    if (out.size() != expected)
        throw UsageError(std::string(flag) + " expects " + std::to_string(expected) + " comma-separated numbers");
    return out;
}

Timestamp ms_to_us(double ms, const char* flag) {
    if (!(ms > 0.0) || !std::isfinite(ms)) throw UsageError(std::string(flag) + " must be positive");
    return static_cast<Timestamp>(std::llround(ms * 1000.0));
}

Geometry parse_sensor(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw UsageError("--sensor expects WxH");
    try {
        return {static_cast<std::uint32_t>(std::stoul(text.substr(0, x))),
                static_cast<std::uint32_t>(std::stoul(text.substr(x + 1)))};
    } catch (const std::exception&) {
        throw UsageError("--sensor expects WxH");
    }
}

/// Image files directly under `path`, sorted, or `path` itself if it is a file.
std::vector<fs::path> image_files(const fs::path& path) {
    if (!fs::is_directory(path)) return {path};
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".png" || ext == ".pfm")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::IoError, path.string() + " holds no .png or .pfm images");
    return files;
}

// ---------------------------------------------------------------- compose

struct ComposeArgs {
    std::string background_events, snow_events, out;
    std::vector<std::string> background_images, depths;
    double alpha = 0.7, atm_light = 0.8, beta = 0.05, contrast = 0.15, snow_intensity = 0.9;
    double speed = 1.0, window_ms = 10.0, overlap_us = 100.0;
    std::size_t density = 1, frames = 0;
    bool flip = false;
    std::string homography;
    std::uint64_t seed = 0;
};

void add_compose(CLI::App& app, ComposeArgs& a) {
    auto* c = app.add_subcommand("compose", "Build a synthetic snow dataset from clean and snow event streams");
    c->add_option("--background-events", a.background_events, "Background event stream")->required();
    c->add_option("--background-image", a.background_images, "Clean frame(s); a directory or repeated flag")->required();
    c->add_option("--depth", a.depths, "Depth map(s) as PFM; one shared or one per frame");
    c->add_option("--snow-events", a.snow_events, "Snow event stream")->required();
    c->add_option("--out", a.out, "Output dataset directory")->required();
    c->add_option("--alpha", a.alpha, "Snow layer opacity");
    c->add_option("--atm-light", a.atm_light, "Atmospheric light A");
    c->add_option("--beta", a.beta, "Scattering coefficient");
    c->add_option("--contrast", a.contrast, "Contrast threshold C");
    c->add_option("--snow-intensity", a.snow_intensity, "Snow intensity I_snow");
    c->add_option("--overlap-us", a.overlap_us, "Collision window in microseconds");
    c->add_option("--speed", a.speed, "Snow playback speed factor");
    c->add_option("--density", a.density, "Number of staggered snow copies");
    c->add_flag("--flip", a.flip, "Mirror the snow horizontally");
    c->add_option("--homography", a.homography, "Snow warp a,b,c,d,e,f,g,h,i (row-major)");
    c->add_option("--window-ms", a.window_ms, "Per-frame event window");
    c->add_option("--frames", a.frames, "Frame count when a single background image is reused");
    c->add_option("--seed", a.seed, "Seed for stochastic augmentation");
}

int run_compose(const ComposeArgs& a) {
    dataset::ComposeSettings settings;
    settings.seed = a.seed;
    settings.window = ms_to_us(a.window_ms, "--window-ms");
    settings.haze = {a.atm_light, a.beta};
    auto& cfg = settings.config;
    cfg.alpha = a.alpha;
    cfg.contrast = a.contrast;
    cfg.snow_intensity = a.snow_intensity;
    if (a.overlap_us < 0.0) throw UsageError("--overlap-us must be >= 0");
    cfg.overlap_window = static_cast<Timestamp>(std::llround(a.overlap_us));
    if (!(a.speed > 0.0)) throw UsageError("--speed must be positive");
    if (a.density == 0) throw UsageError("--density must be >= 1");

    dataset::ComposeInputs in;
    for (const auto& p : a.background_images)
        for (const auto& f : image_files(p)) in.backgrounds.push_back(io::read_image(f));
    if (a.frames > 0) {
        if (in.backgrounds.size() != 1) throw UsageError("--frames needs exactly one background image");
        in.backgrounds.assign(a.frames, in.backgrounds.front());
    }
    const Geometry g = in.backgrounds.front().geometry();
    for (const auto& p : a.depths) in.depths.push_back(io::read_pfm<DepthTag>(p));
    in.background_events = io::read_events(a.background_events, g);
    in.snow_events = io::read_events(a.snow_events, g);

    if (a.speed != 1.0) cfg.augmentations.emplace_back(synth::ScaleTime{1.0 / a.speed});
    if (a.flip) cfg.augmentations.emplace_back(synth::FlipHorizontal{});
    if (!a.homography.empty()) {
        const auto m = parse_list(a.homography, 9, "--homography");
        std::array<double, 9> h{};
        std::copy(m.begin(), m.end(), h.begin());
        cfg.augmentations.emplace_back(synth::Warp{Homography(h)});
    }
    if (a.density > 1)
        cfg.augmentations.emplace_back(
            dataset::make_stagger(a.density, std::max<Timestamp>(1, settings.window / a.density), g, a.seed));

    const auto frames = dataset::compose_frames(in, settings);
    dataset::write_dataset({a.out}, frames, dataset::compose_manifest(settings, g, frames));
    std::cerr << "composed " << frames.size() << " frames into " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- restore

struct RestoreArgs {
    std::string image, events, out, mask_out, flake_intensity = "0.9", flow = "0,0";
    std::string direction = "0,1";
    double contrast = 0.15, window_ms = 10.0, vmin = 30.0, vmax = 3000.0, tol = 1.5;
    double half_angle_deg = 180.0, exposure_ms = 0.0, margin = 1.0;
    std::size_t min_support = 5;
    std::optional<Timestamp> frame_time;
    std::uint64_t seed = 0;
};

void add_restore(CLI::App& app, RestoreArgs& a) {
    auto* c = app.add_subcommand("restore", "Remove snow from one frame using its event window");
    c->add_option("--image", a.image, "Snowy frame (PNG or PFM)")->required();
    c->add_option("--events", a.events, "Event stream (EVS1 or CSV)")->required();
    c->add_option("--out", a.out, "Restored frame")->required();
    c->add_option("--mask-out", a.mask_out, "Occlusion mask output (PFM or PNG)");
    c->add_option("--contrast", a.contrast, "Contrast threshold C");
    c->add_option("--flake-intensity", a.flake_intensity, "Flake intensity, or 'observed' to read it from the image");
    c->add_option("--window-ms", a.window_ms, "Event window ending at the frame time");
    c->add_option("--frame-time-us", a.frame_time, "Frame timestamp; default last event + 1");
    c->add_option("--exposure-ms", a.exposure_ms, "Frame exposure swept by the footprint");
    c->add_option("--vmin", a.vmin, "Minimum flake speed, px/s");
    c->add_option("--vmax", a.vmax, "Maximum flake speed, px/s");
    c->add_option("--direction", a.direction, "Prior fall direction dx,dy");
    c->add_option("--half-angle-deg", a.half_angle_deg, "Prior cone half angle");
    c->add_option("--tol", a.tol, "Streak spatial tolerance, px");
    c->add_option("--margin", a.margin, "Footprint margin beyond the streak radius, px");
    c->add_option("--min-support", a.min_support, "Minimum events per streak");
    c->add_option("--flow", a.flow, "Background flow vx,vy in px/s");
    c->add_option("--seed", a.seed, "Detector seed");
}

int run_restore(const RestoreArgs& a) {
    desnow::RestoreOptions opt;
    opt.model.contrast = a.contrast;
    if (a.flake_intensity == "observed") {
        opt.source = desnow::FlakeIntensitySource::Observed;
    } else {
        opt.model.flake_intensity = parse_list(a.flake_intensity, 1, "--flake-intensity")[0];
    }
    opt.prior.v_min = a.vmin;
    opt.prior.v_max = a.vmax;
    const auto dir = parse_list(a.direction, 2, "--direction");
    opt.prior.direction_x = dir[0];
    opt.prior.direction_y = dir[1];
    opt.prior.half_angle = a.half_angle_deg * std::numbers::pi / 180.0;
    opt.prior.tolerance = a.tol;
    opt.min_support = a.min_support;
    const auto flow = parse_list(a.flow, 2, "--flow");
    opt.background_flow = {flow[0], flow[1]};
    opt.footprint_margin = a.margin;
    opt.detector.seed = a.seed;
    if (a.exposure_ms < 0.0) throw UsageError("--exposure-ms must be >= 0");
    opt.exposure = static_cast<Timestamp>(std::llround(a.exposure_ms * 1000.0));
    const Timestamp window = ms_to_us(a.window_ms, "--window-ms");

    const IntensityImage image = io::read_image(a.image);
    const EventStream events = io::read_events(a.events, image.geometry());
    Timestamp t_ref = window;
    if (a.frame_time) t_ref = *a.frame_time;
    else if (!events.empty()) t_ref = std::max(window, events.events.back().t + 1);
    opt.window = {t_ref > window ? t_ref - window : 0, t_ref};

    const auto result = desnow::restore_image(image, events, opt);
    io::write_image(result.image, a.out);
    if (!a.mask_out.empty()) {
        if (fs::path(a.mask_out).extension() == ".png")
            io::write_png(plane_cast<IntensityTag>(result.mask), a.mask_out);
        else
            io::write_pfm(result.mask, a.mask_out);
    }
    std::cerr << result.streaks.size() << " streaks\n";
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string scene, out;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
    auto* c = app.add_subcommand("simulate", "Render an oracle flake scene into a dataset");
    c->add_option("--scene", a.scene, "Scene document (JSON)")->required();
    c->add_option("--out", a.out, "Output dataset directory")->required();
}

int run_simulate(const SimulateArgs& a) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(io::read_text(a.scene));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidScene, e.what());
    }
    const auto scene = dataset::parse_scene(doc, fs::path(a.scene).parent_path());
    const auto frames = dataset::simulate_frames(scene);

    nlohmann::ordered_json m;
    m["format"] = "evdesnow-simulation";
    m["version"] = dataset::kManifestVersion;
    const Geometry g = scene.scene.background.geometry();
    m["geometry"] = {{"width", g.width}, {"height", g.height}};
    m["frame_count"] = frames.size();
    m["window_us"] = scene.window;
    nlohmann::ordered_json times = nlohmann::ordered_json::array();
    for (const auto& f : frames) times.push_back(f.t);
    m["frame_times_us"] = times;
    m["scene"] = doc;
    dataset::write_dataset({a.out}, frames, m);
    std::cerr << "simulated " << frames.size() << " frames into " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
    std::string pred, gt, masks, report;
};

void add_metrics(CLI::App& app, MetricsArgs& a) {
    auto* c = app.add_subcommand("metrics", "PSNR and SSIM of predictions against ground truth");
    c->add_option("--pred", a.pred, "Predicted frame or directory")->required();
    c->add_option("--gt", a.gt, "Ground-truth frame or directory")->required();
    c->add_option("--masks", a.masks, "Occlusion masks (PFM) matching by stem");
    c->add_option("--report", a.report, "Report file; .json for JSON, text otherwise");
}

fs::path match_stem(const fs::path& dir, const std::string& stem, std::initializer_list<const char*> exts) {
    for (const char* ext : exts) {
        const auto p = dir / (stem + ext);
        if (fs::exists(p)) return p;
    }
    throw Error(ErrorCode::IoError, "no match for frame " + stem + " in " + dir.string());
}

int run_metrics(const MetricsArgs& a) {
    metrics::MetricReport report;
    const bool dirs = fs::is_directory(a.pred);
    if (dirs != fs::is_directory(a.gt)) throw UsageError("--pred and --gt must both be files or both directories");
    for (const auto& pred_path : image_files(a.pred)) {
        const std::string stem = pred_path.stem().string();
        const fs::path gt_path = dirs ? match_stem(a.gt, stem, {".png", ".pfm"}) : fs::path(a.gt);
        std::optional<OcclusionMask> mask;
        if (!a.masks.empty()) {
            const fs::path mp = fs::is_directory(a.masks) ? match_stem(a.masks, stem, {".pfm"}) : fs::path(a.masks);
            mask = io::read_pfm<MaskTag>(mp);
        }
        report.frames.push_back(metrics::evaluate_frame(stem, io::read_image(pred_path), io::read_image(gt_path),
                                               mask ? &*mask : nullptr));
    }
    std::cout << report.to_text();
    if (!a.report.empty())
        io::write_text(a.report, fs::path(a.report).extension() == ".json" ? report.to_json() : report.to_text());
    return 0;
}

// ---------------------------------------------------------------- voxelize

struct VoxelizeArgs {
    std::string events, out, sensor;
    std::size_t bins = 5;
    double window_ms = 10.0;
    std::optional<Timestamp> start;
};

void add_voxelize(CLI::App& app, VoxelizeArgs& a) {
    auto* c = app.add_subcommand("voxelize", "Bin events into a temporal voxel grid");
    c->add_option("--events", a.events, "Event stream (EVS1 or CSV)")->required();
    c->add_option("--bins", a.bins, "Number of temporal bins")->required();
    c->add_option("--window-ms", a.window_ms, "Window length")->required();
    c->add_option("--start-us", a.start, "Window start; default first event");
    c->add_option("--sensor", a.sensor, "WxH, required for CSV input");
    c->add_option("--out", a.out, "PFM stack, bins stacked vertically")->required();
}

int run_voxelize(const VoxelizeArgs& a) {
    const Timestamp length = ms_to_us(a.window_ms, "--window-ms");
    const Geometry g = a.sensor.empty() ? Geometry{} : parse_sensor(a.sensor);
    if (fs::path(a.events).extension() == ".csv" && a.sensor.empty())
        throw UsageError("--sensor is required for CSV events");
    const EventStream events = io::read_events(a.events, g);
    const Timestamp begin = a.start ? *a.start : (events.empty() ? 0 : events.events.front().t);
    const auto grid = voxelize(events, a.bins, {begin, begin + length});
    const auto vals = grid.values();
    io::write_file(a.out, io::encode_pfm(vals, events.geometry.width,
                                         std::size_t{events.geometry.height} * a.bins));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-guided snow removal and synthetic snow datasets"};
    app.require_subcommand(1);
    ComposeArgs compose;
    RestoreArgs restore;
    SimulateArgs simulate;
    MetricsArgs metrics;
    VoxelizeArgs vox;
    add_compose(app, compose);
    add_restore(app, restore);
    add_simulate(app, simulate);
    add_metrics(app, metrics);
    add_voxelize(app, vox);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("compose")) return run_compose(compose);
        if (app.got_subcommand("restore")) return run_restore(restore);
        if (app.got_subcommand("simulate")) return run_simulate(simulate);
        if (app.got_subcommand("metrics")) return run_metrics(metrics);
        if (app.got_subcommand("voxelize")) return run_voxelize(vox);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::InvalidArgument ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
