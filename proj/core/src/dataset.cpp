#include "evdesnow/dataset.hpp"

#include "evdesnow/error.hpp"
#include "evdesnow/event_io.hpp"
#include "evdesnow/image_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>

namespace evdesnow::dataset {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json homography_json(const Homography& h) {
    ordered_json arr = ordered_json::array();
    for (double v : h.matrix()) arr.push_back(v);
    return arr;
}

Homography homography_from(const json& j) {
    if (!j.is_array() || j.size() != 9)
        throw Error(ErrorCode::InvalidArgument, "homography must be an array of 9 numbers");
    std::array<double, 9> m{};
    for (std::size_t i = 0; i < 9; ++i) m[i] = j.at(i).get<double>();
    return Homography(m);
}

template <typename T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "': " + e.what());
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? field<T>(j, key) : fallback;
}

} // namespace

std::string DatasetLayout::frame_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", index);
    return buf;
}

void DatasetLayout::create_directories() const {
    for (const auto& dir : {images(), events(), gt(), masks()}) fs::create_directories(dir);
}

std::vector<std::string> DatasetLayout::frames() const {
    if (!fs::is_directory(images()))
        throw Error(ErrorCode::InvalidArgument, images().string() + " is not a directory");
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(images()))
        if (entry.is_regular_file()) stems.push_back(entry.path().stem().string());
    std::sort(stems.begin(), stems.end());
    for (const auto& stem : stems) {
        if (!fs::exists(events() / (stem + ".evs")))
            throw Error(ErrorCode::InvalidArgument, "frame " + stem + " has no events/ entry");
        if (!fs::exists(gt() / (stem + ".png")))
            throw Error(ErrorCode::InvalidArgument, "frame " + stem + " has no gt/ entry");
    }
    return stems;
}

ordered_json to_json(const synth::CompositeConfig& config) {
    ordered_json augs = ordered_json::array();
    for (const auto& aug : config.augmentations) {
        ordered_json a;
        if (const auto* s = std::get_if<synth::ScaleTime>(&aug)) {
            a["type"] = "scale_time";
            a["factor"] = s->factor;
        } else if (std::holds_alternative<synth::FlipHorizontal>(aug)) {
            a["type"] = "flip";
        } else if (const auto* w = std::get_if<synth::Warp>(&aug)) {
            a["type"] = "homography";
            a["matrix"] = homography_json(w->homography);
        } else if (const auto* st = std::get_if<synth::Stagger>(&aug)) {
            a["type"] = "stagger";
            a["offsets_us"] = st->offsets;
            ordered_json hs = ordered_json::array();
            for (const auto& h : st->homographies) hs.push_back(homography_json(h));
            a["homographies"] = hs;
        }
        augs.push_back(a);
    }
    ordered_json j;
    j["alpha"] = config.alpha;
    j["contrast"] = config.contrast;
    j["snow_intensity"] = config.snow_intensity;
    j["overlap_window_us"] = config.overlap_window;
    j["augmentations"] = augs;
    return j;
}

synth::CompositeConfig composite_config_from_json(const json& j) {
    synth::CompositeConfig c;
    c.alpha = field<double>(j, "alpha");
    c.contrast = field<double>(j, "contrast");
    c.snow_intensity = field<double>(j, "snow_intensity");
    c.overlap_window = field<Timestamp>(j, "overlap_window_us");
    for (const auto& a : field<json>(j, "augmentations")) {
        const auto type = field<std::string>(a, "type");
        if (type == "scale_time") {
            c.augmentations.emplace_back(synth::ScaleTime{field<double>(a, "factor")});
        } else if (type == "flip") {
            c.augmentations.emplace_back(synth::FlipHorizontal{});
        } else if (type == "homography") {
            c.augmentations.emplace_back(synth::Warp{homography_from(field<json>(a, "matrix"))});
        } else if (type == "stagger") {
            synth::Stagger st;
            st.offsets = field<std::vector<Timestamp>>(a, "offsets_us");
            for (const auto& h : field<json>(a, "homographies")) st.homographies.push_back(homography_from(h));
            c.augmentations.emplace_back(std::move(st));
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown augmentation type '" + type + "'");
        }
    }
    c.validate();
    return c;
}

ordered_json to_json(const synth::HazeParams& haze) {
    ordered_json j;
    j["atmospheric_light"] = haze.atmospheric_light;
    j["beta"] = haze.beta;
    return j;
}

synth::HazeParams haze_from_json(const json& j) {
    synth::HazeParams h{field<double>(j, "atmospheric_light"), field<double>(j, "beta")};
    h.validate();
    return h;
}

synth::Stagger make_stagger(std::size_t copies, Timestamp spacing, Geometry geometry,
                            std::uint64_t seed) {
    if (copies == 0) throw Error(ErrorCode::InvalidArgument, "stagger needs at least one copy");
    if (copies > 1 && spacing == 0)
        throw Error(ErrorCode::InvalidArgument, "stagger spacing must be positive");
    std::mt19937_64 rng(seed);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
    synth::Stagger st;
    for (std::size_t k = 0; k < copies; ++k) {
        st.offsets.push_back(static_cast<Timestamp>(k) * spacing);
        if (k == 0) {
            st.homographies.push_back(Homography::identity());
            continue;
        }
        const double dx = std::round(unit() * geometry.width / 4.0);
        const double dy = std::round(unit() * geometry.height / 4.0);
        st.homographies.push_back(Homography::translation(dx, dy));
    }
    return st;
}

std::vector<ComposedFrame> compose_frames(const ComposeInputs& inputs, const ComposeSettings& settings) {
    settings.config.validate();
    settings.haze.validate();
    if (settings.window == 0) throw Error(ErrorCode::InvalidArgument, "window must be positive");
    if (inputs.backgrounds.empty()) throw Error(ErrorCode::InvalidArgument, "no background frames");
    const Geometry g = inputs.background_events.geometry;
    if (inputs.snow_events.geometry != g)
        throw Error(ErrorCode::GeometryMismatch, "background and snow event geometry differ");
    for (const auto& bg : inputs.backgrounds)
        if (bg.geometry() != g)
            throw Error(ErrorCode::GeometryMismatch, "background image vs event geometry");
    const std::size_t n = inputs.backgrounds.size();
    if (!inputs.depths.empty() && inputs.depths.size() != 1 && inputs.depths.size() != n)
        throw Error(ErrorCode::InvalidArgument, "need one depth map per frame or a single shared one");
    std::vector<Timestamp> times = inputs.frame_times;
    if (times.empty())
        for (std::size_t k = 0; k < n; ++k) times.push_back(static_cast<Timestamp>(k + 1) * settings.window);
    if (times.size() != n) throw Error(ErrorCode::InvalidArgument, "frame time count != background count");

    const EventStream background = canonicalize(inputs.background_events);
    const EventStream snow = synth::augment_foreground(inputs.snow_events, settings.config);

    std::vector<ComposedFrame> frames(n);
    parallel_for(n, [&](std::size_t k) {
        const Timestamp t = times[k];
        const TimeWindow window{t > settings.window ? t - settings.window : 0, t};
        ComposedFrame& f = frames[k];
        f.t = t;
        const DepthMap depth = inputs.depths.empty() ? DepthMap(g)
                               : inputs.depths.size() == 1 ? inputs.depths.front()
                                                           : inputs.depths[k];
        f.hazy = synth::render_haze(inputs.backgrounds[k], depth, settings.haze);
        const auto layer = synth::rasterize_snow_layer(snow, window, settings.config.snow_intensity);
        f.snowy = synth::render_snow_image(f.hazy, layer.layer, layer.mask, settings.config.alpha);
        f.mask = layer.mask;
        f.events = synth::composite_events(slice(background, window), slice(snow, window), f.hazy,
                                           settings.config);
    });
    return frames;
}

ordered_json compose_manifest(const ComposeSettings& settings, Geometry geometry,
                              const std::vector<ComposedFrame>& frames) {
    ordered_json m;
    m["format"] = "evdesnow-dataset";
    m["version"] = kManifestVersion;
    m["geometry"] = {{"width", geometry.width}, {"height", geometry.height}};
    m["frame_count"] = frames.size();
    m["window_us"] = settings.window;
    ordered_json times = ordered_json::array();
    for (const auto& f : frames) times.push_back(f.t);
    m["frame_times_us"] = times;
    m["seed"] = settings.seed;
    m["haze"] = to_json(settings.haze);
    m["composite"] = to_json(settings.config);
    return m;
}

void write_dataset(const DatasetLayout& layout, const std::vector<ComposedFrame>& frames,
                   const ordered_json& manifest) {
    layout.create_directories();
    parallel_for(frames.size(), [&](std::size_t k) {
        const auto name = DatasetLayout::frame_name(k);
        const auto& f = frames[k];
        io::write_png(f.snowy, layout.images() / (name + ".png"));
        io::write_png(f.hazy, layout.gt() / (name + ".png"));
        io::write_pfm(f.mask, layout.masks() / (name + ".pfm"));
        io::write_events(f.events, layout.events() / (name + ".evs"));
    });
    io::write_text(layout.manifest(), manifest.dump(2) + "\n");
}

SceneDocument parse_scene(const json& doc, const fs::path& base_dir) {
    try {
        const int version = field<int>(doc, "version");
        if (version != kSceneVersion)
            throw Error(ErrorCode::InvalidScene, "unsupported scene version " + std::to_string(version));
        SceneDocument out;
        synth::FlakeScene& s = out.scene;
        const json bg = field<json>(doc, "background");
        if (bg.contains("image")) {
            s.background = io::read_image(base_dir / field<std::string>(bg, "image"));
        } else {
            const Geometry g{field<std::uint32_t>(doc, "width"), field<std::uint32_t>(doc, "height")};
            if (g.width == 0 || g.height == 0) throw Error(ErrorCode::InvalidScene, "empty geometry");
            if (bg.contains("constant")) {
                s.background = IntensityImage(g, field<double>(bg, "constant"));
            } else if (bg.contains("smooth")) {
                const json sm = bg.at("smooth");
                s.background = synth::smooth_background(g, field<double>(sm, "low"), field<double>(sm, "high"),
                                                        field_or<double>(sm, "cell", 16.0),
                                                        field_or<std::uint64_t>(sm, "seed", 0));
            } else {
                throw Error(ErrorCode::InvalidScene, "background needs 'image', 'constant' or 'smooth'");
            }
        }
        const auto flow = field_or<std::vector<double>>(doc, "flow", {0.0, 0.0});
        if (flow.size() != 2) throw Error(ErrorCode::InvalidScene, "flow must be [vx, vy]");
        s.flow_x = flow[0];
        s.flow_y = flow[1];
        s.duration = field<Timestamp>(doc, "duration_us");
        s.contrast = field_or<double>(doc, "contrast", 0.15);
        s.rate_hz = field_or<double>(doc, "rate_hz", 1000.0);
        s.exposure = field_or<Timestamp>(doc, "exposure_us", 0);
        out.window = field_or<Timestamp>(doc, "window_us", 10'000);
        if (doc.contains("frame_times_us")) {
            s.frame_times = field<std::vector<Timestamp>>(doc, "frame_times_us");
        } else {
            const auto count = field_or<std::size_t>(doc, "frame_count", 1);
            if (count == 0) throw Error(ErrorCode::InvalidScene, "frame_count must be positive");
            for (std::size_t k = 0; k < count; ++k)
                s.frame_times.push_back(s.duration * (k + 1) / count);
        }
        for (const auto& f : field_or<json>(doc, "flakes", json::array())) {
            synth::Flake flake;
            flake.radius = field_or<double>(f, "radius", 1.5);
            flake.intensity = field_or<double>(f, "intensity", 0.9);
            flake.x = field<double>(f, "x");
            flake.y = field<double>(f, "y");
            flake.vx = field_or<double>(f, "vx", 0.0);
            flake.vy = field_or<double>(f, "vy", 0.0);
            flake.birth = field_or<Timestamp>(f, "birth_us", 0);
            flake.death = field_or<Timestamp>(f, "death_us", UINT64_MAX);
            s.flakes.push_back(flake);
        }
        return out;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument) throw Error(ErrorCode::InvalidScene, e.what());
        throw;
    }
}

std::vector<ComposedFrame> simulate_frames(const SceneDocument& doc) {
    const auto sim = synth::simulate_flake_scene(doc.scene);
    std::vector<ComposedFrame> frames;
    frames.reserve(sim.frames.size());
    for (const auto& sf : sim.frames) {
        ComposedFrame f;
        f.t = sf.t;
        f.snowy = sf.snowy;
        f.hazy = sf.ground_truth;
        f.mask = sf.occlusion;
        f.events = slice(sim.events, TimeWindow{sf.t > doc.window ? sf.t - doc.window : 0, sf.t});
        frames.push_back(std::move(f));
    }
    return frames;
}

std::size_t worker_count() {
    std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("EVDESNOW_THREADS")) {
        char* end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return hw;
}

} // namespace evdesnow::dataset
