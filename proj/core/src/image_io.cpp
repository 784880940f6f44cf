#include "evdesnow/image_io.hpp"

#include "evdesnow/error.hpp"
#include "evdesnow/event_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cctype>
#include <string>

namespace evdesnow::io {

namespace {

std::uint8_t to_byte(double v) noexcept {
    return static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0));
}

std::string lowercase_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

// Owns a png_image and releases libpng's internal state on scope exit.
struct PngImage {
    png_image image{};
    PngImage() { image.version = PNG_IMAGE_VERSION; }
    ~PngImage() { png_image_free(&image); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

} // namespace

void write_png(const IntensityImage& image, const std::filesystem::path& path) {
    std::vector<std::uint8_t> pixels(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) pixels[i] = to_byte(image[i]);
    PngImage png;
    png.image.width = static_cast<png_uint_32>(image.width());
    png.image.height = static_cast<png_uint_32>(image.height());
    png.image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png.image, path.c_str(), 0, pixels.data(), 0, nullptr))
        throw Error(ErrorCode::IoError, "cannot write " + path.string() + ": " + png.image.message);
}

IntensityImage read_png(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    PngImage png;
    if (!png_image_begin_read_from_file(&png.image, path.c_str()))
        throw Error(ErrorCode::DecodeError, path.string() + ": " + png.image.message);
    const bool colour = (png.image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png.image.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png.image));
    if (!png_image_finish_read(&png.image, nullptr, pixels.data(), 0, nullptr))
        throw Error(ErrorCode::DecodeError, path.string() + ": " + png.image.message);
    IntensityImage out(png.image.width, png.image.height);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (colour)
            out[i] = (0.299 * pixels[3 * i] + 0.587 * pixels[3 * i + 1] + 0.114 * pixels[3 * i + 2]) / 255.0;
        else
            out[i] = pixels[i] / 255.0;
    }
    return out;
}

std::vector<std::uint8_t> encode_pfm(std::span<const double> values, std::size_t width,
                                     std::size_t height) {
    if (values.size() != width * height)
        throw Error(ErrorCode::DimensionMismatch, "PFM payload size");
    const std::string header = "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + 4 * values.size());
    for (std::size_t row = height; row-- > 0;)
        for (std::size_t x = 0; x < width; ++x) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[row * width + x]));
            for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
        }
    return out;
}

std::vector<double> decode_pfm(std::span<const std::uint8_t> bytes, std::size_t& width,
                               std::size_t& height) {
    // Header: three whitespace-separated tokens after the type line.
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
        return t;
    };
    const std::string kind = token();
    if (kind != "Pf" && kind != "PF") throw Error(ErrorCode::UnsupportedFormat, "not a PFM file");
    const int channels = kind == "PF" ? 3 : 1;
    double scale = 0.0;
    try {
        width = std::stoul(token());
        height = std::stoul(token());
        scale = std::stod(token());
    } catch (const std::exception&) {
        throw Error(ErrorCode::DecodeError, "malformed PFM header");
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos]) || scale == 0.0)
        throw Error(ErrorCode::DecodeError, "malformed PFM header");
    ++pos; // single whitespace byte before the raster
    const bool little = scale < 0.0;
    const std::size_t need = width * height * static_cast<std::size_t>(channels) * 4;
    if (bytes.size() - pos < need) throw Error(ErrorCode::DecodeError, "PFM raster truncated");
    std::vector<double> values(width * height);
    auto read_float = [&](std::size_t offset) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            const int shift = little ? 8 * b : 8 * (3 - b);
            bits |= std::uint32_t{bytes[offset + static_cast<std::size_t>(b)]} << shift;
        }
        return static_cast<double>(std::bit_cast<float>(bits));
    };
    std::size_t offset = pos;
    for (std::size_t row = height; row-- > 0;)
        for (std::size_t x = 0; x < width; ++x) {
            if (channels == 1) {
                values[row * width + x] = read_float(offset);
            } else {
                values[row * width + x] = 0.299 * read_float(offset) + 0.587 * read_float(offset + 4) +
                                          0.114 * read_float(offset + 8);
            }
            offset += 4 * static_cast<std::size_t>(channels);
        }
    return values;
}

template <typename Tag>
void write_pfm(const Plane<Tag>& plane, const std::filesystem::path& path) {
    write_file(path, encode_pfm(plane.values(), plane.width(), plane.height()));
}

template <typename Tag>
Plane<Tag> read_pfm(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    std::size_t w = 0, h = 0;
    auto values = decode_pfm(bytes, w, h);
    return Plane<Tag>(w, h, std::move(values));
}

template void write_pfm(const IntensityImage&, const std::filesystem::path&);
template void write_pfm(const OcclusionMask&, const std::filesystem::path&);
template void write_pfm(const DepthMap&, const std::filesystem::path&);
template IntensityImage read_pfm<IntensityTag>(const std::filesystem::path&);
template OcclusionMask read_pfm<MaskTag>(const std::filesystem::path&);
template DepthMap read_pfm<DepthTag>(const std::filesystem::path&);

IntensityImage read_image(const std::filesystem::path& path) {
    const auto ext = lowercase_extension(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".pfm") return read_pfm<IntensityTag>(path);
    throw Error(ErrorCode::UnsupportedFormat, "unsupported image format: " + path.string());
}

void write_image(const IntensityImage& image, const std::filesystem::path& path) {
    const auto ext = lowercase_extension(path);
    if (ext == ".png") return write_png(image, path);
    if (ext == ".pfm") return write_pfm(image, path);
    throw Error(ErrorCode::UnsupportedFormat, "unsupported image format: " + path.string());
}

} // namespace evdesnow::io
