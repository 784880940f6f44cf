#pragma once

#include "evdesnow/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace evdesnow::io {

/// 8-bit grayscale PNG; values are clamped to [0, 1] and rounded to /255.
void write_png(const IntensityImage& image, const std::filesystem::path& path);
/// Any PNG libpng decodes, read at 8 bits. Colour is reduced to luminance
/// 0.299 R + 0.587 G + 0.114 B.
IntensityImage read_png(const std::filesystem::path& path);

/// Single-channel little-endian PFM ("Pf", negative scale), rows bottom-up.
std::vector<std::uint8_t> encode_pfm(std::span<const double> values, std::size_t width,
                                     std::size_t height);
/// Accepts "Pf" and "PF" (colour reduced to luminance) in either byte order.
std::vector<double> decode_pfm(std::span<const std::uint8_t> bytes, std::size_t& width,
                               std::size_t& height);

template <typename Tag>
void write_pfm(const Plane<Tag>& plane, const std::filesystem::path& path);
template <typename Tag>
Plane<Tag> read_pfm(const std::filesystem::path& path);

/// Dispatch on extension: ".png" or ".pfm"; anything else is UnsupportedFormat.
IntensityImage read_image(const std::filesystem::path& path);
void write_image(const IntensityImage& image, const std::filesystem::path& path);

} // namespace evdesnow::io
