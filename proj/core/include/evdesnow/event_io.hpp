#pragma once

#include "evdesnow/events.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace evdesnow::io {

// EVS1, little-endian:
//   header  magic 0x45565331 u32 | version 1 u32 | width u32 | height u32 | count u64
//   record  t_us u64 | x u16 | y u16 | p i8 (+1/-1) | 3 zero bytes
inline constexpr std::uint32_t kEvs1Magic = 0x45565331u;
inline constexpr std::uint32_t kEvs1Version = 1;
inline constexpr std::size_t kEvs1HeaderSize = 24;
inline constexpr std::size_t kEvs1RecordSize = 16;

/// Serializes the canonical form of `stream`.
std::vector<std::uint8_t> encode_evs1(const EventStream& stream);
/// Throws BadMagic, BadVersion, TruncatedFile or CorruptRecord(index).
EventStream decode_evs1(std::span<const std::uint8_t> bytes);

std::string encode_csv(const EventStream& stream);
/// CSV has no geometry header; the caller supplies it.
EventStream decode_csv(const std::string& text, Geometry geometry);

/// Format chosen by extension: ".csv" is CSV, anything else EVS1.
void write_events(const EventStream& stream, const std::filesystem::path& path);
EventStream read_events(const std::filesystem::path& path, Geometry csv_geometry = {});

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

} // namespace evdesnow::io
