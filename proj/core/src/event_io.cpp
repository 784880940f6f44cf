#include "evdesnow/event_io.hpp"

#include "evdesnow/error.hpp"

#include <array>
#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace evdesnow::io {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{bytes[offset + i]} << (8 * i);
    return static_cast<T>(v);
}

template <typename T>
bool parse_field(std::string_view s, T& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

std::vector<std::uint8_t> encode_evs1(const EventStream& stream) {
    const EventStream canonical = canonicalize(stream);
    std::vector<std::uint8_t> out;
    out.reserve(kEvs1HeaderSize + kEvs1RecordSize * canonical.events.size());
    put<std::uint32_t>(out, kEvs1Magic);
    put<std::uint32_t>(out, kEvs1Version);
    put<std::uint32_t>(out, canonical.geometry.width);
    put<std::uint32_t>(out, canonical.geometry.height);
    put<std::uint64_t>(out, canonical.events.size());
    for (const Event& e : canonical.events) {
        put<std::uint64_t>(out, e.t);
        put<std::uint16_t>(out, e.x);
        put<std::uint16_t>(out, e.y);
        out.push_back(static_cast<std::uint8_t>(e.p));
        out.insert(out.end(), 3, 0);
    }
    return out;
}

EventStream decode_evs1(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kEvs1HeaderSize)
        throw Error(ErrorCode::TruncatedFile, "EVS1 header needs 24 bytes, got " + std::to_string(bytes.size()));
    const auto magic = get<std::uint32_t>(bytes, 0);
    if (magic != kEvs1Magic) {
        std::ostringstream os;
        os << "expected 0x45565331, got 0x" << std::hex << magic;
        throw Error(ErrorCode::BadMagic, os.str());
    }
    const auto version = get<std::uint32_t>(bytes, 4);
    if (version != kEvs1Version)
        throw Error(ErrorCode::BadVersion, "unsupported EVS1 version " + std::to_string(version));
    EventStream stream;
    stream.geometry = {get<std::uint32_t>(bytes, 8), get<std::uint32_t>(bytes, 12)};
    const auto count = get<std::uint64_t>(bytes, 16);
    const std::uint64_t available = (bytes.size() - kEvs1HeaderSize) / kEvs1RecordSize;
    if (count > available)
        throw Error(ErrorCode::TruncatedFile, "header declares " + std::to_string(count) +
                                                  " records, file holds " + std::to_string(available) +
                                                  " (expected " +
                                                  std::to_string(kEvs1HeaderSize + kEvs1RecordSize * count) +
                                                  " bytes, got " + std::to_string(bytes.size()) + ")");
    if (bytes.size() != kEvs1HeaderSize + kEvs1RecordSize * count)
        throw Error(ErrorCode::CorruptRecord, "trailing bytes after record " + std::to_string(count),
                    static_cast<std::int64_t>(count));
    stream.events.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::size_t off = kEvs1HeaderSize + kEvs1RecordSize * i;
        Event e;
        e.t = get<std::uint64_t>(bytes, off);
        e.x = get<std::uint16_t>(bytes, off + 8);
        e.y = get<std::uint16_t>(bytes, off + 10);
        e.p = static_cast<std::int8_t>(bytes[off + 12]);
        const bool padded = bytes[off + 13] == 0 && bytes[off + 14] == 0 && bytes[off + 15] == 0;
        if ((e.p != 1 && e.p != -1) || !padded || e.x >= stream.geometry.width ||
            e.y >= stream.geometry.height)
            throw Error(ErrorCode::CorruptRecord, "record " + std::to_string(i),
                        static_cast<std::int64_t>(i));
        stream.events.push_back(e);
    }
    return canonicalize(std::move(stream));
}

std::string encode_csv(const EventStream& stream) {
    const EventStream canonical = canonicalize(stream);
    std::string out = "t_us,x,y,p\n";
    for (const Event& e : canonical.events) {
        out += std::to_string(e.t);
        out += ',';
        out += std::to_string(e.x);
        out += ',';
        out += std::to_string(e.y);
        out += ',';
        out += std::to_string(static_cast<int>(e.p));
        out += '\n';
    }
    return out;
}

EventStream decode_csv(const std::string& text, Geometry geometry) {
    EventStream stream{geometry, {}};
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t_us,x,y,p", 0) != 0)
        throw Error(ErrorCode::DecodeError, "CSV header must be t_us,x,y,p");
    std::int64_t index = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::string_view view(line);
        std::array<std::string_view, 4> fields;
        std::size_t n = 0;
        while (n < 4) {
            const auto comma = view.find(',');
            fields[n++] = view.substr(0, comma);
            if (comma == std::string_view::npos) break;
            view.remove_prefix(comma + 1);
        }
        Event e;
        unsigned x = 0, y = 0;
        int p = 0;
        if (n != 4 || !parse_field(fields[0], e.t) || !parse_field(fields[1], x) ||
            !parse_field(fields[2], y) || !parse_field(fields[3], p) || (p != 1 && p != -1) ||
            x > UINT16_MAX || y > UINT16_MAX)
            throw Error(ErrorCode::CorruptRecord, "CSV row " + std::to_string(index), index);
        e.x = static_cast<std::uint16_t>(x);
        e.y = static_cast<std::uint16_t>(y);
        e.p = static_cast<std::int8_t>(p);
        stream.events.push_back(e);
        ++index;
    }
    return canonicalize(std::move(stream));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

void write_events(const EventStream& stream, const std::filesystem::path& path) {
    if (path.extension() == ".csv") {
        write_text(path, encode_csv(stream));
        return;
    }
    write_file(path, encode_evs1(stream));
}

EventStream read_events(const std::filesystem::path& path, Geometry csv_geometry) {
    if (path.extension() == ".csv") return decode_csv(read_text(path), csv_geometry);
    return decode_evs1(read_file(path));
}

} // namespace evdesnow::io
