#pragma once

#include "intellipred/error.hpp"
#include "intellipred/signal.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace intellipred {

/// How a stereo file is reduced to mono.
enum class ChannelSelect { Mean, Left, Right };

inline std::optional<ChannelSelect> parse_channel_select(std::string_view s)
{
    if (s == "mean")
        return ChannelSelect::Mean;
    if (s == "left")
        return ChannelSelect::Left;
    if (s == "right")
        return ChannelSelect::Right;
    return std::nullopt;
}

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot open '{}'", path.string()));
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError(fmt::format("error reading '{}'", path.string()));
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError(fmt::format("cannot write '{}'", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError(fmt::format("error writing '{}'", path.string()));
}

inline std::uint16_t load_u16le(const unsigned char* p)
{
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t load_u32le(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void store_u16le(std::vector<unsigned char>& out, std::uint16_t v)
{
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

inline void store_u32le(std::vector<unsigned char>& out, std::uint32_t v)
{
    for (int s = 0; s < 32; s += 8)
        out.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

inline void store_tag(std::vector<unsigned char>& out, const char (&tag)[5])
{
    out.insert(out.end(), tag, tag + 4);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

} // namespace detail

/// Reads a RIFF/WAVE file holding PCM16 or float32 samples, mono or stereo.
inline Waveform read_wav(const std::filesystem::path& path, ChannelSelect channel = ChannelSelect::Mean)
{
    using namespace detail;
    if (!std::filesystem::exists(path))
        throw IoError(fmt::format("WAV file '{}' does not exist", path.string()));
    const auto bytes = read_file_bytes(path);
    const std::string name = path.string();

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError(fmt::format("'{}': not a RIFF/WAVE file", name));

    std::optional<std::uint16_t> format;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = load_u32le(chunk + 4);
        const std::size_t body = pos + 8;
        if (size > bytes.size() - body)
            throw FormatError(fmt::format("'{}': chunk '{}' claims {} bytes but only {} remain", name,
                                          std::string_view(reinterpret_cast<const char*>(chunk), 4), size,
                                          bytes.size() - body));
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16)
                throw FormatError(fmt::format("'{}': fmt chunk too short ({} bytes)", name, size));
            const unsigned char* f = bytes.data() + body;
            format = load_u16le(f);
            channels = load_u16le(f + 2);
            rate = load_u32le(f + 4);
            bits = load_u16le(f + 14);
            if (*format == kFormatExtensible) {
                if (size < 26)
                    throw FormatError(fmt::format("'{}': extensible fmt chunk too short", name));
                format = load_u16le(f + 24);
            }
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = size;
        }
        pos = body + size + (size & 1u);
    }

    if (!format)
        throw FormatError(fmt::format("'{}': missing fmt chunk", name));
    if (data == nullptr)
        throw FormatError(fmt::format("'{}': missing data chunk", name));
    if (rate == 0)
        throw FormatError(fmt::format("'{}': sample rate is zero", name));
    if (channels != 1 && channels != 2)
        throw UnsupportedFormat(fmt::format("'{}': {} channels (only mono or stereo)", name, channels));
    const bool pcm16 = *format == kFormatPcm && bits == 16;
    const bool float32 = *format == kFormatFloat && bits == 32;
    if (!pcm16 && !float32)
        throw UnsupportedFormat(fmt::format("'{}': format tag {} with {} bits (need PCM 16-bit or float 32-bit)",
                                            name, *format, bits));

    const std::size_t sample_bytes = bits / 8;
    const std::size_t frame_bytes = sample_bytes * channels;
    if (data_size % frame_bytes != 0)
        throw FormatError(fmt::format("'{}': data size {} is not a multiple of the frame size {}", name, data_size,
                                      frame_bytes));
    const std::size_t frames = data_size / frame_bytes;

    auto sample_at = [&](std::size_t frame, std::size_t ch) -> double {
        const unsigned char* p = data + frame * frame_bytes + ch * sample_bytes;
        if (pcm16)
            return static_cast<double>(static_cast<std::int16_t>(load_u16le(p))) / 32768.0;
        return static_cast<double>(std::bit_cast<float>(load_u32le(p)));
    };

    Waveform w;
    w.sample_rate = static_cast<int>(rate);
    w.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        if (channels == 1) {
            w.samples[i] = sample_at(i, 0);
        } else {
            switch (channel) {
            case ChannelSelect::Left: w.samples[i] = sample_at(i, 0); break;
            case ChannelSelect::Right: w.samples[i] = sample_at(i, 1); break;
            case ChannelSelect::Mean: w.samples[i] = 0.5 * (sample_at(i, 0) + sample_at(i, 1)); break;
            }
        }
    }
    for (std::size_t i = 0; i < frames; ++i)
        if (!std::isfinite(w.samples[i]))
            throw FormatError(fmt::format("'{}': non-finite sample at frame {}", name, i));
    return w;
}

/// Encodes a waveform as a mono IEEE float32 WAV image. Samples are rounded to float32.
inline std::vector<unsigned char> encode_wav(const Waveform& w)
{
    using namespace detail;
    validate(w);
    const std::uint64_t data_size = static_cast<std::uint64_t>(w.size()) * 4;
    if (data_size > 0xFFFFFFFFull - 36)
        throw ValidationError("waveform too long for a RIFF file");

    std::vector<unsigned char> out;
    out.reserve(44 + data_size);
    store_tag(out, "RIFF");
    store_u32le(out, static_cast<std::uint32_t>(36 + data_size));
    store_tag(out, "WAVE");
    store_tag(out, "fmt ");
    store_u32le(out, 16);
    store_u16le(out, kFormatFloat);
    store_u16le(out, 1);
    store_u32le(out, static_cast<std::uint32_t>(w.sample_rate));
    store_u32le(out, static_cast<std::uint32_t>(w.sample_rate) * 4);
    store_u16le(out, 4);
    store_u16le(out, 32);
    store_tag(out, "data");
    store_u32le(out, static_cast<std::uint32_t>(data_size));
    for (double s : w.samples)
        store_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    return out;
}

inline void write_wav(const Waveform& w, const std::filesystem::path& path)
{
    // encode first so invalid samples fail before the file is touched
    const auto bytes = encode_wav(w);
    detail::write_file_bytes(path, bytes);
}

} // namespace intellipred
