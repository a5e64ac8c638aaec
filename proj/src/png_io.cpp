#include "uwno/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace uwno {

namespace {

const uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw std::runtime_error("png: " + path + ": " + why);
}

uint32_t read_u32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in, size_t expected,
                                  const std::string& path) {
    std::vector<uint8_t> out(expected);
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) fail(path, "inflate init failed");
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected) fail(path, "corrupt image data");
    return out;
}

std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& in) {
    uLongf bound = compressBound(static_cast<uLong>(in.size()));
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), 6) != Z_OK) {
        throw std::runtime_error("png: deflate failed");
    }
    out.resize(bound);
    return out;
}

void write_chunk(std::ofstream& os, const char type[4], const std::vector<uint8_t>& payload) {
    std::vector<uint8_t> head;
    put_u32(head, static_cast<uint32_t>(payload.size()));
    os.write(reinterpret_cast<const char*>(head.data()), 4);
    uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
    os.write(type, 4);
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size()));
    std::vector<uint8_t> tail;
    put_u32(tail, crc);
    os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

void write_png(const std::string& path, int width, int height, int channels,
               const uint8_t* pixels) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("png: empty image");
    const size_t stride = static_cast<size_t>(width) * channels;
    std::vector<uint8_t> raw((stride + 1) * static_cast<size_t>(height));
    for (int y = 0; y < height; ++y) {
        raw[(stride + 1) * static_cast<size_t>(y)] = 0;   // filter: none
        std::memcpy(raw.data() + (stride + 1) * static_cast<size_t>(y) + 1,
                    pixels + stride * static_cast<size_t>(y), stride);
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("png: cannot open " + path + " for writing");
    os.write(reinterpret_cast<const char*>(kSignature), 8);

    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(width));
    put_u32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);                                    // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);                // gray / rgb
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);                                    // no interlace
    write_chunk(os, "IHDR", ihdr);
    write_chunk(os, "IDAT", zlib_deflate(raw));
    write_chunk(os, "IEND", {});
    if (!os) throw std::runtime_error("png: write failed for " + path);
}

} // namespace

ImageU8 read_png(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(path, "cannot open file");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
        fail(path, "not a PNG file");
    }

    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool saw_end = false;
    while (pos + 8 <= bytes.size() && !saw_end) {
        const uint32_t len = read_u32(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) fail(path, "truncated chunk");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const uint8_t* payload = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) fail(path, "bad IHDR");
            width = static_cast<int>(read_u32(payload));
            height = static_cast<int>(read_u32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) fail(path, "interlaced PNGs are not supported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_end = true;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0) fail(path, "zero-size image");
    if (bit_depth != 8) fail(path, "only 8-bit PNGs are supported");
    int src_channels = 0;
    switch (color_type) {
        case 0: src_channels = 1; break;
        case 2: src_channels = 3; break;
        case 4: src_channels = 2; break;
        case 6: src_channels = 4; break;
        default: fail(path, "unsupported color type " + std::to_string(color_type));
    }

    const size_t stride = static_cast<size_t>(width) * src_channels;
    std::vector<uint8_t> raw =
        zlib_inflate(idat, (stride + 1) * static_cast<size_t>(height), path);

    // undo per-row filters in place
    std::vector<uint8_t> prev(stride, 0);
    std::vector<uint8_t> cur(stride);
    std::vector<uint8_t> flat(stride * static_cast<size_t>(height));
    const int bpp = src_channels;
    for (int y = 0; y < height; ++y) {
        const uint8_t* row = raw.data() + (stride + 1) * static_cast<size_t>(y);
        const uint8_t filter = row[0];
        const uint8_t* src = row + 1;
        for (size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<size_t>(bpp) ? cur[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<size_t>(bpp) ? prev[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: fail(path, "unknown filter " + std::to_string(filter));
            }
            cur[i] = static_cast<uint8_t>(v);
        }
        std::memcpy(flat.data() + stride * static_cast<size_t>(y), cur.data(), stride);
        std::swap(prev, cur);
    }

    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = src_channels >= 3 ? 3 : 1;
    img.pixels.resize(static_cast<size_t>(width) * height * img.channels);
    const int keep = img.channels;
    for (size_t px = 0; px < static_cast<size_t>(width) * height; ++px) {
        for (int ch = 0; ch < keep; ++ch) {
            img.pixels[px * keep + ch] = flat[px * src_channels + ch];
        }
    }
    return img;
}

void write_png_gray(const std::string& path, int width, int height, const uint8_t* pixels) {
    write_png(path, width, height, 1, pixels);
}

void write_png_rgb(const std::string& path, int width, int height, const uint8_t* pixels) {
    write_png(path, width, height, 3, pixels);
}

} // namespace uwno
