#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "knnbandit/common.hpp"

namespace knnbandit {

// IDX is the big-endian binary format the MNIST files ship in:
// magic 0x00000803 + [n, rows, cols] for image files, 0x00000801 + [n] for
// label files, followed by the raw uint8 payload.
struct IdxImages {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols
};

struct IdxLabels {
    std::uint32_t count = 0;
    std::vector<std::uint8_t> labels;
};

namespace detail {

inline std::uint32_t read_be_u32(const std::vector<std::uint8_t>& buf, std::size_t offset,
                                 const std::string& what) {
    if (offset + 4 > buf.size()) {
        throw data_error(what + ": truncated at offset " + std::to_string(offset));
    }
    return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
           (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open file: " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is),
                                     std::istreambuf_iterator<char>());
}

}  // namespace detail

// Inflates a gzip (or zlib) stream. Used by the dataset fetcher; the MNIST
// mirrors serve the IDX files gzipped.
inline std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw data_error("zlib init failed");
    std::vector<std::uint8_t> out;
    out.resize(std::max<std::size_t>(in.size() * 4, 1 << 16));
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    std::size_t written = 0;
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        if (written == out.size()) out.resize(out.size() * 2);
        zs.next_out = out.data() + written;
        zs.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        written = out.size() - zs.avail_out;
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw data_error("gzip payload is corrupt (zlib code " + std::to_string(rc) + ")");
        }
    }
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

inline std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& in) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK) {
        throw data_error("zlib init failed");
    }
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    if (deflate(&zs, Z_FINISH) != Z_STREAM_END) {
        deflateEnd(&zs);
        throw data_error("gzip compression failed");
    }
    out.resize(out.size() - zs.avail_out);
    deflateEnd(&zs);
    return out;
}

inline IdxImages parse_idx_images(const std::vector<std::uint8_t>& buf, const std::string& name) {
    const std::uint32_t magic = detail::read_be_u32(buf, 0, name);
    if (magic != 0x00000803u) {
        char hex[16];
        std::snprintf(hex, sizeof(hex), "0x%08x", magic);
        throw data_error(name + ": bad magic number " + hex + " at offset 0 (expected 0x00000803)");
    }
    IdxImages out;
    out.count = detail::read_be_u32(buf, 4, name);
    out.rows = detail::read_be_u32(buf, 8, name);
    out.cols = detail::read_be_u32(buf, 12, name);
    const std::size_t payload = std::size_t(out.count) * out.rows * out.cols;
    if (buf.size() != 16 + payload) {
        throw data_error(name + ": payload has " + std::to_string(buf.size() - 16) +
                         " bytes, header declares " + std::to_string(payload));
    }
    out.pixels.assign(buf.begin() + 16, buf.end());
    return out;
}

inline IdxLabels parse_idx_labels(const std::vector<std::uint8_t>& buf, const std::string& name) {
    const std::uint32_t magic = detail::read_be_u32(buf, 0, name);
    if (magic != 0x00000801u) {
        char hex[16];
        std::snprintf(hex, sizeof(hex), "0x%08x", magic);
        throw data_error(name + ": bad magic number " + hex + " at offset 0 (expected 0x00000801)");
    }
    IdxLabels out;
    out.count = detail::read_be_u32(buf, 4, name);
    if (buf.size() != 8 + out.count) {
        throw data_error(name + ": payload has " + std::to_string(buf.size() - 8) +
                         " bytes, header declares " + std::to_string(out.count));
    }
    out.labels.assign(buf.begin() + 8, buf.end());
    return out;
}

inline IdxImages read_idx_images(const std::string& path) {
    return parse_idx_images(detail::read_file_bytes(path), path);
}

inline IdxLabels read_idx_labels(const std::string& path) {
    return parse_idx_labels(detail::read_file_bytes(path), path);
}

inline void write_idx_images(const IdxImages& images, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cannot open file for writing: " + path);
    auto be = [&](std::uint32_t v) {
        const char bytes[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
        os.write(bytes, 4);
    };
    be(0x00000803u);
    be(images.count);
    be(images.rows);
    be(images.cols);
    os.write(reinterpret_cast<const char*>(images.pixels.data()),
             static_cast<std::streamsize>(images.pixels.size()));
}

inline void write_idx_labels(const IdxLabels& labels, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cannot open file for writing: " + path);
    auto be = [&](std::uint32_t v) {
        const char bytes[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
        os.write(bytes, 4);
    };
    be(0x00000801u);
    be(labels.count);
    os.write(reinterpret_cast<const char*>(labels.labels.data()),
             static_cast<std::streamsize>(labels.labels.size()));
}

}  // namespace knnbandit
