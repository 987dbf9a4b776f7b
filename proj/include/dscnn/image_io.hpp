#pragma once

#include <cmath>
#include <fstream>

#include "dscnn/tensor.hpp"

namespace dscnn {

namespace detail {

inline unsigned char quantize8(float v) {
    const long q = std::lround(static_cast<double>(v) * 255.0);
    return static_cast<unsigned char>(std::min(255l, std::max(0l, q)));
}

/// PNM header scanner: skips whitespace and '#' comments between tokens and
/// reports byte offsets on malformed input.
struct PnmReader {
    std::string buf;
    std::size_t pos = 0;
    std::string path;

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error("'" + path + "': " + what + " at byte " + std::to_string(pos));
    }

    void skip_space_and_comments() {
        while (pos < buf.size()) {
            const char c = buf[pos];
            if (c == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                return;
            }
        }
    }

    int read_int(const char* what) {
        skip_space_and_comments();
        if (pos >= buf.size()) fail(std::string("missing ") + what);
        if (buf[pos] < '0' || buf[pos] > '9') fail(std::string("malformed ") + what);
        long v = 0;
        while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
            v = v * 10 + (buf[pos] - '0');
            if (v > 1000000000l) fail(std::string("oversized ") + what);
            ++pos;
        }
        return static_cast<int>(v);
    }
};

inline Tensor load_pnm(const std::string& path, int want_channels) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    PnmReader r;
    r.path = path;
    r.buf.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (r.buf.size() < 2 || r.buf[0] != 'P') r.fail("not a PNM file (bad magic)");
    const char kind = r.buf[1];
    if (kind != '5' && kind != '6') r.fail("unsupported PNM kind (want P5 or P6)");
    const int channels = kind == '6' ? 3 : 1;
    if (want_channels != 0 && channels != want_channels)
        r.fail(want_channels == 3 ? "expected a P6 color image" : "expected a P5 grayscale image");
    r.pos = 2;

    const int w = r.read_int("width");
    const int h = r.read_int("height");
    const int maxval = r.read_int("maxval");
    if (w < 1 || h < 1) r.fail("degenerate image size");
    if (maxval != 255) r.fail("unsupported maxval (want 255)");
    if (r.pos >= r.buf.size()) r.fail("missing payload separator");
    const char sep = r.buf[r.pos];
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') r.fail("malformed payload separator");
    ++r.pos;

    const std::size_t need = static_cast<std::size_t>(w) * h * channels;
    if (r.buf.size() - r.pos < need) {
        r.pos = r.buf.size();
        r.fail("truncated payload (expected " + std::to_string(need) + " bytes)");
    }

    Tensor out({channels, h, w});
    const unsigned char* p = reinterpret_cast<const unsigned char*>(r.buf.data()) + r.pos;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                out.at(c, y, x) = static_cast<float>(*p++) / 255.0f;
    return out;
}

inline void save_pnm(const std::string& path, const Tensor& img, int channels) {
    require(img.rank() == 3 && img.dim(0) == channels,
            "save image: expected " + std::to_string(channels) + "xHxW tensor, got " + shape_str(img));
    const int h = img.dim(1), w = img.dim(2);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << (channels == 3 ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
    std::string payload;
    payload.reserve(static_cast<std::size_t>(h) * w * channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                payload.push_back(static_cast<char>(quantize8(img.at(c, y, x))));
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace detail

/// 8-bit binary PPM (P6); values in [0,1] quantize to 0..255.
inline void save_ppm(const std::string& path, const Tensor& rgb) { detail::save_pnm(path, rgb, 3); }
inline Tensor load_ppm(const std::string& path) { return detail::load_pnm(path, 3); }

/// 8-bit binary PGM (P5) for single-channel depth.
inline void save_pgm(const std::string& path, const Tensor& gray) { detail::save_pnm(path, gray, 1); }
inline Tensor load_pgm(const std::string& path) { return detail::load_pnm(path, 1); }

/// Loads either kind: P6 gives 3xHxW, P5 gives 1xHxW, scaled to [0,1].
inline Tensor load_image(const std::string& path) { return detail::load_pnm(path, 0); }

}  // namespace dscnn
