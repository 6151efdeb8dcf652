#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace slqi {

struct RasterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MalformedHeader : RasterError {
    using RasterError::RasterError;
};
struct TruncatedBody : RasterError {
    using RasterError::RasterError;
};
struct UnsupportedMaxval : RasterError {
    using RasterError::RasterError;
};
struct OutOfBounds : RasterError {
    using RasterError::RasterError;
};

/// Row-major 8-bit pixel grid, 1 (gray) or 3 (RGB) channels.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;

    Raster() = default;
    Raster(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {
        if (w < 1 || h < 1 || (c != 1 && c != 3))
            throw RasterError("invalid raster dimensions");
    }

    std::uint8_t& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t size() const { return data.size(); }

    bool operator==(const Raster& o) const {
        return width == o.width && height == o.height &&
               channels == o.channels && data == o.data;
    }
};

struct BoundingBox {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    bool operator==(const BoundingBox& o) const {
        return x == o.x && y == o.y && w == o.w && h == o.h;
    }
    long long area() const { return static_cast<long long>(w) * h; }
    bool contains(int px, int py) const {
        return px >= x && px < x + w && py >= y && py < y + h;
    }
    bool inside(const Raster& r) const {
        return x >= 0 && y >= 0 && w >= 1 && h >= 1 && x + w <= r.width &&
               y + h <= r.height;
    }
};

inline bool boxes_overlap(const BoundingBox& a, const BoundingBox& b) {
    return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h &&
           b.y < a.y + a.h;
}

namespace detail {

inline void skip_pnm_space(const std::uint8_t* p, std::size_t n, std::size_t& i) {
    while (i < n) {
        if (std::isspace(p[i])) {
            ++i;
        } else if (p[i] == '#') {  // comment runs to end of line
            while (i < n && p[i] != '\n') ++i;
        } else {
            break;
        }
    }
}

inline long parse_pnm_int(const std::uint8_t* p, std::size_t n, std::size_t& i) {
    skip_pnm_space(p, n, i);
    if (i >= n || !std::isdigit(p[i]))
        throw MalformedHeader("expected integer in PNM header");
    long v = 0;
    while (i < n && std::isdigit(p[i])) {
        v = v * 10 + (p[i] - '0');
        if (v > 1 << 30) throw MalformedHeader("PNM header value too large");
        ++i;
    }
    return v;
}

}  // namespace detail

/// Decode a binary PNM (P5 grayscale / P6 RGB, maxval 255).
inline Raster read_pnm(const std::uint8_t* bytes, std::size_t n) {
    if (n < 2) throw MalformedHeader("PNM data too short");
    if (bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw MalformedHeader("bad PNM magic");
    const int channels = bytes[1] == '5' ? 1 : 3;
    std::size_t i = 2;
    const long w = detail::parse_pnm_int(bytes, n, i);
    const long h = detail::parse_pnm_int(bytes, n, i);
    const long maxval = detail::parse_pnm_int(bytes, n, i);
    if (w < 1 || h < 1) throw MalformedHeader("non-positive PNM dimensions");
    if (maxval != 255) throw UnsupportedMaxval("PNM maxval must be 255");
    if (i >= n || !std::isspace(bytes[i]))
        throw MalformedHeader("missing whitespace after maxval");
    ++i;  // exactly one whitespace byte separates header and body
    const std::size_t need = static_cast<std::size_t>(w) * h * channels;
    if (n - i < need) throw TruncatedBody("PNM body shorter than declared");
    if (n - i > need) throw MalformedHeader("trailing bytes after PNM body");
    Raster r(static_cast<int>(w), static_cast<int>(h), channels);
    std::memcpy(r.data.data(), bytes + i, need);
    return r;
}

inline Raster read_pnm(const std::vector<std::uint8_t>& bytes) {
    return read_pnm(bytes.data(), bytes.size());
}

inline Raster read_pnm(const std::string& bytes) {
    return read_pnm(reinterpret_cast<const std::uint8_t*>(bytes.data()),
                    bytes.size());
}

/// Encode as binary PNM. Inverse of read_pnm, bit-exact.
inline std::vector<std::uint8_t> write_pnm(const Raster& r) {
    std::string header = (r.channels == 1 ? "P5\n" : "P6\n") +
                         std::to_string(r.width) + " " +
                         std::to_string(r.height) + "\n255\n";
    std::vector<std::uint8_t> out;
    out.reserve(header.size() + r.data.size());
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), r.data.begin(), r.data.end());
    return out;
}

/// BT.601 luma, round half up. Identity on grayscale input.
inline Raster to_grayscale(const Raster& r) {
    if (r.channels == 1) return r;
    Raster g(r.width, r.height, 1);
    const std::uint8_t* src = r.data.data();
    std::uint8_t* dst = g.data.data();
    const std::size_t npx = static_cast<std::size_t>(r.width) * r.height;
    for (std::size_t i = 0; i < npx; ++i) {
        const unsigned v =
            299u * src[3 * i] + 587u * src[3 * i + 1] + 114u * src[3 * i + 2];
        dst[i] = static_cast<std::uint8_t>((v + 500u) / 1000u);
    }
    return g;
}

inline Raster crop(const Raster& r, const BoundingBox& box) {
    if (!box.inside(r)) throw OutOfBounds("crop box outside raster");
    Raster out(box.w, box.h, r.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(box.w) * r.channels;
    for (int y = 0; y < box.h; ++y) {
        const std::uint8_t* src =
            r.data.data() +
            (static_cast<std::size_t>(box.y + y) * r.width + box.x) * r.channels;
        std::memcpy(out.data.data() + static_cast<std::size_t>(y) * row_bytes,
                    src, row_bytes);
    }
    return out;
}

/// Plain bilinear resize with center-aligned sampling.
inline Raster resize_bilinear(const Raster& r, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1)
        throw RasterError("resize target must be positive");
    if (new_w == r.width && new_h == r.height) return r;
    Raster out(new_w, new_h, r.channels);
    for (int y = 0; y < new_h; ++y) {
        double sy = (y + 0.5) * r.height / static_cast<double>(new_h) - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(r.height - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, r.height - 1);
        const double fy = sy - y0;
        for (int x = 0; x < new_w; ++x) {
            double sx = (x + 0.5) * r.width / static_cast<double>(new_w) - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(r.width - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, r.width - 1);
            const double fx = sx - x0;
            for (int c = 0; c < r.channels; ++c) {
                const double v =
                    (1 - fy) * ((1 - fx) * r.at(x0, y0, c) + fx * r.at(x1, y0, c)) +
                    fy * ((1 - fx) * r.at(x0, y1, c) + fx * r.at(x1, y1, c));
                out.at(x, y, c) =
                    static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
            }
        }
    }
    return out;
}

/// Aspect-preserving resize into a target canvas: content scaled by
/// min(tw/w, th/h) with bilinear interpolation, centered, rest padded.
inline Raster resize_letterbox(const Raster& r, int target_w, int target_h,
                               std::uint8_t pad_value = 255) {
    if (target_w < 1 || target_h < 1)
        throw RasterError("letterbox target must be positive");
    const double s = std::min(target_w / static_cast<double>(r.width),
                              target_h / static_cast<double>(r.height));
    const int cw = std::max(1, static_cast<int>(std::lround(r.width * s)));
    const int ch = std::max(1, static_cast<int>(std::lround(r.height * s)));
    const int ox = (target_w - cw) / 2;
    const int oy = (target_h - ch) / 2;
    Raster out(target_w, target_h, r.channels, pad_value);

    // scale 1 copies rows verbatim so the content region is bit-identical
    const Raster content = (cw == r.width && ch == r.height)
                               ? r
                               : resize_bilinear(r, cw, ch);
    const std::size_t row_bytes = static_cast<std::size_t>(cw) * r.channels;
    for (int y = 0; y < ch; ++y)
        std::memcpy(&out.at(ox, oy + y, 0),
                    content.data.data() + static_cast<std::size_t>(y) * row_bytes,
                    row_bytes);
    return out;
}

}  // namespace slqi
