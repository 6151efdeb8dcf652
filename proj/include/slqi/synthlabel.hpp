#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "slqi/code128.hpp"
#include "slqi/font5x7.hpp"
#include "slqi/imgfilter.hpp"
#include "slqi/raster.hpp"
#include "slqi/rng.hpp"

namespace slqi {

enum class QualityClass : int {
    Normal = 0,
    Contaminated = 1,
    Unreadable = 2,
    Handwritten = 3,
    Damaged = 4,
};

inline constexpr int kNumClasses = 5;

inline const char* class_name(QualityClass c) {
    switch (c) {
        case QualityClass::Normal: return "normal";
        case QualityClass::Contaminated: return "contaminated";
        case QualityClass::Unreadable: return "unreadable";
        case QualityClass::Handwritten: return "handwritten";
        case QualityClass::Damaged: return "damaged";
    }
    return "unknown";
}

struct SynthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigTooSmall : SynthError {
    using SynthError::SynthError;
};
struct UnknownClass : SynthError {
    using SynthError::SynthError;
};

/// Ground truth for one generated image.
struct Annotation {
    std::string image_path;
    QualityClass cls = QualityClass::Normal;
    BoundingBox barcode_box;
    BoundingBox address_box;
    std::uint64_t seed = 0;
};

struct IntensityRange {
    double lo = 0.5;
    double hi = 1.0;
};

struct GenConfig {
    int per_class_count = 100;
    // nonzero entries override per_class_count for that class (Table-style
    // unbalanced datasets)
    std::array<int, 5> per_class_override{};
    int min_w = 480, min_h = 360, max_w = 640, max_h = 480;
    std::uint64_t master_seed = 42;
    int font_scale = 2;
    int margin = 12;
    std::array<IntensityRange, 5> intensity = {{
        {0.0, 0.0},  // normal (unused)
        {0.4, 1.0},  // contaminated
        {0.5, 1.0},  // unreadable
        {0.5, 1.0},  // handwritten
        {0.4, 1.0},  // damaged
    }};

    int count_for(int cls) const {
        return per_class_override[cls] > 0 ? per_class_override[cls]
                                           : per_class_count;
    }

    void validate() const {
        if (min_w < 320 || min_h < 240)
            throw ConfigTooSmall("image size range must be at least 320x240");
        if (max_w < min_w || max_h < min_h)
            throw ConfigTooSmall("image size range is inverted");
        if (font_scale < 1 || font_scale > 4)
            throw ConfigTooSmall("font scale out of range");
        if (margin < 4 || margin > std::min(min_w, min_h) / 8)
            throw ConfigTooSmall("margin out of range");
        if (per_class_count < 0) throw ConfigTooSmall("negative class count");
        for (const IntensityRange& r : intensity)
            if (r.lo < 0 || r.hi > 1 || r.lo > r.hi)
                throw ConfigTooSmall("intensity range must satisfy 0<=lo<=hi<=1");
    }
};

// Seed-stream purposes. The address text stream draws receiver lines first
// so the handwritten degradation can re-derive them from the image seed.
namespace seed_purpose {
inline constexpr std::uint64_t kLayout = 1;
inline constexpr std::uint64_t kText = 2;
inline constexpr std::uint64_t kBarcode = 3;
inline constexpr std::uint64_t kIntensity = 4;
inline constexpr std::uint64_t kDegrade = 5;
}  // namespace seed_purpose

namespace synth_detail {

inline constexpr const char* kFirstNames[] = {
    "ALICE", "BRUNO", "CARLA", "DAVID", "EMMA", "FELIX", "GRETA", "HENRY",
    "IRIS", "JONAS", "KARL", "LENA", "MARCO", "NINA", "OSCAR", "PETRA"};
inline constexpr const char* kLastNames[] = {
    "ADLER", "BAKER", "CONTI", "DUBOIS", "EKLUND", "FISHER", "GARCIA", "HOLT",
    "IVANOV", "JANSEN", "KELLER", "LARSEN", "MEYER", "NOVAK", "OLSEN", "PETROV"};
inline constexpr const char* kStreets[] = {
    "MAPLE", "OAK", "BIRCH", "CEDAR", "ELM", "HARBOR", "STATION", "MILL",
    "PARK", "RIVER", "FOREST", "GARDEN", "BRIDGE", "CASTLE"};
inline constexpr const char* kStreetTypes[] = {"ST", "AVE", "RD", "LANE", "WAY"};
inline constexpr const char* kCities[] = {
    "SPRINGFIELD", "RIVERTON", "MILLBROOK", "LAKEVIEW", "FAIRVIEW",
    "GREENFIELD", "OAKDALE", "BRIGHTON", "WESTPORT", "NORWOOD"};
inline constexpr const char* kCountries[] = {
    "GERMANY", "FRANCE", "SPAIN", "ITALY", "POLAND",
    "AUSTRIA", "SWEDEN", "NORWAY", "FINLAND", "PORTUGAL"};
inline constexpr const char* kCarriers[] = {
    "ACME EXPRESS", "GLOBAL PARCEL", "SWIFT POST",
    "NORTH CARGO", "LINEHAUL ONE", "BLUE COURIER"};

template <typename A>
const char* pick(Xoshiro256& rng, const A& pool) {
    return pool[rng.next_int(0, std::size(pool) - 1)];
}

inline std::string digits(Xoshiro256& rng, int n) {
    std::string s;
    for (int i = 0; i < n; ++i)
        s += static_cast<char>('0' + rng.next_int(0, 9));
    return s;
}

/// Receiver address block. Must be the first draws from the text stream.
inline std::vector<std::string> random_address_lines(Xoshiro256& rng) {
    std::vector<std::string> lines;
    lines.push_back(std::string("TO: ") + pick(rng, kFirstNames) + " " +
                    pick(rng, kLastNames));
    lines.push_back(digits(rng, static_cast<int>(rng.next_int(1, 4))) + " " +
                    pick(rng, kStreets) + " " + pick(rng, kStreetTypes));
    if (rng.next_double() < 0.35)
        lines.push_back("UNIT " + digits(rng, static_cast<int>(rng.next_int(1, 2))));
    lines.push_back(std::string(pick(rng, kCities)) + " " + digits(rng, 5));
    lines.push_back(pick(rng, kCountries));
    return lines;
}

inline std::vector<std::string> random_sender_lines(Xoshiro256& rng) {
    std::vector<std::string> lines;
    lines.push_back(std::string("FROM: ") + pick(rng, kFirstNames) + " " +
                    pick(rng, kLastNames));
    lines.push_back(digits(rng, static_cast<int>(rng.next_int(1, 3))) + " " +
                    pick(rng, kStreets) + " " + pick(rng, kStreetTypes));
    lines.push_back(std::string(pick(rng, kCities)) + " " + digits(rng, 5));
    return lines;
}

inline BoundingBox inflate_clip(const BoundingBox& b, int d, int w, int h) {
    const int x0 = std::max(0, b.x - d);
    const int y0 = std::max(0, b.y - d);
    const int x1 = std::min(w, b.x + b.w + d);
    const int y1 = std::min(h, b.y + b.h + d);
    return BoundingBox{x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
}

inline void fill_rect(Raster& img, const BoundingBox& r, std::uint8_t color,
                      const BoundingBox& clip) {
    const int x0 = std::max(r.x, clip.x);
    const int y0 = std::max(r.y, clip.y);
    const int x1 = std::min(r.x + r.w, clip.x + clip.w);
    const int y1 = std::min(r.y + r.h, clip.y + clip.h);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = color;
}

inline void rect_outline(Raster& img, const BoundingBox& r, int thickness,
                         std::uint8_t color) {
    const BoundingBox clip{0, 0, img.width, img.height};
    fill_rect(img, {r.x, r.y, r.w, thickness}, color, clip);
    fill_rect(img, {r.x, r.y + r.h - thickness, r.w, thickness}, color, clip);
    fill_rect(img, {r.x, r.y, thickness, r.h}, color, clip);
    fill_rect(img, {r.x + r.w - thickness, r.y, thickness, r.h}, color, clip);
}

inline void fill_ellipse(Raster& img, double cx, double cy, double rx,
                         double ry, std::uint8_t color, const BoundingBox& clip) {
    const int x0 = std::max(clip.x, static_cast<int>(std::floor(cx - rx)));
    const int x1 = std::min(clip.x + clip.w - 1, static_cast<int>(std::ceil(cx + rx)));
    const int y0 = std::max(clip.y, static_cast<int>(std::floor(cy - ry)));
    const int y1 = std::min(clip.y + clip.h - 1, static_cast<int>(std::ceil(cy + ry)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = (x - cx) / rx, dy = (y - cy) / ry;
            if (dx * dx + dy * dy <= 1.0)
                for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = color;
        }
}

inline void thick_segment(Raster& img, double x0, double y0, double x1,
                          double y1, double thickness, std::uint8_t color,
                          const BoundingBox& clip) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int steps = std::max(1, static_cast<int>(len));
    const double r = std::max(0.5, thickness / 2.0);
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        fill_ellipse(img, x0 + t * (x1 - x0), y0 + t * (y1 - y0), r, r, color,
                     clip);
    }
}

struct BarcodeRender {
    BoundingBox bars;   // tight box around the bars
    int module_px = 2;
    std::string payload;
};

/// Render a Code 128 barcode with 10-module quiet zones; returns the tight
/// bar box. Human-readable payload goes beneath the bars.
inline BarcodeRender render_barcode(Raster& img, int x, int y, int bar_h,
                                    int avail_w, Xoshiro256& rng_barcode) {
    // widest payload that fits: modules = 11*(len+2)+13, quiet = 2*10
    const int module_px = avail_w >= 520 && rng_barcode.next_double() < 0.4 ? 3 : 2;
    const int max_len =
        (avail_w / module_px - 20 - 35) / 11;  // 35 = start+checksum+stop
    int len = static_cast<int>(rng_barcode.next_int(8, 12));
    len = std::clamp(len, 4, std::max(4, max_len));
    std::string payload;
    for (int i = 0; i < len; ++i) {
        const int r = static_cast<int>(rng_barcode.next_int(0, 35));
        payload += r < 26 ? static_cast<char>('A' + r)
                          : static_cast<char>('0' + r - 26);
    }
    const code128::Encoding enc = code128::encode(payload);
    const BoundingBox clip{0, 0, img.width, img.height};

    int cx = x + 10 * module_px;  // leading quiet zone
    const int bars_x = cx;
    bool bar = true;
    for (int wmod : enc.widths) {
        if (bar)
            fill_rect(img, {cx, y, wmod * module_px, bar_h}, 20, clip);
        cx += wmod * module_px;
        bar = !bar;
    }
    const int bars_w = cx - bars_x;
    font::draw_text(img, bars_x + (bars_w - font::text_width(payload, 1)) / 2,
                    y + bar_h + 4, payload, 1, 45);
    BarcodeRender out;
    out.bars = BoundingBox{bars_x, y, bars_w, bar_h};
    out.module_px = module_px;
    out.payload = payload;
    return out;
}

/// Draw a block right-aligned lines box of machine printed text; returns the
/// tight box over the glyph cells.
inline BoundingBox draw_text_block(Raster& img, int x, int y,
                                   const std::vector<std::string>& lines,
                                   int scale, std::uint8_t color) {
    int max_w = 1;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        font::draw_text(img, x, y + static_cast<int>(i) * font::kLinePitch * scale,
                        lines[i], scale, color);
        max_w = std::max(max_w, font::text_width(lines[i], scale));
    }
    const int h = (static_cast<int>(lines.size()) - 1) * font::kLinePitch * scale +
                  font::kGlyphH * scale;
    return BoundingBox{x, y, max_w, h};
}

}  // namespace synth_detail

/// Pixel-permutation augmentations; rot90/rot270 swap dimensions.
enum class AugmentOp { Rot90, Rot180, Rot270, FlipH, FlipV };

inline Raster augment(const Raster& img, AugmentOp op) {
    const int w = img.width, h = img.height, ch = img.channels;
    const bool swap = op == AugmentOp::Rot90 || op == AugmentOp::Rot270;
    Raster out(swap ? h : w, swap ? w : h, ch);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            int sx = 0, sy = 0;
            switch (op) {
                case AugmentOp::Rot90:  // clockwise
                    sx = y;
                    sy = h - 1 - x;
                    break;
                case AugmentOp::Rot180:
                    sx = w - 1 - x;
                    sy = h - 1 - y;
                    break;
                case AugmentOp::Rot270:
                    sx = w - 1 - y;
                    sy = x;
                    break;
                case AugmentOp::FlipH:
                    sx = w - 1 - x;
                    sy = y;
                    break;
                case AugmentOp::FlipV:
                    sx = x;
                    sy = h - 1 - y;
                    break;
            }
            for (int c = 0; c < ch; ++c) out.at(x, y, c) = img.at(sx, sy, c);
        }
    return out;
}

/// Degradation result; the wrong-positioning variant changes geometry, so
/// the ROI boxes travel with the pixels.
struct DegradeResult {
    Raster image;
    BoundingBox barcode_box;
    BoundingBox address_box;
};

namespace synth_detail {

inline void degrade_contaminated(Raster& img, const BoundingBox& addr,
                                 Xoshiro256& rng, double intensity) {
    const BoundingBox halo = inflate_clip(addr, 16, img.width, img.height);
    const int n_blobs =
        1 + static_cast<int>(rng.next_int(0, std::max(0L, std::lround(3 * intensity))));
    for (int i = 0; i < n_blobs; ++i) {
        const double cx = addr.x + rng.next_double() * addr.w;
        const double cy = addr.y + rng.next_double() * addr.h;
        const double rx = (5.0 + 14.0 * intensity) * rng.next_range(0.5, 1.0);
        const double ry = rx * rng.next_range(0.6, 1.4);
        fill_ellipse(img, cx, cy, rx, ry,
                     static_cast<std::uint8_t>(rng.next_int(25, 85)), halo);
    }
    if (rng.next_double() < 0.7) {
        const int n_strokes = static_cast<int>(rng.next_int(1, 2));
        for (int s = 0; s < n_strokes; ++s) {
            double x = addr.x + rng.next_double() * addr.w;
            double y = addr.y + rng.next_double() * addr.h;
            const double th = 2.0 + 3.0 * intensity * rng.next_double();
            const std::uint8_t color =
                static_cast<std::uint8_t>(rng.next_int(15, 70));
            const int npts = static_cast<int>(rng.next_int(3, 6));
            for (int p = 0; p < npts; ++p) {
                const double nx = x + rng.next_range(-45, 45);
                const double ny = y + rng.next_range(-18, 18);
                thick_segment(img, x, y, nx, ny, th, color, halo);
                x = nx;
                y = ny;
            }
        }
    }
}

/// Wrong-positioning: crop away most of the address while keeping the
/// barcode in frame. Disjoint ROI boxes guarantee a feasible cut axis.
inline DegradeResult degrade_crop(const Raster& img, const BoundingBox& barcode,
                                  const BoundingBox& addr, Xoshiro256& rng) {
    const double vis = rng.next_range(0.15, 0.45);
    std::vector<int> dirs = {0, 1, 2, 3};  // left, right, top, bottom cut
    rng.shuffle(dirs);
    for (int dir : dirs) {
        BoundingBox win{0, 0, img.width, img.height};
        switch (dir) {
            case 0: {  // remove columns [0, x0)
                const int x0 = addr.x + static_cast<int>((1.0 - vis) * addr.w);
                if (x0 > barcode.x || x0 < 1) continue;
                win = {x0, 0, img.width - x0, img.height};
                break;
            }
            case 1: {  // remove columns [x1, W)
                const int x1 = addr.x + static_cast<int>(vis * addr.w);
                if (x1 < barcode.x + barcode.w || x1 >= img.width) continue;
                win = {0, 0, x1, img.height};
                break;
            }
            case 2: {  // remove rows [0, y0)
                const int y0 = addr.y + static_cast<int>((1.0 - vis) * addr.h);
                if (y0 > barcode.y || y0 < 1) continue;
                win = {0, y0, img.width, img.height - y0};
                break;
            }
            default: {  // remove rows [y1, H)
                const int y1 = addr.y + static_cast<int>(vis * addr.h);
                if (y1 < barcode.y + barcode.h || y1 >= img.height) continue;
                win = {0, 0, img.width, y1};
                break;
            }
        }
        DegradeResult res;
        res.image = crop(img, win);
        res.barcode_box = BoundingBox{barcode.x - win.x, barcode.y - win.y,
                                      barcode.w, barcode.h};
        // clip the address box to the surviving window
        const int ax0 = std::max(addr.x, win.x), ay0 = std::max(addr.y, win.y);
        const int ax1 = std::min(addr.x + addr.w, win.x + win.w);
        const int ay1 = std::min(addr.y + addr.h, win.y + win.h);
        res.address_box = BoundingBox{ax0 - win.x, ay0 - win.y,
                                      std::max(1, ax1 - ax0), std::max(1, ay1 - ay0)};
        return res;
    }
    // unreachable for disjoint boxes; fall back to a strong blur
    return DegradeResult{gaussian_blur(img, 4.0), barcode, addr};
}

inline void draw_jittered_glyph(Raster& img, double cx, double cy, char ch,
                                int gscale, double theta, double slant,
                                std::uint8_t color, const BoundingBox& clip) {
    const font::Glyph& g = font::glyph(ch);
    const double cw = font::kGlyphW * gscale, chh = font::kGlyphH * gscale;
    const double cosn = std::cos(-theta), sinn = std::sin(-theta);
    const int pad = 2 * gscale;
    const int x0 = static_cast<int>(cx - pad), x1 = static_cast<int>(cx + cw + pad);
    const int y0 = static_cast<int>(cy - pad), y1 = static_cast<int>(cy + chh + pad);
    for (int v = y0; v <= y1; ++v)
        for (int u = x0; u <= x1; ++u) {
            if (!clip.contains(u, v)) continue;
            // invert shear then rotation about the cell center
            double px = u - (cx + cw / 2), py = v - (cy + chh / 2);
            px -= slant * py;
            const double qx = cosn * px - sinn * py + cw / 2;
            const double qy = sinn * px + cosn * py + chh / 2;
            const int gx = static_cast<int>(std::floor(qx / gscale));
            const int gy = static_cast<int>(std::floor(qy / gscale));
            if (gx < 0 || gx >= font::kGlyphW || gy < 0 || gy >= font::kGlyphH)
                continue;
            if (g.rows[gy] & (1 << (font::kGlyphW - 1 - gx)))
                for (int c = 0; c < img.channels; ++c) img.at(u, v, c) = color;
        }
}

inline void degrade_handwritten(Raster& img, const BoundingBox& addr,
                                std::uint64_t seed, Xoshiro256& rng,
                                double intensity) {
    const BoundingBox halo = inflate_clip(addr, 16, img.width, img.height);
    fill_rect(img, addr, 255, halo);

    Xoshiro256 rng_text(splitmix64_at(seed, seed_purpose::kText));
    const std::vector<std::string> lines = random_address_lines(rng_text);
    const int n = static_cast<int>(lines.size());
    const int scale = std::max(1, addr.h / (9 * n - 2));

    const double slant = rng.next_range(-0.28, 0.28);
    const std::uint8_t ink = static_cast<std::uint8_t>(rng.next_int(15, 50));
    const double deg8 = 8.0 * 3.14159265358979323846 / 180.0;
    for (int i = 0; i < n; ++i) {
        double x = addr.x;
        const double base_y = addr.y + i * 9.0 * scale;
        for (char ch : lines[i]) {
            const double theta = rng.next_range(-deg8, deg8);
            const double dy = rng.next_range(-2.0, 2.0);
            int gscale = scale;
            if (rng.next_double() < 0.3 * intensity + 0.1)
                gscale = std::max(1, scale + (rng.next_double() < 0.5 ? 1 : -1));
            draw_jittered_glyph(img, x, base_y + dy, ch, gscale, theta, slant,
                                ink, halo);
            if (rng.next_double() < 0.35)  // stroke-width noise: thicken
                draw_jittered_glyph(img, x + 1, base_y + dy, ch, gscale, theta,
                                    slant, ink, halo);
            x += 6.0 * gscale + rng.next_int(-1, 2);
        }
    }
}

inline void degrade_damaged(Raster& img, const BoundingBox& barcode,
                            const BoundingBox& addr, Xoshiro256& rng,
                            double intensity) {
    const BoundingBox clip{0, 0, img.width, img.height};
    const BoundingBox target = rng.next_double() < 0.5 ? addr : barcode;
    if (rng.next_double() < 0.5) {
        // occluding rectangle (a second label on top), >= 20% of the area
        const double frac = rng.next_range(0.22, 0.22 + 0.23 * intensity);
        const int rw = static_cast<int>(img.width * rng.next_range(0.5, 0.75));
        const int rh = std::min(
            img.height,
            static_cast<int>(frac * img.width * img.height / rw) + 1);
        int rx = target.x + target.w / 2 - rw / 2 +
                 static_cast<int>(rng.next_range(-0.1, 0.1) * img.width);
        int ry = target.y + target.h / 2 - rh / 2 +
                 static_cast<int>(rng.next_range(-0.1, 0.1) * img.height);
        rx = std::clamp(rx, 0, img.width - rw);
        ry = std::clamp(ry, 0, img.height - rh);
        BoundingBox rect{rx, ry, rw, rh};
        while (!boxes_overlap(rect, target)) {  // nudge toward the target
            rect.x += rect.x + rect.w / 2 < target.x + target.w / 2 ? 10 : -10;
            rect.y += rect.y + rect.h / 2 < target.y + target.h / 2 ? 10 : -10;
            rect.x = std::clamp(rect.x, 0, img.width - rect.w);
            rect.y = std::clamp(rect.y, 0, img.height - rect.h);
        }
        fill_rect(img, rect, 242, clip);
        rect_outline(img, rect, 2, 85);
        const int n_lines = static_cast<int>(rng.next_int(2, 4));
        for (int i = 0; i < n_lines; ++i)
            font::draw_text(img, rect.x + 8, rect.y + 8 + i * 12,
                            digits(rng, 3) + " " + pick(rng, kStreets), 1, 150);
        return;
    }
    // tear from the image edge nearest the target, jagged boundary, filled
    // with a noisy background texture
    const int d_left = target.x;
    const int d_right = img.width - (target.x + target.w);
    const int d_top = target.y;
    const int d_bottom = img.height - (target.y + target.h);
    const int dmin = std::min({d_left, d_right, d_top, d_bottom});
    const bool vertical_edge = dmin == d_left || dmin == d_right;
    const bool from_low = vertical_edge ? dmin == d_left : dmin == d_top;

    const int span = vertical_edge ? img.height : img.width;
    const int extent = vertical_edge ? img.width : img.height;
    // depth must reach into the target box
    const int near_side = vertical_edge
                              ? (from_low ? target.x : img.width - target.x - target.w)
                              : (from_low ? target.y : img.height - target.y - target.h);
    const int reach = vertical_edge ? target.w : target.h;
    const int base_depth = std::min(
        extent - 8,
        near_side + static_cast<int>(reach * rng.next_range(0.3, 0.8)));

    // jagged profile through random knots
    std::vector<double> knots;
    const int n_knots = std::max(3, span / 60);
    for (int i = 0; i < n_knots; ++i)
        knots.push_back(base_depth * rng.next_range(0.75, 1.0 + 0.3 * intensity));
    std::vector<int> depth(span);
    for (int i = 0; i < span; ++i) {
        const double t = static_cast<double>(i) * (n_knots - 1) / (span - 1);
        const int k0 = std::min(n_knots - 2, static_cast<int>(t));
        const double f = t - k0;
        depth[i] = std::clamp(
            static_cast<int>(knots[k0] * (1 - f) + knots[k0 + 1] * f), 4,
            extent - 4);
    }
    // make sure the tear actually crosses the target box
    const int lo = vertical_edge ? target.y : target.x;
    const int hi = lo + (vertical_edge ? target.h : target.w);
    int max_d = 0;
    for (int i = std::max(0, lo); i < std::min(span, hi); ++i)
        max_d = std::max(max_d, depth[i]);
    if (max_d <= near_side) {
        const int bump = near_side - max_d + std::max(4, reach / 4);
        for (int i = std::max(0, lo); i < std::min(span, hi); ++i)
            depth[i] = std::min(extent - 4, depth[i] + bump);
    }
    for (int i = 0; i < span; ++i) {
        for (int j = 0; j < depth[i]; ++j) {
            const int coord = from_low ? j : extent - 1 - j;
            const int x = vertical_edge ? coord : i;
            const int y = vertical_edge ? i : coord;
            const std::uint8_t v =
                static_cast<std::uint8_t>(150 + rng.next_int(0, 55));
            for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = v;
        }
    }
}

}  // namespace synth_detail

/// Class-specific degradation. Normal is the identity. The wrong-positioning
/// variant of Unreadable changes image geometry; DegradeResult carries the
/// boxes that moved with it.
inline DegradeResult apply_degradation_full(const Raster& img,
                                            const Annotation& ann,
                                            QualityClass cls,
                                            std::uint64_t seed,
                                            double intensity) {
    const int code = static_cast<int>(cls);
    if (code < 0 || code >= kNumClasses)
        throw UnknownClass("quality class code out of range");
    DegradeResult res{img, ann.barcode_box, ann.address_box};
    if (cls == QualityClass::Normal) return res;

    Xoshiro256 rng(splitmix64_at(seed, seed_purpose::kDegrade));
    switch (cls) {
        case QualityClass::Contaminated:
            synth_detail::degrade_contaminated(res.image, ann.address_box, rng,
                                               intensity);
            break;
        case QualityClass::Unreadable: {
            const int variant = static_cast<int>(rng.next_int(0, 3));
            if (variant == 0) {
                res.image = gaussian_blur(res.image, 1.5 + 3.5 * intensity);
            } else if (variant == 1) {
                const int dir = static_cast<int>(rng.next_int(0, 3));
                const int dx = dir == 1 ? 0 : 1;
                const int dy = dir == 0 ? 0 : (dir == 3 ? -1 : 1);
                res.image = motion_blur(res.image, dx, dy, 9);
            } else if (variant == 2) {
                const int factor =
                    std::clamp(2 + static_cast<int>(std::lround(2 * intensity *
                                                                rng.next_double())),
                               2, 4);
                res.image = downscale_upscale(res.image, factor);
            } else {
                res = synth_detail::degrade_crop(res.image, ann.barcode_box,
                                                 ann.address_box, rng);
            }
            break;
        }
        case QualityClass::Handwritten:
            synth_detail::degrade_handwritten(res.image, ann.address_box, seed,
                                              rng, intensity);
            break;
        case QualityClass::Damaged:
            synth_detail::degrade_damaged(res.image, ann.barcode_box,
                                          ann.address_box, rng, intensity);
            break;
        default:
            break;
    }
    return res;
}

inline Raster apply_degradation(const Raster& img, const Annotation& ann,
                                QualityClass cls, std::uint64_t seed,
                                double intensity) {
    return apply_degradation_full(img, ann, cls, seed, intensity).image;
}

/// Deterministically generate one annotated label image. The base render is
/// a pure function of the seed alone (class only selects the degradation),
/// so class variants of one seed share every pixel outside the degraded area.
inline std::pair<Raster, Annotation> generate_label(std::uint64_t seed,
                                                    const GenConfig& config,
                                                    QualityClass cls) {
    config.validate();
    const int code = static_cast<int>(cls);
    if (code < 0 || code >= kNumClasses)
        throw UnknownClass("quality class code out of range");

    using namespace synth_detail;
    Xoshiro256 rng_layout(splitmix64_at(seed, seed_purpose::kLayout));
    Xoshiro256 rng_text(splitmix64_at(seed, seed_purpose::kText));
    Xoshiro256 rng_barcode(splitmix64_at(seed, seed_purpose::kBarcode));

    const int W = static_cast<int>(rng_layout.next_int(config.min_w, config.max_w));
    const int H = static_cast<int>(rng_layout.next_int(config.min_h, config.max_h));
    const int variant = static_cast<int>(rng_layout.next_int(0, 3));
    const int m = config.margin;
    const int addr_scale = config.font_scale;
    const int sender_scale = std::max(1, addr_scale - 1);

    Raster img(W, H, 1, 255);
    const std::vector<std::string> addr_lines = random_address_lines(rng_text);
    const std::vector<std::string> sender_lines = random_sender_lines(rng_text);
    const char* carrier = pick(rng_text, kCarriers);

    // carrier band across the top (variants 0,1,3)
    int band_bottom = m;
    if (variant != 2) {
        const int band_h = 26 + 4 * static_cast<int>(rng_layout.next_int(0, 3));
        fill_rect(img, {m, m, W - 2 * m, band_h}, 45, {0, 0, W, H});
        font::draw_text(img, m + 10, m + (band_h - 14) / 2, carrier, 2, 240);
        band_bottom = m + band_h;
    } else {
        rect_outline(img, {m / 2, m / 2, W - m, H - m}, 2, 70);
    }

    const int bar_h = 50 + 5 * static_cast<int>(rng_layout.next_int(0, 6));
    BoundingBox sender_box, address_box;
    BarcodeRender bc;

    switch (variant) {
        case 0: {
            sender_box = draw_text_block(img, m, band_bottom + 10, sender_lines,
                                         sender_scale, 35);
            address_box = draw_text_block(
                img, m + 4, std::max(band_bottom + 10 + sender_box.h + 14,
                                     static_cast<int>(0.34 * H)),
                addr_lines, addr_scale, 20);
            bc = render_barcode(img, m + 6, H - m - bar_h - 16, bar_h,
                                W - 2 * m - 12, rng_barcode);
            break;
        }
        case 1: {
            sender_box = draw_text_block(
                img, W - m - 120, band_bottom + 8, sender_lines, 1, 35);
            bc = render_barcode(img, m + 6, band_bottom + 14 + sender_box.h,
                                bar_h, W - 2 * m - 12, rng_barcode);
            address_box =
                draw_text_block(img, m + 4,
                                std::max(bc.bars.y + bc.bars.h + 26,
                                         H - m - ((9 * static_cast<int>(addr_lines.size()) - 2) *
                                                  addr_scale) - 10),
                                addr_lines, addr_scale, 20);
            break;
        }
        case 2: {
            sender_box = draw_text_block(img, m + 6, m + 8, sender_lines,
                                         sender_scale, 35);
            address_box = draw_text_block(
                img, m + 10, std::max(m + 8 + sender_box.h + 16,
                                      static_cast<int>(0.30 * H)),
                addr_lines, addr_scale, 20);
            bc = render_barcode(img, m + 6, H - m - bar_h - 18, bar_h,
                                W - 2 * m - 12, rng_barcode);
            break;
        }
        default: {
            const int addr_h = (9 * static_cast<int>(addr_lines.size()) - 2) * addr_scale;
            int addr_w = 1;
            for (const std::string& l : addr_lines)
                addr_w = std::max(addr_w, font::text_width(l, addr_scale));
            address_box = draw_text_block(img, W - m - addr_w - 6,
                                          band_bottom + 12, addr_lines,
                                          addr_scale, 20);
            sender_box = draw_text_block(
                img, m, std::max(band_bottom + 12 + addr_h + 14,
                                 static_cast<int>(0.48 * H)),
                sender_lines, sender_scale, 35);
            fill_rect(img, {m, H - m - bar_h - 26, W - 2 * m, 2}, 70,
                      {0, 0, W, H});
            bc = render_barcode(img, m + 6, H - m - bar_h - 14, bar_h,
                                W - 2 * m - 12, rng_barcode);
            break;
        }
    }

    if (!address_box.inside(img) || !bc.bars.inside(img) ||
        boxes_overlap(address_box, bc.bars))
        throw ConfigTooSmall("layout does not fit the configured image size");

    Annotation ann;
    ann.cls = cls;
    ann.barcode_box = bc.bars;
    ann.address_box = address_box;
    ann.seed = seed;

    Xoshiro256 rng_intensity(splitmix64_at(seed, seed_purpose::kIntensity));
    const IntensityRange range = config.intensity[code];
    const double intensity = rng_intensity.next_range(range.lo, range.hi);

    DegradeResult res = apply_degradation_full(img, ann, cls, seed, intensity);
    ann.barcode_box = res.barcode_box;
    ann.address_box = res.address_box;
    return {std::move(res.image), std::move(ann)};
}

}  // namespace slqi
