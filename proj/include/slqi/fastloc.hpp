#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "slqi/raster.hpp"

namespace slqi {

struct NotGrayscale : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Corner {
    int x = 0;
    int y = 0;
    int score = 0;

    bool operator==(const Corner& o) const {
        return x == o.x && y == o.y && score == o.score;
    }
};

using CornerSet = std::vector<Corner>;

struct PatchSelectionConfig {
    int t = 50;         // FAST intensity threshold
    int patch_w = 256;  // patch size D_p
    int patch_h = 256;
    int n_p = 3;        // number of patches

    void validate() const {
        if (t < 1 || t > 255)
            throw std::invalid_argument("FAST threshold must be in [1,255]");
        if (patch_w < 16 || patch_h < 16)
            throw std::invalid_argument("patch dims must be >= 16");
        if (n_p < 1) throw std::invalid_argument("patch count must be >= 1");
    }
};

struct PatchSet {
    std::vector<Raster> patches;  // exactly n_p, descending corner count
    std::vector<int> tile_counts;  // per grid tile, row-major
    std::vector<int> selected_tiles;  // tile index per patch
    std::vector<std::pair<int, int>> tile_origins;  // per patch, padded coords
    int tiles_x = 0;
    int tiles_y = 0;
    bool padded_copy = false;  // small-image path taken
};

namespace fast_detail {

// Bresenham circle of radius 3, clockwise from 12 o'clock.
inline constexpr int kCircle[16][2] = {
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0},  {3, 1},  {2, 2},  {1, 3},
    {0, 3},  {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

/// Segment test: some wrapped arc of >= 9 circle pixels all brighter than
/// center + t, or all darker than center - t.
inline bool is_corner(const std::uint8_t* px, int stride, int center, int t) {
    int state[16];
    for (int i = 0; i < 16; ++i) {
        const int v = px[kCircle[i][1] * stride + kCircle[i][0]];
        state[i] = v > center + t ? 1 : (v < center - t ? -1 : 0);
    }
    for (int polarity : {1, -1}) {
        int run = 0;
        for (int i = 0; i < 32; ++i) {
            if (state[i & 15] == polarity) {
                if (++run >= 9) return true;
            } else {
                run = 0;
            }
        }
    }
    return false;
}

/// Largest threshold that still passes the segment test (binary search;
/// cornerness is monotone decreasing in t).
inline int corner_score(const std::uint8_t* px, int stride, int center, int t) {
    int lo = t, hi = 255;
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (is_corner(px, stride, center, mid))
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

}  // namespace fast_detail

/// FAST-9 corners with max-threshold scores, before non-max suppression.
/// Row-major order; positions keep the full circle inside the image.
inline CornerSet segment_test_corners(const Raster& gray, int t) {
    if (gray.channels != 1)
        throw NotGrayscale("corner detection requires a grayscale raster");
    CornerSet out;
    if (gray.width < 7 || gray.height < 7) return out;
    const std::uint8_t* base = gray.data.data();
    const int stride = gray.width;
    for (int y = 3; y < gray.height - 3; ++y) {
        for (int x = 3; x < gray.width - 3; ++x) {
            const std::uint8_t* px = base + static_cast<std::size_t>(y) * stride + x;
            if (fast_detail::is_corner(px, stride, *px, t))
                out.push_back({x, y, fast_detail::corner_score(px, stride, *px, t)});
        }
    }
    return out;
}

/// FAST-9 with 3x3 non-max suppression on the score. Of two adjacent equal
/// scores the earlier row-major position survives.
inline CornerSet detect_corners(const Raster& gray, int t) {
    const CornerSet raw = segment_test_corners(gray, t);
    std::unordered_map<std::int64_t, int> score_at;
    score_at.reserve(raw.size() * 2);
    const auto key = [&gray](int x, int y) {
        return static_cast<std::int64_t>(y) * gray.width + x;
    };
    for (const Corner& c : raw) score_at[key(c.x, c.y)] = c.score;
    CornerSet out;
    for (const Corner& c : raw) {
        bool keep = true;
        for (int dy = -1; dy <= 1 && keep; ++dy)
            for (int dx = -1; dx <= 1 && keep; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const auto it = score_at.find(key(c.x + dx, c.y + dy));
                if (it == score_at.end()) continue;
                if (it->second > c.score) keep = false;
                // equal scores: row-major earlier neighbor wins
                if (it->second == c.score && (dy < 0 || (dy == 0 && dx < 0)))
                    keep = false;
            }
        if (keep) out.push_back(c);
    }
    return out;
}

namespace fast_detail {

/// Copy `src` into the top-left of a white canvas, clipping if larger.
inline Raster pad_canvas(const Raster& src, int w, int h) {
    Raster out(w, h, src.channels, 255);
    const int cw = std::min(src.width, w);
    const int chh = std::min(src.height, h);
    for (int y = 0; y < chh; ++y)
        for (int x = 0; x < cw; ++x)
            for (int c = 0; c < src.channels; ++c)
                out.at(x, y, c) = src.at(x, y, c);
    return out;
}

}  // namespace fast_detail

/// Patch selection: tile the white-padded image into a patch-size grid,
/// count FAST corners per tile and keep the n_p densest tiles at original
/// pixel scale. Images smaller than the patch size in either dimension are
/// copied once into a padded canvas and replicated.
inline PatchSet select_patches(const Raster& image,
                               const PatchSelectionConfig& config) {
    config.validate();
    const Raster gray = to_grayscale(image);
    PatchSet out;

    if (image.width >= config.patch_w && image.height >= config.patch_h) {
        out.tiles_x = (image.width + config.patch_w - 1) / config.patch_w;
        out.tiles_y = (image.height + config.patch_h - 1) / config.patch_h;
        const int pw = out.tiles_x * config.patch_w;
        const int ph = out.tiles_y * config.patch_h;
        const Raster padded = fast_detail::pad_canvas(image, pw, ph);
        const Raster padded_gray = fast_detail::pad_canvas(gray, pw, ph);

        out.tile_counts.assign(static_cast<std::size_t>(out.tiles_x) * out.tiles_y, 0);
        for (const Corner& c : detect_corners(padded_gray, config.t))
            ++out.tile_counts[(c.y / config.patch_h) * out.tiles_x +
                              c.x / config.patch_w];

        std::vector<int> order(out.tile_counts.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (out.tile_counts[a] != out.tile_counts[b])
                return out.tile_counts[a] > out.tile_counts[b];
            return a < b;  // ties by lower row-major tile index
        });

        for (int i = 0; i < config.n_p; ++i) {
            // cycle if the grid has fewer tiles than n_p
            const int tile = order[i % order.size()];
            const int tx = (tile % out.tiles_x) * config.patch_w;
            const int ty = (tile / out.tiles_x) * config.patch_h;
            out.selected_tiles.push_back(tile);
            out.tile_origins.emplace_back(tx, ty);
            out.patches.push_back(
                crop(padded, BoundingBox{tx, ty, config.patch_w, config.patch_h}));
        }
        return out;
    }

    out.padded_copy = true;
    out.tiles_x = out.tiles_y = 1;
    const Raster canvas =
        fast_detail::pad_canvas(image, config.patch_w, config.patch_h);
    out.tile_counts = {
        static_cast<int>(detect_corners(to_grayscale(canvas), config.t).size())};
    for (int i = 0; i < config.n_p; ++i) {
        out.selected_tiles.push_back(0);
        out.tile_origins.emplace_back(0, 0);
        out.patches.push_back(canvas);
    }
    return out;
}

}  // namespace slqi
