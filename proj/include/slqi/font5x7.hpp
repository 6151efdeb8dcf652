#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <string_view>

#include "slqi/raster.hpp"

namespace slqi {
namespace font {

inline constexpr int kGlyphW = 5;
inline constexpr int kGlyphH = 7;

struct Glyph {
    char ch;
    std::array<std::uint8_t, 7> rows;  // 5 low bits per row, MSB = left
};

namespace detail {
constexpr std::uint8_t r(const char* s) {
    std::uint8_t v = 0;
    for (int i = 0; i < 5; ++i) v = static_cast<std::uint8_t>((v << 1) | (s[i] == '#'));
    return v;
}
}  // namespace detail

// Uppercase letters, digits and label punctuation. Lowercase maps to upper.
inline constexpr std::array<Glyph, 48> kGlyphs = {{
    {' ', {0, 0, 0, 0, 0, 0, 0}},
    {'A', {detail::r(".###."), detail::r("#...#"), detail::r("#...#"), detail::r("#####"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#")}},
    {'B', {detail::r("####."), detail::r("#...#"), detail::r("#...#"), detail::r("####."), detail::r("#...#"), detail::r("#...#"), detail::r("####.")}},
    {'C', {detail::r(".###."), detail::r("#...#"), detail::r("#...."), detail::r("#...."), detail::r("#...."), detail::r("#...#"), detail::r(".###.")}},
    {'D', {detail::r("####."), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("####.")}},
    {'E', {detail::r("#####"), detail::r("#...."), detail::r("#...."), detail::r("####."), detail::r("#...."), detail::r("#...."), detail::r("#####")}},
    {'F', {detail::r("#####"), detail::r("#...."), detail::r("#...."), detail::r("####."), detail::r("#...."), detail::r("#...."), detail::r("#....")}},
    {'G', {detail::r(".###."), detail::r("#...#"), detail::r("#...."), detail::r("#.###"), detail::r("#...#"), detail::r("#...#"), detail::r(".####")}},
    {'H', {detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#####"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#")}},
    {'I', {detail::r(".###."), detail::r("..#.."), detail::r("..#.."), detail::r("..#.."), detail::r("..#.."), detail::r("..#.."), detail::r(".###.")}},
    {'J', {detail::r("..###"), detail::r("...#."), detail::r("...#."), detail::r("...#."), detail::r("...#."), detail::r("#..#."), detail::r(".##..")}},
    {'K', {detail::r("#...#"), detail::r("#..#."), detail::r("#.#.."), detail::r("##..."), detail::r("#.#.."), detail::r("#..#."), detail::r("#...#")}},
    {'L', {detail::r("#...."), detail::r("#...."), detail::r("#...."), detail::r("#...."), detail::r("#...."), detail::r("#...."), detail::r("#####")}},
    {'M', {detail::r("#...#"), detail::r("##.##"), detail::r("#.#.#"), detail::r("#.#.#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#")}},
    {'N', {detail::r("#...#"), detail::r("##..#"), detail::r("#.#.#"), detail::r("#..##"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#")}},
    {'O', {detail::r(".###."), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r(".###.")}},
    {'P', {detail::r("####."), detail::r("#...#"), detail::r("#...#"), detail::r("####."), detail::r("#...."), detail::r("#...."), detail::r("#....")}},
    {'Q', {detail::r(".###."), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#.#.#"), detail::r("#..#."), detail::r(".##.#")}},
    {'R', {detail::r("####."), detail::r("#...#"), detail::r("#...#"), detail::r("####."), detail::r("#.#.."), detail::r("#..#."), detail::r("#...#")}},
    {'S', {detail::r(".####"), detail::r("#...."), detail::r("#...."), detail::r(".###."), detail::r("....#"), detail::r("....#"), detail::r("####.")}},
    {'T', {detail::r("#####"), detail::r("..#.."), detail::r("..#.."), detail::r("..#.."), detail::r("..#.."), detail::r("..#.."), detail::r("..#..")}},
    {'U', {detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r(".###.")}},
    {'V', {detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r(".#.#."), detail::r("..#..")}},
    {'W', {detail::r("#...#"), detail::r("#...#"), detail::r("#...#"), detail::r("#.#.#"), detail::r("#.#.#"), detail::r("##.##"), detail::r("#...#")}},
    {'X', {detail::r("#...#"), detail::r("#...#"), detail::r(".#.#."), detail::r("..#.."), detail::r(".#.#."), detail::r("#...#"), detail::r("#...#")}},
    {'Y', {detail::r("#...#"), detail::r("#...#"), detail::r(".#.#."), detail::r("..#.."), detail::r("..#.."), detail::r("..#.."), detail::r("..#..")}},
    {'Z', {detail::r("#####"), detail::r("....#"), detail::r("...#."), detail::r("..#.."), detail::r(".#..."), detail::r("#...."), detail::r("#####")}},
    {'0', {detail::r(".###."), detail::r("#...#"), detail::r("#..##"), detail::r("#.#.#"), detail::r("##..#"), detail::r("#...#"), detail::r(".###.")}},
    {'1', {detail::r("..#.."), detail::r(".##.."), detail::r("..#.."), detail::r("..#.."), detail::r("..#.."), detail::r("..#.."), detail::r(".###.")}},
    {'2', {detail::r(".###."), detail::r("#...#"), detail::r("....#"), detail::r("...#."), detail::r("..#.."), detail::r(".#..."), detail::r("#####")}},
    {'3', {detail::r("#####"), detail::r("...#."), detail::r("..#.."), detail::r("...#."), detail::r("....#"), detail::r("#...#"), detail::r(".###.")}},
    {'4', {detail::r("...#."), detail::r("..##."), detail::r(".#.#."), detail::r("#..#."), detail::r("#####"), detail::r("...#."), detail::r("...#.")}},
    {'5', {detail::r("#####"), detail::r("#...."), detail::r("####."), detail::r("....#"), detail::r("....#"), detail::r("#...#"), detail::r(".###.")}},
    {'6', {detail::r("..##."), detail::r(".#..."), detail::r("#...."), detail::r("####."), detail::r("#...#"), detail::r("#...#"), detail::r(".###.")}},
    {'7', {detail::r("#####"), detail::r("....#"), detail::r("...#."), detail::r("..#.."), detail::r(".#..."), detail::r(".#..."), detail::r(".#...")}},
    {'8', {detail::r(".###."), detail::r("#...#"), detail::r("#...#"), detail::r(".###."), detail::r("#...#"), detail::r("#...#"), detail::r(".###.")}},
    {'9', {detail::r(".###."), detail::r("#...#"), detail::r("#...#"), detail::r(".####"), detail::r("....#"), detail::r("...#."), detail::r(".##..")}},
    {',', {0, 0, 0, 0, detail::r(".##.."), detail::r("..#.."), detail::r(".#...")}},
    {'.', {0, 0, 0, 0, 0, detail::r(".##.."), detail::r(".##..")}},
    {'-', {0, 0, 0, detail::r(".###."), 0, 0, 0}},
    {'/', {detail::r("....#"), detail::r("....#"), detail::r("...#."), detail::r("..#.."), detail::r(".#..."), detail::r("#...."), detail::r("#....")}},
    {'#', {detail::r(".#.#."), detail::r(".#.#."), detail::r("#####"), detail::r(".#.#."), detail::r("#####"), detail::r(".#.#."), detail::r(".#.#.")}},
    {'&', {detail::r(".##.."), detail::r("#..#."), detail::r("#.#.."), detail::r(".#..."), detail::r("#.#.#"), detail::r("#..#."), detail::r(".##.#")}},
    {':', {0, detail::r(".##.."), detail::r(".##.."), 0, detail::r(".##.."), detail::r(".##.."), 0}},
    {'(', {detail::r("...#."), detail::r("..#.."), detail::r(".#..."), detail::r(".#..."), detail::r(".#..."), detail::r("..#.."), detail::r("...#.")}},
    {')', {detail::r(".#..."), detail::r("..#.."), detail::r("...#."), detail::r("...#."), detail::r("...#."), detail::r("..#.."), detail::r(".#...")}},
    {'*', {detail::r("..#.."), detail::r("#.#.#"), detail::r(".###."), detail::r("..#.."), detail::r(".###."), detail::r("#.#.#"), detail::r("..#..")}},
    {'?', {detail::r(".###."), detail::r("#...#"), detail::r("....#"), detail::r("...#."), detail::r("..#.."), 0, detail::r("..#..")}},
}};

inline const Glyph& glyph(char ch) {
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    for (const Glyph& g : kGlyphs)
        if (g.ch == up) return g;
    return kGlyphs.back();  // '?' for anything unmapped
}

/// Advance per glyph cell, including 1-column spacing, in font units.
inline constexpr int kAdvance = kGlyphW + 1;
inline constexpr int kLinePitch = kGlyphH + 2;

/// Draw one glyph scaled by an integer factor; pixels outside `clip` are
/// dropped. Returns the advance in pixels.
inline int draw_glyph(Raster& img, int x, int y, char ch, int scale,
                      std::uint8_t color, const BoundingBox& clip) {
    const Glyph& g = glyph(ch);
    for (int gy = 0; gy < kGlyphH; ++gy) {
        const std::uint8_t row = g.rows[gy];
        for (int gx = 0; gx < kGlyphW; ++gx) {
            if (!(row & (1 << (kGlyphW - 1 - gx)))) continue;
            for (int sy = 0; sy < scale; ++sy)
                for (int sx = 0; sx < scale; ++sx) {
                    const int px = x + gx * scale + sx;
                    const int py = y + gy * scale + sy;
                    if (!clip.contains(px, py)) continue;
                    for (int c = 0; c < img.channels; ++c) img.at(px, py, c) = color;
                }
        }
    }
    return kAdvance * scale;
}

/// Draw a text line; returns the tight bounding box of the glyph cells.
inline BoundingBox draw_text(Raster& img, int x, int y, std::string_view text,
                             int scale, std::uint8_t color) {
    const BoundingBox clip{0, 0, img.width, img.height};
    int cx = x;
    for (char ch : text) cx += draw_glyph(img, cx, y, ch, scale, color, clip);
    const int w = static_cast<int>(text.size()) * kAdvance * scale;
    return BoundingBox{x, y, w > 0 ? w : 1, kGlyphH * scale};
}

inline int text_width(std::string_view text, int scale) {
    return static_cast<int>(text.size()) * kAdvance * scale;
}

}  // namespace font
}  // namespace slqi
