#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "slqi/raster.hpp"

namespace slqi {

/// Separable Gaussian blur, replicated borders, kernel radius ceil(3*sigma).
inline Raster gaussian_blur(const Raster& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;

    const int w = img.width, h = img.height, ch = img.channels;
    std::vector<double> tmp(img.data.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * img.at(std::clamp(x + i, 0, w - 1), y, c);
                tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
            }
    Raster out(w, h, ch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, h - 1);
                    acc += k[i + radius] *
                           tmp[(static_cast<std::size_t>(yy) * w + x) * ch + c];
                }
                out.at(x, y, c) =
                    static_cast<std::uint8_t>(std::clamp(acc + 0.5, 0.0, 255.0));
            }
    return out;
}

/// Straight-line motion blur: mean of `taps` samples along (dx,dy), centered,
/// coordinates clamped at borders.
inline Raster motion_blur(const Raster& img, int dx, int dy, int taps = 9) {
    Raster out(img.width, img.height, img.channels);
    const int half = taps / 2;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                int acc = 0;
                for (int i = -half; i <= half; ++i)
                    acc += img.at(std::clamp(x + i * dx, 0, img.width - 1),
                                  std::clamp(y + i * dy, 0, img.height - 1), c);
                out.at(x, y, c) = static_cast<std::uint8_t>(
                    (acc + taps / 2) / taps);
            }
    return out;
}

/// Bilinear downscale by an integer factor and back up to the original size.
inline Raster downscale_upscale(const Raster& img, int factor) {
    const int w2 = std::max(1, img.width / factor);
    const int h2 = std::max(1, img.height / factor);
    return resize_bilinear(resize_bilinear(img, w2, h2), img.width, img.height);
}

/// Variance of the 4-neighbor Laplacian over interior pixels; a scalar
/// sharpness measure (lower = blurrier).
inline double variance_of_laplacian(const Raster& gray) {
    double sum = 0.0, sum2 = 0.0;
    long long n = 0;
    for (int y = 1; y < gray.height - 1; ++y)
        for (int x = 1; x < gray.width - 1; ++x) {
            const double v = 4.0 * gray.at(x, y) - gray.at(x - 1, y) -
                             gray.at(x + 1, y) - gray.at(x, y - 1) -
                             gray.at(x, y + 1);
            sum += v;
            sum2 += v * v;
            ++n;
        }
    if (n == 0) return 0.0;
    const double mean = sum / n;
    return sum2 / n - mean * mean;
}

/// Otsu threshold over a 256-bin histogram. Returns 0 for a constant input.
inline int otsu_threshold(const std::vector<std::uint8_t>& values) {
    std::array<long long, 256> hist{};
    for (std::uint8_t v : values) ++hist[v];
    const long long total = static_cast<long long>(values.size());
    if (total == 0) return 0;
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * hist[i];
    double best = -1.0, sum_b = 0.0;
    long long w_b = 0;
    int thr = 0;
    for (int i = 0; i < 256; ++i) {
        w_b += hist[i];
        if (w_b == 0) continue;
        const long long w_f = total - w_b;
        if (w_f == 0) break;
        sum_b += static_cast<double>(i) * hist[i];
        const double m_b = sum_b / w_b;
        const double m_f = (sum_all - sum_b) / w_f;
        const double between =
            static_cast<double>(w_b) * w_f * (m_b - m_f) * (m_b - m_f);
        if (between > best) {
            best = between;
            thr = i;
        }
    }
    return thr;
}

/// Binary mask with width/height carried alongside.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> on;

    Mask(int w, int h) : width(w), height(h), on(static_cast<std::size_t>(w) * h, 0) {}
    std::uint8_t& at(int x, int y) { return on[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return on[static_cast<std::size_t>(y) * width + x]; }
};

inline Mask dilate_rect(const Mask& m, int rx, int ry) {
    Mask hpass(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            std::uint8_t v = 0;
            for (int i = std::max(0, x - rx); i <= std::min(m.width - 1, x + rx); ++i)
                v |= m.at(i, y);
            hpass.at(x, y) = v;
        }
    Mask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            std::uint8_t v = 0;
            for (int j = std::max(0, y - ry); j <= std::min(m.height - 1, y + ry); ++j)
                v |= hpass.at(x, j);
            out.at(x, y) = v;
        }
    return out;
}

inline Mask erode_rect(const Mask& m, int rx, int ry) {
    Mask hpass(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            std::uint8_t v = 1;
            for (int i = x - rx; i <= x + rx; ++i)
                v &= (i >= 0 && i < m.width) ? m.at(i, y) : 0;
            hpass.at(x, y) = v;
        }
    Mask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            std::uint8_t v = 1;
            for (int j = y - ry; j <= y + ry; ++j)
                v &= (j >= 0 && j < m.height) ? hpass.at(x, j) : 0;
            out.at(x, y) = v;
        }
    return out;
}

inline Mask close_rect(const Mask& m, int rx, int ry) {
    return erode_rect(dilate_rect(m, rx, ry), rx, ry);
}

struct Component {
    long long area = 0;
    BoundingBox box;
};

/// 8-connected components of a binary mask, in discovery (row-major) order.
inline std::vector<Component> connected_components(const Mask& m) {
    std::vector<Component> comps;
    std::vector<std::int32_t> label(m.on.size(), -1);
    std::vector<std::pair<int, int>> stack;
    for (int y0 = 0; y0 < m.height; ++y0)
        for (int x0 = 0; x0 < m.width; ++x0) {
            const std::size_t idx0 = static_cast<std::size_t>(y0) * m.width + x0;
            if (!m.on[idx0] || label[idx0] >= 0) continue;
            const std::int32_t id = static_cast<std::int32_t>(comps.size());
            Component comp;
            int minx = x0, maxx = x0, miny = y0, maxy = y0;
            stack.clear();
            stack.emplace_back(x0, y0);
            label[idx0] = id;
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                ++comp.area;
                minx = std::min(minx, x);
                maxx = std::max(maxx, x);
                miny = std::min(miny, y);
                maxy = std::max(maxy, y);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height)
                            continue;
                        const std::size_t ni =
                            static_cast<std::size_t>(ny) * m.width + nx;
                        if (m.on[ni] && label[ni] < 0) {
                            label[ni] = id;
                            stack.emplace_back(nx, ny);
                        }
                    }
            }
            comp.box = BoundingBox{minx, miny, maxx - minx + 1, maxy - miny + 1};
            comps.push_back(comp);
        }
    return comps;
}

}  // namespace slqi
