#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "slqi/imgfilter.hpp"
#include "slqi/raster.hpp"
#include "slqi/synthlabel.hpp"

namespace slqi {

struct MissingAnnotation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RegionKind : int { Barcode = 0, Address = 1 };

inline const char* region_name(RegionKind k) {
    return k == RegionKind::Barcode ? "barcode" : "address";
}

struct Detection {
    BoundingBox box;
    RegionKind kind = RegionKind::Barcode;
    double confidence = 0.0;
};

enum class DetectorMethod { Oracle, Classical };

struct DetectionMetrics {
    std::map<RegionKind, double> ap_per_kind;
    std::map<RegionKind, int> support;
    double map = 0.0;
};

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const long long x0 = std::max(a.x, b.x);
    const long long y0 = std::max(a.y, b.y);
    const long long x1 = std::min<long long>(a.x + a.w, b.x + b.w);
    const long long y1 = std::min<long long>(a.y + a.h, b.y + b.h);
    const long long inter = std::max(0LL, x1 - x0) * std::max(0LL, y1 - y0);
    if (inter == 0) return 0.0;
    const long long uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace roidet_detail {

/// Horizontal-minus-vertical Sobel response, scaled into [0,255]. Barcode
/// bars light up strongly; text and horizontal rules mostly cancel.
inline std::vector<std::uint8_t> bar_gradient_map(const Raster& gray) {
    std::vector<std::uint8_t> map(gray.data.size(), 0);
    for (int y = 1; y < gray.height - 1; ++y)
        for (int x = 1; x < gray.width - 1; ++x) {
            const int gx = gray.at(x + 1, y - 1) + 2 * gray.at(x + 1, y) +
                           gray.at(x + 1, y + 1) - gray.at(x - 1, y - 1) -
                           2 * gray.at(x - 1, y) - gray.at(x - 1, y + 1);
            const int gy = gray.at(x - 1, y + 1) + 2 * gray.at(x, y + 1) +
                           gray.at(x + 1, y + 1) - gray.at(x - 1, y - 1) -
                           2 * gray.at(x, y - 1) - gray.at(x + 1, y - 1);
            const int v = (std::abs(gx) - std::abs(gy)) / 4;
            map[static_cast<std::size_t>(y) * gray.width + x] =
                static_cast<std::uint8_t>(std::clamp(v, 0, 255));
        }
    return map;
}

/// 9x9 box blur via a summed-area table; border windows are clipped and
/// normalized by their actual size.
inline std::vector<std::uint8_t> box_blur9(const std::vector<std::uint8_t>& in,
                                           int w, int h) {
    std::vector<std::int64_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            sat[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
                in[static_cast<std::size_t>(y) * w + x] +
                sat[static_cast<std::size_t>(y) * (w + 1) + x + 1] +
                sat[static_cast<std::size_t>(y + 1) * (w + 1) + x] -
                sat[static_cast<std::size_t>(y) * (w + 1) + x];
    std::vector<std::uint8_t> out(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - 4), x1 = std::min(w - 1, x + 4);
            const int y0 = std::max(0, y - 4), y1 = std::min(h - 1, y + 4);
            const std::int64_t sum =
                sat[static_cast<std::size_t>(y1 + 1) * (w + 1) + x1 + 1] -
                sat[static_cast<std::size_t>(y0) * (w + 1) + x1 + 1] -
                sat[static_cast<std::size_t>(y1 + 1) * (w + 1) + x0] +
                sat[static_cast<std::size_t>(y0) * (w + 1) + x0];
            const int count = (x1 - x0 + 1) * (y1 - y0 + 1);
            out[static_cast<std::size_t>(y) * w + x] =
                static_cast<std::uint8_t>((sum + count / 2) / count);
        }
    return out;
}

inline std::vector<Detection> classical_barcode(const Raster& gray) {
    const std::vector<std::uint8_t> grad = bar_gradient_map(gray);
    const std::vector<std::uint8_t> blurred =
        box_blur9(grad, gray.width, gray.height);
    const int thr = otsu_threshold(blurred);
    Mask mask(gray.width, gray.height);
    bool any = false;
    for (std::size_t i = 0; i < blurred.size(); ++i) {
        mask.on[i] = blurred[i] > thr;
        any |= mask.on[i] != 0;
    }
    if (!any) return {};
    const Mask closed = close_rect(mask, 3, 1);  // 7x3 structuring element
    const std::vector<Component> comps = connected_components(closed);
    const Component* best = nullptr;
    for (const Component& c : comps)
        if (!best || c.area > best->area) best = &c;
    if (!best || best->area < 50) return {};
    Detection det;
    det.box = best->box;
    det.kind = RegionKind::Barcode;
    det.confidence = static_cast<double>(best->area) /
                     static_cast<double>(best->box.area());
    return {det};
}

inline std::vector<Detection> classical_address(const Raster& gray,
                                                const Detection* barcode) {
    const int thr = otsu_threshold(gray.data);
    if (thr <= 0) return {};
    BoundingBox excl{0, 0, 0, 0};
    if (barcode)
        excl = synth_detail::inflate_clip(barcode->box, 6, gray.width, gray.height);

    // per-row dark/light transition counts, barcode region masked out
    std::vector<int> transitions(gray.height, 0);
    for (int y = 0; y < gray.height; ++y) {
        bool prev = false;
        for (int x = 0; x < gray.width; ++x) {
            const bool dark =
                gray.at(x, y) < thr && !(barcode && excl.contains(x, y));
            if (dark != prev) ++transitions[y];
            prev = dark;
        }
    }

    // cluster text-like rows into blocks, allowing line-spacing gaps
    const int row_min = 6, max_gap = 16;
    struct Block {
        int y0, y1;
        long long score;
    };
    std::vector<Block> blocks;
    int y = 0;
    while (y < gray.height) {
        if (transitions[y] < row_min) {
            ++y;
            continue;
        }
        Block b{y, y, 0};
        int gap = 0;
        for (; y < gray.height && gap <= max_gap; ++y) {
            if (transitions[y] >= row_min) {
                b.y1 = y;
                b.score += transitions[y];
                gap = 0;
            } else {
                ++gap;
            }
        }
        if (b.y1 - b.y0 + 1 >= 10) blocks.push_back(b);
    }
    if (blocks.empty()) return {};
    const Block* best = &blocks[0];
    for (const Block& b : blocks)
        if (b.score > best->score) best = &b;

    int minx = gray.width, maxx = -1;
    for (int yy = best->y0; yy <= best->y1; ++yy)
        for (int x = 0; x < gray.width; ++x) {
            if (gray.at(x, yy) >= thr || (barcode && excl.contains(x, yy)))
                continue;
            minx = std::min(minx, x);
            maxx = std::max(maxx, x);
        }
    if (maxx < minx) return {};
    Detection det;
    det.box = BoundingBox{minx, best->y0, maxx - minx + 1, best->y1 - best->y0 + 1};
    det.kind = RegionKind::Address;
    const int rows = best->y1 - best->y0 + 1;
    det.confidence = std::min(
        1.0, static_cast<double>(best->score) / (0.5 * rows * gray.width));
    return {det};
}

}  // namespace roidet_detail

/// Detect the barcode and address regions. Oracle echoes the annotation at
/// confidence 1; Classical recovers them from image structure alone.
inline std::vector<Detection> detect_rois(const Raster& image,
                                          DetectorMethod method,
                                          const Annotation* annotation = nullptr) {
    if (method == DetectorMethod::Oracle) {
        if (!annotation)
            throw MissingAnnotation("oracle detector needs an annotation");
        return {Detection{annotation->barcode_box, RegionKind::Barcode, 1.0},
                Detection{annotation->address_box, RegionKind::Address, 1.0}};
    }
    const Raster gray = to_grayscale(image);
    std::vector<Detection> dets = roidet_detail::classical_barcode(gray);
    const Detection* bc = dets.empty() ? nullptr : &dets[0];
    std::vector<Detection> addr = roidet_detail::classical_address(gray, bc);
    dets.insert(dets.end(), addr.begin(), addr.end());
    return dets;
}

/// One ranked detection attached to the image it came from.
struct RankedDetection {
    int image = 0;
    Detection det;
};

/// All-point interpolated average precision at one IoU threshold, greedy
/// one-to-one matching per image, one ground-truth box per kind per image.
inline DetectionMetrics average_precision(std::vector<RankedDetection> dets,
                                          const std::vector<Annotation>& gt,
                                          double iou_threshold = 0.5) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const RankedDetection& a, const RankedDetection& b) {
                         if (a.det.confidence != b.det.confidence)
                             return a.det.confidence > b.det.confidence;
                         return a.image < b.image;
                     });
    DetectionMetrics out;
    for (RegionKind kind : {RegionKind::Barcode, RegionKind::Address}) {
        const int n_gt = static_cast<int>(gt.size());
        out.support[kind] = n_gt;
        std::vector<bool> matched(gt.size(), false);
        std::vector<double> precision, recall;
        int tp = 0, fp = 0;
        for (const RankedDetection& rd : dets) {
            if (rd.det.kind != kind) continue;
            const BoundingBox& truth = kind == RegionKind::Barcode
                                           ? gt[rd.image].barcode_box
                                           : gt[rd.image].address_box;
            if (!matched[rd.image] && iou(rd.det.box, truth) >= iou_threshold) {
                matched[rd.image] = true;
                ++tp;
            } else {
                ++fp;
            }
            precision.push_back(static_cast<double>(tp) / (tp + fp));
            recall.push_back(n_gt > 0 ? static_cast<double>(tp) / n_gt : 0.0);
        }
        // precision envelope, integrated over recall steps
        double ap = 0.0;
        double running_max = 0.0;
        for (std::size_t i = precision.size(); i-- > 0;) {
            running_max = std::max(running_max, precision[i]);
            const double r_lo = i > 0 ? recall[i - 1] : 0.0;
            ap += (recall[i] - r_lo) * running_max;
        }
        out.ap_per_kind[kind] = ap;
    }
    double sum = 0.0;
    for (const auto& [k, v] : out.ap_per_kind) sum += v;
    out.map = out.ap_per_kind.empty()
                  ? 0.0
                  : sum / static_cast<double>(out.ap_per_kind.size());
    return out;
}

}  // namespace slqi
