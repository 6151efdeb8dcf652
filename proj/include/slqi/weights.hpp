#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "slqi/fusion.hpp"
#include "slqi/nnet.hpp"
#include "slqi/tensor.hpp"

namespace slqi {

struct BadWeightFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// "SLQI" weight container, all little-endian:
//   magic[4] | u16 version | u8 branch | u8 reserved | u16 input_side |
//   u16 tensor_count | per tensor (u8 rank, u8 pad, u16 pad, u32 dims...) |
//   all payloads as f32 in table order.
namespace weights_detail {

inline constexpr std::uint16_t kVersion = 1;

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::uint8_t* p;
    std::size_t n;
    std::size_t pos = 0;

    std::uint8_t u8() {
        if (pos + 1 > n) throw BadWeightFile("truncated weight file");
        return p[pos++];
    }
    std::uint16_t u16() {
        const std::uint16_t lo = u8();
        return static_cast<std::uint16_t>(lo | (u8() << 8));
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

inline std::vector<std::uint8_t> serialize(
    BranchId branch, int input_side,
    const std::vector<const Tensor<float>*>& tensors) {
    std::vector<std::uint8_t> out = {'S', 'L', 'Q', 'I'};
    put_u16(out, kVersion);
    out.push_back(static_cast<std::uint8_t>(branch));
    out.push_back(0);
    put_u16(out, static_cast<std::uint16_t>(input_side));
    put_u16(out, static_cast<std::uint16_t>(tensors.size()));
    for (const Tensor<float>* t : tensors) {
        out.push_back(static_cast<std::uint8_t>(t->shape.size()));
        out.push_back(0);
        put_u16(out, 0);
        for (int e : t->shape) put_u32(out, static_cast<std::uint32_t>(e));
    }
    for (const Tensor<float>* t : tensors)
        for (float v : t->data) put_f32(out, v);
    return out;
}

struct Container {
    BranchId branch;
    int input_side;
    std::vector<Tensor<float>> tensors;
};

inline Container deserialize(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes.data(), bytes.size()};
    if (bytes.size() < 4 || bytes[0] != 'S' || bytes[1] != 'L' ||
        bytes[2] != 'Q' || bytes[3] != 'I')
        throw BadWeightFile("bad weight file magic");
    r.pos = 4;
    if (r.u16() != kVersion) throw BadWeightFile("unsupported weight version");
    Container c;
    c.branch = static_cast<BranchId>(r.u8());
    r.u8();
    c.input_side = r.u16();
    const int count = r.u16();
    for (int i = 0; i < count; ++i) {
        const int rank = r.u8();
        r.u8();
        r.u16();
        std::vector<int> shape(rank);
        for (int d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.u32());
        c.tensors.emplace_back(shape);
    }
    for (Tensor<float>& t : c.tensors)
        for (float& v : t.data) v = r.f32();
    if (r.pos != bytes.size()) throw BadWeightFile("trailing weight file bytes");
    return c;
}

}  // namespace weights_detail

inline std::vector<std::uint8_t> serialize_extractor(const ExtractorNet<float>& net) {
    std::vector<const Tensor<float>*> tensors;
    net.for_each_tensor([&tensors](const Tensor<float>& t) { tensors.push_back(&t); });
    return weights_detail::serialize(net.branch, net.input_side, tensors);
}

inline ExtractorNet<float> deserialize_extractor(const std::vector<std::uint8_t>& bytes) {
    weights_detail::Container c = weights_detail::deserialize(bytes);
    if (c.branch == BranchId::FusionHead)
        throw BadWeightFile("file holds a fusion head, not an extractor");
    if (c.tensors.size() != 10) throw BadWeightFile("extractor needs 10 tensors");
    ExtractorNet<float> net;
    net.branch = c.branch;
    net.input_side = c.input_side;
    int i = 0;
    net.for_each_tensor([&](Tensor<float>& t) { t = std::move(c.tensors[i++]); });
    if (net.fc_feature.w.shape.size() != 2)
        throw BadWeightFile("bad feature layer shape");
    net.feature_dim = net.fc_feature.w.shape[0];
    return net;
}

inline std::vector<std::uint8_t> serialize_fusion(const FusionNet<float>& net) {
    std::vector<const Tensor<float>*> tensors;
    net.for_each_tensor([&tensors](const Tensor<float>& t) { tensors.push_back(&t); });
    return weights_detail::serialize(BranchId::FusionHead, 0, tensors);
}

inline FusionNet<float> deserialize_fusion(const std::vector<std::uint8_t>& bytes) {
    weights_detail::Container c = weights_detail::deserialize(bytes);
    if (c.branch != BranchId::FusionHead)
        throw BadWeightFile("file does not hold a fusion head");
    if (c.tensors.size() != 6) throw BadWeightFile("fusion head needs 6 tensors");
    FusionNet<float> net;
    int i = 0;
    net.for_each_tensor([&](Tensor<float>& t) { t = std::move(c.tensors[i++]); });
    return net;
}

inline void save_weights(const std::filesystem::path& path,
                         const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BadWeightFile("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw BadWeightFile("write failed: " + path.string());
}

inline std::vector<std::uint8_t> load_weight_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw BadWeightFile("cannot open: " + path.string());
    const std::streamsize n = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(bytes.data()), n);
    if (!in) throw BadWeightFile("read failed: " + path.string());
    return bytes;
}

}  // namespace slqi
