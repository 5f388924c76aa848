#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cfr/errors.hpp"
#include "cfr/rng.hpp"
#include "cfr/tensor.hpp"

namespace cfr {

struct LabeledImage {
    Tensor pixels;  // [3,H,W], values in [0,1]
    int label = 0;
    std::string id;
};

struct LabeledDataset {
    std::vector<LabeledImage> images;
    std::vector<std::string> class_names;
    std::string provenance;

    int class_count() const { return static_cast<int>(class_names.size()); }

    LabeledDataset slice(std::size_t begin, std::size_t end) const {
        LabeledDataset out;
        out.class_names = class_names;
        out.provenance = provenance;
        for (std::size_t i = begin; i < end && i < images.size(); ++i) out.images.push_back(images[i]);
        return out;
    }
};

// ---------------------------------------------------------------------------
// CIFAR-10 binary format: records of 3073 bytes, 1 label byte then
// 1024 R + 1024 G + 1024 B bytes row-major. Pixels map to [0,1] by /255.
// ---------------------------------------------------------------------------

constexpr std::size_t kCifarRecordBytes = 3073;
constexpr int kCifarSide = 32;

inline LabeledImage parse_cifar_record(const std::uint8_t* rec, std::size_t index) {
    const int label = rec[0];
    if (label > 9) throw format_error("cifar10: record " + std::to_string(index) + " has label byte " +
                                      std::to_string(label) + " > 9");
    std::vector<double> px(3 * kCifarSide * kCifarSide);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>(rec[1 + i]) / 255.0;
    LabeledImage img;
    img.pixels = Tensor({3, kCifarSide, kCifarSide}, std::move(px));
    img.label = label;
    img.id = "cifar-" + std::to_string(index);
    return img;
}

// Re-serializes an image parsed from a CIFAR record; round-trips bit-exactly.
inline std::vector<std::uint8_t> to_cifar_record(const LabeledImage& img) {
    std::vector<std::uint8_t> rec(kCifarRecordBytes);
    rec[0] = static_cast<std::uint8_t>(img.label);
    const auto& px = img.pixels.data();
    for (std::size_t i = 0; i < px.size(); ++i)
        rec[1 + i] = static_cast<std::uint8_t>(std::lround(px[i] * 255.0));
    return rec;
}

struct CifarSubset {
    std::vector<int> keep_classes;  // empty = all
    std::size_t max_per_class = 0;  // 0 = unlimited
};

inline LabeledDataset load_cifar10_bytes(const std::vector<std::uint8_t>& bytes,
                                         const CifarSubset& subset = {}) {
    if (bytes.size() % kCifarRecordBytes != 0)
        throw format_error("cifar10: file length " + std::to_string(bytes.size()) +
                           " is not a multiple of 3073; truncated at byte offset " +
                           std::to_string(bytes.size() - bytes.size() % kCifarRecordBytes));
    LabeledDataset ds;
    ds.class_names = {"airplane", "automobile", "bird", "cat", "deer",
                      "dog",      "frog",       "horse", "ship", "truck"};
    ds.provenance = "cifar10-binary";
    std::vector<std::size_t> per_class(10, 0);
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledImage img = parse_cifar_record(bytes.data() + i * kCifarRecordBytes, i);
        if (!subset.keep_classes.empty()) {
            bool keep = false;
            for (int c : subset.keep_classes) keep = keep || c == img.label;
            if (!keep) continue;
        }
        if (subset.max_per_class > 0 && per_class[static_cast<std::size_t>(img.label)] >= subset.max_per_class)
            continue;
        per_class[static_cast<std::size_t>(img.label)]++;
        ds.images.push_back(std::move(img));
    }
    // Remap labels to a dense range when filtering to a class subset.
    if (!subset.keep_classes.empty()) {
        std::vector<std::string> names;
        std::vector<int> remap(10, -1);
        for (std::size_t i = 0; i < subset.keep_classes.size(); ++i) {
            remap[static_cast<std::size_t>(subset.keep_classes[i])] = static_cast<int>(i);
            names.push_back(ds.class_names[static_cast<std::size_t>(subset.keep_classes[i])]);
        }
        for (auto& img : ds.images) img.label = remap[static_cast<std::size_t>(img.label)];
        ds.class_names = names;
    }
    return ds;
}

inline LabeledDataset load_cifar10(const std::filesystem::path& path, const CifarSubset& subset = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cifar10: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_cifar10_bytes(bytes, subset);
}

// ---------------------------------------------------------------------------
// Synthetic shapes: the default desk-scale fixture. 3x16x16 images of a
// bright shape on a dim noisy background, class assigned round-robin so
// balance is within +/-1 of n/classes. Deterministic for a fixed seed.
// ---------------------------------------------------------------------------

constexpr int kSynthSide = 16;

namespace detail {

inline void draw_disk(std::vector<double>& px, int side, double cx, double cy, double r,
                      const double rgb[3]) {
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if (d2 <= r * r)
                for (int c = 0; c < 3; ++c) px[static_cast<std::size_t>((c * side + y) * side + x)] = rgb[c];
        }
}

inline void draw_bar(std::vector<double>& px, int side, int x0, int y0, int len, int thick,
                     bool horizontal, const double rgb[3]) {
    for (int t = 0; t < thick; ++t)
        for (int l = 0; l < len; ++l) {
            const int x = horizontal ? x0 + l : x0 + t;
            const int y = horizontal ? y0 + t : y0 + l;
            if (x < 0 || x >= side || y < 0 || y >= side) continue;
            for (int c = 0; c < 3; ++c) px[static_cast<std::size_t>((c * side + y) * side + x)] = rgb[c];
        }
}

inline void draw_ring(std::vector<double>& px, int side, double cx, double cy, double r,
                      const double rgb[3]) {
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if (d2 <= r * r && d2 >= (r - 2.0) * (r - 2.0))
                for (int c = 0; c < 3; ++c) px[static_cast<std::size_t>((c * side + y) * side + x)] = rgb[c];
        }
}

inline void draw_cross(std::vector<double>& px, int side, int cx, int cy, int arm, const double rgb[3]) {
    draw_bar(px, side, cx - arm, cy - 1, 2 * arm + 1, 2, true, rgb);
    draw_bar(px, side, cx - 1, cy - arm, 2 * arm + 1, 2, false, rgb);
}

}  // namespace detail

inline LabeledDataset synth_shapes(std::size_t n, std::uint64_t seed, int classes = 2) {
    if (n < 1) throw contract_error("synth_shapes: n must be >= 1");
    if (classes < 2 || classes > 4) throw config_error("synth_shapes: classes must be in [2,4]");
    static const std::vector<std::string> all_names = {"disk", "bar", "ring", "cross"};
    LabeledDataset ds;
    ds.class_names.assign(all_names.begin(), all_names.begin() + classes);
    ds.provenance = "synth-shapes seed=" + std::to_string(seed);

    Rng rng(seed);
    const int side = kSynthSide;
    // Each class gets its own color band so the discriminative evidence sits
    // on the object pixels, the way it does for natural images. The bands
    // overlap and every image takes illumination and pixel noise, which
    // keeps the trained models at realistic (not saturated) confidence.
    static const double palette[4][3] = {
        {0.80, 0.40, 0.40},  // disk: red
        {0.40, 0.80, 0.40},  // bar: green
        {0.40, 0.45, 0.80},  // ring: blue
        {0.75, 0.70, 0.35},  // cross: yellow
    };
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
        std::vector<double> px(static_cast<std::size_t>(3 * side * side));
        for (double& v : px) v = rng.uniform(0.05, 0.30);  // noisy background

        double rgb[3];
        for (int c = 0; c < 3; ++c) rgb[c] = palette[label][c] + rng.uniform(-0.22, 0.22);
        const double cx = rng.uniform(5.0, side - 5.0);
        const double cy = rng.uniform(5.0, side - 5.0);
        switch (label) {
            case 0:
                detail::draw_disk(px, side, cx, cy, rng.uniform(3.0, 4.2), rgb);
                break;
            case 1:
                detail::draw_bar(px, side, static_cast<int>(cx) - 5, static_cast<int>(cy) - 1,
                                 10 + static_cast<int>(rng.below(3)), 3, rng.below(2) == 0, rgb);
                break;
            case 2:
                detail::draw_ring(px, side, cx, cy, rng.uniform(4.0, 5.5), rgb);
                break;
            default:
                detail::draw_cross(px, side, static_cast<int>(cx), static_cast<int>(cy), 5, rgb);
                break;
        }
        // illumination jitter plus per-pixel speckle, clamped to [0,1]
        const double gain = rng.uniform(0.75, 1.1);
        for (double& v : px) {
            v = v * gain + rng.uniform(-0.04, 0.04);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        }
        LabeledImage img;
        img.pixels = Tensor({3, side, side}, std::move(px));
        img.label = label;
        img.id = "synth-" + std::to_string(i);
        ds.images.push_back(std::move(img));
    }
    return ds;
}

}  // namespace cfr
