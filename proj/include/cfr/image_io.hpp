#pragma once

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "cfr/errors.hpp"
#include "cfr/tensor.hpp"

namespace cfr {

namespace detail {

inline std::uint8_t quantize8(double v) {
    const double c = std::min(1.0, std::max(0.0, v));
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace detail

// 8-bit PNG encode of a [3,H,W] RGB or [1,H,W]/[H,W] grayscale image with
// values in [0,1], round-to-nearest quantization.
inline void write_png(const std::filesystem::path& path, const Tensor& image) {
    int channels, h, w;
    if (image.shape().size() == 3 && (image.shape()[0] == 3 || image.shape()[0] == 1)) {
        channels = image.shape()[0];
        h = image.shape()[1];
        w = image.shape()[2];
    } else if (image.shape().size() == 2) {
        channels = 1;
        h = image.shape()[0];
        w = image.shape()[1];
    } else {
        throw dimension_error("write_png: expected [3,H,W], [1,H,W] or [H,W]");
    }

    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<png_byte> buf(plane * static_cast<std::size_t>(channels));
    const auto& px = image.data();
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < channels; ++c)
            buf[i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)] =
                detail::quantize8(px[static_cast<std::size_t>(c) * plane + i]);

    if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr))
        throw io_error("write_png: " + path.string() + ": " + img.message);
}

// Reads any PNG as [3,H,W] RGB in [0,1].
inline Tensor read_png(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str()))
        throw format_error("read_png: " + path.string() + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
        throw format_error("read_png: " + path.string() + ": " + img.message);

    const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<double> px(3 * plane);
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c)
            px[static_cast<std::size_t>(c) * plane + i] =
                static_cast<double>(buf[i * 3 + static_cast<std::size_t>(c)]) / 255.0;
    return Tensor({3, h, w}, std::move(px));
}

// Display-only rescale (v - min) / (max - min); not invertible. Flat inputs
// map to zeros.
inline std::vector<double> normalize_for_display(const std::vector<double>& v) {
    double lo = v.empty() ? 0.0 : v[0], hi = lo;
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    std::vector<double> out(v.size(), 0.0);
    if (hi > lo)
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
    return out;
}

// Grayscale heatmap export, values linearly scaled to the 0-255 range.
inline void write_heatmap_png(const std::filesystem::path& path, const std::vector<double>& values,
                              int h, int w) {
    if (static_cast<std::size_t>(h) * w != values.size())
        throw dimension_error("write_heatmap_png: grid size mismatch");
    write_png(path, Tensor({h, w}, normalize_for_display(values)));
}

// clean | rescaled delta | adversarial, side by side with a 2px separator.
inline Tensor triptych(const Tensor& clean, const Tensor& delta, const Tensor& adversarial) {
    const int c = clean.shape()[0], h = clean.shape()[1], w = clean.shape()[2];
    const int gap = 2;
    const int tw = 3 * w + 2 * gap;
    std::vector<double> out(static_cast<std::size_t>(c) * h * tw, 1.0);
    const std::vector<double> d = normalize_for_display(delta.data());
    auto blit = [&](const std::vector<double>& src, int x0) {
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out[(static_cast<std::size_t>(ci) * h + y) * tw + x0 + x] =
                        src[(static_cast<std::size_t>(ci) * h + y) * w + x];
    };
    blit(clean.data(), 0);
    blit(d, w + gap);
    blit(adversarial.data(), 2 * (w + gap));
    return Tensor({c, h, tw}, std::move(out));
}

}  // namespace cfr
