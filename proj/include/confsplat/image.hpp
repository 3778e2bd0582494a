#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace confsplat {

using Rgb = std::array<double, 3>;

/// Row-major RGB image with a top-left origin, channels interleaved.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0);

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    std::size_t value_count() const { return data.size(); }

    double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    bool same_shape(const Image& other) const { return width == other.width && height == other.height; }
};

/// Throws ContractError naming `what` when the shapes differ.
void require_same_shape(const Image& a, const Image& b, const char* what);

/// 8-bit RGB PNG; values decode to v / 255.
Image read_image(const std::string& path);
void write_image(const Image& image, const std::string& path);

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(const std::vector<std::uint8_t>& bytes);

/// Round-half-up quantisation used by the PNG writer.
std::uint8_t quantize_channel(double v);

}  // namespace confsplat
