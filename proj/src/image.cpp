#include "confsplat/image.hpp"

#include "confsplat/core.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace confsplat {

Image::Image(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {
    if (w < 0 || h < 0) throw ContractError("Image: negative dimensions");
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ContractError(std::string(what) + ": image shapes differ (" + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                            std::to_string(b.height) + ")");
    }
}

std::uint8_t quantize_channel(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5));
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.width < 1 || image.height < 1) throw ContractError("encode_png: empty image");
    std::vector<std::uint8_t> pixels(image.value_count());
    std::transform(image.data.begin(), image.data.end(), pixels.begin(), quantize_channel);

    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw DataError(std::string("encode_png: ") + png.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw DataError(std::string("encode_png: ") + png.message);
    }
    out.resize(size);
    return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw DataError(std::string("decode_png: ") + png.message);
    }
    if (png.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&png);
        throw DataError("decode_png: unsupported format (only 8-bit PNG is accepted)");
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
        throw DataError(std::string("decode_png: ") + png.message);
    }
    Image image(static_cast<int>(png.width), static_cast<int>(png.height));
    std::transform(pixels.begin(), pixels.end(), image.data.begin(), [](std::uint8_t v) { return v / 255.0; });
    return image;
}

Image read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_image: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_png(bytes);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_image(const Image& image, const std::string& path) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_image: cannot open " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write_image: write failed for " + path);
}

}  // namespace confsplat
