#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace safeai {

// 8-bit grey image. PBM (P4) pixels are 0 or 255, with set bits mapped to 255.
struct GrayImage {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
    bool from_bitmap = false;

    std::uint8_t at(std::int64_t x, std::int64_t y) const { return pixels[static_cast<std::size_t>(y * width + x)]; }
};

bool looks_like_pnm(std::string_view bytes);

// Binary P5 (maxval <= 255) and P4. Throws Parse.
GrayImage parse_pnm(std::string_view bytes);
GrayImage read_pnm(const std::filesystem::path& path);

std::string encode_pgm(const GrayImage& image);

}  // namespace safeai
