#include "safeai/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "safeai/error.hpp"
#include "safeai/onnx_io.hpp"

namespace safeai {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::int64_t number(const char* what) {
        skip_space_and_comments();
        std::int64_t v = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            v = v * 10 + (bytes_[pos_++] - '0');
            if (v > (1 << 24)) throw Error(ErrorKind::Parse, std::string("image ") + what + " too large");
            ++digits;
        }
        if (digits == 0) throw Error(ErrorKind::Parse, std::string("image header lacks ") + what);
        return v;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_start() {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            throw Error(ErrorKind::Parse, "image header not terminated by whitespace");
        return pos_ + 1;
    }

private:
    std::string_view bytes_;
    std::size_t pos_ = 2;
};

}  // namespace

bool looks_like_pnm(std::string_view bytes) {
    return bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '4');
}

GrayImage parse_pnm(std::string_view bytes) {
    if (!looks_like_pnm(bytes)) throw Error(ErrorKind::Parse, "not a binary PGM (P5) or PBM (P4) image");
    const bool bitmap = bytes[1] == '4';
    HeaderReader h(bytes);
    GrayImage img;
    img.from_bitmap = bitmap;
    img.width = h.number("width");
    img.height = h.number("height");
    if (img.width < 1 || img.height < 1) throw Error(ErrorKind::Parse, "image has zero extent");
    std::int64_t maxval = 1;
    if (!bitmap) {
        maxval = h.number("maxval");
        if (maxval < 1 || maxval > 255) throw Error(ErrorKind::Parse, "only 8-bit PGM is accepted");
    }
    const auto start = h.raster_start();
    const auto w = static_cast<std::size_t>(img.width), ht = static_cast<std::size_t>(img.height);
    const std::size_t row_bytes = bitmap ? (w + 7) / 8 : w;
    if (bytes.size() - start < row_bytes * ht) throw Error(ErrorKind::Parse, "image raster truncated");
    img.pixels.resize(w * ht);
    for (std::size_t y = 0; y < ht; ++y) {
        const auto* row = reinterpret_cast<const std::uint8_t*>(bytes.data() + start + y * row_bytes);
        for (std::size_t x = 0; x < w; ++x) {
            std::uint8_t v;
            if (bitmap) {
                v = (row[x / 8] >> (7 - x % 8)) & 1 ? 255 : 0;
            } else {
                v = static_cast<std::uint8_t>(std::min<std::int64_t>(255, (row[x] * 255 + maxval / 2) / maxval));
            }
            img.pixels[y * w + x] = v;
        }
    }
    return img;
}

GrayImage read_pnm(const std::filesystem::path& path) { return parse_pnm(read_file(path)); }

std::string encode_pgm(const GrayImage& image) {
    std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(image.pixels.begin(), image.pixels.end());
    return out;
}

}  // namespace safeai
