#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <unordered_map>

#include "safeai/error.hpp"
#include "safeai/shape_qualifier.hpp"

namespace safeai {

namespace {

// Clockwise on screen starting west: W, NW, N, NE, E, SE, S, SW.
constexpr std::int64_t kDx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr std::int64_t kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};

int direction_of(std::int64_t dx, std::int64_t dy) {
    for (int d = 0; d < 8; ++d)
        if (kDx[d] == dx && kDy[d] == dy) return d;
    return -1;
}

// Pixels of the largest 8-connected component, as a mask.
BinaryImage largest_component(const BinaryImage& img) {
    std::vector<int> label(img.pixels.size(), -1);
    std::vector<std::size_t> sizes;
    for (std::int64_t y = 0; y < img.height; ++y)
        for (std::int64_t x = 0; x < img.width; ++x) {
            auto i = static_cast<std::size_t>(y * img.width + x);
            if (!img.pixels[i] || label[i] >= 0) continue;
            const int id = static_cast<int>(sizes.size());
            std::size_t count = 0;
            std::deque<std::pair<std::int64_t, std::int64_t>> queue{{x, y}};
            label[i] = id;
            while (!queue.empty()) {
                auto [px, py] = queue.front();
                queue.pop_front();
                ++count;
                for (int d = 0; d < 8; ++d) {
                    auto qx = px + kDx[d], qy = py + kDy[d];
                    if (!img.at(qx, qy)) continue;
                    auto qi = static_cast<std::size_t>(qy * img.width + qx);
                    if (label[qi] >= 0) continue;
                    label[qi] = id;
                    queue.emplace_back(qx, qy);
                }
            }
            sizes.push_back(count);
        }
    if (sizes.empty()) throw Error(ErrorKind::NoShape, "image has no foreground pixel");
    // Components are numbered in raster order of their first pixel, so the
    // first maximum is the topmost-leftmost one.
    int best = 0;
    for (int id = 1; id < static_cast<int>(sizes.size()); ++id)
        if (sizes[static_cast<std::size_t>(id)] > sizes[static_cast<std::size_t>(best)]) best = id;
    auto mask = BinaryImage::blank(img.width, img.height);
    for (std::size_t i = 0; i < label.size(); ++i) mask.pixels[i] = label[i] == best;
    return mask;
}

}  // namespace

BinaryImage BinaryImage::blank(std::int64_t width, std::int64_t height) {
    if (width < 1 || height < 1) throw Error(ErrorKind::InvalidArgument, "image extents must be at least 1");
    BinaryImage img;
    img.width = width;
    img.height = height;
    img.pixels.assign(static_cast<std::size_t>(width * height), 0);
    return img;
}

bool BinaryImage::at(std::int64_t x, std::int64_t y) const {
    if (x < 0 || y < 0 || x >= width || y >= height) return false;
    return pixels[static_cast<std::size_t>(y * width + x)] != 0;
}

void BinaryImage::set(std::int64_t x, std::int64_t y, bool on) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    pixels[static_cast<std::size_t>(y * width + x)] = on ? 1 : 0;
}

BinaryImage binarize(const GrayImage& image, std::uint8_t threshold) {
    auto out = BinaryImage::blank(image.width, image.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = image.from_bitmap ? image.pixels[i] != 0 : image.pixels[i] >= threshold;
    return out;
}

std::vector<Point> extract_contour(const BinaryImage& image) {
    const auto mask = largest_component(image);
    std::int64_t sx = -1, sy = -1;
    for (std::int64_t y = 0; y < mask.height && sx < 0; ++y)
        for (std::int64_t x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                sx = x;
                sy = y;
                break;
            }

    // Tracing is a function of (pixel, backtrack direction). Jacob's criterion
    // stops when the start state recurs; thin shapes can enter a cycle that
    // never revisits it, so stop on the first repeated state of any kind.
    auto key = [&](std::int64_t x, std::int64_t y, int back) { return static_cast<std::size_t>((y * mask.width + x) * 8 + back); };
    std::vector<Point> trail;
    std::unordered_map<std::size_t, std::size_t> seen;
    std::int64_t px = sx, py = sy;
    int back = 0;  // entered from the west: the raster scan guarantees that pixel is background
    std::size_t cycle_start = 0;
    while (true) {
        auto [it, fresh] = seen.emplace(key(px, py, back), trail.size());
        if (!fresh) {
            cycle_start = it->second;
            break;
        }
        trail.push_back({static_cast<double>(px), static_cast<double>(py)});
        int found = -1;
        for (int k = 1; k <= 8; ++k) {
            int d = (back + k) % 8;
            if (mask.at(px + kDx[d], py + kDy[d])) {
                found = d;
                break;
            }
        }
        if (found < 0) break;  // isolated pixel
        const int prev = (found + 7) % 8;
        const auto bx = px + kDx[prev], by = py + kDy[prev];
        px += kDx[found];
        py += kDy[found];
        back = direction_of(bx - px, by - py);
    }
    std::vector<Point> contour(trail.begin() + static_cast<std::ptrdiff_t>(cycle_start), trail.end());
    const Point origin{static_cast<double>(sx), static_cast<double>(sy)};
    std::rotate(contour.begin(), std::find(contour.begin(), contour.end(), origin), contour.end());
    if (contour.size() < 4)
        throw Error(ErrorKind::DegenerateShape, "contour has " + std::to_string(contour.size()) + " points, need at least 4");
    return contour;
}

std::vector<double> radial_series(std::span<const Point> contour, std::size_t n) {
    if (contour.empty()) throw Error(ErrorKind::DegenerateShape, "empty contour");
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "series length must be positive");
    double cx = 0, cy = 0;
    for (const auto& p : contour) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(contour.size());
    cy /= static_cast<double>(contour.size());

    constexpr double two_pi = 2 * std::numbers::pi;
    std::vector<double> best(n, -1.0);
    bool any = false;
    for (const auto& p : contour) {
        const double dx = p.x - cx, dy = p.y - cy;
        const double r = std::hypot(dx, dy);
        if (r == 0) continue;
        double angle = std::atan2(dy, dx);
        if (angle < 0) angle += two_pi;
        auto bin = static_cast<std::size_t>(angle / two_pi * static_cast<double>(n));
        if (bin >= n) bin = n - 1;
        best[bin] = std::max(best[bin], r);
        any = true;
    }
    if (!any) throw Error(ErrorKind::DegenerateShape, "every contour point sits on the centroid");

    std::vector<std::size_t> filled;
    for (std::size_t k = 0; k < n; ++k)
        if (best[k] >= 0) filled.push_back(k);
    std::vector<double> out(best);
    for (std::size_t f = 0; f < filled.size(); ++f) {
        const auto lo = filled[f];
        const auto hi = filled[(f + 1) % filled.size()];
        const auto gap = (hi + n - lo) % n == 0 ? n : (hi + n - lo) % n;
        for (std::size_t step = 1; step < gap; ++step) {
            const double t = static_cast<double>(step) / static_cast<double>(gap);
            out[(lo + step) % n] = best[lo] + t * (best[hi] - best[lo]);
        }
    }
    return out;
}

}  // namespace safeai
