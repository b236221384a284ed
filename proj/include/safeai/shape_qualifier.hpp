#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "safeai/pnm.hpp"

namespace safeai {

struct BinaryImage {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<std::uint8_t> pixels;  // 1 = foreground

    static BinaryImage blank(std::int64_t width, std::int64_t height);
    bool at(std::int64_t x, std::int64_t y) const;  // false outside the image
    void set(std::int64_t x, std::int64_t y, bool on = true);
};

// PBM input keeps its bits; grey input is foreground where value >= threshold.
BinaryImage binarize(const GrayImage& image, std::uint8_t threshold = 128);

struct Point {
    double x = 0;
    double y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

// Moore-neighbour trace of the largest 8-connected component (ties go to the
// component whose first pixel in raster order comes first). Starts at the
// topmost-then-leftmost pixel, runs clockwise on screen (y grows downwards)
// and stops on Jacob's criterion, or on any repeated tracing state for thin
// shapes where the start state never recurs. The closing point is not repeated.
// Throws NoShape, DegenerateShape.
std::vector<Point> extract_contour(const BinaryImage& image);

// Per angular bin [2pi k/n, 2pi (k+1)/n) around the point centroid, the
// largest distance of a point in that bin. Empty bins interpolate linearly
// between the nearest filled bins, circularly. Throws DegenerateShape.
std::vector<double> radial_series(std::span<const Point> contour, std::size_t n);

// Population standard deviation; near-constant input maps to all zeros.
std::vector<double> znormalize(std::span<const double> series);

// Frame k averages [floor(k n / w), floor((k+1) n / w)). Throws BadWordLength.
std::vector<double> paa(std::span<const double> series, std::size_t w);

// Phi^-1(i / a) for i = 1 .. a-1.
std::vector<double> normal_breakpoints(int alphabet);

struct SaxConfig {
    std::size_t n = 360;
    std::size_t w = 16;
    int a = 4;
    std::vector<double> breakpoints = normal_breakpoints(4);

    // Throws InvalidArgument for a outside 2..10 or n == 0, BadWordLength for w.
    static SaxConfig make(std::size_t n, std::size_t w, int a);
    // "n,w,a"
    static SaxConfig parse(std::string_view text);
};

using SaxWord = std::vector<int>;

// Symbol = number of breakpoints <= value, so a value on a breakpoint takes the upper symbol.
SaxWord symbolize(std::span<const double> paa_values, std::span<const double> breakpoints);

// sqrt(n/w) * sqrt(sum cell^2). Throws LengthMismatch, InvalidArgument for symbols outside [0, a).
double mindist(const SaxWord& u, const SaxWord& v, const SaxConfig& cfg);

// The whole chain: contour, radial series, z-normalisation, PAA, symbols.
SaxWord shape_word(const BinaryImage& image, const SaxConfig& cfg);
std::string word_to_string(const SaxWord& word);  // "a" for 0, "b" for 1, ...

struct ReferenceClass {
    std::vector<SaxWord> words;
    double threshold = 0;
};

using ReferenceTable = std::map<std::string, ReferenceClass>;

// {"label": {"words": [[ints]], "threshold": real}}. Throws Parse.
ReferenceTable parse_reference_table(std::string_view text);
std::string reference_table_to_json(const ReferenceTable& table);

enum class QualifierVerdict { Accept, Reject, Undecided };
std::string_view to_string(QualifierVerdict v);

struct Qualification {
    QualifierVerdict verdict = QualifierVerdict::Undecided;
    double distance = 0;  // best distance to the class's words; 0 when undecided
};

Qualification qualify(const std::string& predicted_class, const SaxWord& word, const ReferenceTable& table,
                      const SaxConfig& cfg);

}  // namespace safeai
