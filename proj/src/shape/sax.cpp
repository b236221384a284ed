#include <algorithm>
#include <charconv>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "safeai/error.hpp"
#include "safeai/shape_qualifier.hpp"

namespace safeai {

std::vector<double> znormalize(std::span<const double> series) {
    std::vector<double> out(series.size(), 0.0);
    if (series.empty()) return out;
    const double count = static_cast<double>(series.size());
    double mean = 0;
    for (double v : series) mean += v;
    mean /= count;
    double var = 0;
    for (double v : series) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / count);
    if (sd < 1e-9) return out;
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = (series[i] - mean) / sd;
    return out;
}

std::vector<double> paa(std::span<const double> series, std::size_t w) {
    const auto n = series.size();
    if (w < 1 || w > n)
        throw Error(ErrorKind::BadWordLength, "word length " + std::to_string(w) + " outside 1.." + std::to_string(n));
    std::vector<double> out(w);
    for (std::size_t k = 0; k < w; ++k) {
        const auto lo = k * n / w, hi = (k + 1) * n / w;
        double sum = 0;
        for (auto i = lo; i < hi; ++i) sum += series[i];
        out[k] = sum / static_cast<double>(hi - lo);
    }
    return out;
}

std::vector<double> normal_breakpoints(int alphabet) {
    if (alphabet < 2 || alphabet > 10) throw Error(ErrorKind::InvalidArgument, "alphabet size must be in 2..10");
    const boost::math::normal_distribution<double> phi;
    std::vector<double> out;
    for (int i = 1; i < alphabet; ++i) out.push_back(boost::math::quantile(phi, static_cast<double>(i) / alphabet));
    return out;
}

SaxConfig SaxConfig::make(std::size_t n, std::size_t w, int a) {
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "series length must be positive");
    if (w < 1 || w > n) throw Error(ErrorKind::BadWordLength, "word length " + std::to_string(w) + " outside 1.." + std::to_string(n));
    SaxConfig cfg;
    cfg.n = n;
    cfg.w = w;
    cfg.a = a;
    cfg.breakpoints = normal_breakpoints(a);
    return cfg;
}

SaxConfig SaxConfig::parse(std::string_view text) {
    std::vector<std::int64_t> parts;
    while (true) {
        auto comma = text.find(',');
        auto field = text.substr(0, comma);
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || p != field.data() + field.size() || v < 0)
            throw Error(ErrorKind::InvalidArgument, "config must be n,w,a with non-negative integers");
        parts.push_back(v);
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    if (parts.size() != 3) throw Error(ErrorKind::InvalidArgument, "config must be n,w,a");
    if (parts[2] > 10) throw Error(ErrorKind::InvalidArgument, "alphabet size must be in 2..10");
    return make(static_cast<std::size_t>(parts[0]), static_cast<std::size_t>(parts[1]), static_cast<int>(parts[2]));
}

SaxWord symbolize(std::span<const double> paa_values, std::span<const double> breakpoints) {
    SaxWord out;
    out.reserve(paa_values.size());
    for (double v : paa_values)
        out.push_back(static_cast<int>(std::upper_bound(breakpoints.begin(), breakpoints.end(), v) - breakpoints.begin()));
    return out;
}

double mindist(const SaxWord& u, const SaxWord& v, const SaxConfig& cfg) {
    if (u.size() != v.size())
        throw Error(ErrorKind::LengthMismatch, "words of length " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    const auto& beta = cfg.breakpoints;
    double sum = 0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        for (int s : {u[k], v[k]})
            if (s < 0 || s >= cfg.a) throw Error(ErrorKind::InvalidArgument, "symbol " + std::to_string(s) + " outside the alphabet");
        const int lo = std::min(u[k], v[k]), hi = std::max(u[k], v[k]);
        if (hi - lo <= 1) continue;
        // 0-based symbols: the gap runs from the breakpoint above lo to the one below hi.
        const double cell = beta[static_cast<std::size_t>(hi - 1)] - beta[static_cast<std::size_t>(lo)];
        sum += cell * cell;
    }
    return std::sqrt(static_cast<double>(cfg.n) / static_cast<double>(cfg.w)) * std::sqrt(sum);
}

SaxWord shape_word(const BinaryImage& image, const SaxConfig& cfg) {
    auto contour = extract_contour(image);
    auto series = znormalize(radial_series(contour, cfg.n));
    return symbolize(paa(series, cfg.w), cfg.breakpoints);
}

std::string word_to_string(const SaxWord& word) {
    std::string out;
    for (int s : word) out.push_back(static_cast<char>('a' + s));
    return out;
}

std::string_view to_string(QualifierVerdict v) {
    switch (v) {
        case QualifierVerdict::Accept: return "ACCEPT";
        case QualifierVerdict::Reject: return "REJECT";
        case QualifierVerdict::Undecided: return "UNDECIDED";
    }
    return "?";
}

Qualification qualify(const std::string& predicted_class, const SaxWord& word, const ReferenceTable& table,
                      const SaxConfig& cfg) {
    auto it = table.find(predicted_class);
    if (it == table.end()) return {};
    double best = INFINITY;
    for (const auto& ref : it->second.words) best = std::min(best, mindist(word, ref, cfg));
    return {best <= it->second.threshold ? QualifierVerdict::Accept : QualifierVerdict::Reject, best};
}

}  // namespace safeai
