#pragma once

// Classical facial descriptors: landmark displacement (DTNnp), pyramid HOG,
// and assembly of tagged feature vectors.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "affect/dataio.hpp"
#include "affect/error.hpp"
#include "affect/face_model.hpp"
#include "affect/preprocess.hpp"
#include "affect/types.hpp"

namespace affect {

/// Per-landmark distance between the nose-normalised peak frame and frame 0.
inline FeatureVector dtnnp(const LandmarkSequence& seq, FeatureTag tag = FeatureTag::dtnnp) {
    const std::size_t peak = select_peak_frame(seq);
    const auto neutral = normalize_to_nose(seq.frames.front()).points;
    const auto apex = normalize_to_nose(seq.frames[peak]).points;
    FeatureVector fv{std::vector<double>(kLandmarkCount), tag};
    for (std::size_t i = 0; i < kLandmarkCount; ++i) fv.values[i] = distance(apex[i], neutral[i]);
    return fv;
}

inline constexpr int kPhogSize = 120;
inline constexpr int kPhogBins = 8;
inline constexpr int kPhogLevels = 3;

/// Pyramid histogram of oriented gradients on a 120x120 image: 8 unsigned
/// orientation bins, 1/4/16 cells, each level L1-normalised.
inline FeatureVector phog(const GrayImage& img, FeatureTag tag = FeatureTag::phog) {
    if (img.width != kPhogSize || img.height != kPhogSize)
        throw ParameterError("phog expects a 120x120 image, got " + std::to_string(img.width) + "x" +
                             std::to_string(img.height));
    if (img.pixels.size() != static_cast<std::size_t>(kPhogSize * kPhogSize))
        throw ParameterError("phog: pixel buffer size mismatch");
    for (double v : img.pixels)
        if (!std::isfinite(v)) throw ParameterError("phog: non-finite intensity");

    const int n = kPhogSize;
    std::vector<double> mag(static_cast<std::size_t>(n * n)), ang(static_cast<std::size_t>(n * n));
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double gx = 0.5 * (img.at(std::min(x + 1, n - 1), y) - img.at(std::max(x - 1, 0), y));
            const double gy = 0.5 * (img.at(x, std::min(y + 1, n - 1)) - img.at(x, std::max(y - 1, 0)));
            const auto idx = static_cast<std::size_t>(y * n + x);
            mag[idx] = std::hypot(gx, gy);
            double a = std::atan2(gy, gx);
            if (a < 0) a += std::numbers::pi;
            if (a >= std::numbers::pi) a -= std::numbers::pi;
            ang[idx] = a;
        }

    FeatureVector fv{{}, tag};
    for (int level = 0; level < kPhogLevels; ++level) {
        const int cells = 1 << level;
        std::vector<double> hist(static_cast<std::size_t>(cells * cells * kPhogBins), 0.0);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const auto idx = static_cast<std::size_t>(y * n + x);
                if (mag[idx] == 0.0) continue;
                const int cx = x * cells / n, cy = y * cells / n;
                int bin = static_cast<int>(ang[idx] / std::numbers::pi * kPhogBins);
                bin = std::clamp(bin, 0, kPhogBins - 1);
                hist[static_cast<std::size_t>((cy * cells + cx) * kPhogBins + bin)] += mag[idx];
            }
        double sum = 0.0;
        for (double v : hist) sum += v;
        if (sum > 0)
            for (double& v : hist) v /= sum;
        fv.values.insert(fv.values.end(), hist.begin(), hist.end());
    }
    return fv;
}

namespace detail {

inline void splat(GrayImage& img, double x, double y, double w) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    const double weights[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int k = 0; k < 4; ++k) {
        if (xs[k] < 0 || ys[k] < 0 || xs[k] >= img.width || ys[k] >= img.height) continue;
        auto& px = img.at(xs[k], ys[k]);
        px = std::min(1.0, px + w * weights[k]);
    }
}

}  // namespace detail

/// Draws the landmark chains as anti-aliased polylines on a black 120x120
/// canvas. The landmark bounding box is fitted with a 10% margin, so the
/// raster is invariant to translation and uniform scale.
inline GrayImage rasterize_landmarks(const Frame& frame) {
    GrayImage img(kPhogSize, kPhogSize, 0.0);
    double minx = frame[0].x, maxx = frame[0].x, miny = frame[0].y, maxy = frame[0].y;
    for (const auto& p : frame) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const double span = std::max({maxx - minx, maxy - miny, 1e-12});
    const double inner = kPhogSize * 0.8;
    const double s = inner / span;
    const double ox = 0.5 * (kPhogSize - s * (maxx - minx)), oy = 0.5 * (kPhogSize - s * (maxy - miny));
    auto to_px = [&](Point2 p) { return Point2{ox + (p.x - minx) * s, oy + (p.y - miny) * s}; };

    for (const auto& chain : landmarks::kChains) {
        const std::size_t count = chain.last - chain.first + 1;
        const std::size_t segs = chain.closed ? count : count - 1;
        for (std::size_t k = 0; k < segs; ++k) {
            const Point2 a = to_px(frame[chain.first + k]);
            const Point2 b = to_px(frame[chain.first + (k + 1) % count]);
            const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * distance(a, b))));
            for (int t = 0; t <= steps; ++t) {
                const double u = static_cast<double>(t) / steps;
                detail::splat(img, a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), 1.0);
            }
        }
    }
    return img;
}

/// Concatenates parts in order; the result is tagged mixed.
inline FeatureVector assemble(std::span<const FeatureVector> parts) {
    if (parts.empty()) throw ParameterError("assemble needs at least one part");
    if (parts.size() == 1) return parts.front();
    FeatureVector out{{}, FeatureTag::mixed};
    for (const auto& p : parts) {
        for (double v : p.values)
            if (!std::isfinite(v)) throw ValidationError("assemble: non-finite value in part");
        out.values.insert(out.values.end(), p.values.begin(), p.values.end());
    }
    return out;
}

inline FeatureVector assemble(std::initializer_list<FeatureVector> parts) {
    return assemble(std::span<const FeatureVector>(parts.begin(), parts.size()));
}

/// Instances x features CSV; columns are named <tag>_<index>.
inline std::string format_feature_csv(const FeatureMatrix& X, const std::vector<std::string>& columns) {
    if (static_cast<std::size_t>(X.cols()) != columns.size())
        throw ParameterError("feature CSV: column names do not match the matrix width");
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (c) out += ',';
        out += columns[c];
    }
    out += '\n';
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            if (c) out += ',';
            out += detail::format_double(X(r, c));
        }
        out += '\n';
    }
    return out;
}

inline std::vector<std::string> column_names(FeatureTag tag, std::size_t count) {
    std::vector<std::string> names;
    names.reserve(count);
    for (std::size_t i = 0; i < count; ++i) names.push_back(std::string(to_string(tag)) + "_" + std::to_string(i));
    return names;
}

}  // namespace affect
