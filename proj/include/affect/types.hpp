#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "affect/error.hpp"

namespace affect {

/// Row-major instance matrix: one row per instance, one column per feature.
using FeatureMatrix = Eigen::MatrixXd;

/// Single-channel intensity image, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

enum class FeatureTag { phog, phog_magnified, dtnnp, dtnnp_magnified, origami_nodes, origami_edges, origami, quaternion_pca, vector_pca, mixed };

inline std::string_view to_string(FeatureTag tag) {
    switch (tag) {
        case FeatureTag::phog: return "h";
        case FeatureTag::phog_magnified: return "h_m";
        case FeatureTag::dtnnp: return "d";
        case FeatureTag::dtnnp_magnified: return "d_m";
        case FeatureTag::origami_nodes: return "n";
        case FeatureTag::origami_edges: return "e";
        case FeatureTag::origami: return "ne";
        case FeatureTag::quaternion_pca: return "q";
        case FeatureTag::vector_pca: return "v";
        case FeatureTag::mixed: return "mixed";
    }
    return "?";
}

/// Flat descriptor with a provenance tag. Values must be finite.
struct FeatureVector {
    std::vector<double> values;
    FeatureTag tag = FeatureTag::mixed;

    std::size_t size() const { return values.size(); }

    void validate() const {
        if (values.empty()) throw ValidationError("feature vector is empty");
        for (double v : values)
            if (!std::isfinite(v)) throw ValidationError("feature vector has a non-finite value");
    }
};

}  // namespace affect
