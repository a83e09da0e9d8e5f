#pragma once

// 68-point facial landmark layout (iBUG/Multi-PIE ordering) and a fixed
// canonical neutral face used by the synthetic expression generator.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace affect {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    friend constexpr Point2 operator*(Point2 a, double s) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Point2 a, Point2 b) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

inline constexpr std::size_t kLandmarkCount = 68;

using Frame = std::array<Point2, kLandmarkCount>;

namespace landmarks {

inline constexpr std::size_t kNoseTip = 30;

// Polylines through the landmark groups; `closed` chains wrap around.
struct Chain {
    std::size_t first;
    std::size_t last;
    bool closed;
};

inline constexpr std::array<Chain, 9> kChains{{
    {0, 16, false},   // jaw
    {17, 21, false},  // right brow
    {22, 26, false},  // left brow
    {27, 30, false},  // nose bridge
    {31, 35, false},  // nostrils
    {36, 41, true},   // right eye
    {42, 47, true},   // left eye
    {48, 59, true},   // outer lips
    {60, 67, true},   // inner lips
}};

/// Index of the landmark that mirrors `i` across the facial midline.
constexpr std::size_t mirror(std::size_t i) {
    if (i <= 16) return 16 - i;
    if (i <= 26) return 43 - i;
    if (i <= 30) return i;
    if (i <= 35) return 66 - i;
    if (i <= 39) return 81 - i;
    if (i <= 41) return 87 - i;
    if (i <= 45) return 81 - i;
    if (i <= 47) return 87 - i;
    if (i <= 54) return 102 - i;
    if (i <= 59) return 114 - i;
    if (i <= 64) return 124 - i;
    return 132 - i;
}

}  // namespace landmarks

/// Canonical neutral face, pixels, midline at x = 0, y pointing down.
/// Exactly bilaterally symmetric.
inline const Frame& canonical_face() {
    static const Frame face = [] {
        // Right half (image left) and midline; the rest is mirrored.
        const std::array<std::pair<std::size_t, Point2>, 39> half{{
            {0, {-70, -10}}, {1, {-69, 10}},  {2, {-66, 30}},  {3, {-61, 49}},
            {4, {-53, 66}},  {5, {-41, 80}},  {6, {-27, 91}},  {7, {-13, 98}},
            {8, {0, 100}},
            {17, {-58, -40}}, {18, {-47, -49}}, {19, {-33, -52}}, {20, {-19, -50}},
            {21, {-7, -45}},
            {27, {0, -32}}, {28, {0, -20}}, {29, {0, -8}}, {30, {0, 4}},
            {31, {-14, 14}}, {32, {-7, 17}}, {33, {0, 19}},
            {36, {-46, -30}}, {37, {-38, -36}}, {38, {-28, -36}}, {39, {-19, -29}},
            {40, {-28, -25}}, {41, {-38, -25}},
            {48, {-25, 45}}, {49, {-16, 39}}, {50, {-7, 36}}, {51, {0, 37}},
            {57, {0, 58}}, {58, {-8, 57}}, {59, {-17, 53}},
            {60, {-20, 45}}, {61, {-7, 42}}, {62, {0, 42}},
            {66, {0, 49}}, {67, {-7, 48}},
        }};
        Frame f{};
        for (const auto& [idx, p] : half) {
            f[idx] = p;
            if (landmarks::mirror(idx) != idx) f[landmarks::mirror(idx)] = Point2{-p.x, p.y};
        }
        return f;
    }();
    return face;
}

inline std::vector<Point2> to_points(const Frame& f) { return {f.begin(), f.end()}; }

}  // namespace affect
