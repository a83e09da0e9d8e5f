#pragma once

// Signal and landmark conditioning.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "affect/dataio.hpp"
#include "affect/error.hpp"
#include "affect/face_model.hpp"

namespace affect {

/// Zero mean, unit sample standard deviation.
inline std::vector<double> normalize_channel(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 2) throw ParameterError("normalize_channel needs at least 2 samples");
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : series) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw DegenerateInput("normalize_channel: series is constant");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (series[i] - mean) / sd;
    return out;
}

/// Sliding median; samples past either end replicate the nearest edge value.
inline std::vector<double> median_filter(std::span<const double> series, int window) {
    if (window < 1 || window % 2 == 0) throw ParameterError("median window must be odd and >= 1");
    if (static_cast<std::size_t>(window) > series.size())
        throw ParameterError("median window is longer than the series");
    const auto n = static_cast<std::ptrdiff_t>(series.size());
    const std::ptrdiff_t half = window / 2;
    std::vector<double> buf(static_cast<std::size_t>(window));
    std::vector<double> out(series.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        for (std::ptrdiff_t k = -half; k <= half; ++k)
            buf[static_cast<std::size_t>(k + half)] = series[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i + k, 0, n - 1))];
        std::nth_element(buf.begin(), buf.begin() + half, buf.end());
        out[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(half)];
    }
    return out;
}

struct MagnificationParams {
    double alpha = 10.0;
    double band_lo_hz = 0.5;
    double band_hi_hz = 3.0;
    double sample_rate_hz = 30.0;

    void validate() const {
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParameterError("magnification alpha must be >= 0");
        if (!(sample_rate_hz > 0.0)) throw ParameterError("magnification sample rate must be positive");
        if (!(band_lo_hz > 0.0 && band_lo_hz < band_hi_hz && band_hi_hz < sample_rate_hz / 2.0))
            throw ParameterError("magnification band must satisfy 0 < lo < hi < rate/2");
    }
};

/// Ideal (brick-wall) temporal bandpass computed in the frequency domain.
inline std::vector<double> ideal_bandpass(std::span<const double> series, double lo_hz, double hi_hz, double rate_hz) {
    const std::size_t n = series.size();
    std::vector<double> in(series.begin(), series.end());
    std::vector<std::complex<double>> spectrum;
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    fft.fwd(spectrum, in);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        const double f = static_cast<double>(k) * rate_hz / static_cast<double>(n);
        if (f < lo_hz || f > hi_hz) spectrum[k] = 0.0;
    }
    std::vector<double> out;
    fft.inv(out, spectrum, static_cast<Eigen::Index>(n));
    out.resize(n);
    return out;
}

/// First-order Eulerian magnification of a single time series: I + alpha * B(I),
/// where B is an ideal temporal bandpass.
inline std::vector<double> magnify_motion(std::span<const double> series, const MagnificationParams& params) {
    params.validate();
    if (series.size() < 8) throw ParameterError("magnify_motion needs at least 8 samples");
    auto band = ideal_bandpass(series, params.band_lo_hz, params.band_hi_hz, params.sample_rate_hz);
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = series[i] + params.alpha * band[i];
    return out;
}

/// Magnifies every landmark coordinate trajectory of a sequence.
inline LandmarkSequence magnify_landmarks(const LandmarkSequence& seq, MagnificationParams params) {
    params.sample_rate_hz = seq.fps;
    LandmarkSequence out = seq;
    const std::size_t T = seq.frames.size();
    std::vector<double> xs(T), ys(T);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        for (std::size_t k = 0; k < T; ++k) {
            xs[k] = seq.frames[k][i].x;
            ys[k] = seq.frames[k][i].y;
        }
        auto mx = magnify_motion(xs, params);
        auto my = magnify_motion(ys, params);
        for (std::size_t k = 0; k < T; ++k) out.frames[k][i] = {mx[k], my[k]};
    }
    return out;
}

enum class FrameProvenance { raw, affine, nose_normalized };

struct AlignedFrame {
    Frame points{};
    FrameProvenance provenance = FrameProvenance::raw;
};

struct AffineFit {
    Eigen::Matrix<double, 2, 3> transform;  // [A | t], p' = A p + t
    double residual = 0.0;                  // sum of squared point errors

    Point2 apply(Point2 p) const {
        return {transform(0, 0) * p.x + transform(0, 1) * p.y + transform(0, 2),
                transform(1, 0) * p.x + transform(1, 1) * p.y + transform(1, 2)};
    }
};

namespace detail {

inline bool is_collinear(const Frame& f) {
    Point2 c{};
    for (const auto& p : f) c = c + p;
    c = (1.0 / kLandmarkCount) * c;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    double scale = 0.0;
    for (const auto& p : f) {
        const Eigen::Vector2d d(p.x - c.x, p.y - c.y);
        cov += d * d.transpose();
        scale += d.squaredNorm();
    }
    if (!(scale > 0.0)) return true;
    return cov.determinant() <= 1e-12 * scale * scale;
}

}  // namespace detail

/// Least-squares affine map taking `frame` onto `templ`.
inline AffineFit fit_affine(const Frame& frame, const Frame& templ) {
    if (detail::is_collinear(templ)) throw DegenerateInput("affine alignment: template landmarks are collinear");
    if (detail::is_collinear(frame)) throw DegenerateInput("affine alignment: frame landmarks are collinear");
    Eigen::Matrix<double, kLandmarkCount, 3> design;
    Eigen::Matrix<double, kLandmarkCount, 2> target;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        design.row(static_cast<Eigen::Index>(i)) << frame[i].x, frame[i].y, 1.0;
        target.row(static_cast<Eigen::Index>(i)) << templ[i].x, templ[i].y;
    }
    const Eigen::Matrix<double, 3, 2> sol = design.colPivHouseholderQr().solve(target);
    AffineFit fit;
    fit.transform = sol.transpose();
    fit.residual = (design * sol - target).squaredNorm();
    return fit;
}

inline AlignedFrame align_landmarks_affine(const Frame& frame, const Frame& templ) {
    const auto fit = fit_affine(frame, templ);
    AlignedFrame out{{}, FrameProvenance::affine};
    for (std::size_t i = 0; i < kLandmarkCount; ++i) out.points[i] = fit.apply(frame[i]);
    return out;
}

/// Translates the frame so the nose tip sits at the origin.
inline AlignedFrame normalize_to_nose(const Frame& frame) {
    const Point2 nose = frame[landmarks::kNoseTip];
    AlignedFrame out{{}, FrameProvenance::nose_normalized};
    for (std::size_t i = 0; i < kLandmarkCount; ++i) out.points[i] = frame[i] - nose;
    out.points[landmarks::kNoseTip] = {0.0, 0.0};
    return out;
}

/// Frame (index >= 1) deviating most in L2 from frame 0 after nose
/// normalization; the earliest index wins ties.
inline std::size_t select_peak_frame(const LandmarkSequence& seq) {
    if (seq.frames.size() < 2) throw ParameterError("select_peak_frame needs at least 2 frames");
    const auto neutral = normalize_to_nose(seq.frames.front()).points;
    std::size_t best = 1;
    double best_dev = -1.0;
    for (std::size_t k = 1; k < seq.frames.size(); ++k) {
        const auto f = normalize_to_nose(seq.frames[k]).points;
        double dev = 0.0;
        for (std::size_t i = 0; i < kLandmarkCount; ++i) {
            const Point2 d = f[i] - neutral[i];
            dev += d.x * d.x + d.y * d.y;
        }
        if (dev > best_dev) {
            best_dev = dev;
            best = k;
        }
    }
    return best;
}

}  // namespace affect
