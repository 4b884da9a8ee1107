#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "semalign/common.hpp"
#include "semalign/dataset.hpp"
#include "semalign/heatmap.hpp"
#include "semalign/landmark.hpp"

namespace semalign {

/// Semantic class of a landmark. Contour points sit on a smooth curve and have
/// no exact position definition along it; corner points are locally
/// unambiguous. `group` indexes the curve a contour point belongs to (-1 for
/// corners) so the renderer can connect the right points.
struct LandmarkTag {
    bool weak = false;
    int group = -1;
    friend bool operator==(const LandmarkTag&, const LandmarkTag&) = default;
};

/// Per-instance randomization of the fixed face-like layout. Shape variation
/// is driven by a handful of correlated modes (jaw width/depth, brow raise and
/// arch, nose length, eye span, mouth width) so that aligned shapes live near
/// a low-dimensional subspace, plus a little independent per-point jitter.
struct FaceShapeSpec {
    double scale_jitter = 0.07;     // global scale in [1 - j, 1 + j]
    double translate_jitter = 4.0;  // global shift, design-space px
    double mode_amplitude = 1.4;    // strength of the correlated shape modes
    double point_jitter = 0.3;      // independent jitter of controls / corners
};

/// Annotation noise: contour points scatter mostly along the local tangent,
/// corner points scatter isotropically and tightly.
struct NoiseModel {
    double sigma_tangent = 3.0;
    double sigma_normal = 0.5;
    double sigma_corner = 0.5;
};

struct RenderStyle {
    double ridge_amplitude = 1.0;
    double ridge_sigma = 1.2;
    double corner_amplitude = 1.5;
    double corner_sigma = 1.4;
};

/// Quadratic Bezier curve carrying `count` evenly spaced landmarks.
struct CurveSpec {
    Point2 p0, c, p2;
    int count = 0;
};

// ---- fixed scene layout (design space is a 64x64 frame) ----

constexpr int kDesignSize = 64;
constexpr int kFaceLandmarkCount = 20;
// strong corners: eye outer/inner pairs then mouth corners
constexpr int kLeftEyeOuter = 14;
constexpr int kLeftEyeInner = 15;
constexpr int kRightEyeInner = 16;
constexpr int kRightEyeOuter = 17;

inline const std::vector<CurveSpec>& face_curves() {
    static const std::vector<CurveSpec> curves = {
        {{12, 38}, {32, 58}, {52, 38}, 6},  // jaw
        {{14, 22}, {20, 16}, {27, 21}, 3},  // left brow
        {{37, 21}, {44, 16}, {50, 22}, 3},  // right brow
        {{32, 26}, {34, 31}, {31, 36}, 2},  // nose bridge
    };
    return curves;
}

inline const std::vector<Point2>& face_corners() {
    static const std::vector<Point2> corners = {
        {10, 26},  // left eye outer
        {24, 27},  // left eye inner
        {40, 27},  // right eye inner
        {54, 26},  // right eye outer
        {24, 44},  // mouth left
        {40, 44},  // mouth right
    };
    return corners;
}

/// The layout above deformed by the seven correlated shape modes, each a
/// coefficient in [-1, 1].
inline void deform_layout(const double m[7], std::vector<CurveSpec>& curves,
                          std::vector<Point2>& corners) {
    curves = face_curves();
    corners = face_corners();
    const double jaw_half = 20.0 * (1.0 + 0.10 * m[0]);
    curves[0].p0 = {32.0 - jaw_half, 38.0};
    curves[0].p2 = {32.0 + jaw_half, 38.0};
    curves[0].c.y = 58.0 + 3.0 * m[1];
    for (int b : {1, 2}) {
        curves[b].p0.y -= 1.5 * m[2];
        curves[b].c.y -= 1.5 * m[2] + 1.2 * m[6];
        curves[b].p2.y -= 1.5 * m[2];
    }
    curves[3].p2.y = 36.0 + 2.0 * m[3];
    const double eye = 1.0 + 0.06 * m[4];
    corners[0].x = 32.0 - 22.0 * eye;
    corners[1].x = 32.0 - 8.0 * eye;
    corners[2].x = 32.0 + 8.0 * eye;
    corners[3].x = 32.0 + 22.0 * eye;
    const double mouth = 8.0 * (1.0 + 0.12 * m[5]);
    corners[4].x = 32.0 - mouth;
    corners[5].x = 32.0 + mouth;
}

inline std::vector<LandmarkTag> face_tags() {
    std::vector<LandmarkTag> tags;
    int group = 0;
    for (const CurveSpec& c : face_curves()) {
        for (int j = 0; j < c.count; ++j) tags.push_back({true, group});
        ++group;
    }
    for (std::size_t j = 0; j < face_corners().size(); ++j) tags.push_back({false, -1});
    return tags;
}

// ---- curve evaluation ----

inline Point2 bezier_point(const CurveSpec& c, double t) {
    const double a = (1 - t) * (1 - t), b = 2 * t * (1 - t), d = t * t;
    return {a * c.p0.x + b * c.c.x + d * c.p2.x, a * c.p0.y + b * c.c.y + d * c.p2.y};
}

inline Point2 bezier_tangent(const CurveSpec& c, double t) {
    const double ax = c.c.x - c.p0.x, ay = c.c.y - c.p0.y;
    const double bx = c.p2.x - c.c.x, by = c.p2.y - c.c.y;
    return {2 * ((1 - t) * ax + t * bx), 2 * ((1 - t) * ay + t * by)};
}

/// Positions and unit tangents of `count` points at equal arc-length fractions
/// along the curve (fractions j/(count-1); the midpoint for a single point).
inline void sample_curve(const CurveSpec& c, std::vector<Point2>& points,
                         std::vector<Point2>& tangents) {
    constexpr int kFine = 1000;
    std::vector<double> cum(kFine + 1, 0.0);
    Point2 prev = bezier_point(c, 0.0);
    for (int i = 1; i <= kFine; ++i) {
        const Point2 p = bezier_point(c, static_cast<double>(i) / kFine);
        cum[i] = cum[i - 1] + distance(prev, p);
        prev = p;
    }
    const double total = cum[kFine];
    for (int j = 0; j < c.count; ++j) {
        const double f = c.count > 1 ? static_cast<double>(j) / (c.count - 1) : 0.5;
        const double s = f * total;
        // first fine segment whose cumulative length reaches s
        int lo = 0, hi = kFine;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (cum[mid] < s)
                lo = mid + 1;
            else
                hi = mid;
        }
        double t;
        if (lo == 0)
            t = 0.0;
        else {
            const double seg = cum[lo] - cum[lo - 1];
            const double frac = seg > 0.0 ? (s - cum[lo - 1]) / seg : 0.0;
            t = (lo - 1 + frac) / kFine;
        }
        points.push_back(bezier_point(c, t));
        const Point2 d = bezier_tangent(c, t);
        const double n = std::hypot(d.x, d.y);
        tangents.push_back(n > 0.0 ? Point2{d.x / n, d.y / n} : Point2{1.0, 0.0});
    }
}

// ---- shape generation ----

/// Draw one scene instance. The fixed layout is jittered (global scale and
/// shift, plus independent control-point jitter), stretched from design space
/// to the requested grid, then contour landmarks are placed at equal
/// arc-length spacing. Throws if any landmark leaves the grid.
inline void generate_shape(const FaceShapeSpec& spec, int width, int height, std::mt19937_64& rng,
                           LandmarkSet& truth, std::vector<LandmarkTag>& tags,
                           std::vector<Point2>& tangents) {
    if (width < 8 || height < 8) throw std::invalid_argument("grid too small for the scene");
    const double scale = 1.0 + uniform_pm(rng, spec.scale_jitter);
    const double tx = uniform_pm(rng, spec.translate_jitter);
    const double ty = uniform_pm(rng, spec.translate_jitter);
    double modes[7];
    for (double& m : modes) m = uniform_pm(rng, spec.mode_amplitude);
    const double half = kDesignSize / 2.0;
    const double sx = static_cast<double>(width) / kDesignSize;
    const double sy = static_cast<double>(height) / kDesignSize;
    auto place = [&](Point2 p) -> Point2 {
        const double gx = half + scale * (p.x - half) + tx;
        const double gy = half + scale * (p.y - half) + ty;
        return {gx * sx, gy * sy};
    };

    std::vector<CurveSpec> curves;
    std::vector<Point2> corners;
    deform_layout(modes, curves, corners);

    truth.role = Role::Truth;
    truth.points.clear();
    tags.clear();
    tangents.clear();

    int group = 0;
    for (CurveSpec& c : curves) {
        for (Point2* ctrl : {&c.p0, &c.c, &c.p2}) {
            ctrl->x += uniform_pm(rng, spec.point_jitter);
            ctrl->y += uniform_pm(rng, spec.point_jitter);
            *ctrl = place(*ctrl);
        }
        std::vector<Point2> pts, tans;
        sample_curve(c, pts, tans);
        for (int j = 0; j < c.count; ++j) {
            truth.points.push_back(pts[j]);
            tags.push_back({true, group});
            tangents.push_back(tans[j]);
        }
        ++group;
    }
    for (Point2 corner : corners) {
        corner.x += uniform_pm(rng, spec.point_jitter);
        corner.y += uniform_pm(rng, spec.point_jitter);
        truth.points.push_back(place(corner));
        tags.push_back({false, -1});
        tangents.push_back({1.0, 0.0});
    }
    for (const Point2& p : truth.points)
        if (p.x < 1.0 || p.x > width - 2.0 || p.y < 1.0 || p.y > height - 2.0)
            throw std::invalid_argument("generated landmark out of bounds");
}

/// Noisy annotation: contour points displaced along tangent/normal with the
/// configured sigmas, corners isotropically; results clamped inside the grid.
inline LandmarkSet perturb_annotation(const LandmarkSet& truth, const std::vector<LandmarkTag>& tags,
                                      const std::vector<Point2>& tangents, const NoiseModel& nm,
                                      int width, int height, std::mt19937_64& rng) {
    if (tags.size() != truth.points.size() || tangents.size() != truth.points.size())
        throw std::invalid_argument("tags/tangents length mismatch");
    LandmarkSet out;
    out.role = Role::Annotation;
    out.points.reserve(truth.points.size());
    for (std::size_t k = 0; k < truth.points.size(); ++k) {
        const auto [g1, g2] = normal2(rng);
        Point2 p = truth.points[k];
        if (tags[k].weak) {
            const Point2 t = tangents[k];
            const Point2 n{-t.y, t.x};
            p.x += nm.sigma_tangent * g1 * t.x + nm.sigma_normal * g2 * n.x;
            p.y += nm.sigma_tangent * g1 * t.y + nm.sigma_normal * g2 * n.y;
        } else {
            p.x += nm.sigma_corner * g1;
            p.y += nm.sigma_corner * g2;
        }
        p.x = std::min(std::max(p.x, 0.0), static_cast<double>(width - 1));
        p.y = std::min(std::max(p.y, 0.0), static_cast<double>(height - 1));
        out.points.push_back(p);
    }
    return out;
}

namespace detail {

inline void splat(Heatmap& img, Point2 c, double amplitude, double sigma) {
    const double radius = 4.0 * sigma;
    const int x0 = std::max(0, static_cast<int>(std::ceil(c.x - radius)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::floor(c.x + radius)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(c.y - radius)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::floor(c.y + radius)));
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - c.x, dy = y - c.y;
            const double v = amplitude * std::exp(-(dx * dx + dy * dy) * inv);
            if (v > img.at(x, y)) img.at(x, y) = v;
        }
}

inline Point2 catmull_rom(Point2 q0, Point2 q1, Point2 q2, Point2 q3, double t) {
    auto axis = [t](double a0, double a1, double a2, double a3) {
        return 0.5 * (2 * a1 + (-a0 + a2) * t + (2 * a0 - 5 * a1 + 4 * a2 - a3) * t * t +
                      (-a0 + 3 * a1 - 3 * a2 + a3) * t * t * t);
    };
    return {axis(q0.x, q1.x, q2.x, q3.x), axis(q0.y, q1.y, q2.y, q3.y)};
}

}  // namespace detail

/// Deterministic scene rendering: smooth ridges through each contour group's
/// landmarks plus brighter compact blobs at the corners, combined by max. The
/// ridge intensity is flat along the curve, so positions along it look alike;
/// corner blobs out-shine the ridges and are locally unique.
inline Heatmap render_image(const LandmarkSet& truth, const std::vector<LandmarkTag>& tags,
                            int width, int height, const RenderStyle& style = {}) {
    if (tags.size() != truth.points.size())
        throw std::invalid_argument("tags length mismatch");
    Heatmap img = make_heatmap(width, height);
    int max_group = -1;
    for (const LandmarkTag& t : tags) max_group = std::max(max_group, t.group);
    for (int g = 0; g <= max_group; ++g) {
        std::vector<Point2> chain;
        for (std::size_t k = 0; k < tags.size(); ++k)
            if (tags[k].weak && tags[k].group == g) chain.push_back(truth.points[k]);
        if (chain.empty()) continue;
        if (chain.size() == 1) {
            detail::splat(img, chain[0], style.ridge_amplitude, style.ridge_sigma);
            continue;
        }
        for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
            const Point2 q0 = i > 0 ? chain[i - 1] : chain[0];
            const Point2 q1 = chain[i];
            const Point2 q2 = chain[i + 1];
            const Point2 q3 = i + 2 < chain.size() ? chain[i + 2] : chain.back();
            const int steps =
                std::max(8, static_cast<int>(std::ceil(4.0 * distance(q1, q2))));
            for (int j = 0; j <= steps; ++j)
                detail::splat(img, detail::catmull_rom(q0, q1, q2, q3, static_cast<double>(j) / steps),
                              style.ridge_amplitude, style.ridge_sigma);
        }
    }
    for (std::size_t k = 0; k < tags.size(); ++k)
        if (!tags[k].weak)
            detail::splat(img, truth.points[k], style.corner_amplitude, style.corner_sigma);
    return img;
}

/// Generate `count` independent samples; every sample's generator state is
/// derived from (seed, sample index), so the dataset is a pure function of its
/// arguments.
inline Dataset make_dataset(int count, const FaceShapeSpec& spec, const NoiseModel& nm, int width,
                            int height, std::uint64_t seed, const RenderStyle& style = {}) {
    if (count < 1) throw std::invalid_argument("dataset count must be >= 1");
    Dataset d;
    d.landmark_count = kFaceLandmarkCount;
    d.width = width;
    d.height = height;
    d.seed = seed;
    d.samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        ImageSample s;
        s.id = i;
        std::vector<LandmarkTag> tags;
        std::vector<Point2> tangents;
        std::mt19937_64 shape_rng(derive_seed(seed, static_cast<std::uint64_t>(i), 1));
        generate_shape(spec, width, height, shape_rng, s.truth, tags, tangents);
        std::mt19937_64 noise_rng(derive_seed(seed, static_cast<std::uint64_t>(i), 2));
        s.annotation = perturb_annotation(s.truth, tags, tangents, nm, width, height, noise_rng);
        s.features = render_image(s.truth, tags, width, height, style);
        d.samples.push_back(std::move(s));
    }
    return d;
}

}  // namespace semalign
