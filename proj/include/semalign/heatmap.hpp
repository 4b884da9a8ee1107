#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "semalign/common.hpp"

namespace semalign {

struct PixelCoord {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Dense row-major grid of non-negative confidences for one landmark.
/// Also reused as the pixel grid of rendered input images.
struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // row-major, index y * width + x

    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(PixelCoord p) const {
        return p.x >= 0 && p.x < width && p.y >= 0 && p.y < height;
    }
};

inline Heatmap make_heatmap(int width, int height) {
    if (width < 1 || height < 1)
        throw std::invalid_argument("heatmap dimensions must be >= 1");
    Heatmap h;
    h.width = width;
    h.height = height;
    h.values.assign(static_cast<std::size_t>(width) * height, 0.0);
    return h;
}

/// Unit-sum Gaussian grid: the ideal response a predictor should place around a
/// landmark. An epsilon floor is added to every cell before normalization so the
/// chi-square denominators can never vanish in the far tails.
struct GaussianTemplate {
    int size = 0;
    double sigma = 0.0;
    double epsilon = 0.0;
    std::vector<double> values;  // size x size, row-major, sums to 1

    double at(int col, int row) const { return values[static_cast<std::size_t>(row) * size + col]; }
};

inline GaussianTemplate make_gaussian_template(int size, double sigma, double epsilon = 1e-6) {
    if (size < 1 || size % 2 == 0)
        throw std::invalid_argument("template size must be odd and >= 1");
    if (!(sigma > 0.0))
        throw std::invalid_argument("template sigma must be > 0");
    if (!(epsilon > 0.0))
        throw std::invalid_argument("template epsilon must be > 0");
    GaussianTemplate t;
    t.size = size;
    t.sigma = sigma;
    t.epsilon = epsilon;
    t.values.resize(static_cast<std::size_t>(size) * size);
    const int half = size / 2;
    double total = 0.0;
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
            const double v =
                std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)) + epsilon;
            t.values[static_cast<std::size_t>(dy + half) * size + (dx + half)] = v;
            total += v;
        }
    }
    for (double& v : t.values) v /= total;
    return t;
}

/// Peak-1 Gaussian training target centered on an integer grid position.
inline Heatmap render_target_heatmap(int width, int height, PixelCoord center, double sigma) {
    Heatmap h = make_heatmap(width, height);
    if (!h.in_bounds(center))
        throw std::invalid_argument("target center out of bounds");
    if (!(sigma > 0.0))
        throw std::invalid_argument("target sigma must be > 0");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    // separable: exp(-(dx^2+dy^2)a) = exp(-dx^2 a) * exp(-dy^2 a)
    std::vector<double> col(static_cast<std::size_t>(width));
    for (int x = 0; x < width; ++x) {
        const double dx = x - center.x;
        col[static_cast<std::size_t>(x)] = std::exp(-dx * dx * inv);
    }
    for (int y = 0; y < height; ++y) {
        const double dy = y - center.y;
        const double row = std::exp(-dy * dy * inv);
        for (int x = 0; x < width; ++x)
            h.at(x, y) = row * col[static_cast<std::size_t>(x)];
    }
    return h;
}

/// Anisotropic peak-1 Gaussian with its long axis along `axis` and a possibly
/// fractional center. Used to model the elongated ("flat hat") response of
/// contour landmarks.
inline Heatmap render_anisotropic_heatmap(int width, int height, double cx, double cy,
                                          double axis_x, double axis_y, double sigma_axis,
                                          double sigma_cross) {
    if (!(sigma_axis > 0.0) || !(sigma_cross > 0.0))
        throw std::invalid_argument("anisotropic sigmas must be > 0");
    const double norm = std::hypot(axis_x, axis_y);
    if (!(norm > 0.0))
        throw std::invalid_argument("axis must be non-zero");
    const double tx = axis_x / norm, ty = axis_y / norm;
    Heatmap h = make_heatmap(width, height);
    const double ia = 1.0 / (2.0 * sigma_axis * sigma_axis);
    const double ic = 1.0 / (2.0 * sigma_cross * sigma_cross);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double u = dx * tx + dy * ty;   // along the axis
            const double v = -dx * ty + dy * tx;  // across it
            h.at(x, y) = std::exp(-(u * u * ia + v * v * ic));
        }
    }
    return h;
}

/// Cropped square window around `center`; positions outside the heatmap read as 0.
struct Patch {
    int size = 0;
    std::vector<double> values;
};

inline Patch crop_patch(const Heatmap& h, PixelCoord center, int size) {
    if (!h.in_bounds(center))
        throw std::invalid_argument("patch center out of bounds");
    if (size < 1 || size % 2 == 0)
        throw std::invalid_argument("patch size must be odd and >= 1");
    Patch p;
    p.size = size;
    p.values.assign(static_cast<std::size_t>(size) * size, 0.0);
    const int half = size / 2;
    for (int dy = -half; dy <= half; ++dy) {
        const int ay = center.y + dy;
        if (ay < 0 || ay >= h.height) continue;
        for (int dx = -half; dx <= half; ++dx) {
            const int ax = center.x + dx;
            if (ax < 0 || ax >= h.width) continue;
            p.values[static_cast<std::size_t>(dy + half) * size + (dx + half)] = h.at(ax, ay);
        }
    }
    return p;
}

/// Pearson chi-square statistic between the ideal response E and a patch:
/// sum_i (E_i - phi_i)^2 / E_i. Zero iff the patch equals the template cell-wise.
inline double chi_square_distance(const GaussianTemplate& e, const Patch& p) {
    if (e.size != p.size)
        throw std::invalid_argument("template/patch size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < e.values.size(); ++i) {
        const double d = e.values[i] - p.values[i];
        sum += d * d / e.values[i];
    }
    return sum;
}

/// Coordinate of the maximum value; ties resolve to the smallest row-major index.
inline PixelCoord decode_argmax(const Heatmap& h) {
    if (h.values.empty())
        throw std::invalid_argument("cannot decode an empty heatmap");
    std::size_t best = 0;
    for (std::size_t i = 1; i < h.values.size(); ++i)
        if (h.values[i] > h.values[best]) best = i;
    return {static_cast<int>(best % h.width), static_cast<int>(best / h.width)};
}

/// Number of pixels whose value is >= fraction * max. A wide plateau means the
/// argmax is poorly determined.
inline int plateau_area(const Heatmap& h, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("plateau fraction must be in (0, 1]");
    if (h.values.empty())
        throw std::invalid_argument("cannot measure an empty heatmap");
    const double mx = *std::max_element(h.values.begin(), h.values.end());
    if (!(mx > 0.0))
        throw std::invalid_argument("plateau_area requires a positive peak");
    const double cut = fraction * mx;
    int count = 0;
    for (double v : h.values)
        if (v >= cut) ++count;
    return count;
}

/// Text grid format: one header line `<tag> <width> <height>`, then height rows
/// of width space-separated decimals. Round-trips bit-exactly.
inline void write_grid(std::ostream& os, const Heatmap& h, std::string_view tag = "heatmap") {
    os << tag << ' ' << h.width << ' ' << h.height << '\n';
    for (int y = 0; y < h.height; ++y) {
        for (int x = 0; x < h.width; ++x) {
            if (x) os << ' ';
            os << format_double(h.at(x, y));
        }
        os << '\n';
    }
}

inline Heatmap read_grid(std::istream& is, std::string_view tag = "heatmap") {
    std::string word;
    if (!(is >> word) || word != tag)
        throw std::runtime_error("expected grid tag '" + std::string(tag) + "', got '" + word + "'");
    long long w = 0, hgt = 0;
    if (!(is >> w >> hgt))
        throw std::runtime_error("bad grid header");
    Heatmap h = make_heatmap(static_cast<int>(w), static_cast<int>(hgt));
    for (double& v : h.values) {
        if (!(is >> word))
            throw std::runtime_error("truncated grid body");
        v = parse_double(word);
        if (v < 0.0)
            throw std::runtime_error("negative value in grid");
    }
    return h;
}

}  // namespace semalign
