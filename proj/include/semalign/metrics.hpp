#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "semalign/landmark.hpp"

namespace semalign {

enum class NormalizerKind { InterPupil, FaceSize, InterOcular };
enum class FaceSizeMode { GeometricMean, MaxSide };

/// How to turn a ground-truth shape into the scalar that normalizes landmark errors.
/// Distance-based kinds use a designated pair of ground-truth points; face size is
/// measured from the ground-truth bounding box.
struct Normalizer {
    NormalizerKind kind = NormalizerKind::InterOcular;
    int index_a = -1;
    int index_b = -1;
    FaceSizeMode face_size_mode = FaceSizeMode::GeometricMean;
};

inline double normalizer_value(const LandmarkSet& gt, const Normalizer& n) {
    if (n.kind == NormalizerKind::FaceSize) {
        if (gt.points.empty()) throw std::invalid_argument("empty ground truth");
        double minx = gt.points[0].x, maxx = minx, miny = gt.points[0].y, maxy = miny;
        for (const auto& p : gt.points) {
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
        const double w = maxx - minx, h = maxy - miny;
        const double v = n.face_size_mode == FaceSizeMode::GeometricMean ? std::sqrt(w * h)
                                                                         : std::max(w, h);
        if (!(v > 0.0)) throw std::invalid_argument("degenerate face box");
        return v;
    }
    const int na = static_cast<int>(gt.points.size());
    if (n.index_a < 0 || n.index_a >= na || n.index_b < 0 || n.index_b >= na)
        throw std::invalid_argument("normalizer indices out of range");
    const double d = distance(gt.points[n.index_a], gt.points[n.index_b]);
    if (!(d > 0.0)) throw std::invalid_argument("zero normalizer distance");
    return d;
}

/// Mean landmark error divided by the normalizer value (NME).
inline double normalized_error(const LandmarkSet& pred, const LandmarkSet& gt,
                               const Normalizer& n) {
    if (pred.points.size() != gt.points.size())
        throw std::invalid_argument("landmark count mismatch");
    if (pred.points.empty()) throw std::invalid_argument("empty landmark sets");
    const double norm = normalizer_value(gt, n);
    double sum = 0.0;
    for (std::size_t k = 0; k < pred.points.size(); ++k)
        sum += distance(pred.points[k], gt.points[k]);
    return sum / (static_cast<double>(pred.points.size()) * norm);
}

struct ErrorSummary {
    double mean = 0.0;
    double median = 0.0;
    double worst_decile_mean = 0.0;  // mean of the ceil(n/10) largest errors
};

inline ErrorSummary aggregate(std::vector<double> errors) {
    if (errors.empty()) throw std::invalid_argument("aggregate on empty list");
    std::sort(errors.begin(), errors.end());
    const std::size_t n = errors.size();
    ErrorSummary s;
    double total = 0.0;
    for (double e : errors) total += e;
    s.mean = total / static_cast<double>(n);
    s.median = n % 2 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
    const std::size_t tail = (n + 9) / 10;
    double tail_sum = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) tail_sum += errors[i];
    s.worst_decile_mean = tail_sum / static_cast<double>(tail);
    return s;
}

}  // namespace semalign
