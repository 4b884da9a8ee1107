#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semalign/common.hpp"
#include "semalign/heatmap.hpp"

namespace semalign {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

enum class Role { Truth, Annotation, Latent, Prediction };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::Truth: return "truth";
        case Role::Annotation: return "annotation";
        case Role::Latent: return "latent";
        case Role::Prediction: return "prediction";
    }
    return "?";
}

inline Role role_from_name(std::string_view s) {
    if (s == "truth") return Role::Truth;
    if (s == "annotation") return Role::Annotation;
    if (s == "latent") return Role::Latent;
    if (s == "prediction") return Role::Prediction;
    throw std::invalid_argument("unknown landmark role '" + std::string(s) + "'");
}

/// Ordered landmark positions for one sample, tagged with what they represent.
struct LandmarkSet {
    Role role = Role::Truth;
    std::vector<Point2> points;

    std::size_t size() const { return points.size(); }
};

inline LandmarkSet make_landmark_set(Role role, std::vector<Point2> pts) {
    LandmarkSet s;
    s.role = role;
    s.points = std::move(pts);
    return s;
}

/// Nearest grid cell, clamped in-bounds.
inline PixelCoord round_to_grid(Point2 p, int width, int height) {
    const int x = static_cast<int>(std::lround(p.x));
    const int y = static_cast<int>(std::lround(p.y));
    return {std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1)};
}

/// Label lines: `label <sample_id> <landmark_index> <x> <y> <role>`.
inline void write_labels(std::ostream& os, int sample_id, const LandmarkSet& set) {
    for (std::size_t k = 0; k < set.points.size(); ++k) {
        os << "label " << sample_id << ' ' << k << ' ' << format_double(set.points[k].x) << ' '
           << format_double(set.points[k].y) << ' ' << role_name(set.role) << '\n';
    }
}

using LabelFile = std::map<int, LandmarkSet>;

inline void write_label_file(std::ostream& os, const LabelFile& labels) {
    for (const auto& [id, set] : labels) write_labels(os, id, set);
}

inline LabelFile read_label_file(std::istream& is) {
    LabelFile out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word, xs, ys, role;
        long long id = 0, k = 0;
        if (!(ls >> word >> id >> k >> xs >> ys >> role) || word != "label")
            throw std::runtime_error("bad label line: '" + line + "'");
        auto& set = out[static_cast<int>(id)];
        if (static_cast<std::size_t>(k) != set.points.size())
            throw std::runtime_error("label lines out of order for sample " + std::to_string(id));
        set.points.push_back({parse_double(xs), parse_double(ys)});
        set.role = role_from_name(role);
    }
    return out;
}

}  // namespace semalign
