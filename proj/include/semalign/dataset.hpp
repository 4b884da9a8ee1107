#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semalign/heatmap.hpp"
#include "semalign/landmark.hpp"

namespace semalign {

/// One synthetic scene: the rendered intensity grid plus the clean and the
/// noisy landmark sets.
struct ImageSample {
    int id = 0;
    Heatmap features;
    LandmarkSet truth;
    LandmarkSet annotation;
};

struct Dataset {
    int landmark_count = 0;
    int width = 0;
    int height = 0;
    std::uint64_t seed = 0;
    std::vector<ImageSample> samples;
};

/// Text layout: one header line
///   dataset 1 <count> <N> <W> <H> <seed>
/// then, per sample, the image grid followed by the truth and annotation
/// label lines. Round-trips bit-exactly.
inline void write_dataset(std::ostream& os, const Dataset& d) {
    os << "dataset 1 " << d.samples.size() << ' ' << d.landmark_count << ' ' << d.width << ' '
       << d.height << ' ' << d.seed << '\n';
    for (const ImageSample& s : d.samples) {
        write_grid(os, s.features, "image");
        write_labels(os, s.id, s.truth);
        write_labels(os, s.id, s.annotation);
    }
}

namespace detail {

inline LandmarkSet read_label_block(std::istream& is, int expect_id, int n, Role expect_role) {
    LandmarkSet set;
    set.role = expect_role;
    std::string word, xs, ys, role;
    long long id = 0, k = 0;
    for (int j = 0; j < n; ++j) {
        if (!(is >> word >> id >> k >> xs >> ys >> role) || word != "label")
            throw std::runtime_error("bad label line in dataset");
        if (id != expect_id || k != j)
            throw std::runtime_error("label ordering broken for sample " + std::to_string(expect_id));
        if (role_from_name(role) != expect_role)
            throw std::runtime_error("unexpected label role '" + role + "'");
        set.points.push_back({parse_double(xs), parse_double(ys)});
    }
    return set;
}

}  // namespace detail

inline Dataset read_dataset(std::istream& is) {
    std::string word;
    long long version = 0, count = 0, n = 0, w = 0, h = 0;
    unsigned long long seed = 0;
    if (!(is >> word >> version >> count >> n >> w >> h >> seed) || word != "dataset")
        throw std::runtime_error("bad dataset header");
    if (version != 1)
        throw std::runtime_error("unsupported dataset version " + std::to_string(version));
    if (count < 1 || n < 1 || w < 1 || h < 1)
        throw std::runtime_error("bad dataset dimensions");
    Dataset d;
    d.landmark_count = static_cast<int>(n);
    d.width = static_cast<int>(w);
    d.height = static_cast<int>(h);
    d.seed = seed;
    d.samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        ImageSample s;
        s.id = i;
        s.features = read_grid(is, "image");
        if (s.features.width != d.width || s.features.height != d.height)
            throw std::runtime_error("sample image dims disagree with dataset header");
        s.truth = detail::read_label_block(is, i, d.landmark_count, Role::Truth);
        s.annotation = detail::read_label_block(is, i, d.landmark_count, Role::Annotation);
        d.samples.push_back(std::move(s));
    }
    return d;
}

/// Convenience list of one role's landmark sets across the dataset.
inline std::vector<LandmarkSet> collect_truth(const Dataset& d) {
    std::vector<LandmarkSet> out;
    out.reserve(d.samples.size());
    for (const auto& s : d.samples) out.push_back(s.truth);
    return out;
}

inline std::vector<LandmarkSet> collect_annotations(const Dataset& d) {
    std::vector<LandmarkSet> out;
    out.reserve(d.samples.size());
    for (const auto& s : d.samples) out.push_back(s.annotation);
    return out;
}

}  // namespace semalign
