#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "semalign/dataset.hpp"
#include "semalign/heatmap.hpp"
#include "semalign/landmark.hpp"
#include "semalign/metrics.hpp"
#include "semalign/predictor.hpp"

namespace semalign {

struct AlignmentConfig {
    double lambda = 0.1;              // weight of the closeness-to-observation term
    int neighborhood_half_width = 8;  // search square is (2w+1) x (2w+1)
    int template_size = 19;
    double template_sigma = 2.0;
    double template_epsilon = 1e-6;
    int epochs = 10;
    bool update_observation = true;
    std::uint64_t seed = 0;
};

inline GaussianTemplate make_template(const AlignmentConfig& cfg) {
    return make_gaussian_template(cfg.template_size, cfg.template_sigma, cfg.template_epsilon);
}

namespace detail {

/// lambda * |o - y|^2 + chi-square of the patch at y against the template,
/// with the patch read straight off the heatmap (zero outside). Accumulation
/// order matches chi_square_distance over crop_patch exactly. If the running
/// total can no longer beat `cutoff`, returns +infinity instead.
inline double objective_eval(PixelCoord o, PixelCoord y, const Heatmap& h,
                             const GaussianTemplate& tmpl, double lambda, double cutoff) {
    if (!h.in_bounds(y)) throw std::invalid_argument("objective candidate out of bounds");
    const double dx = o.x - y.x, dy = o.y - y.y;
    const double prior = lambda * (dx * dx + dy * dy);
    if (prior >= cutoff) return std::numeric_limits<double>::infinity();
    const int s = tmpl.size, half = s / 2;
    const double limit = cutoff - prior;
    double chi = 0.0;
    for (int row = 0; row < s; ++row) {
        const int ay = y.y - half + row;
        const bool row_in = ay >= 0 && ay < h.height;
        for (int col = 0; col < s; ++col) {
            const int ax = y.x - half + col;
            const double e = tmpl.values[static_cast<std::size_t>(row) * s + col];
            const double phi = (row_in && ax >= 0 && ax < h.width) ? h.at(ax, ay) : 0.0;
            const double d = e - phi;
            chi += d * d / e;
        }
        if (chi >= limit) return std::numeric_limits<double>::infinity();
    }
    return prior + chi;
}

}  // namespace detail

/// Score of placing the latent label at y given observation o: weighted
/// squared distance to o plus the chi-square mismatch between the ideal
/// response and the heatmap patch around y.
inline double landmark_objective(PixelCoord o, PixelCoord y, const Heatmap& h,
                                 const GaussianTemplate& tmpl, double lambda) {
    return detail::objective_eval(o, y, h, tmpl, lambda,
                                  std::numeric_limits<double>::infinity());
}

inline double landmark_objective(PixelCoord o, PixelCoord y, const Heatmap& h,
                                 const AlignmentConfig& cfg) {
    return landmark_objective(o, y, h, make_template(cfg), cfg.lambda);
}

/// Best in-bounds candidate within the (2w+1)^2 square centered on o. Ties go
/// to the earliest offset in row-major order. Candidates whose distance term
/// alone already loses are skipped; that never changes the winner.
inline PixelCoord search_landmark(const Heatmap& h, PixelCoord o, const GaussianTemplate& tmpl,
                                  double lambda, int half_width) {
    if (!h.in_bounds(o)) throw std::invalid_argument("observation out of bounds");
    if (half_width < 0) throw std::invalid_argument("half width must be >= 0");
    double best = std::numeric_limits<double>::infinity();
    PixelCoord best_y = o;
    for (int dy = -half_width; dy <= half_width; ++dy) {
        for (int dx = -half_width; dx <= half_width; ++dx) {
            const PixelCoord y{o.x + dx, o.y + dy};
            if (!h.in_bounds(y)) continue;
            const double v = detail::objective_eval(o, y, h, tmpl, lambda, best);
            if (v < best) {
                best = v;
                best_y = y;
            }
        }
    }
    return best_y;
}

inline PixelCoord search_landmark(const Heatmap& h, PixelCoord o, const AlignmentConfig& cfg) {
    return search_landmark(h, o, make_template(cfg), cfg.lambda, cfg.neighborhood_half_width);
}

/// Rescale a response map so its peak matches the template's peak: the
/// chi-square term compares a unit-sum template against the patch, so the
/// response must be brought to the same magnitude before searching.
inline Heatmap match_template_scale(const Heatmap& h, const GaussianTemplate& tmpl) {
    double mx = 0.0;
    for (double v : h.values) mx = std::max(mx, v);
    Heatmap out = h;
    if (mx > 0.0) {
        const double s = tmpl.values[static_cast<std::size_t>(tmpl.size / 2) * tmpl.size +
                                     tmpl.size / 2] /
                         mx;
        for (double& v : out.values) v *= s;
    }
    return out;
}

/// Per-landmark independent search; observations are rounded onto the grid.
inline LandmarkSet search_all(const std::vector<Heatmap>& maps, const LandmarkSet& obs,
                              const AlignmentConfig& cfg) {
    if (maps.size() != obs.points.size())
        throw std::invalid_argument("map/observation count mismatch");
    const GaussianTemplate tmpl = make_template(cfg);
    LandmarkSet out;
    out.role = Role::Latent;
    out.points.reserve(maps.size());
    for (std::size_t k = 0; k < maps.size(); ++k) {
        const PixelCoord o = round_to_grid(obs.points[k], maps[k].width, maps[k].height);
        const PixelCoord y =
            search_landmark(maps[k], o, tmpl, cfg.lambda, cfg.neighborhood_half_width);
        out.points.push_back({static_cast<double>(y.x), static_cast<double>(y.y)});
    }
    return out;
}

struct EpochStats {
    double train_loss = 0.0;
    double mean_displacement = 0.0;
    double label_nme = 0.0;
    double pred_nme = 0.0;
};

struct AlignmentTrace {
    std::vector<EpochStats> epochs;
};

inline void write_trace_csv(std::ostream& os, const AlignmentTrace& trace) {
    os << "epoch,train_loss,mean_displacement,label_nme,pred_nme\n";
    for (std::size_t i = 0; i < trace.epochs.size(); ++i) {
        const EpochStats& e = trace.epochs[i];
        os << (i + 1) << ',' << format_double(e.train_loss) << ','
           << format_double(e.mean_displacement) << ',' << format_double(e.label_nme) << ','
           << format_double(e.pred_nme) << '\n';
    }
}

struct AlignmentResult {
    std::vector<LandmarkSet> labels;  // final latent labels, one set per sample
    AlignmentTrace trace;
};

/// The alternating refinement loop. Each epoch: predict response maps, search
/// the latent label for every landmark inside the window around its current
/// observation, then retrain the predictor one pass on targets rendered at the
/// searched labels. With update_observation the observations follow the labels
/// into the next epoch; otherwise they stay pinned to the annotations.
inline AlignmentResult run_alternating(PredictorModel& model, const Dataset& data,
                                       const AlignmentConfig& cfg, const TrainConfig& tcfg,
                                       const Normalizer& norm) {
    if (data.samples.empty()) throw std::invalid_argument("empty dataset");
    if (model.landmark_count() != data.landmark_count)
        throw std::invalid_argument("model/dataset landmark count mismatch");
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    const GaussianTemplate tmpl = make_template(cfg);
    const std::size_t count = data.samples.size();
    const int n = data.landmark_count;

    std::vector<std::vector<PixelCoord>> obs(count);
    for (std::size_t i = 0; i < count; ++i) {
        obs[i].reserve(static_cast<std::size_t>(n));
        for (const Point2& p : data.samples[i].annotation.points)
            obs[i].push_back(round_to_grid(p, data.width, data.height));
    }

    AlignmentResult result;
    result.labels.assign(count, LandmarkSet{Role::Latent, {}});
    for (auto& l : result.labels) l.points.resize(static_cast<std::size_t>(n));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double disp_sum = 0.0;
        std::vector<double> label_errs, pred_errs;
        label_errs.reserve(count);
        pred_errs.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const ImageSample& sample = data.samples[i];
            const std::vector<Heatmap> maps = predict_heatmaps(model, sample);
            LandmarkSet pred;
            pred.role = Role::Prediction;
            pred.points.reserve(static_cast<std::size_t>(n));
            for (int k = 0; k < n; ++k) {
                const PixelCoord peak = decode_argmax(maps[k]);
                pred.points.push_back({static_cast<double>(peak.x), static_cast<double>(peak.y)});
                const Heatmap scaled = match_template_scale(maps[k], tmpl);
                const PixelCoord y = search_landmark(scaled, obs[i][static_cast<std::size_t>(k)],
                                                     tmpl, cfg.lambda,
                                                     cfg.neighborhood_half_width);
                const PixelCoord& o = obs[i][static_cast<std::size_t>(k)];
                disp_sum += std::hypot(static_cast<double>(y.x - o.x),
                                       static_cast<double>(y.y - o.y));
                result.labels[i].points[static_cast<std::size_t>(k)] = {
                    static_cast<double>(y.x), static_cast<double>(y.y)};
            }
            label_errs.push_back(normalized_error(result.labels[i], sample.truth, norm));
            pred_errs.push_back(normalized_error(pred, sample.truth, norm));
        }
        EpochStats stats;
        stats.mean_displacement = disp_sum / (static_cast<double>(count) * n);
        stats.label_nme = aggregate(label_errs).mean;
        stats.pred_nme = aggregate(pred_errs).mean;
        stats.train_loss = train_epoch(model, data, result.labels, tcfg);
        result.trace.epochs.push_back(stats);
        if (cfg.update_observation)
            for (std::size_t i = 0; i < count; ++i)
                for (int k = 0; k < n; ++k)
                    obs[i][static_cast<std::size_t>(k)] =
                        round_to_grid(result.labels[i].points[static_cast<std::size_t>(k)],
                                      data.width, data.height);
    }
    return result;
}

/// Control arm: keep training on the raw annotations for the same number of
/// epochs, never searching. Labels stay the annotations; the trace has the
/// same shape as run_alternating's.
inline AlignmentResult run_baseline_continue(PredictorModel& model, const Dataset& data,
                                             const AlignmentConfig& cfg, const TrainConfig& tcfg,
                                             const Normalizer& norm) {
    if (data.samples.empty()) throw std::invalid_argument("empty dataset");
    if (model.landmark_count() != data.landmark_count)
        throw std::invalid_argument("model/dataset landmark count mismatch");
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    const std::size_t count = data.samples.size();
    const int n = data.landmark_count;
    AlignmentResult result;
    result.labels = collect_annotations(data);

    std::vector<double> label_errs;
    label_errs.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        label_errs.push_back(
            normalized_error(data.samples[i].annotation, data.samples[i].truth, norm));
    const double annotation_nme = aggregate(label_errs).mean;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<double> pred_errs;
        pred_errs.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::vector<Heatmap> maps = predict_heatmaps(model, data.samples[i]);
            LandmarkSet pred;
            pred.role = Role::Prediction;
            pred.points.reserve(static_cast<std::size_t>(n));
            for (int k = 0; k < n; ++k) {
                const PixelCoord peak = decode_argmax(maps[k]);
                pred.points.push_back({static_cast<double>(peak.x), static_cast<double>(peak.y)});
            }
            pred_errs.push_back(normalized_error(pred, data.samples[i].truth, norm));
        }
        EpochStats stats;
        stats.mean_displacement = 0.0;
        stats.label_nme = annotation_nme;
        stats.pred_nme = aggregate(pred_errs).mean;
        stats.train_loss = train_epoch(model, data, result.labels, tcfg);
        result.trace.epochs.push_back(stats);
    }
    return result;
}

}  // namespace semalign
