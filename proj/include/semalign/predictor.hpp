#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semalign/common.hpp"
#include "semalign/dataset.hpp"
#include "semalign/heatmap.hpp"
#include "semalign/landmark.hpp"
#include "semalign/synthdata.hpp"

namespace semalign {

struct TrainConfig {
    double learning_rate = 0.01;
    int passes = 30;
    int batch_size = 10;
    std::uint64_t seed = 0;
    double target_sigma = 2.0;  // width of the rendered supervision bumps
};

/// Anything that maps a rendered scene to one response map per landmark and
/// can be refitted on a set of labels.
class PredictorModel {
public:
    virtual ~PredictorModel() = default;
    virtual int landmark_count() const = 0;
    virtual int map_width() const = 0;
    virtual int map_height() const = 0;
    /// Non-negative response maps, one per landmark.
    virtual std::vector<Heatmap> predict(const ImageSample& img) const = 0;
    /// One full pass of mini-batch gradient descent toward bump targets
    /// rendered at the given labels; returns the mean per-pixel loss measured
    /// before each batch update.
    virtual double train_pass(const Dataset& data, const std::vector<LandmarkSet>& labels,
                              const TrainConfig& cfg) = 0;
    virtual void save(std::ostream& os) const = 0;
};

inline std::vector<Heatmap> predict_heatmaps(const PredictorModel& model, const ImageSample& img) {
    if (img.features.width != model.map_width() || img.features.height != model.map_height())
        throw std::invalid_argument("image dims do not match the model");
    std::vector<Heatmap> maps = model.predict(img);
    if (static_cast<int>(maps.size()) != model.landmark_count())
        throw std::logic_error("predictor returned the wrong number of maps");
    return maps;
}

inline double train_epoch(PredictorModel& model, const Dataset& data,
                          const std::vector<LandmarkSet>& labels, const TrainConfig& cfg) {
    if (data.samples.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    if (labels.size() != data.samples.size())
        throw std::invalid_argument("labels do not align with the dataset");
    for (const LandmarkSet& l : labels)
        if (static_cast<int>(l.points.size()) != model.landmark_count())
            throw std::invalid_argument("label length does not match the model");
    return model.train_pass(data, labels, cfg);
}

// ---- analytic oracle ----

struct OraclePredictorConfig {
    double peak_bias_sigma = 0.0;       // systematic residual from truth, px
    double tangential_elongation = 3.0; // >= 1; axis stretch for contour points
    double base_sigma = 2.0;
};

/// Ideal response maps built directly from the truth: anisotropic bumps whose
/// long axis follows the local contour tangent for weak landmarks, isotropic
/// bumps for corners, each displaced by a Gaussian bias draw.
inline std::vector<Heatmap> oracle_predict(const LandmarkSet& truth,
                                           const std::vector<LandmarkTag>& tags,
                                           const std::vector<Point2>& tangents, int width,
                                           int height, const OraclePredictorConfig& cfg,
                                           std::mt19937_64& rng) {
    if (tags.size() != truth.points.size() || tangents.size() != truth.points.size())
        throw std::invalid_argument("tags/tangents length mismatch");
    if (!(cfg.tangential_elongation >= 1.0))
        throw std::invalid_argument("elongation must be >= 1");
    if (!(cfg.base_sigma > 0.0) || cfg.peak_bias_sigma < 0.0)
        throw std::invalid_argument("oracle sigmas out of range");
    std::vector<Heatmap> maps;
    maps.reserve(truth.points.size());
    for (std::size_t k = 0; k < truth.points.size(); ++k) {
        const auto [g1, g2] = normal2(rng);
        const double cx = truth.points[k].x + cfg.peak_bias_sigma * g1;
        const double cy = truth.points[k].y + cfg.peak_bias_sigma * g2;
        const Point2 axis = tags[k].weak ? tangents[k] : Point2{1.0, 0.0};
        const double along =
            tags[k].weak ? cfg.base_sigma * cfg.tangential_elongation : cfg.base_sigma;
        maps.push_back(render_anisotropic_heatmap(width, height, cx, cy, axis.x, axis.y, along,
                                                  cfg.base_sigma));
    }
    return maps;
}

/// PredictorModel wrapper over oracle_predict. Scene geometry is registered
/// per sample id; the per-sample bias draw is derived from the seed and id, so
/// prediction is repeatable and order-independent.
class OraclePredictor : public PredictorModel {
public:
    OraclePredictor(int n, int width, int height, OraclePredictorConfig cfg, std::uint64_t seed)
        : n_(n), width_(width), height_(height), cfg_(cfg), seed_(seed) {}

    void register_scene(int id, LandmarkSet truth, std::vector<LandmarkTag> tags,
                        std::vector<Point2> tangents) {
        if (static_cast<int>(truth.points.size()) != n_)
            throw std::invalid_argument("scene landmark count mismatch");
        scenes_[id] = Scene{std::move(truth), std::move(tags), std::move(tangents)};
    }

    int landmark_count() const override { return n_; }
    int map_width() const override { return width_; }
    int map_height() const override { return height_; }

    std::vector<Heatmap> predict(const ImageSample& img) const override {
        const auto it = scenes_.find(img.id);
        if (it == scenes_.end())
            throw std::invalid_argument("no scene registered for sample " + std::to_string(img.id));
        std::mt19937_64 rng(derive_seed(seed_, static_cast<std::uint64_t>(img.id), 3));
        return oracle_predict(it->second.truth, it->second.tags, it->second.tangents, width_,
                              height_, cfg_, rng);
    }

    double train_pass(const Dataset&, const std::vector<LandmarkSet>&,
                      const TrainConfig&) override {
        return 0.0;  // the oracle has nothing to fit
    }

    void save(std::ostream&) const override {
        throw std::logic_error("oracle predictors are not serializable");
    }

private:
    struct Scene {
        LandmarkSet truth;
        std::vector<LandmarkTag> tags;
        std::vector<Point2> tangents;
    };
    int n_, width_, height_;
    OraclePredictorConfig cfg_;
    std::uint64_t seed_;
    std::map<int, Scene> scenes_;
};

// ---- trainable model ----

/// Linear locally connected read-out over a pooled copy of the image: the
/// image is average-pooled by `pool`, then every output pixel of every
/// landmark map reads its own (2*radius+1)^2 window of the pooled grid through
/// its own weights plus a bias. Small enough to train in seconds, expressive
/// enough to localize ridges and corners.
///
/// Emitted responses pass through a concentration stage: each map is scaled to
/// peak 1 and raised to the `sharpen` exponent. A least-squares read-out
/// converges to the blurred average of its bump targets; the exponent restores
/// a lobe no wider than the targets, which downstream template comparison
/// needs, while leaving the argmax and the relative ordering of every pixel
/// untouched.
class TrainablePredictor : public PredictorModel {
public:
    TrainablePredictor(int n, int width, int height, std::uint64_t seed, int pool = 2,
                       int radius = 2, double sharpen = 4.0)
        : n_(n), width_(width), height_(height), pool_(pool), radius_(radius), sharpen_(sharpen) {
        if (n < 1 || width < 1 || height < 1 || pool < 1 || radius < 0)
            throw std::invalid_argument("bad predictor shape");
        if (!(sharpen >= 1.0)) throw std::invalid_argument("sharpen exponent must be >= 1");
        if (width % pool != 0 || height % pool != 0)
            throw std::invalid_argument("dims must be divisible by the pooling factor");
        pw_ = width / pool;
        ph_ = height / pool;
        const std::size_t pixels = static_cast<std::size_t>(n) * width * height;
        weights_.resize(pixels * window());
        biases_.assign(pixels, 0.0);
        std::mt19937_64 rng(derive_seed(seed, 0xfeedu));
        const double scale = 0.05 / std::sqrt(static_cast<double>(window()));
        // Draws are assigned pixel-major (all taps of one output pixel in a
        // row) even though storage is tap-major, so the initialization is
        // independent of the storage layout.
        const std::size_t plane = static_cast<std::size_t>(width) * height;
        const auto slot = [&](std::size_t draw) {
            const std::size_t pix = draw / window(), tap = draw % window();
            return (pix / plane * window() + tap) * plane + pix % plane;
        };
        for (std::size_t i = 0; i + 1 < weights_.size(); i += 2) {
            const auto [a, b] = normal2(rng);
            weights_[slot(i)] = scale * a;
            weights_[slot(i + 1)] = scale * b;
        }
        if (weights_.size() % 2) weights_[slot(weights_.size() - 1)] = scale * normal2(rng).first;
    }

    int landmark_count() const override { return n_; }
    int map_width() const override { return width_; }
    int map_height() const override { return height_; }
    int pool() const { return pool_; }
    int radius() const { return radius_; }
    double sharpen() const { return sharpen_; }
    int window() const { return (2 * radius_ + 1) * (2 * radius_ + 1); }

    std::vector<double>& weight_values() { return weights_; }
    std::vector<double>& bias_values() { return biases_; }
    const std::vector<double>& weight_values() const { return weights_; }
    const std::vector<double>& bias_values() const { return biases_; }

    std::vector<Heatmap> predict(const ImageSample& img) const override {
        check_dims(img);
        const Lifted lift = lift_pooled(pool_image(img.features));
        std::vector<Heatmap> maps;
        maps.reserve(static_cast<std::size_t>(n_));
        std::vector<double> raw(static_cast<std::size_t>(width_) * height_);
        for (int k = 0; k < n_; ++k) {
            forward_landmark(lift, k, raw);
            Heatmap h = make_heatmap(width_, height_);
            double mx = 0.0;
            for (std::size_t i = 0; i < raw.size(); ++i) {
                h.values[i] = raw[i] > 0.0 ? raw[i] : 0.0;
                mx = std::max(mx, h.values[i]);
            }
            if (mx > 0.0)
                for (double& v : h.values) v = std::pow(v / mx, sharpen_);
            maps.push_back(std::move(h));
        }
        return maps;
    }

    /// Mean per-pixel squared error of the raw (pre-clamp) response against
    /// bump targets rendered at the labels.
    double sample_loss(const ImageSample& img, const LandmarkSet& labels,
                       double target_sigma) const {
        check_dims(img);
        check_labels(labels);
        const Lifted lift = lift_pooled(pool_image(img.features));
        std::vector<double> raw(static_cast<std::size_t>(width_) * height_);
        double sum = 0.0;
        for (int k = 0; k < n_; ++k) {
            forward_landmark(lift, k, raw);
            const Heatmap target = render_target_heatmap(
                width_, height_, round_to_grid(labels.points[k], width_, height_), target_sigma);
            for (std::size_t i = 0; i < raw.size(); ++i) {
                const double d = raw[i] - target.values[i];
                sum += d * d;
            }
        }
        return sum / (static_cast<double>(n_) * width_ * height_);
    }

    /// Analytic gradient of sample_loss with respect to every weight and bias.
    void sample_gradients(const ImageSample& img, const LandmarkSet& labels, double target_sigma,
                          std::vector<double>& gw, std::vector<double>& gb) const {
        check_dims(img);
        check_labels(labels);
        gw.assign(weights_.size(), 0.0);
        gb.assign(biases_.size(), 0.0);
        const Lifted lift = lift_pooled(pool_image(img.features));
        std::vector<double> raw(static_cast<std::size_t>(width_) * height_);
        std::vector<double> resid;
        const double norm = 1.0 / (static_cast<double>(n_) * width_ * height_);
        for (int k = 0; k < n_; ++k) {
            forward_landmark(lift, k, raw);
            const Heatmap target = render_target_heatmap(
                width_, height_, round_to_grid(labels.points[k], width_, height_), target_sigma);
            accumulate_landmark(lift, k, raw, target, 2.0 * norm, gw, gb, resid);
        }
    }

    double train_pass(const Dataset& data, const std::vector<LandmarkSet>& labels,
                      const TrainConfig& cfg) override {
        if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
        if (!(cfg.target_sigma > 0.0)) throw std::invalid_argument("target sigma must be > 0");
        std::vector<double> gw(weights_.size()), gb(biases_.size());
        std::vector<double> raw(static_cast<std::size_t>(width_) * height_);
        std::vector<double> resid;
        double loss_sum = 0.0;
        std::size_t batch_start = 0;
        while (batch_start < data.samples.size()) {
            const std::size_t batch_end =
                std::min(batch_start + static_cast<std::size_t>(cfg.batch_size),
                         data.samples.size());
            const double bnorm = 1.0 / static_cast<double>(batch_end - batch_start);
            std::fill(gw.begin(), gw.end(), 0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            for (std::size_t i = batch_start; i < batch_end; ++i) {
                const ImageSample& img = data.samples[i];
                check_dims(img);
                const Lifted lift = lift_pooled(pool_image(img.features));
                const double norm = 1.0 / (static_cast<double>(n_) * width_ * height_);
                for (int k = 0; k < n_; ++k) {
                    forward_landmark(lift, k, raw);
                    const Heatmap target = render_target_heatmap(
                        width_, height_,
                        round_to_grid(labels[i].points[k], width_, height_), cfg.target_sigma);
                    for (std::size_t p = 0; p < raw.size(); ++p) {
                        const double d = raw[p] - target.values[p];
                        loss_sum += d * d * norm;
                    }
                    // descend the batch-mean of the per-pixel-summed error; the
                    // returned diagnostic stays a mean-per-pixel quantity
                    accumulate_landmark(lift, k, raw, target, 2.0 * bnorm, gw, gb, resid);
                }
            }
            for (std::size_t j = 0; j < weights_.size(); ++j)
                weights_[j] -= cfg.learning_rate * gw[j];
            for (std::size_t j = 0; j < biases_.size(); ++j)
                biases_[j] -= cfg.learning_rate * gb[j];
            batch_start = batch_end;
        }
        return loss_sum / static_cast<double>(data.samples.size());
    }

    void save(std::ostream& os) const override {
        os << "model 1 trainable " << n_ << ' ' << width_ << ' ' << height_ << ' ' << pool_ << ' '
           << radius_ << ' ' << format_double(sharpen_) << '\n';
        os << "biases " << biases_.size() << '\n';
        write_values(os, biases_);
        os << "weights " << weights_.size() << '\n';
        write_values(os, weights_);
    }

    static TrainablePredictor load_body(std::istream& is, int n, int width, int height) {
        int pool = 0, radius = 0;
        double sharpen = 1.0;
        if (!(is >> pool >> radius >> sharpen)) throw std::runtime_error("truncated model header");
        TrainablePredictor m(n, width, height, 0, pool, radius, sharpen);
        read_values(is, "biases", m.biases_);
        read_values(is, "weights", m.weights_);
        return m;
    }

private:
    void check_dims(const ImageSample& img) const {
        if (img.features.width != width_ || img.features.height != height_)
            throw std::invalid_argument("image dims do not match the model");
    }
    void check_labels(const LandmarkSet& labels) const {
        if (static_cast<int>(labels.points.size()) != n_)
            throw std::invalid_argument("label length does not match the model");
    }

    std::vector<double> pool_image(const Heatmap& img) const {
        std::vector<double> pooled(static_cast<std::size_t>(pw_) * ph_);
        const double inv = 1.0 / (pool_ * pool_);
        for (int py = 0; py < ph_; ++py)
            for (int px = 0; px < pw_; ++px) {
                double s = 0.0;
                for (int dy = 0; dy < pool_; ++dy)
                    for (int dx = 0; dx < pool_; ++dx)
                        s += img.at(px * pool_ + dx, py * pool_ + dy);
                pooled[static_cast<std::size_t>(py) * pw_ + px] = s * inv;
            }
        return pooled;
    }

    // Pooled rows copied once per window-column shift with zeros outside the
    // grid, so every per-pixel dot product below runs over contiguous rows
    // with no bounds tests. Padding contributes exact zeros, matching the
    // skipped out-of-range taps of a direct evaluation.
    struct Lifted {
        std::vector<double> rows;  // [(shift * ph + sy) * width + x]
    };

    Lifted lift_pooled(const std::vector<double>& pooled) const {
        const int side = 2 * radius_ + 1;
        Lifted l;
        l.rows.assign(static_cast<std::size_t>(side) * ph_ * width_, 0.0);
        for (int s = 0; s < side; ++s) {
            const int dx = s - radius_;
            for (int sy = 0; sy < ph_; ++sy) {
                const double* prow = &pooled[static_cast<std::size_t>(sy) * pw_];
                double* dst = &l.rows[(static_cast<std::size_t>(s) * ph_ + sy) * width_];
                for (int x = 0; x < width_; ++x) {
                    const int sx = x / pool_ + dx;
                    dst[x] = (sx >= 0 && sx < pw_) ? prow[sx] : 0.0;
                }
            }
        }
        return l;
    }

    // raw response of one landmark map into `out` (width_*height_)
    void forward_landmark(const Lifted& lift, int k, std::vector<double>& out) const {
        const std::size_t plane = static_cast<std::size_t>(width_) * height_;
        const int side = 2 * radius_ + 1;
        out.resize(plane);
        const double* bias = &biases_[static_cast<std::size_t>(k) * plane];
        std::copy(bias, bias + plane, out.begin());
        for (int t = 0; t < window(); ++t) {
            const int dy = t / side - radius_;
            const int s = t % side;
            const double* wpl =
                &weights_[(static_cast<std::size_t>(k) * window() + t) * plane];
            for (int y = 0; y < height_; ++y) {
                const int sy = y / pool_ + dy;
                if (sy < 0 || sy >= ph_) continue;
                const double* src = &lift.rows[(static_cast<std::size_t>(s) * ph_ + sy) * width_];
                const double* wrow = wpl + static_cast<std::size_t>(y) * width_;
                double* orow = &out[static_cast<std::size_t>(y) * width_];
                for (int x = 0; x < width_; ++x) orow[x] += wrow[x] * src[x];
            }
        }
    }

    // gradient contribution of one landmark map: d(loss)/d(raw) = coef * (raw - target)
    void accumulate_landmark(const Lifted& lift, int k, const std::vector<double>& raw,
                             const Heatmap& target, double coef, std::vector<double>& gw,
                             std::vector<double>& gb, std::vector<double>& resid) const {
        const std::size_t plane = static_cast<std::size_t>(width_) * height_;
        const int side = 2 * radius_ + 1;
        resid.resize(plane);
        double* gbp = &gb[static_cast<std::size_t>(k) * plane];
        for (std::size_t p = 0; p < plane; ++p) {
            const double g = coef * (raw[p] - target.values[p]);
            resid[p] = g;
            gbp[p] += g;
        }
        for (int t = 0; t < window(); ++t) {
            const int dy = t / side - radius_;
            const int s = t % side;
            double* gwpl = &gw[(static_cast<std::size_t>(k) * window() + t) * plane];
            for (int y = 0; y < height_; ++y) {
                const int sy = y / pool_ + dy;
                if (sy < 0 || sy >= ph_) continue;
                const double* src = &lift.rows[(static_cast<std::size_t>(s) * ph_ + sy) * width_];
                const double* grow = &resid[static_cast<std::size_t>(y) * width_];
                double* gwrow = gwpl + static_cast<std::size_t>(y) * width_;
                for (int x = 0; x < width_; ++x) gwrow[x] += grow[x] * src[x];
            }
        }
    }

    int n_, width_, height_, pool_, radius_;
    double sharpen_;
    int pw_ = 0, ph_ = 0;
    std::vector<double> weights_;  // [landmark][tap][y][x]; tap-major keeps row sweeps contiguous
    std::vector<double> biases_;   // [landmark][y][x]
};

/// Reads back any checkpoint written by a PredictorModel::save.
inline std::unique_ptr<PredictorModel> load_predictor(std::istream& is) {
    std::string word, kind;
    long long version = 0, n = 0, w = 0, h = 0;
    if (!(is >> word >> version >> kind) || word != "model")
        throw std::runtime_error("bad model header");
    if (version != 1) throw std::runtime_error("unsupported model version");
    if (!(is >> n >> w >> h)) throw std::runtime_error("truncated model header");
    if (kind == "trainable")
        return std::make_unique<TrainablePredictor>(TrainablePredictor::load_body(
            is, static_cast<int>(n), static_cast<int>(w), static_cast<int>(h)));
    throw std::runtime_error("unknown model kind '" + kind + "'");
}

}  // namespace semalign
