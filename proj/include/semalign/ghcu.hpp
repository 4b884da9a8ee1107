#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "semalign/common.hpp"
#include "semalign/heatmap.hpp"
#include "semalign/landmark.hpp"
#include "semalign/predictor.hpp"

namespace semalign {

using OcclusionMask = std::vector<bool>;  // one flag per landmark

enum class OcclusionMode { Zero, Noise };

inline OcclusionMask draw_occlusion_mask(int n, double probability, std::mt19937_64& rng) {
    if (n < 1) throw std::invalid_argument("mask length must be >= 1");
    if (probability < 0.0 || probability > 1.0)
        throw std::invalid_argument("occlusion probability must be in [0, 1]");
    OcclusionMask mask(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) mask[static_cast<std::size_t>(k)] = uniform01(rng) < probability;
    return mask;
}

/// Replace the response maps of masked landmarks by zeros or uniform noise.
inline std::vector<Heatmap> occlude_heatmaps(std::vector<Heatmap> maps, const OcclusionMask& mask,
                                             OcclusionMode mode, std::mt19937_64& rng) {
    if (maps.size() != mask.size()) throw std::invalid_argument("mask/map count mismatch");
    for (std::size_t k = 0; k < maps.size(); ++k) {
        if (!mask[k]) continue;
        for (double& v : maps[k].values) v = mode == OcclusionMode::Zero ? 0.0 : uniform01(rng);
    }
    return maps;
}

struct GhcuStageSpec {
    int kernel = 3;
    int channels = 8;
};

struct GhcuConfig {
    int landmark_count = 0;
    int width = 0;   // input map width before pooling
    int height = 0;  // input map height before pooling
    int pool = 2;    // mean-pool factor applied to the input maps
    std::vector<GhcuStageSpec> stages;
    int hidden = 64;
    std::uint64_t seed = 0;
};

/// Small preset: stacked maps pooled to 32x32, four halving stages, hidden 64.
inline GhcuConfig ghcu_desk_config(int n, int width, int height, std::uint64_t seed = 0) {
    GhcuConfig cfg;
    cfg.landmark_count = n;
    cfg.width = width;
    cfg.height = height;
    cfg.pool = 2;
    cfg.stages = {{3, 8}, {3, 8}, {3, 8}, {3, 8}};
    cfg.hidden = 64;
    cfg.seed = seed;
    return cfg;
}

/// Full-size preset: six halving stages 5x5/64, 3x3/64, 3x3/32, 3x3/32,
/// 3x3/16, 3x3/16, hidden 256.
inline GhcuConfig ghcu_full_config(int n, int width, int height, std::uint64_t seed = 0) {
    GhcuConfig cfg;
    cfg.landmark_count = n;
    cfg.width = width;
    cfg.height = height;
    cfg.pool = 1;
    cfg.stages = {{5, 64}, {3, 64}, {3, 32}, {3, 32}, {3, 16}, {3, 16}};
    cfg.hidden = 256;
    cfg.seed = seed;
    return cfg;
}

struct GhcuSample {
    std::vector<Heatmap> maps;
    LandmarkSet target;
};

/// Strided local-window regressor from all stacked response maps to all
/// landmark coordinates: halving conv+ReLU stages, then two fully connected
/// layers ending in 2N outputs. All parameters live in one flat vector.
class GhcuModel {
public:
    explicit GhcuModel(const GhcuConfig& cfg) : cfg_(cfg) {
        if (cfg.landmark_count < 1) throw std::invalid_argument("landmark count must be >= 1");
        if (cfg.width < 1 || cfg.height < 1) throw std::invalid_argument("bad input dims");
        if (cfg.pool < 1 || cfg.width % cfg.pool != 0 || cfg.height % cfg.pool != 0)
            throw std::invalid_argument("pool must divide the input dims");
        if (cfg.stages.empty()) throw std::invalid_argument("need at least one stage");
        if (cfg.hidden < 1) throw std::invalid_argument("hidden width must be >= 1");

        int w = cfg.width / cfg.pool, h = cfg.height / cfg.pool, ch = cfg.landmark_count;
        for (const GhcuStageSpec& s : cfg.stages) {
            if (s.kernel < 3 || s.kernel % 2 == 0)
                throw std::invalid_argument("stage kernels must be odd and >= 3");
            if (s.channels < 1) throw std::invalid_argument("stage channels must be >= 1");
            const int pad = (s.kernel - 1) / 2;
            const int ow = (w + 2 * pad - s.kernel) / 2 + 1;
            const int oh = (h + 2 * pad - s.kernel) / 2 + 1;
            if (ow >= w || oh >= h)
                throw std::invalid_argument("stage does not reduce spatial resolution");
            in_w_.push_back(w);
            in_h_.push_back(h);
            in_ch_.push_back(ch);
            out_w_.push_back(ow);
            out_h_.push_back(oh);
            w = ow;
            h = oh;
            ch = s.channels;
        }
        flat_ = ch * w * h;

        std::size_t off = 0;
        for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
            conv_w_off_.push_back(off);
            off += static_cast<std::size_t>(cfg.stages[s].channels) * in_ch_[s] *
                   cfg.stages[s].kernel * cfg.stages[s].kernel;
            conv_b_off_.push_back(off);
            off += static_cast<std::size_t>(cfg.stages[s].channels);
        }
        fc1_w_off_ = off;
        off += static_cast<std::size_t>(cfg.hidden) * static_cast<std::size_t>(flat_);
        fc1_b_off_ = off;
        off += static_cast<std::size_t>(cfg.hidden);
        fc2_w_off_ = off;
        off += static_cast<std::size_t>(2 * cfg.landmark_count) *
               static_cast<std::size_t>(cfg.hidden);
        fc2_b_off_ = off;
        off += static_cast<std::size_t>(2 * cfg.landmark_count);
        params_.assign(off, 0.0);

        std::mt19937_64 rng(cfg.seed);
        for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
            const int fan = in_ch_[s] * cfg.stages[s].kernel * cfg.stages[s].kernel;
            fill_normal(conv_w_off_[s], conv_b_off_[s] - conv_w_off_[s],
                        std::sqrt(2.0 / fan), rng);
        }
        fill_normal(fc1_w_off_, fc1_b_off_ - fc1_w_off_, std::sqrt(2.0 / flat_), rng);
        fill_normal(fc2_w_off_, fc2_b_off_ - fc2_w_off_, std::sqrt(2.0 / cfg.hidden), rng);
        for (int k = 0; k < cfg.landmark_count; ++k) {
            params_[fc2_b_off_ + static_cast<std::size_t>(2 * k)] = cfg.width / 2.0;
            params_[fc2_b_off_ + static_cast<std::size_t>(2 * k) + 1] = cfg.height / 2.0;
        }
    }

    const GhcuConfig& config() const { return cfg_; }
    int landmark_count() const { return cfg_.landmark_count; }
    std::size_t parameter_count() const { return params_.size(); }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    std::vector<int> stage_widths() const { return out_w_; }
    std::vector<int> stage_heights() const { return out_h_; }

    /// Upper bound on the input-to-output gain: product over layers of the
    /// kernel Frobenius norm times the square root of the output positions
    /// (spectral norm bound of the unrolled convolution), then the norms of
    /// the two fully connected layers. ReLU and mean pooling contract.
    double lipschitz_bound() const {
        double bound = 1.0;
        for (std::size_t s = 0; s < cfg_.stages.size(); ++s) {
            double fro = 0.0;
            for (std::size_t j = conv_w_off_[s]; j < conv_b_off_[s]; ++j)
                fro += params_[j] * params_[j];
            bound *= std::sqrt(fro) * std::sqrt(static_cast<double>(out_w_[s]) * out_h_[s]);
        }
        double f1 = 0.0;
        for (std::size_t j = fc1_w_off_; j < fc1_b_off_; ++j) f1 += params_[j] * params_[j];
        double f2 = 0.0;
        for (std::size_t j = fc2_w_off_; j < fc2_b_off_; ++j) f2 += params_[j] * params_[j];
        return bound * std::sqrt(f1) * std::sqrt(f2);
    }

    LandmarkSet forward(const std::vector<Heatmap>& maps) const {
        Caches& c = scratch();
        const std::vector<double>& out = forward_internal(maps, c);
        LandmarkSet s;
        s.role = Role::Prediction;
        s.points.reserve(static_cast<std::size_t>(cfg_.landmark_count));
        for (int k = 0; k < cfg_.landmark_count; ++k)
            s.points.push_back({out[static_cast<std::size_t>(2 * k)],
                                out[static_cast<std::size_t>(2 * k) + 1]});
        return s;
    }

    /// Mean squared coordinate error of one sample, averaged over 2N outputs.
    double sample_loss(const GhcuSample& sample) const {
        Caches& c = scratch();
        const std::vector<double>& out = forward_internal(sample.maps, c);
        return loss_of(out, sample.target);
    }

    /// Adds this sample's loss gradient into grad; returns the sample loss.
    double sample_gradients(const GhcuSample& sample, std::vector<double>& grad) const {
        if (grad.size() != params_.size()) throw std::invalid_argument("bad gradient size");
        Caches& c = scratch();
        const std::vector<double>& out = forward_internal(sample.maps, c);
        const double loss = loss_of(out, sample.target);
        std::vector<double> dout(out.size());
        const double coef = 2.0 / static_cast<double>(out.size());
        for (int k = 0; k < cfg_.landmark_count; ++k) {
            dout[static_cast<std::size_t>(2 * k)] =
                coef * (out[static_cast<std::size_t>(2 * k)] -
                        sample.target.points[static_cast<std::size_t>(k)].x);
            dout[static_cast<std::size_t>(2 * k) + 1] =
                coef * (out[static_cast<std::size_t>(2 * k) + 1] -
                        sample.target.points[static_cast<std::size_t>(k)].y);
        }
        backward(c, dout, grad);
        return loss;
    }

    /// One pass of mini-batch gradient descent; consecutive batches, no
    /// shuffling. Returns the mean sample loss measured before each update.
    double train_pass(const std::vector<GhcuSample>& data, const TrainConfig& tcfg) {
        if (data.empty()) throw std::invalid_argument("empty training data");
        if (tcfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
        std::vector<double> grad(params_.size());
        double loss_sum = 0.0;
        std::size_t start = 0;
        while (start < data.size()) {
            const std::size_t end = std::min(start + static_cast<std::size_t>(tcfg.batch_size),
                                             data.size());
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = start; i < end; ++i)
                loss_sum += sample_gradients(data[i], grad);
            const double step = tcfg.learning_rate / static_cast<double>(end - start);
            for (std::size_t j = 0; j < params_.size(); ++j) params_[j] -= step * grad[j];
            start = end;
        }
        return loss_sum / static_cast<double>(data.size());
    }

    void save(std::ostream& os) const {
        os << "model 1 ghcu " << cfg_.landmark_count << ' ' << cfg_.width << ' ' << cfg_.height
           << ' ' << cfg_.pool << ' ' << cfg_.hidden << ' ' << cfg_.stages.size() << '\n';
        for (const GhcuStageSpec& s : cfg_.stages)
            os << "stage " << s.kernel << ' ' << s.channels << '\n';
        os << "params " << params_.size() << '\n';
        write_values(os, params_);
    }

    static GhcuModel load_body(std::istream& is, int n, int width, int height) {
        GhcuConfig cfg;
        cfg.landmark_count = n;
        cfg.width = width;
        cfg.height = height;
        std::size_t stage_count = 0;
        if (!(is >> cfg.pool >> cfg.hidden >> stage_count))
            throw std::runtime_error("truncated model header");
        for (std::size_t s = 0; s < stage_count; ++s) {
            std::string word;
            GhcuStageSpec spec;
            if (!(is >> word >> spec.kernel >> spec.channels) || word != "stage")
                throw std::runtime_error("bad stage line");
            cfg.stages.push_back(spec);
        }
        GhcuModel m(cfg);
        read_values(is, "params", m.params_);
        return m;
    }

private:
    struct Caches {
        std::vector<std::vector<double>> acts;  // acts[0] = pooled input, then stage outputs
        std::vector<std::vector<double>> pre;   // per-stage pre-activations
        std::vector<double> fc1_pre, hidden, out;
    };

    void fill_normal(std::size_t off, std::size_t count, double sigma, std::mt19937_64& rng) {
        for (std::size_t i = 0; i < count; i += 2) {
            const auto [a, b] = normal2(rng);
            params_[off + i] = sigma * a;
            if (i + 1 < count) params_[off + i + 1] = sigma * b;
        }
    }

    void pool_input_into(const std::vector<Heatmap>& maps, std::vector<double>& in) const {
        if (static_cast<int>(maps.size()) != cfg_.landmark_count)
            throw std::invalid_argument("map count does not match the model");
        const int pw = cfg_.width / cfg_.pool, ph = cfg_.height / cfg_.pool;
        in.resize(static_cast<std::size_t>(cfg_.landmark_count) * pw * ph);
        const double inv = 1.0 / (cfg_.pool * cfg_.pool);
        for (int k = 0; k < cfg_.landmark_count; ++k) {
            const Heatmap& m = maps[static_cast<std::size_t>(k)];
            if (m.width != cfg_.width || m.height != cfg_.height)
                throw std::invalid_argument("map dims do not match the model");
            const double* v = m.values.data();
            double* plane = in.data() + static_cast<std::size_t>(k) * ph * pw;
            if (cfg_.pool == 2) {
                for (int y = 0; y < ph; ++y) {
                    const double* r0 = v + static_cast<std::size_t>(2 * y) * cfg_.width;
                    const double* r1 = r0 + cfg_.width;
                    double* orow = plane + static_cast<std::size_t>(y) * pw;
                    for (int x = 0; x < pw; ++x) {
                        const int ix = 2 * x;
                        orow[x] = (r0[ix] + r0[ix + 1] + r1[ix] + r1[ix + 1]) * inv;
                    }
                }
            } else {
                for (int y = 0; y < ph; ++y)
                    for (int x = 0; x < pw; ++x) {
                        double sum = 0.0;
                        for (int dy = 0; dy < cfg_.pool; ++dy) {
                            const double* row =
                                v + static_cast<std::size_t>(y * cfg_.pool + dy) * cfg_.width +
                                static_cast<std::size_t>(x) * cfg_.pool;
                            for (int dx = 0; dx < cfg_.pool; ++dx) sum += row[dx];
                        }
                        plane[static_cast<std::size_t>(y) * pw + x] = sum * inv;
                    }
            }
        }
    }

    double loss_of(const std::vector<double>& out, const LandmarkSet& target) const {
        if (static_cast<int>(target.points.size()) != cfg_.landmark_count)
            throw std::invalid_argument("target length does not match the model");
        double sum = 0.0;
        for (int k = 0; k < cfg_.landmark_count; ++k) {
            const double ex = out[static_cast<std::size_t>(2 * k)] -
                              target.points[static_cast<std::size_t>(k)].x;
            const double ey = out[static_cast<std::size_t>(2 * k) + 1] -
                              target.points[static_cast<std::size_t>(k)].y;
            sum += ex * ex + ey * ey;
        }
        return sum / static_cast<double>(2 * cfg_.landmark_count);
    }

    // Persistent per-thread activation buffers: repeated calls on one thread
    // reuse the same storage instead of allocating it again.
    Caches& scratch() const {
        thread_local Caches c;
        return c;
    }

    const std::vector<double>& forward_internal(const std::vector<Heatmap>& maps,
                                                Caches& c) const {
        c.acts.resize(cfg_.stages.size() + 1);
        c.pre.resize(cfg_.stages.size());
        pool_input_into(maps, c.acts[0]);
        for (std::size_t s = 0; s < cfg_.stages.size(); ++s) {
            const int k = cfg_.stages[s].kernel, pad = (k - 1) / 2;
            const int ci = in_ch_[s], co = cfg_.stages[s].channels;
            const int iw = in_w_[s], ih = in_h_[s], ow = out_w_[s], oh = out_h_[s];
            const std::vector<double>& src = c.acts[s];
            std::vector<double>& pre = c.pre[s];
            pre.resize(static_cast<std::size_t>(co) * ow * oh);
            const double* w = params_.data() + conv_w_off_[s];
            const double* b = params_.data() + conv_b_off_[s];
            // Partial sums land in the output row per (in-channel, kernel-row)
            // so consecutive output pixels form independent accumulation
            // chains the CPU can pipeline; a fixed three-tap body covers the
            // common kernel without per-tap bounds checks.
            for (int oc = 0; oc < co; ++oc) {
                double* dst = pre.data() + static_cast<std::size_t>(oc) * oh * ow;
                const double bias = b[oc];
                for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) dst[i] = bias;
                const double* woc = w + static_cast<std::size_t>(oc) * ci * k * k;
                for (int ic = 0; ic < ci; ++ic) {
                    const double* src_c = src.data() + static_cast<std::size_t>(ic) * ih * iw;
                    const double* wic = woc + static_cast<std::size_t>(ic) * k * k;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy0 = oy * 2 - pad;
                        const int ky0 = iy0 < 0 ? -iy0 : 0;
                        const int ky1 = std::min(k, ih - iy0);
                        double* drow = dst + static_cast<std::size_t>(oy) * ow;
                        for (int ky = ky0; ky < ky1; ++ky) {
                            const double* srow = src_c + static_cast<std::size_t>(iy0 + ky) * iw;
                            const double* wrow = wic + static_cast<std::size_t>(ky) * k;
                            if (k == 3) {
                                const double w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
                                int ox = 0;
                                if (pad > 0) {
                                    drow[0] += w1 * srow[0] + w2 * srow[1];
                                    ox = 1;
                                }
                                for (; ox < ow; ++ox) {
                                    const double* sp = srow + (ox * 2 - pad);
                                    drow[ox] += w0 * sp[0] + w1 * sp[1] + w2 * sp[2];
                                }
                            } else {
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int ix0 = ox * 2 - pad;
                                    const int kx0 = ix0 < 0 ? -ix0 : 0;
                                    const int kx1 = std::min(k, iw - ix0);
                                    double dot = 0.0;
                                    for (int kx = kx0; kx < kx1; ++kx)
                                        dot += wrow[kx] * srow[ix0 + kx];
                                    drow[ox] += dot;
                                }
                            }
                        }
                    }
                }
            }
            std::vector<double>& act = c.acts[s + 1];
            act.resize(pre.size());
            for (std::size_t i = 0; i < pre.size(); ++i) act[i] = std::max(pre[i], 0.0);
        }

        const std::vector<double>& flat = c.acts.back();
        c.fc1_pre.resize(static_cast<std::size_t>(cfg_.hidden));
        for (int j = 0; j < cfg_.hidden; ++j) {
            double sum = params_[fc1_b_off_ + static_cast<std::size_t>(j)];
            const double* w = params_.data() + fc1_w_off_ +
                              static_cast<std::size_t>(j) * static_cast<std::size_t>(flat_);
            for (int i = 0; i < flat_; ++i) sum += w[i] * flat[static_cast<std::size_t>(i)];
            c.fc1_pre[static_cast<std::size_t>(j)] = sum;
        }
        c.hidden.resize(c.fc1_pre.size());
        for (std::size_t j = 0; j < c.fc1_pre.size(); ++j)
            c.hidden[j] = std::max(c.fc1_pre[j], 0.0);

        const int outs = 2 * cfg_.landmark_count;
        c.out.resize(static_cast<std::size_t>(outs));
        for (int j = 0; j < outs; ++j) {
            double sum = params_[fc2_b_off_ + static_cast<std::size_t>(j)];
            const double* w = params_.data() + fc2_w_off_ +
                              static_cast<std::size_t>(j) * static_cast<std::size_t>(cfg_.hidden);
            for (int i = 0; i < cfg_.hidden; ++i) sum += w[i] * c.hidden[static_cast<std::size_t>(i)];
            c.out[static_cast<std::size_t>(j)] = sum;
        }
        return c.out;
    }

    void backward(const Caches& c, const std::vector<double>& dout,
                  std::vector<double>& grad) const {
        const int outs = 2 * cfg_.landmark_count;
        std::vector<double> dhidden(static_cast<std::size_t>(cfg_.hidden), 0.0);
        for (int j = 0; j < outs; ++j) {
            const double d = dout[static_cast<std::size_t>(j)];
            grad[fc2_b_off_ + static_cast<std::size_t>(j)] += d;
            const std::size_t row = fc2_w_off_ + static_cast<std::size_t>(j) *
                                                     static_cast<std::size_t>(cfg_.hidden);
            for (int i = 0; i < cfg_.hidden; ++i) {
                grad[row + static_cast<std::size_t>(i)] += d * c.hidden[static_cast<std::size_t>(i)];
                dhidden[static_cast<std::size_t>(i)] +=
                    d * params_[row + static_cast<std::size_t>(i)];
            }
        }

        const std::vector<double>& flat = c.acts.back();
        std::vector<double> dflat(static_cast<std::size_t>(flat_), 0.0);
        for (int j = 0; j < cfg_.hidden; ++j) {
            if (c.fc1_pre[static_cast<std::size_t>(j)] <= 0.0) continue;
            const double d = dhidden[static_cast<std::size_t>(j)];
            grad[fc1_b_off_ + static_cast<std::size_t>(j)] += d;
            const std::size_t row = fc1_w_off_ + static_cast<std::size_t>(j) *
                                                     static_cast<std::size_t>(flat_);
            for (int i = 0; i < flat_; ++i) {
                grad[row + static_cast<std::size_t>(i)] += d * flat[static_cast<std::size_t>(i)];
                dflat[static_cast<std::size_t>(i)] += d * params_[row + static_cast<std::size_t>(i)];
            }
        }

        std::vector<double> dnext = std::move(dflat);
        for (std::size_t s = cfg_.stages.size(); s-- > 0;) {
            const int k = cfg_.stages[s].kernel, pad = (k - 1) / 2;
            const int ci = in_ch_[s], co = cfg_.stages[s].channels;
            const int iw = in_w_[s], ih = in_h_[s], ow = out_w_[s], oh = out_h_[s];
            const std::vector<double>& src = c.acts[s];
            const std::vector<double>& pre = c.pre[s];
            std::vector<double> dsrc(src.size(), 0.0);
            const double* w = params_.data() + conv_w_off_[s];
            double* gw = grad.data() + conv_w_off_[s];
            double* gb = grad.data() + conv_b_off_[s];
            for (int oc = 0; oc < co; ++oc)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const std::size_t oi = (static_cast<std::size_t>(oc) * oh + oy) * ow + ox;
                        if (pre[oi] <= 0.0) continue;
                        const double d = dnext[oi];
                        if (d == 0.0) continue;
                        gb[oc] += d;
                        for (int ic = 0; ic < ci; ++ic)
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = oy * 2 - pad + ky;
                                if (iy < 0 || iy >= ih) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = ox * 2 - pad + kx;
                                    if (ix < 0 || ix >= iw) continue;
                                    const std::size_t wi =
                                        ((static_cast<std::size_t>(oc) * ci + ic) * k + ky) * k +
                                        kx;
                                    const std::size_t si =
                                        (static_cast<std::size_t>(ic) * ih + iy) * iw + ix;
                                    gw[wi] += d * src[si];
                                    dsrc[si] += d * w[wi];
                                }
                            }
                    }
            dnext = std::move(dsrc);
        }
    }

    GhcuConfig cfg_;
    std::vector<int> in_w_, in_h_, in_ch_, out_w_, out_h_;
    int flat_ = 0;
    std::vector<std::size_t> conv_w_off_, conv_b_off_;
    std::size_t fc1_w_off_ = 0, fc1_b_off_ = 0, fc2_w_off_ = 0, fc2_b_off_ = 0;
    std::vector<double> params_;
};

/// Builds a model from the config and trains it for tcfg.passes passes.
inline GhcuModel ghcu_train(const GhcuConfig& cfg, const std::vector<GhcuSample>& data,
                            const TrainConfig& tcfg) {
    if (data.empty()) throw std::invalid_argument("empty training data");
    GhcuModel model(cfg);
    for (int pass = 0; pass < tcfg.passes; ++pass) model.train_pass(data, tcfg);
    return model;
}

inline GhcuModel load_ghcu_model(std::istream& is) {
    std::string word, kind;
    long long version = 0, n = 0, w = 0, h = 0;
    if (!(is >> word >> version >> kind) || word != "model")
        throw std::runtime_error("bad model header");
    if (version != 1) throw std::runtime_error("unsupported model version");
    if (kind != "ghcu") throw std::runtime_error("not a ghcu model: '" + kind + "'");
    if (!(is >> n >> w >> h)) throw std::runtime_error("truncated model header");
    return GhcuModel::load_body(is, static_cast<int>(n), static_cast<int>(w),
                                static_cast<int>(h));
}

}  // namespace semalign
