#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semalign/common.hpp"
#include "semalign/landmark.hpp"

namespace semalign {

/// Similarity frame of a shape: centroid plus root-mean-square radius.
/// Rotation is deliberately not removed; scenes are upright by construction.
struct ShapeFrame {
    double cx = 0.0;
    double cy = 0.0;
    double scale = 1.0;
};

inline ShapeFrame shape_frame(const LandmarkSet& s) {
    if (s.points.empty()) throw std::invalid_argument("empty shape");
    ShapeFrame f;
    for (const Point2& p : s.points) {
        f.cx += p.x;
        f.cy += p.y;
    }
    const double n = static_cast<double>(s.points.size());
    f.cx /= n;
    f.cy /= n;
    double ss = 0.0;
    for (const Point2& p : s.points) {
        const double dx = p.x - f.cx, dy = p.y - f.cy;
        ss += dx * dx + dy * dy;
    }
    f.scale = std::sqrt(ss / n);
    if (!(f.scale > 1e-9)) throw std::invalid_argument("degenerate shape: zero spread");
    return f;
}

inline std::vector<double> to_shape_vector(const LandmarkSet& s, const ShapeFrame& f) {
    std::vector<double> v;
    v.reserve(s.points.size() * 2);
    for (const Point2& p : s.points) {
        v.push_back((p.x - f.cx) / f.scale);
        v.push_back((p.y - f.cy) / f.scale);
    }
    return v;
}

inline LandmarkSet from_shape_vector(const std::vector<double>& v, const ShapeFrame& f,
                                     Role role) {
    if (v.size() % 2 != 0) throw std::invalid_argument("odd shape vector length");
    LandmarkSet s;
    s.role = role;
    s.points.reserve(v.size() / 2);
    for (std::size_t k = 0; k + 1 < v.size(); k += 2)
        s.points.push_back({f.cx + f.scale * v[k], f.cy + f.scale * v[k + 1]});
    return s;
}

/// Linear shape subspace: mean plus an orthonormal basis of the dominant
/// variation directions, with their variances.
struct ShapeModel {
    std::vector<double> mean;                // 2N
    std::vector<std::vector<double>> basis;  // K columns, each 2N
    std::vector<double> eigenvalues;         // K, descending

    int landmark_count() const { return static_cast<int>(mean.size() / 2); }
    int components() const { return static_cast<int>(basis.size()); }
};

/// PCA of shape vectors that are already expressed in a common frame. Keeps
/// the smallest number of components whose variance sum reaches the requested
/// fraction of the total.
inline ShapeModel fit_shape_pca(const std::vector<std::vector<double>>& shapes,
                                double variance_fraction) {
    if (shapes.size() < 2) throw std::invalid_argument("need at least 2 shapes");
    if (!(variance_fraction > 0.0) || variance_fraction > 1.0)
        throw std::invalid_argument("variance fraction must be in (0, 1]");
    const std::size_t dim = shapes.front().size();
    if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("bad shape vector length");
    for (const auto& s : shapes)
        if (s.size() != dim) throw std::invalid_argument("inconsistent shape lengths");

    const double m = static_cast<double>(shapes.size());
    ShapeModel model;
    model.mean.assign(dim, 0.0);
    for (const auto& s : shapes)
        for (std::size_t j = 0; j < dim; ++j) model.mean[j] += s[j];
    for (double& v : model.mean) v /= m;

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                                static_cast<Eigen::Index>(dim));
    Eigen::VectorXd d(static_cast<Eigen::Index>(dim));
    for (const auto& s : shapes) {
        for (std::size_t j = 0; j < dim; ++j)
            d[static_cast<Eigen::Index>(j)] = s[j] - model.mean[j];
        cov.noalias() += d * d.transpose();
    }
    cov /= m;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    const Eigen::VectorXd& evals = es.eigenvalues();  // ascending
    const double top = evals[evals.size() - 1];
    const double tol = std::max(top, 0.0) * 1e-9 + 1e-30;

    std::vector<std::size_t> keep;  // indices of positive eigenvalues, descending
    for (Eigen::Index i = evals.size() - 1; i >= 0; --i)
        if (evals[i] > tol) keep.push_back(static_cast<std::size_t>(i));
    double total = 0.0;
    for (std::size_t i : keep) total += evals[static_cast<Eigen::Index>(i)];

    double cum = 0.0;
    for (std::size_t i : keep) {
        if (total > 0.0 && cum >= variance_fraction * total) break;
        const Eigen::Index col = static_cast<Eigen::Index>(i);
        cum += evals[col];
        Eigen::VectorXd v = es.eigenvectors().col(col);
        // deterministic sign: largest-magnitude entry made positive
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        model.basis.emplace_back(v.data(), v.data() + v.size());
        model.eigenvalues.push_back(evals[col]);
    }
    return model;
}

inline ShapeModel fit_shape_pca(const std::vector<LandmarkSet>& shapes,
                                double variance_fraction) {
    std::vector<std::vector<double>> vecs;
    vecs.reserve(shapes.size());
    for (const LandmarkSet& s : shapes) {
        std::vector<double> v;
        v.reserve(s.points.size() * 2);
        for (const Point2& p : s.points) {
            v.push_back(p.x);
            v.push_back(p.y);
        }
        vecs.push_back(std::move(v));
    }
    return fit_shape_pca(vecs, variance_fraction);
}

/// Shapes normalized by their own centroid and scale before fitting.
inline ShapeModel fit_aligned_shape_model(const std::vector<LandmarkSet>& shapes,
                                          double variance_fraction) {
    std::vector<std::vector<double>> vecs;
    vecs.reserve(shapes.size());
    for (const LandmarkSet& s : shapes) vecs.push_back(to_shape_vector(s, shape_frame(s)));
    return fit_shape_pca(vecs, variance_fraction);
}

namespace detail {

inline std::vector<double> project_onto(const ShapeModel& model, const std::vector<double>& v) {
    std::vector<double> out = model.mean;
    for (const auto& col : model.basis) {
        double c = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) c += col[j] * (v[j] - model.mean[j]);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += c * col[j];
    }
    return out;
}

}  // namespace detail

/// Projection onto the retained subspace, in the frame the model was fit in.
inline LandmarkSet pca_correct(const LandmarkSet& shape, const ShapeModel& model) {
    if (static_cast<int>(shape.points.size()) != model.landmark_count())
        throw std::invalid_argument("shape length does not match the model");
    std::vector<double> v;
    v.reserve(shape.points.size() * 2);
    for (const Point2& p : shape.points) {
        v.push_back(p.x);
        v.push_back(p.y);
    }
    const std::vector<double> out = detail::project_onto(model, v);
    LandmarkSet s;
    s.role = shape.role;
    s.points.reserve(shape.points.size());
    for (std::size_t k = 0; k + 1 < out.size(); k += 2)
        s.points.push_back({out[k], out[k + 1]});
    return s;
}

/// Align to the shape's own frame, project, and map back.
inline LandmarkSet correct_shape(const LandmarkSet& shape, const ShapeModel& model) {
    const ShapeFrame f = shape_frame(shape);
    const std::vector<double> out = detail::project_onto(model, to_shape_vector(shape, f));
    LandmarkSet s = from_shape_vector(out, f, shape.role);
    return s;
}

struct RobustConfig {
    double tau = 0.12;             // residual (frame units) where down-weighting kicks in;
                                   // ~2 px at face scale, above the quantization/jitter floor
    double tau_start = 0.5;        // annealing starts wide so inliers are not crushed early
    double tau_anneal = 0.6;       // per-iteration shrink factor toward tau
    double prior_sigma = 0.02;     // residual sigma backing the coefficient prior
    double exclude_below = 0.1;    // converged weight under this marks an outlier
    double excluded_weight = 1e-6;
    int max_rounds = 10;           // exclusion/restart rounds
    int max_iterations = 100;      // reweighting iterations per round
    double tolerance = 1e-10;      // max weight change considered converged
};

/// Outlier-tolerant correction. Inner loop: iteratively reweighted projection
/// with the frame (centroid/scale) re-estimated from the current weights, so a
/// displaced landmark cannot drag the whole frame. Coefficients carry a
/// Gaussian prior from the model eigenvalues, keeping the solve bounded when
/// few landmarks remain trusted, and the down-weighting width anneals from
/// tau_start to tau so inliers separate from outliers before weights harden.
/// Landmarks whose converged weight is negligible are excluded and the fit
/// restarts without them; excluded landmarks are replaced by the subspace
/// reconstruction. At most half the landmarks can be excluded.
inline LandmarkSet robust_correct_shape(const LandmarkSet& shape, const ShapeModel& model,
                                        const RobustConfig& rc = {}) {
    const int n = model.landmark_count();
    if (static_cast<int>(shape.points.size()) != n)
        throw std::invalid_argument("shape length does not match the model");
    if (n < 3) throw std::invalid_argument("too few landmarks for robust fitting");
    if (rc.max_rounds < 1 || rc.max_iterations < 1)
        throw std::invalid_argument("robust fit needs at least one round and iteration");
    if (!(rc.tau > 0.0) || !(rc.tau_start >= rc.tau) || !(rc.tau_anneal > 0.0) ||
        rc.tau_anneal >= 1.0 || !(rc.prior_sigma >= 0.0))
        throw std::invalid_argument("bad robust fit parameters");
    const int kdim = model.components();
    const Eigen::Index dim = 2 * n;

    Eigen::MatrixXd basis(dim, kdim);
    for (int j = 0; j < kdim; ++j)
        for (Eigen::Index r = 0; r < dim; ++r)
            basis(r, j) = model.basis[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
    Eigen::VectorXd mean(dim);
    for (Eigen::Index r = 0; r < dim; ++r) mean[r] = model.mean[static_cast<std::size_t>(r)];
    Eigen::VectorXd prior = Eigen::VectorXd::Zero(kdim);
    for (int j = 0; j < kdim; ++j)
        prior[j] = rc.prior_sigma * rc.prior_sigma / model.eigenvalues[static_cast<std::size_t>(j)];

    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    std::vector<bool> excluded(static_cast<std::size_t>(n), false);
    int excluded_count = 0;

    // Translation/scale mapping the model frame onto the image: estimated by
    // weighted least squares against the current reconstruction, so the
    // model-frame normalization stays consistent no matter how the weights
    // concentrate.
    double tx = 0.0, ty = 0.0, ts = 1.0;
    Eigen::VectorXd recon = mean;
    for (int round = 0; round < rc.max_rounds; ++round) {
        for (int k = 0; k < n; ++k)
            w[static_cast<std::size_t>(k)] =
                excluded[static_cast<std::size_t>(k)] ? rc.excluded_weight : 1.0;
        double tau = rc.tau_start;

        for (int iter = 0; iter < rc.max_iterations; ++iter) {
            double sw = 0.0, px = 0.0, py = 0.0, rx = 0.0, ry = 0.0;
            for (int k = 0; k < n; ++k) {
                const double wk = w[static_cast<std::size_t>(k)];
                sw += wk;
                px += wk * shape.points[static_cast<std::size_t>(k)].x;
                py += wk * shape.points[static_cast<std::size_t>(k)].y;
                rx += wk * recon[2 * k];
                ry += wk * recon[2 * k + 1];
            }
            px /= sw;
            py /= sw;
            rx /= sw;
            ry /= sw;
            double num = 0.0, den = 0.0;
            for (int k = 0; k < n; ++k) {
                const double wk = w[static_cast<std::size_t>(k)];
                const double dpx = shape.points[static_cast<std::size_t>(k)].x - px;
                const double dpy = shape.points[static_cast<std::size_t>(k)].y - py;
                const double drx = recon[2 * k] - rx;
                const double dry = recon[2 * k + 1] - ry;
                num += wk * (dpx * drx + dpy * dry);
                den += wk * (drx * drx + dry * dry);
            }
            if (!(den > 1e-12) || !(num > 1e-9))
                throw std::runtime_error("degenerate shape during robust fit");
            ts = num / den;
            tx = px - ts * rx;
            ty = py - ts * ry;

            Eigen::VectorXd a(dim);
            for (int k = 0; k < n; ++k) {
                a[2 * k] = (shape.points[static_cast<std::size_t>(k)].x - tx) / ts;
                a[2 * k + 1] = (shape.points[static_cast<std::size_t>(k)].y - ty) / ts;
            }

            if (kdim > 0) {
                Eigen::MatrixXd bw(dim, kdim);
                for (int k = 0; k < n; ++k) {
                    const double wk = w[static_cast<std::size_t>(k)];
                    bw.row(2 * k) = basis.row(2 * k) * wk;
                    bw.row(2 * k + 1) = basis.row(2 * k + 1) * wk;
                }
                // prior strength tracks the mean trusted weight, so uniform
                // down-weighting of inliers does not inflate the shrinkage
                double wbar = 0.0;
                int active = 0;
                for (int k = 0; k < n; ++k)
                    if (!excluded[static_cast<std::size_t>(k)]) {
                        wbar += w[static_cast<std::size_t>(k)];
                        ++active;
                    }
                wbar = active > 0 ? wbar / active : 1.0;
                Eigen::MatrixXd ata = basis.transpose() * bw;
                ata.diagonal() += wbar * prior;
                const Eigen::VectorXd atb = bw.transpose() * (a - mean);
                const Eigen::VectorXd c = ata.ldlt().solve(atb);
                recon.noalias() = mean + basis * c;
            } else {
                recon = mean;
            }

            double max_change = 0.0;
            for (int k = 0; k < n; ++k) {
                if (excluded[static_cast<std::size_t>(k)]) continue;
                const double rx = a[2 * k] - recon[2 * k];
                const double ry = a[2 * k + 1] - recon[2 * k + 1];
                const double q = (rx * rx + ry * ry) / (tau * tau);
                const double nw = 1.0 / ((1.0 + q) * (1.0 + q));
                max_change = std::max(max_change, std::abs(nw - w[static_cast<std::size_t>(k)]));
                w[static_cast<std::size_t>(k)] = nw;
            }
            const bool settled = max_change < rc.tolerance && tau == rc.tau;
            tau = std::max(rc.tau, tau * rc.tau_anneal);
            if (settled) break;
        }

        bool grew = false;
        for (int k = 0; k < n && excluded_count < n / 2; ++k) {
            if (excluded[static_cast<std::size_t>(k)]) continue;
            if (w[static_cast<std::size_t>(k)] < rc.exclude_below) {
                excluded[static_cast<std::size_t>(k)] = true;
                ++excluded_count;
                grew = true;
            }
        }
        if (!grew) break;
    }

    LandmarkSet out;
    out.role = shape.role;
    out.points.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        out.points.push_back({tx + ts * recon[2 * k], ty + ts * recon[2 * k + 1]});
    return out;
}

inline void save_shape_model(std::ostream& os, const ShapeModel& m) {
    os << "model 1 shape_pca " << m.landmark_count() << ' ' << m.components() << '\n';
    os << "mean " << m.mean.size() << '\n';
    write_values(os, m.mean);
    os << "eigenvalues " << m.eigenvalues.size() << '\n';
    write_values(os, m.eigenvalues);
    for (int j = 0; j < m.components(); ++j) {
        const auto& col = m.basis[static_cast<std::size_t>(j)];
        os << "component " << col.size() << '\n';
        write_values(os, col);
    }
}

inline ShapeModel load_shape_model(std::istream& is) {
    std::string word, kind;
    long long version = 0, n = 0, k = 0;
    if (!(is >> word >> version >> kind) || word != "model")
        throw std::runtime_error("bad model header");
    if (version != 1) throw std::runtime_error("unsupported model version");
    if (kind != "shape_pca") throw std::runtime_error("not a shape model: '" + kind + "'");
    if (!(is >> n >> k) || n < 1 || k < 0) throw std::runtime_error("bad shape model dims");
    ShapeModel m;
    m.mean.resize(static_cast<std::size_t>(2 * n));
    read_values(is, "mean", m.mean);
    m.eigenvalues.resize(static_cast<std::size_t>(k));
    read_values(is, "eigenvalues", m.eigenvalues);
    for (long long j = 0; j < k; ++j) {
        std::vector<double> col(static_cast<std::size_t>(2 * n));
        read_values(is, "component", col);
        m.basis.push_back(std::move(col));
    }
    return m;
}

}  // namespace semalign
