#include <catch2/catch.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "semalign/metrics.hpp"
#include "semalign/synthdata.hpp"

using namespace semalign;

namespace {

// Independent arc-length machinery: finite-difference speed + Simpson
// integration + bisection inversion, none of it shared with sample_curve.
double fd_speed(const CurveSpec& c, double t) {
    const double h = 1e-6;
    const Point2 a = bezier_point(c, std::max(0.0, t - h));
    const Point2 b = bezier_point(c, std::min(1.0, t + h));
    const double span = std::min(1.0, t + h) - std::max(0.0, t - h);
    return distance(a, b) / span;
}

double arc_to(const CurveSpec& c, double t) {
    const int n = 2000;
    const double h = t / n;
    if (h == 0.0) return 0.0;
    double s = fd_speed(c, 0.0) + fd_speed(c, t);
    for (int i = 1; i < n; ++i) s += fd_speed(c, i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

double invert_arc(const CurveSpec& c, double target) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (arc_to(c, mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// parameter of the closest curve point to p, by fine scan then refinement
double project_t(const CurveSpec& c, Point2 p) {
    double best_t = 0.0, best_d = 1e300;
    for (int i = 0; i <= 20000; ++i) {
        const double t = i / 20000.0;
        const double d = distance(bezier_point(c, t), p);
        if (d < best_d) {
            best_d = d;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace

TEST_CASE("curve landmarks sit at equal arc-length fractions") {
    for (const CurveSpec& c : face_curves()) {
        std::vector<Point2> pts, tans;
        sample_curve(c, pts, tans);
        REQUIRE(static_cast<int>(pts.size()) == c.count);
        REQUIRE(tans.size() == pts.size());
        const double total = arc_to(c, 1.0);
        // positions agree with an independent inversion of the arc length
        for (int j = 0; j < c.count; ++j) {
            const double f = c.count > 1 ? static_cast<double>(j) / (c.count - 1) : 0.5;
            const Point2 expect = bezier_point(c, invert_arc(c, f * total));
            REQUIRE(distance(pts[j], expect) < 0.02);
        }
        // consecutive spacing measured along the curve is uniform within 1%
        if (c.count > 2) {
            std::vector<double> s;
            for (const Point2& p : pts) s.push_back(arc_to(c, project_t(c, p)));
            const double step = total / (c.count - 1);
            for (std::size_t j = 0; j + 1 < s.size(); ++j)
                REQUIRE(s[j + 1] - s[j] == Approx(step).epsilon(0.01));
        }
        // tangents are unit length and point along the curve
        for (int j = 0; j < c.count; ++j) {
            REQUIRE(std::hypot(tans[j].x, tans[j].y) == Approx(1.0).margin(1e-9));
            const double t = project_t(c, pts[j]);
            const Point2 ahead = bezier_point(c, std::min(1.0, t + 1e-4));
            const Point2 behind = bezier_point(c, std::max(0.0, t - 1e-4));
            const double dx = ahead.x - behind.x, dy = ahead.y - behind.y;
            const double n = std::hypot(dx, dy);
            const double dot = (dx / n) * tans[j].x + (dy / n) * tans[j].y;
            REQUIRE(dot == Approx(1.0).margin(1e-3));
        }
    }
}

TEST_CASE("generated shapes have matching lengths, bounds, and determinism") {
    FaceShapeSpec spec;
    LandmarkSet truth;
    std::vector<LandmarkTag> tags;
    std::vector<Point2> tangents;
    for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
        std::mt19937_64 rng(seed);
        generate_shape(spec, 64, 64, rng, truth, tags, tangents);
        REQUIRE(truth.points.size() == kFaceLandmarkCount);
        REQUIRE(tags.size() == kFaceLandmarkCount);
        REQUIRE(tangents.size() == kFaceLandmarkCount);
        REQUIRE(tags == face_tags());
        for (const Point2& p : truth.points) {
            REQUIRE(p.x >= 1.0);
            REQUIRE(p.x <= 62.0);
            REQUIRE(p.y >= 1.0);
            REQUIRE(p.y <= 62.0);
        }
        LandmarkSet truth2;
        std::vector<LandmarkTag> tags2;
        std::vector<Point2> tangents2;
        std::mt19937_64 rng2(seed);
        generate_shape(spec, 64, 64, rng2, truth2, tags2, tangents2);
        REQUIRE(truth.points == truth2.points);
    }
}

TEST_CASE("zero-sigma noise reproduces the truth exactly") {
    FaceShapeSpec spec;
    LandmarkSet truth;
    std::vector<LandmarkTag> tags;
    std::vector<Point2> tangents;
    std::mt19937_64 rng(5);
    generate_shape(spec, 64, 64, rng, truth, tags, tangents);
    NoiseModel quiet{0.0, 0.0, 0.0};
    std::mt19937_64 nrng(6);
    const LandmarkSet ann = perturb_annotation(truth, tags, tangents, quiet, 64, 64, nrng);
    REQUIRE(ann.role == Role::Annotation);
    REQUIRE(ann.points == truth.points);
}

TEST_CASE("weak-point noise is anisotropic along the tangent") {
    // single weak landmark with a known oblique tangent, far from any border
    const double angle = 0.52;  // ~30 degrees
    LandmarkSet truth = make_landmark_set(Role::Truth, {{32.0, 32.0}});
    std::vector<LandmarkTag> tags{{true, 0}};
    std::vector<Point2> tangents{{std::cos(angle), std::sin(angle)}};
    NoiseModel nm;  // defaults: 3 / 0.5 / 0.5
    std::mt19937_64 rng(777);
    const int draws = 10000;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < draws; ++i) {
        const LandmarkSet a = perturb_annotation(truth, tags, tangents, nm, 64, 64, rng);
        const double dx = a.points[0].x - 32.0, dy = a.points[0].y - 32.0;
        sx += dx;
        sy += dy;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const double mx = sx / draws, my = sy / draws;
    const double cxx = sxx / draws - mx * mx;
    const double cyy = syy / draws - my * my;
    const double cxy = sxy / draws - mx * my;
    // mean displacement within 3 standard errors of zero, per axis
    REQUIRE(std::abs(mx) < 3.0 * std::sqrt(cxx / draws));
    REQUIRE(std::abs(my) < 3.0 * std::sqrt(cyy / draws));
    // principal eigenvector of the 2x2 covariance, closed form
    const double tr = cxx + cyy, det = cxx * cyy - cxy * cxy;
    const double l1 = 0.5 * (tr + std::sqrt(tr * tr - 4 * det));
    const double l2 = 0.5 * (tr - std::sqrt(tr * tr - 4 * det));
    double vx = cxy, vy = l1 - cxx;
    const double vn = std::hypot(vx, vy);
    vx /= vn;
    vy /= vn;
    const double dot = std::abs(vx * std::cos(angle) + vy * std::sin(angle));
    REQUIRE(std::acos(std::min(1.0, dot)) < 5.0 * 3.141592653589793 / 180.0);
    // anisotropy ratio recovered within 15%
    REQUIRE(std::sqrt(l1 / l2) == Approx(3.0 / 0.5).epsilon(0.15));
}

TEST_CASE("rendered corners dominate their neighborhood") {
    FaceShapeSpec spec;
    LandmarkSet truth;
    std::vector<LandmarkTag> tags;
    std::vector<Point2> tangents;
    std::mt19937_64 rng(11);
    generate_shape(spec, 64, 64, rng, truth, tags, tangents);
    const Heatmap img = render_image(truth, tags, 64, 64);
    for (std::size_t k = 0; k < tags.size(); ++k) {
        if (tags[k].weak) continue;
        const PixelCoord c = round_to_grid(truth.points[k], 64, 64);
        const double here = img.at(c.x, c.y);
        for (int dy = -5; dy <= 5; ++dy)
            for (int dx = -5; dx <= 5; ++dx) {
                const int x = c.x + dx, y = c.y + dy;
                if (x < 0 || x >= 64 || y < 0 || y >= 64) continue;
                REQUIRE(here >= img.at(x, y));
            }
    }
    // rendering is a pure function of its inputs
    const Heatmap again = render_image(truth, tags, 64, 64);
    REQUIRE(again.values == img.values);
    // no landmarks, no ink
    const Heatmap blank = render_image(LandmarkSet{Role::Truth, {}}, {}, 16, 16);
    for (double v : blank.values) REQUIRE(v == 0.0);
}

TEST_CASE("ridge intensity is nearly flat between contour landmarks") {
    // walk along the rendered jaw between adjacent landmarks: the image value
    // at curve points stays close to the ridge amplitude, so positions along
    // the contour are hard to tell apart by intensity.
    FaceShapeSpec spec;
    spec.scale_jitter = 0.0;
    spec.translate_jitter = 0.0;
    spec.mode_amplitude = 0.0;
    spec.point_jitter = 0.0;
    LandmarkSet truth;
    std::vector<LandmarkTag> tags;
    std::vector<Point2> tangents;
    std::mt19937_64 rng(1);
    generate_shape(spec, 64, 64, rng, truth, tags, tangents);
    const Heatmap img = render_image(truth, tags, 64, 64);
    int probes = 0;
    for (double f = 0.1; f < 0.9; f += 0.05) {
        const Point2 a = truth.points[2], b = truth.points[3];  // interior jaw pair
        const Point2 p{a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
        const PixelCoord q = round_to_grid(p, 64, 64);
        REQUIRE(img.at(q.x, q.y) > 0.55);
        ++probes;
    }
    REQUIRE(probes > 10);
}

TEST_CASE("dataset generation is reproducible and annotations depend on the seed") {
    FaceShapeSpec spec;
    NoiseModel nm;
    const Dataset a = make_dataset(3, spec, nm, 64, 64, 42);
    REQUIRE(a.samples.size() == 3);
    REQUIRE(a.landmark_count == kFaceLandmarkCount);
    const Dataset b = make_dataset(3, spec, nm, 64, 64, 42);
    std::ostringstream sa, sb;
    write_dataset(sa, a);
    write_dataset(sb, b);
    REQUIRE(sa.str() == sb.str());
    const Dataset c = make_dataset(3, spec, nm, 64, 64, 43);
    bool annotations_differ = false;
    for (int i = 0; i < 3; ++i)
        if (!(c.samples[i].annotation.points == a.samples[i].annotation.points))
            annotations_differ = true;
    REQUIRE(annotations_differ);
    REQUIRE_THROWS_AS(make_dataset(0, spec, nm, 64, 64, 1), std::invalid_argument);
}

TEST_CASE("dataset text round-trips bit-exactly") {
    const Dataset d = make_dataset(2, FaceShapeSpec{}, NoiseModel{}, 64, 64, 7);
    std::ostringstream first;
    write_dataset(first, d);
    std::istringstream is(first.str());
    const Dataset back = read_dataset(is);
    REQUIRE(back.samples.size() == d.samples.size());
    REQUIRE(back.landmark_count == d.landmark_count);
    REQUIRE(back.seed == d.seed);
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        REQUIRE(back.samples[i].features.values == d.samples[i].features.values);
        REQUIRE(back.samples[i].truth.points == d.samples[i].truth.points);
        REQUIRE(back.samples[i].annotation.points == d.samples[i].annotation.points);
    }
    std::ostringstream second;
    write_dataset(second, back);
    REQUIRE(second.str() == first.str());
    {
        std::istringstream bad("dataset 2 1 20 64 64 7\n");
        REQUIRE_THROWS_AS(read_dataset(bad), std::runtime_error);
    }
    {
        std::istringstream bad("nope 1 1 20 64 64 7\n");
        REQUIRE_THROWS_AS(read_dataset(bad), std::runtime_error);
    }
}

TEST_CASE("annotation error concentrates at the analytic noise floor") {
    const NoiseModel nm;
    const Dataset d = make_dataset(500, FaceShapeSpec{}, nm, 64, 64, 2718);
    Normalizer n{NormalizerKind::InterOcular, kLeftEyeOuter, kRightEyeOuter};
    std::vector<double> errs;
    for (const auto& s : d.samples) errs.push_back(normalized_error(s.annotation, s.truth, n));
    const double measured = aggregate(errs).mean;

    // analytic expectation: E||e|| = sqrt(pi/2) * mean_theta sqrt(st^2 cos^2 + sn^2 sin^2)
    auto expected_norm = [](double s1, double s2) {
        const int steps = 20000;
        double acc = 0.0;
        for (int i = 0; i < steps; ++i) {
            const double th = 2.0 * 3.141592653589793 * (i + 0.5) / steps;
            const double c = std::cos(th), s = std::sin(th);
            acc += std::sqrt(s1 * s1 * c * c + s2 * s2 * s * s);
        }
        return std::sqrt(3.141592653589793 / 2.0) * acc / steps;
    };
    const double weak_mean = expected_norm(nm.sigma_tangent, nm.sigma_normal);
    const double corner_mean = expected_norm(nm.sigma_corner, nm.sigma_corner);
    const double per_lm = (14.0 * weak_mean + 6.0 * corner_mean) / 20.0;
    const double interocular = 44.0;  // layout design distance, mean over jitter
    const double expected = per_lm / interocular;
    REQUIRE(measured == Approx(expected).epsilon(0.10));
}
