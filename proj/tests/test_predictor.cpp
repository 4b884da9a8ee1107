#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "semalign/predictor.hpp"
#include "semalign/synthdata.hpp"

using namespace semalign;

namespace {

struct Scene {
    LandmarkSet truth;
    std::vector<LandmarkTag> tags;
    std::vector<Point2> tangents;
};

Scene make_scene(std::uint64_t seed) {
    Scene s;
    std::mt19937_64 rng(seed);
    generate_shape(FaceShapeSpec{}, 64, 64, rng, s.truth, s.tags, s.tangents);
    return s;
}

ImageSample micro_sample(int width, int height, std::uint64_t seed, int n) {
    ImageSample img;
    img.id = 0;
    img.features = make_heatmap(width, height);
    std::mt19937_64 rng(seed);
    for (double& v : img.features.values) v = 0.2 + uniform01(rng);
    img.truth.role = Role::Truth;
    for (int k = 0; k < n; ++k)
        img.truth.points.push_back(
            {1.0 + uniform01(rng) * (width - 2), 1.0 + uniform01(rng) * (height - 2)});
    img.annotation = img.truth;
    img.annotation.role = Role::Annotation;
    return img;
}

}  // namespace

TEST_CASE("oracle maps peak at the truth when unbiased and isotropic") {
    const Scene s = make_scene(100);
    OraclePredictorConfig cfg;
    cfg.peak_bias_sigma = 0.0;
    cfg.tangential_elongation = 1.0;
    std::mt19937_64 rng(1);
    const auto maps = oracle_predict(s.truth, s.tags, s.tangents, 64, 64, cfg, rng);
    REQUIRE(maps.size() == s.truth.points.size());
    for (std::size_t k = 0; k < maps.size(); ++k)
        REQUIRE(decode_argmax(maps[k]) == round_to_grid(s.truth.points[k], 64, 64));
}

TEST_CASE("oracle elongation widens the plateau of weak landmarks") {
    const Scene s = make_scene(200);
    OraclePredictorConfig round;
    round.tangential_elongation = 1.0;
    OraclePredictorConfig wide;
    wide.tangential_elongation = 3.0;
    std::mt19937_64 r1(9), r2(9);
    const auto iso = oracle_predict(s.truth, s.tags, s.tangents, 64, 64, round, r1);
    const auto elo = oracle_predict(s.truth, s.tags, s.tangents, 64, 64, wide, r2);
    int interior = 0;
    for (std::size_t k = 0; k < s.tags.size(); ++k) {
        if (!s.tags[k].weak) continue;
        REQUIRE(plateau_area(elo[k], 0.9) > plateau_area(iso[k], 0.9));
        // the full doubling only holds where the border does not clip the lobe
        const Point2 p = s.truth.points[k];
        if (p.x < 6.0 || p.x > 57.0 || p.y < 6.0 || p.y > 57.0) continue;
        REQUIRE(plateau_area(elo[k], 0.9) >= 2 * plateau_area(iso[k], 0.9));
        ++interior;
    }
    REQUIRE(interior >= 8);
}

TEST_CASE("oracle predictor is deterministic per sample and delegates faithfully") {
    const Scene s = make_scene(300);
    OraclePredictorConfig cfg;
    cfg.peak_bias_sigma = 1.0;
    OraclePredictor model(kFaceLandmarkCount, 64, 64, cfg, 555);
    model.register_scene(4, s.truth, s.tags, s.tangents);
    ImageSample img;
    img.id = 4;
    img.features = render_image(s.truth, s.tags, 64, 64);
    const auto a = predict_heatmaps(model, img);
    const auto b = predict_heatmaps(model, img);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) REQUIRE(a[k].values == b[k].values);
    // the wrapper draws the very bias stream oracle_predict would with the derived seed
    std::mt19937_64 rng(derive_seed(555, 4, 3));
    const auto direct = oracle_predict(s.truth, s.tags, s.tangents, 64, 64, cfg, rng);
    for (std::size_t k = 0; k < a.size(); ++k) REQUIRE(a[k].values == direct[k].values);
    ImageSample unknown;
    unknown.id = 99;
    unknown.features = img.features;
    REQUIRE_THROWS_AS(model.predict(unknown), std::invalid_argument);
}

TEST_CASE("oracle argmax averages out to the truth over many bias draws") {
    const Scene s = make_scene(400);
    OraclePredictorConfig cfg;
    cfg.peak_bias_sigma = 1.0;
    cfg.tangential_elongation = 1.0;
    std::mt19937_64 rng(24680);
    const std::size_t k = 15;  // a corner landmark
    double sx = 0.0, sy = 0.0;
    const int draws = 1000;
    for (int i = 0; i < draws; ++i) {
        const auto maps = oracle_predict(s.truth, s.tags, s.tangents, 64, 64, cfg, rng);
        const PixelCoord p = decode_argmax(maps[k]);
        sx += p.x - s.truth.points[k].x;
        sy += p.y - s.truth.points[k].y;
    }
    REQUIRE(std::hypot(sx / draws, sy / draws) < 0.3);
}

TEST_CASE("trainable initialization is seed-deterministic with documented shape") {
    TrainablePredictor a(3, 16, 16, 42);
    TrainablePredictor b(3, 16, 16, 42);
    REQUIRE(a.weight_values() == b.weight_values());
    REQUIRE(a.bias_values() == b.bias_values());
    TrainablePredictor c(3, 16, 16, 43);
    REQUIRE(a.weight_values() != c.weight_values());
    REQUIRE_THROWS_AS(TrainablePredictor(3, 15, 16, 1, 2, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(TrainablePredictor(0, 16, 16, 1), std::invalid_argument);
}

TEST_CASE("zero image produces all-equal maps; negative bias clamps to zero") {
    TrainablePredictor model(2, 16, 16, 7);
    ImageSample zero;
    zero.id = 0;
    zero.features = make_heatmap(16, 16);
    const auto maps = predict_heatmaps(model, zero);
    REQUIRE(maps.size() == 2);
    for (const Heatmap& h : maps) {
        REQUIRE(h.width == 16);
        REQUIRE(h.height == 16);
        for (double v : h.values) REQUIRE(v == h.values[0]);
    }
    for (double& b : model.bias_values()) b = -1.0;
    const auto clamped = predict_heatmaps(model, zero);
    for (const Heatmap& h : clamped)
        for (double v : h.values) REQUIRE(v == 0.0);
}

TEST_CASE("response concentration narrows lobes without moving peaks") {
    // identical read-outs, different exponents: biases carry a wide bump
    TrainablePredictor flat(1, 32, 32, 5, 2, 2, 1.0);
    TrainablePredictor sharp(1, 32, 32, 5, 2, 2, 4.0);
    const Heatmap bump = render_target_heatmap(32, 32, {13, 17}, 4.0);
    for (auto* m : {&flat, &sharp}) {
        for (double& w : m->weight_values()) w = 0.0;
        m->bias_values() = bump.values;
    }
    ImageSample img;
    img.id = 0;
    img.features = make_heatmap(32, 32);
    const Heatmap wide = predict_heatmaps(flat, img)[0];
    const Heatmap narrow = predict_heatmaps(sharp, img)[0];
    REQUIRE(decode_argmax(narrow) == decode_argmax(wide));
    REQUIRE(*std::max_element(narrow.values.begin(), narrow.values.end()) == 1.0);
    REQUIRE(plateau_area(narrow, 0.5) < plateau_area(wide, 0.5));
    // exponent 4 halves the width of a Gaussian lobe: e^{-d^2/2s^2} -> e^{-d^2/2(s/2)^2}
    for (int x = 0; x < 32; ++x)
        for (int y = 0; y < 32; ++y) {
            const Heatmap ref = render_target_heatmap(32, 32, {13, 17}, 2.0);
            REQUIRE(narrow.at(x, y) == Approx(ref.at(x, y)).margin(1e-9));
        }
    REQUIRE_THROWS_AS(TrainablePredictor(1, 32, 32, 5, 2, 2, 0.5), std::invalid_argument);
}

TEST_CASE("per-pixel biases can fit a target exactly, giving zero loss") {
    TrainablePredictor model(2, 16, 16, 11);
    for (double& w : model.weight_values()) w = 0.0;
    ImageSample img;
    img.id = 0;
    img.features = make_heatmap(16, 16);  // zero input: response = bias
    LandmarkSet labels = make_landmark_set(Role::Latent, {{4, 5}, {11, 9}});
    const double sigma = 1.5;
    for (int k = 0; k < 2; ++k) {
        const Heatmap t = render_target_heatmap(16, 16, round_to_grid(labels.points[k], 16, 16),
                                                sigma);
        for (int i = 0; i < 256; ++i) model.bias_values()[k * 256 + i] = t.values[i];
    }
    REQUIRE(model.sample_loss(img, labels, sigma) == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
    const int n = 2, dim = 8;
    TrainablePredictor model(n, dim, dim, 99, 2, 1);
    const ImageSample img = micro_sample(dim, dim, 31415, n);
    LandmarkSet labels = img.truth;
    labels.role = Role::Latent;
    const double sigma = 1.5;
    std::vector<double> gw, gb;
    model.sample_gradients(img, labels, sigma, gw, gb);
    REQUIRE(gw.size() == model.weight_values().size());
    REQUIRE(gb.size() == model.bias_values().size());

    const double h = 1e-4;
    std::mt19937_64 pick(8);
    auto check = [&](std::vector<double>& params, const std::vector<double>& grad) {
        for (int trial = 0; trial < 40; ++trial) {
            const std::size_t j = pick() % params.size();
            const double keep = params[j];
            params[j] = keep + h;
            const double up = model.sample_loss(img, labels, sigma);
            params[j] = keep - h;
            const double dn = model.sample_loss(img, labels, sigma);
            params[j] = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double scale = std::max({std::abs(fd), std::abs(grad[j]), 1e-8});
            REQUIRE(std::abs(fd - grad[j]) / scale < 1e-4);
        }
    };
    check(model.weight_values(), gw);
    check(model.bias_values(), gb);
}

TEST_CASE("zero learning rate trains nothing and reports the standing loss") {
    const int n = 2, dim = 8;
    Dataset data;
    data.landmark_count = n;
    data.width = dim;
    data.height = dim;
    std::vector<LandmarkSet> labels;
    for (int i = 0; i < 3; ++i) {
        ImageSample s = micro_sample(dim, dim, 100 + i, n);
        s.id = i;
        labels.push_back(s.annotation);
        data.samples.push_back(std::move(s));
    }
    TrainablePredictor model(n, dim, dim, 5, 2, 1);
    const std::vector<double> w0 = model.weight_values();
    const std::vector<double> b0 = model.bias_values();
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.target_sigma = 1.5;
    double standing = 0.0;
    for (int i = 0; i < 3; ++i)
        standing += model.sample_loss(data.samples[i], labels[i], cfg.target_sigma);
    standing /= 3.0;
    const double reported = train_epoch(model, data, labels, cfg);
    REQUIRE(reported == Approx(standing).epsilon(1e-12));
    REQUIRE(model.weight_values() == w0);
    REQUIRE(model.bias_values() == b0);
}

TEST_CASE("training shrinks the loss monotonically at a small learning rate") {
    const int n = 2, dim = 8;
    Dataset data;
    data.landmark_count = n;
    data.width = dim;
    data.height = dim;
    std::vector<LandmarkSet> labels;
    for (int i = 0; i < 4; ++i) {
        ImageSample s = micro_sample(dim, dim, 500 + i, n);
        s.id = i;
        labels.push_back(s.annotation);
        data.samples.push_back(std::move(s));
    }
    TrainablePredictor model(n, dim, dim, 6, 2, 1);
    TrainConfig cfg;
    cfg.learning_rate = 0.002;
    cfg.target_sigma = 1.5;
    cfg.batch_size = 4;
    double prev = 1e300;
    for (int pass = 0; pass < 5; ++pass) {
        const double loss = train_epoch(model, data, labels, cfg);
        REQUIRE(loss <= prev + 1e-12);
        prev = loss;
    }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    TrainablePredictor model(2, 16, 16, 77, 2, 1);
    // leave a mark so we are not just serializing the init
    model.bias_values()[10] = 0.125;
    std::ostringstream first;
    model.save(first);
    std::istringstream is(first.str());
    const auto back = load_predictor(is);
    REQUIRE(back->landmark_count() == 2);
    REQUIRE(back->map_width() == 16);
    std::ostringstream second;
    back->save(second);
    REQUIRE(second.str() == first.str());
    ImageSample img = micro_sample(16, 16, 4242, 2);
    const auto a = predict_heatmaps(model, img);
    const auto b = predict_heatmaps(*back, img);
    for (std::size_t k = 0; k < a.size(); ++k) REQUIRE(a[k].values == b[k].values);
    std::istringstream bad("model 1 mystery 2 16 16\n");
    REQUIRE_THROWS_AS(load_predictor(bad), std::runtime_error);
}

TEST_CASE("train_epoch validates its inputs") {
    TrainablePredictor model(2, 8, 8, 1, 2, 1);
    Dataset empty;
    TrainConfig cfg;
    REQUIRE_THROWS_AS(train_epoch(model, empty, {}, cfg), std::invalid_argument);
    Dataset one;
    one.landmark_count = 2;
    one.width = 8;
    one.height = 8;
    ImageSample s = micro_sample(8, 8, 3, 2);
    one.samples.push_back(s);
    REQUIRE_THROWS_AS(train_epoch(model, one, {}, cfg), std::invalid_argument);
    std::vector<LandmarkSet> short_labels{make_landmark_set(Role::Latent, {{1, 1}})};
    REQUIRE_THROWS_AS(train_epoch(model, one, short_labels, cfg), std::invalid_argument);
    ImageSample wrong = micro_sample(16, 16, 4, 2);
    REQUIRE_THROWS_AS(predict_heatmaps(model, wrong), std::invalid_argument);
}

TEST_CASE("a predictor trained on clean labels localizes held-out landmarks") {
    const int train_count = 100, test_count = 20;
    const Dataset train = make_dataset(train_count, FaceShapeSpec{}, NoiseModel{}, 64, 64, 9001);
    const Dataset test = make_dataset(test_count, FaceShapeSpec{}, NoiseModel{}, 64, 64, 9002);
    TrainablePredictor model(kFaceLandmarkCount, 64, 64, 12345);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 10;
    const std::vector<LandmarkSet> labels = collect_truth(train);
    double last = 0.0;
    for (int pass = 0; pass < 15; ++pass) last = train_epoch(model, train, labels, cfg);
    REQUIRE(last < 1.0);
    int hits = 0, total = 0;
    for (const ImageSample& s : test.samples) {
        const auto maps = predict_heatmaps(model, s);
        for (int k = 0; k < kFaceLandmarkCount; ++k) {
            const PixelCoord p = decode_argmax(maps[k]);
            const double err = std::hypot(p.x - s.truth.points[k].x, p.y - s.truth.points[k].y);
            ++total;
            if (err <= 2.0) ++hits;
        }
    }
    REQUIRE(total == test_count * kFaceLandmarkCount);
    REQUIRE(hits >= static_cast<int>(0.8 * total));
}
