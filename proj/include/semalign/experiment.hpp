#pragma once

// The experiment commands behind the CLI. Each command reads its inputs, runs
// a deterministic pipeline, writes its artifacts plus the fully resolved
// config into the output directory, and prints a one-line summary. Re-running
// a command from the echoed `config.resolved` with the same seed reproduces
// every output byte for byte (the lone exception is the wall-time column of
// the corrector comparison, which measures the machine, not the math).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semalign/alignment.hpp"
#include "semalign/config.hpp"
#include "semalign/dataset.hpp"
#include "semalign/ghcu.hpp"
#include "semalign/metrics.hpp"
#include "semalign/predictor.hpp"
#include "semalign/shape_model.hpp"
#include "semalign/synthdata.hpp"

namespace semalign {

/// Every knob of every command, with its default. One registry serves all
/// verbs so a single config file can drive a whole pipeline.
inline ConfigMap experiment_registry() {
    ConfigMap cfg;
    cfg.define("seed", "0");

    cfg.define("data.count", "500");
    cfg.define("data.width", "64");
    cfg.define("data.height", "64");
    cfg.define("data.noise.tangent", "3.0");
    cfg.define("data.noise.normal", "0.5");
    cfg.define("data.noise.corner", "0.5");
    cfg.define("data.shape.scale_jitter", "0.07");
    cfg.define("data.shape.translate_jitter", "4.0");
    cfg.define("data.shape.mode_amplitude", "1.4");
    cfg.define("data.shape.point_jitter", "0.3");

    cfg.define("paths.dataset", "");
    cfg.define("paths.test_dataset", "");
    cfg.define("paths.model", "");
    cfg.define("paths.labels", "");

    cfg.define("predictor.pool", "2");
    cfg.define("predictor.radius", "2");
    cfg.define("predictor.sharpen", "4.0");
    cfg.define("train.learning_rate", "0.01");
    cfg.define("train.passes", "30");
    cfg.define("train.batch_size", "10");
    cfg.define("train.target_sigma", "2.0");

    cfg.define("align.mode", "sa");
    cfg.define("align.lambda", "0.1");
    cfg.define("align.half_width", "8");
    cfg.define("align.template_size", "19");
    cfg.define("align.template_sigma", "2.0");
    cfg.define("align.template_epsilon", "1e-6");
    cfg.define("align.epochs", "10");

    cfg.define("ablate.lambdas", "1e9,1,0.3,0.1,0.05,0.01,0");
    cfg.define("ablate.template_sizes", "19");

    cfg.define("correct.occlusion_probability", "0.2");
    cfg.define("correct.occlusion_mode", "zero");
    cfg.define("correct.variance_fraction", "0.95");
    cfg.define("correct.ghcu.target", "truth");
    cfg.define("correct.ghcu.learning_rate", "0.001");
    cfg.define("correct.ghcu.passes", "12");
    cfg.define("correct.ghcu.batch_size", "10");
    cfg.define("correct.timing_reps", "3");

    cfg.define("metric.normalizer", "inter-ocular");
    cfg.define("metric.index_a", std::to_string(kLeftEyeOuter));
    cfg.define("metric.index_b", std::to_string(kRightEyeOuter));
    cfg.define("metric.face_size_mode", "geometric-mean");
    return cfg;
}

namespace detail {

inline int checked_int(const ConfigMap& cfg, const std::string& key, long long lo, long long hi) {
    const long long v = cfg.get_int(key);
    if (v < lo || v > hi)
        throw ConfigError("config key '" + key + "' = " + std::to_string(v) + " out of range [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
}

inline std::string required_path(const ConfigMap& cfg, const std::string& key) {
    const std::string& p = cfg.get(key);
    if (p.empty()) throw ConfigError("config key '" + key + "' must name a file");
    return p;
}

inline std::ifstream open_artifact(const std::string& path, const char* what) {
    std::ifstream is(path);
    if (!is) throw ArtifactError(std::string(what) + " not found at '" + path + "'");
    return is;
}

inline void write_text(const std::filesystem::path& file, const std::string& content) {
    std::ofstream os(file, std::ios::binary);
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("cannot write '" + file.string() + "'");
}

inline std::filesystem::path prepare_out_dir(const ConfigMap& cfg, const std::string& out_dir) {
    if (out_dir.empty()) throw ConfigError("an output directory is required");
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_text(dir / "config.resolved", cfg.to_string());
    return dir;
}

inline FaceShapeSpec shape_spec_from(const ConfigMap& cfg) {
    FaceShapeSpec s;
    s.scale_jitter = cfg.get_double("data.shape.scale_jitter");
    s.translate_jitter = cfg.get_double("data.shape.translate_jitter");
    s.mode_amplitude = cfg.get_double("data.shape.mode_amplitude");
    s.point_jitter = cfg.get_double("data.shape.point_jitter");
    return s;
}

inline NoiseModel noise_from(const ConfigMap& cfg) {
    NoiseModel nm;
    nm.sigma_tangent = cfg.get_double("data.noise.tangent");
    nm.sigma_normal = cfg.get_double("data.noise.normal");
    nm.sigma_corner = cfg.get_double("data.noise.corner");
    if (nm.sigma_tangent < 0.0 || nm.sigma_normal < 0.0 || nm.sigma_corner < 0.0)
        throw ConfigError("annotation noise widths must be >= 0");
    return nm;
}

inline Normalizer normalizer_from(const ConfigMap& cfg) {
    Normalizer n;
    const std::string& kind = cfg.get("metric.normalizer");
    if (kind == "inter-ocular")
        n.kind = NormalizerKind::InterOcular;
    else if (kind == "inter-pupil")
        n.kind = NormalizerKind::InterPupil;
    else if (kind == "face-size")
        n.kind = NormalizerKind::FaceSize;
    else
        throw ConfigError("metric.normalizer must be inter-ocular, inter-pupil, or face-size");
    n.index_a = checked_int(cfg, "metric.index_a", 0, 1 << 20);
    n.index_b = checked_int(cfg, "metric.index_b", 0, 1 << 20);
    const std::string& fsm = cfg.get("metric.face_size_mode");
    if (fsm == "geometric-mean")
        n.face_size_mode = FaceSizeMode::GeometricMean;
    else if (fsm == "max-side")
        n.face_size_mode = FaceSizeMode::MaxSide;
    else
        throw ConfigError("metric.face_size_mode must be geometric-mean or max-side");
    return n;
}

inline TrainConfig train_config_from(const ConfigMap& cfg) {
    TrainConfig t;
    t.learning_rate = cfg.get_double("train.learning_rate");
    t.passes = checked_int(cfg, "train.passes", 0, 1000000);
    t.batch_size = checked_int(cfg, "train.batch_size", 1, 1000000);
    t.target_sigma = cfg.get_double("train.target_sigma");
    t.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    return t;
}

inline AlignmentConfig alignment_config_from(const ConfigMap& cfg) {
    AlignmentConfig a;
    a.lambda = cfg.get_double("align.lambda");
    a.neighborhood_half_width = checked_int(cfg, "align.half_width", 0, 1 << 20);
    a.template_size = checked_int(cfg, "align.template_size", 1, 1 << 20);
    a.template_sigma = cfg.get_double("align.template_sigma");
    a.template_epsilon = cfg.get_double("align.template_epsilon");
    a.epochs = checked_int(cfg, "align.epochs", 1, 1000000);
    a.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    return a;
}

inline Dataset load_dataset_at(const std::string& path) {
    std::ifstream is = open_artifact(path, "dataset");
    return read_dataset(is);
}

inline std::unique_ptr<PredictorModel> load_model_at(const std::string& path) {
    std::ifstream is = open_artifact(path, "model checkpoint");
    return load_predictor(is);
}

inline LandmarkSet decode_set(const std::vector<Heatmap>& maps) {
    LandmarkSet out;
    out.role = Role::Prediction;
    out.points.reserve(maps.size());
    for (const Heatmap& h : maps) {
        const PixelCoord p = decode_argmax(h);
        out.points.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
    }
    return out;
}

/// Mean NME of argmax-decoded predictions over a dataset.
inline double mean_test_nme(const PredictorModel& model, const Dataset& data,
                            const Normalizer& norm) {
    std::vector<double> errs;
    errs.reserve(data.samples.size());
    for (const ImageSample& s : data.samples)
        errs.push_back(normalized_error(decode_set(predict_heatmaps(model, s)), s.truth, norm));
    return aggregate(std::move(errs)).mean;
}

/// Shared by align and ablate so a one-cell ablation grid reproduces an align
/// run exactly.
inline AlignmentResult run_alignment_mode(const std::string& mode, PredictorModel& model,
                                          const Dataset& data, const AlignmentConfig& acfg,
                                          const TrainConfig& tcfg, const Normalizer& norm) {
    if (mode == "sa") {
        AlignmentConfig a = acfg;
        a.update_observation = true;
        return run_alternating(model, data, a, tcfg, norm);
    }
    if (mode == "sa-no-update") {
        AlignmentConfig a = acfg;
        a.update_observation = false;
        return run_alternating(model, data, a, tcfg, norm);
    }
    if (mode == "baseline-continue") return run_baseline_continue(model, data, acfg, tcfg, norm);
    throw ConfigError("align.mode must be sa, sa-no-update, or baseline-continue");
}

}  // namespace detail

// ---- synth ----

inline void cmd_synth(const ConfigMap& cfg, const std::string& out_dir, std::ostream& log) {
    const int count = detail::checked_int(cfg, "data.count", 1, 10000000);
    const int width = detail::checked_int(cfg, "data.width", 8, 1 << 14);
    const int height = detail::checked_int(cfg, "data.height", 8, 1 << 14);
    const FaceShapeSpec spec = detail::shape_spec_from(cfg);
    const NoiseModel nm = detail::noise_from(cfg);
    const Normalizer norm = detail::normalizer_from(cfg);
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));

    const std::filesystem::path dir = detail::prepare_out_dir(cfg, out_dir);
    const Dataset d = make_dataset(count, spec, nm, width, height, seed);

    std::ostringstream os;
    write_dataset(os, d);
    detail::write_text(dir / "dataset.txt", os.str());

    std::vector<double> errs;
    errs.reserve(d.samples.size());
    for (const ImageSample& s : d.samples)
        errs.push_back(normalized_error(s.annotation, s.truth, norm));
    const ErrorSummary sum = aggregate(std::move(errs));
    log << "synth: samples=" << d.samples.size() << " landmarks=" << d.landmark_count
        << " annotation_nme=" << format_double(sum.mean) << '\n';
}

// ---- train-baseline ----

inline void cmd_train_baseline(const ConfigMap& cfg, const std::string& out_dir,
                               std::ostream& log) {
    const Dataset d = detail::load_dataset_at(detail::required_path(cfg, "paths.dataset"));
    const TrainConfig tcfg = detail::train_config_from(cfg);
    const int pool = detail::checked_int(cfg, "predictor.pool", 1, 64);
    const int radius = detail::checked_int(cfg, "predictor.radius", 0, 64);
    const double sharpen = cfg.get_double("predictor.sharpen");
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));

    const std::filesystem::path dir = detail::prepare_out_dir(cfg, out_dir);
    TrainablePredictor model(d.landmark_count, d.width, d.height, seed, pool, radius, sharpen);
    const std::vector<LandmarkSet> labels = collect_annotations(d);

    std::ostringstream trace;
    trace << "pass,loss\n";
    double first_loss = 0.0, last_loss = 0.0;
    for (int pass = 1; pass <= tcfg.passes; ++pass) {
        const double loss = train_epoch(model, d, labels, tcfg);
        if (pass == 1) first_loss = loss;
        last_loss = loss;
        trace << pass << ',' << format_double(loss) << '\n';
    }
    detail::write_text(dir / "trace.csv", trace.str());

    std::ostringstream os;
    model.save(os);
    detail::write_text(dir / "model.txt", os.str());
    log << "train-baseline: passes=" << tcfg.passes << " first_loss=" << format_double(first_loss)
        << " last_loss=" << format_double(last_loss) << '\n';
}

// ---- align ----

inline void cmd_align(const ConfigMap& cfg, const std::string& out_dir, std::ostream& log) {
    const Dataset d = detail::load_dataset_at(detail::required_path(cfg, "paths.dataset"));
    std::unique_ptr<PredictorModel> model =
        detail::load_model_at(detail::required_path(cfg, "paths.model"));
    const AlignmentConfig acfg = detail::alignment_config_from(cfg);
    const TrainConfig tcfg = detail::train_config_from(cfg);
    const Normalizer norm = detail::normalizer_from(cfg);
    const std::string& mode = cfg.get("align.mode");

    const std::filesystem::path dir = detail::prepare_out_dir(cfg, out_dir);
    const AlignmentResult res = detail::run_alignment_mode(mode, *model, d, acfg, tcfg, norm);

    LabelFile labels;
    for (std::size_t i = 0; i < d.samples.size(); ++i) labels[d.samples[i].id] = res.labels[i];
    std::ostringstream ls;
    write_label_file(ls, labels);
    detail::write_text(dir / "labels.txt", ls.str());

    std::ostringstream ts;
    write_trace_csv(ts, res.trace);
    detail::write_text(dir / "trace.csv", ts.str());

    std::ostringstream ms;
    model->save(ms);
    detail::write_text(dir / "model.txt", ms.str());

    const EpochStats& fin = res.trace.epochs.back();
    log << "align: mode=" << mode << " epochs=" << res.trace.epochs.size()
        << " label_nme=" << format_double(fin.label_nme)
        << " pred_nme=" << format_double(fin.pred_nme) << '\n';
}

// ---- ablate ----

inline void cmd_ablate(const ConfigMap& cfg, const std::string& out_dir, std::ostream& log) {
    const Dataset d = detail::load_dataset_at(detail::required_path(cfg, "paths.dataset"));
    const std::string model_path = detail::required_path(cfg, "paths.model");
    std::string model_bytes;
    {
        std::ifstream is = detail::open_artifact(model_path, "model checkpoint");
        std::ostringstream buf;
        buf << is.rdbuf();
        model_bytes = buf.str();
    }
    const AlignmentConfig base = detail::alignment_config_from(cfg);
    const TrainConfig tcfg = detail::train_config_from(cfg);
    const Normalizer norm = detail::normalizer_from(cfg);
    const std::string& mode = cfg.get("align.mode");

    const std::vector<double> lambdas = cfg.get_double_list("ablate.lambdas");
    const std::vector<double> sizes_raw = cfg.get_double_list("ablate.template_sizes");
    if (lambdas.empty() || sizes_raw.empty())
        throw ConfigError("ablation grid must name at least one lambda and one template size");
    std::vector<int> sizes;
    for (double s : sizes_raw) {
        const int v = static_cast<int>(s);
        if (v < 1 || static_cast<double>(v) != s)
            throw ConfigError("ablate.template_sizes entries must be positive integers");
        sizes.push_back(v);
    }

    const std::filesystem::path dir = detail::prepare_out_dir(cfg, out_dir);
    std::ostringstream csv;
    csv << "lambda,template_size,label_nme,pred_nme\n";
    for (double lambda : lambdas) {
        for (int size : sizes) {
            std::istringstream ms(model_bytes);
            std::unique_ptr<PredictorModel> model = load_predictor(ms);
            AlignmentConfig acfg = base;
            acfg.lambda = lambda;
            acfg.template_size = size;
            const AlignmentResult res =
                detail::run_alignment_mode(mode, *model, d, acfg, tcfg, norm);
            const EpochStats& fin = res.trace.epochs.back();
            csv << format_double(lambda) << ',' << size << ',' << format_double(fin.label_nme)
                << ',' << format_double(fin.pred_nme) << '\n';
        }
    }
    detail::write_text(dir / "ablation.csv", csv.str());
    log << "ablate: rows=" << lambdas.size() * sizes.size() << " mode=" << mode << '\n';
}

// ---- correct ----

namespace detail {

struct OccludedSplit {
    std::vector<std::vector<Heatmap>> maps;
    std::vector<OcclusionMask> masks;
};

inline OccludedSplit occluded_split(const PredictorModel& model, const Dataset& d,
                                    double probability, OcclusionMode mode, std::uint64_t seed,
                                    std::uint64_t stream) {
    OccludedSplit out;
    out.maps.reserve(d.samples.size());
    out.masks.reserve(d.samples.size());
    for (const ImageSample& s : d.samples) {
        std::vector<Heatmap> maps = predict_heatmaps(model, s);
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(s.id), stream));
        OcclusionMask mask = draw_occlusion_mask(d.landmark_count, probability, rng);
        maps = occlude_heatmaps(std::move(maps), mask, mode, rng);
        out.maps.push_back(std::move(maps));
        out.masks.push_back(std::move(mask));
    }
    return out;
}

struct MethodScore {
    double err_all = 0.0;
    double err_occluded = 0.0;
    double ms_per_sample = 0.0;
};

inline void accumulate_errors(const LandmarkSet& got, const LandmarkSet& truth,
                              const OcclusionMask& mask, double& sum_all, std::size_t& n_all,
                              double& sum_occ, std::size_t& n_occ) {
    for (std::size_t k = 0; k < truth.points.size(); ++k) {
        const double e = distance(got.points[k], truth.points[k]);
        sum_all += e;
        ++n_all;
        if (mask[k]) {
            sum_occ += e;
            ++n_occ;
        }
    }
}

}  // namespace detail

inline void cmd_correct(const ConfigMap& cfg, const std::string& out_dir, std::ostream& log) {
    const Dataset train_d = detail::load_dataset_at(detail::required_path(cfg, "paths.dataset"));
    const Dataset test_d =
        detail::load_dataset_at(detail::required_path(cfg, "paths.test_dataset"));
    std::unique_ptr<PredictorModel> model =
        detail::load_model_at(detail::required_path(cfg, "paths.model"));
    if (train_d.landmark_count != test_d.landmark_count ||
        model->landmark_count() != train_d.landmark_count)
        throw ConfigError("train set, test set, and model disagree on landmark count");

    const double probability = cfg.get_double("correct.occlusion_probability");
    if (probability < 0.0 || probability > 1.0)
        throw ConfigError("correct.occlusion_probability must lie in [0, 1]");
    const std::string& mode_name = cfg.get("correct.occlusion_mode");
    OcclusionMode omode;
    if (mode_name == "zero")
        omode = OcclusionMode::Zero;
    else if (mode_name == "noise")
        omode = OcclusionMode::Noise;
    else
        throw ConfigError("correct.occlusion_mode must be zero or noise");
    const double vf = cfg.get_double("correct.variance_fraction");
    const int reps = detail::checked_int(cfg, "correct.timing_reps", 1, 1000);
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));

    const std::filesystem::path dir = detail::prepare_out_dir(cfg, out_dir);

    const detail::OccludedSplit train =
        detail::occluded_split(*model, train_d, probability, omode, seed, 101);
    const detail::OccludedSplit test =
        detail::occluded_split(*model, test_d, probability, omode, seed, 202);

    // Regressor training pairs: occluded maps against the configured target.
    const std::string& target_kind = cfg.get("correct.ghcu.target");
    LabelFile searched;
    if (target_kind == "labels") {
        std::ifstream is =
            detail::open_artifact(detail::required_path(cfg, "paths.labels"), "label file");
        searched = read_label_file(is);
    } else if (target_kind != "truth") {
        throw ConfigError("correct.ghcu.target must be truth or labels");
    }
    std::vector<GhcuSample> pairs;
    pairs.reserve(train_d.samples.size());
    for (std::size_t i = 0; i < train_d.samples.size(); ++i) {
        GhcuSample g;
        g.maps = train.maps[i];
        if (target_kind == "truth") {
            g.target = train_d.samples[i].truth;
        } else {
            auto it = searched.find(train_d.samples[i].id);
            if (it == searched.end() ||
                static_cast<int>(it->second.points.size()) != train_d.landmark_count)
                throw ArtifactError("label file does not cover the training set");
            g.target = it->second;
        }
        pairs.push_back(std::move(g));
    }
    TrainConfig gcfg_train;
    gcfg_train.learning_rate = cfg.get_double("correct.ghcu.learning_rate");
    gcfg_train.passes = detail::checked_int(cfg, "correct.ghcu.passes", 0, 1000000);
    gcfg_train.batch_size = detail::checked_int(cfg, "correct.ghcu.batch_size", 1, 1000000);
    gcfg_train.seed = seed;
    const GhcuModel ghcu =
        ghcu_train(ghcu_desk_config(train_d.landmark_count, train_d.width, train_d.height, seed),
                   pairs, gcfg_train);

    const ShapeModel shape = fit_aligned_shape_model(collect_truth(train_d), vf);

    // The pca method is the robust fit: the projection is re-estimated while
    // the worst-residual landmarks are progressively down-weighted, which is
    // what makes it competitive under occlusion (and what the timing measures).
    detail::MethodScore argmax_score, pca_score, ghcu_score;
    {
        double sa = 0, so = 0, pa = 0, po = 0, ga = 0, go = 0;
        std::size_t na = 0, no = 0, dummy_a = 0, dummy_o = 0;
        for (std::size_t i = 0; i < test_d.samples.size(); ++i) {
            const LandmarkSet truth = test_d.samples[i].truth;
            const LandmarkSet am = detail::decode_set(test.maps[i]);
            const LandmarkSet pc = robust_correct_shape(am, shape);
            const LandmarkSet gh = ghcu.forward(test.maps[i]);
            detail::accumulate_errors(am, truth, test.masks[i], sa, dummy_a, so, dummy_o);
            detail::accumulate_errors(pc, truth, test.masks[i], pa, dummy_a, po, dummy_o);
            detail::accumulate_errors(gh, truth, test.masks[i], ga, na, go, no);
        }
        if (na == 0) throw ConfigError("empty test split");
        argmax_score.err_all = sa / static_cast<double>(na);
        pca_score.err_all = pa / static_cast<double>(na);
        ghcu_score.err_all = ga / static_cast<double>(na);
        const double occ_n = no ? static_cast<double>(no) : 1.0;
        argmax_score.err_occluded = so / occ_n;
        pca_score.err_occluded = po / occ_n;
        ghcu_score.err_occluded = go / occ_n;
    }

    using clock = std::chrono::steady_clock;
    const auto ms_between = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double, std::milli>(b - a).count();
    };
    double t_argmax = 0, t_pca = 0, t_ghcu = 0;
    for (int rep = 0; rep < reps; ++rep) {
        for (std::size_t i = 0; i < test_d.samples.size(); ++i) {
            const auto a0 = clock::now();
            const LandmarkSet am = detail::decode_set(test.maps[i]);
            const auto a1 = clock::now();
            const LandmarkSet pc = robust_correct_shape(am, shape);
            const auto a2 = clock::now();
            const LandmarkSet gh = ghcu.forward(test.maps[i]);
            const auto a3 = clock::now();
            t_argmax += ms_between(a0, a1);
            t_pca += ms_between(a0, a2);  // decode feeds the fit, so it counts
            t_ghcu += ms_between(a2, a3);
            (void)pc;
            (void)gh;
        }
    }
    const double denom = static_cast<double>(test_d.samples.size()) * reps;
    argmax_score.ms_per_sample = t_argmax / denom;
    pca_score.ms_per_sample = t_pca / denom;
    ghcu_score.ms_per_sample = t_ghcu / denom;

    std::ostringstream csv;
    csv << "method,err_all,err_occluded,ms_per_sample\n";
    const auto row = [&csv](const char* name, const detail::MethodScore& m) {
        csv << name << ',' << format_double(m.err_all) << ',' << format_double(m.err_occluded)
            << ',' << format_double(m.ms_per_sample) << '\n';
    };
    row("argmax", argmax_score);
    row("pca", pca_score);
    row("ghcu", ghcu_score);
    detail::write_text(dir / "comparison.csv", csv.str());
    log << "correct: occluded err argmax=" << format_double(argmax_score.err_occluded)
        << " pca=" << format_double(pca_score.err_occluded)
        << " ghcu=" << format_double(ghcu_score.err_occluded)
        << " | ms/sample pca=" << format_double(pca_score.ms_per_sample)
        << " ghcu=" << format_double(ghcu_score.ms_per_sample) << '\n';
}

// ---- label-quality ----

inline void cmd_label_quality(const ConfigMap& cfg, const std::string& out_dir,
                              std::ostream& log) {
    const Dataset train_d = detail::load_dataset_at(detail::required_path(cfg, "paths.dataset"));
    const Dataset test_d =
        detail::load_dataset_at(detail::required_path(cfg, "paths.test_dataset"));
    LabelFile refined;
    {
        std::ifstream is =
            detail::open_artifact(detail::required_path(cfg, "paths.labels"), "label file");
        refined = read_label_file(is);
    }
    std::vector<LandmarkSet> refined_labels;
    refined_labels.reserve(train_d.samples.size());
    for (const ImageSample& s : train_d.samples) {
        auto it = refined.find(s.id);
        if (it == refined.end() ||
            static_cast<int>(it->second.points.size()) != train_d.landmark_count)
            throw ArtifactError("label file does not cover the training set");
        refined_labels.push_back(it->second);
    }

    const TrainConfig tcfg = detail::train_config_from(cfg);
    const Normalizer norm = detail::normalizer_from(cfg);
    const int pool = detail::checked_int(cfg, "predictor.pool", 1, 64);
    const int radius = detail::checked_int(cfg, "predictor.radius", 0, 64);
    const double sharpen = cfg.get_double("predictor.sharpen");
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));

    const std::filesystem::path dir = detail::prepare_out_dir(cfg, out_dir);

    // Two fresh predictors from the identical seed; only the labels differ.
    const auto train_on = [&](const std::vector<LandmarkSet>& labels) {
        TrainablePredictor model(train_d.landmark_count, train_d.width, train_d.height, seed,
                                 pool, radius, sharpen);
        for (int pass = 0; pass < tcfg.passes; ++pass) train_epoch(model, train_d, labels, tcfg);
        return detail::mean_test_nme(model, test_d, norm);
    };
    const double nme_annotations = train_on(collect_annotations(train_d));
    const double nme_refined = train_on(refined_labels);

    std::ostringstream csv;
    csv << "source,test_nme\n";
    csv << "annotations," << format_double(nme_annotations) << '\n';
    csv << "refined," << format_double(nme_refined) << '\n';
    detail::write_text(dir / "quality.csv", csv.str());
    log << "label-quality: annotations=" << format_double(nme_annotations)
        << " refined=" << format_double(nme_refined) << '\n';
}

inline int run_command(const std::string& verb, const ConfigMap& cfg, const std::string& out_dir,
                       std::ostream& log) {
    if (verb == "synth")
        cmd_synth(cfg, out_dir, log);
    else if (verb == "train-baseline")
        cmd_train_baseline(cfg, out_dir, log);
    else if (verb == "align")
        cmd_align(cfg, out_dir, log);
    else if (verb == "ablate")
        cmd_ablate(cfg, out_dir, log);
    else if (verb == "correct")
        cmd_correct(cfg, out_dir, log);
    else if (verb == "label-quality")
        cmd_label_quality(cfg, out_dir, log);
    else
        throw ConfigError("unknown command '" + verb + "'");
    return 0;
}

}  // namespace semalign
