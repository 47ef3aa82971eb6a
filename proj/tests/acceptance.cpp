// Acceptance suite: runs the release criteria end to end and prints one
// pass/fail line per criterion. Criteria can be selected by number on the
// command line; --cli PATH points at the command-line binary used by the
// determinism criterion.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "svcap/config.hpp"
#include "svcap/corpus.hpp"
#include "svcap/metrics.hpp"
#include "svcap/sdn.hpp"
#include "svcap/trainer.hpp"

using namespace svcap;
namespace fs = std::filesystem;

namespace {

std::string g_cli_path;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define REQUIRE_MSG(cond, msg)                                   \
    do {                                                         \
        if (!(cond)) {                                           \
            std::ostringstream oss_;                             \
            oss_ << msg;                                         \
            throw Failure(oss_.str());                           \
        }                                                        \
    } while (0)

// ---------------------------------------------------------------- shared

SyntheticData toy_dataset(double noise, uint64_t seed) {
    SynthSpec spec;
    spec.train_videos = 50;
    spec.val_videos = 10;
    spec.test_videos = 10;
    spec.captions_per_video = 3;
    spec.subjects = 5;
    spec.verbs = 5;
    spec.objects = 2;
    spec.dim_2d = 8;
    spec.dim_3d = 6;
    spec.noise = noise;
    spec.seed = seed;
    return generate_synthetic_dataset(spec);
}

SemanticMap all_tags_semantic(const SyntheticData& d) {
    SemanticMap all = tag_semantic_map(d.train);
    for (const Dataset* ds : {&d.val, &d.test}) {
        const SemanticMap part = tag_semantic_map(*ds);
        all.insert(part.begin(), part.end());
    }
    return all;
}

// ------------------------------------------------------- criterion 1

void criterion_overall_scores() {
    struct Row {
        double b4, c, m, r, overall;
    };
    // reported metrics of captioning systems on the YouTube2Text benchmark
    const std::vector<Row> t1 = {
        {54.5, 92.4, 36.0, 72.8, 0.8961}, {54.2, 88.2, 34.8, 71.7, 0.8740},
        {53.9, 91.0, 34.9, 72.1, 0.8811}, {48.6, 92.2, 35.1, 71.9, 0.8633},
        {52.8, 87.8, 36.1, 71.8, 0.8762}, {47.9, 78.1, 35.0, 71.5, 0.8264},
        {52.2, 93.0, 36.9, 73.9, 0.8975}, {46.5, 81.0, 33.5, 69.4, 0.8110},
        {54.3, 95.2, 36.4, 73.9, 0.9078}, {62.4, 109.7, 39.0, 77.0, 1.0000}};
    // reported metrics on the MSR-VTT benchmark
    const std::vector<Row> t2 = {
        {40.8, 47.1, 28.8, 60.2, 0.9223}, {40.5, 51.7, 28.4, 61.4, 0.9435},
        {40.9, 47.5, 27.5, 60.2, 0.9137}, {43.4, 49.7, 29.5, 61.8, 0.9608},
        {42.2, 48.9, 29.4, 62.0, 0.9505}, {41.3, 53.4, 28.7, 62.1, 0.9611},
        {40.4, 47.1, 28.1, 60.7, 0.9162}, {42.3, 49.1, 29.7, 62.8, 0.9576},
        {38.3, 48.1, 28.4, 60.7, 0.9119}, {40.5, 47.1, 28.3, 60.9, 0.9192},
        {39.9, 51.0, 27.7, 61.2, 0.9303}, {43.6, 50.9, 28.8, 62.1, 0.9628},
        {45.8, 53.2, 29.3, 63.6, 0.9957}};

    for (const auto* table : {&t1, &t2}) {
        MetricTops tops;
        tops.meteor = 0.0;
        for (const Row& row : *table) {
            tops.bleu4 = std::max(tops.bleu4, row.b4);
            tops.cider = std::max(tops.cider, row.c);
            tops.meteor = std::max(*tops.meteor, row.m);
            tops.rouge_l = std::max(tops.rouge_l, row.r);
        }
        for (size_t i = 0; i < table->size(); ++i) {
            const Row& row = (*table)[i];
            MetricReport rep;
            rep.bleu4 = row.b4;
            rep.cider = row.c;
            rep.meteor = row.m;
            rep.rouge_l = row.r;
            const double got = overall_score(rep, tops);
            REQUIRE_MSG(std::abs(got - row.overall) <= 0.00005,
                        "overall mismatch in row " << i << ": computed " << got << " vs expected "
                                                   << row.overall);
        }
    }
}

// ------------------------------------------------------- criterion 2

void criterion_scn_gradients() {
    int checked = 0;
    for (uint64_t seed = 0; checked < 10; ++seed) {
        SeededRng rng(9000 + seed);
        ScnDims d;
        d.hidden = 4 + static_cast<int>(rng.next_below(3));  // <= 6
        d.factor = 3 + static_cast<int>(rng.next_below(2));  // <= 4
        d.word_dim = 3 + static_cast<int>(rng.next_below(3));
        d.feature_dim = 4 + static_cast<int>(rng.next_below(4));
        d.tag_dim = 2 + static_cast<int>(rng.next_below(2));  // <= 3
        d.vocab = 6 + static_cast<int>(rng.next_below(5));    // <= 10
        const int len = 2 + static_cast<int>(rng.next_below(3));  // <= 4

        ScnParameters p = init_parameters(d, 7000 + seed);
        Vector v(d.feature_dim), s(d.tag_dim);
        for (double& x : v) x = rng.uniform(-1, 1);
        for (double& x : s) x = rng.uniform(0, 1);
        std::vector<int> targets(len), guide(len);
        for (int t = 0; t < len; ++t) {
            targets[t] = static_cast<int>(rng.next_below(d.vocab));
            guide[t] = static_cast<int>(rng.next_below(d.vocab));
        }
        if (seed % 2 == 0) guide = targets;  // alternate teacher and frozen sampled paths
        const double weight = 1.0 / std::pow(static_cast<double>(len), 0.7);

        ScnParameters grads = zeros_like(p);
        {
            const SequenceContext ctx = make_sequence_context(p, v, s);
            const SequenceResult fwd =
                forward_sequence(p, ctx, guide, 0.0, SampleMode::Argmax, nullptr, 30);
            backward_sequence(p, ctx, fwd, targets, weight, grads);
        }
        auto loss = [&]() {
            const SequenceContext ctx = make_sequence_context(p, v, s);
            const SequenceResult fwd =
                forward_sequence(p, ctx, guide, 0.0, SampleMode::Argmax, nullptr, 30);
            double lp = 0;
            for (size_t t = 0; t < fwd.steps.size(); ++t)
                lp += std::log(fwd.steps[t].dist[targets[t]]);
            return -weight * lp;
        };
        const auto bad = gradcheck::check_all(p.param_views(), grads.param_views(), loss);
        REQUIRE_MSG(bad.ok, "seed " << seed << " block " << bad.block << " index " << bad.index
                                    << ": analytic " << bad.analytic << " vs numeric "
                                    << bad.numeric);
        ++checked;
    }
}

// ------------------------------------------------------- criterion 3

void criterion_sdn_gradients() {
    int checked = 0;
    for (uint64_t seed = 0; checked < 20; ++seed) {
        SeededRng rng(4000 + seed);
        const int in = 4 + static_cast<int>(rng.next_below(4));
        const int h1 = 5 + static_cast<int>(rng.next_below(4));  // <= 8
        const int h2 = 4 + static_cast<int>(rng.next_below(4));
        const int k = 2 + static_cast<int>(rng.next_below(3));
        SdnParameters p = sdn_init({in, h1, h2, k}, rng);

        std::vector<Vector> xs;
        std::vector<std::vector<int>> ys;
        for (int n = 0; n < 3; ++n) {
            Vector x(in);
            for (double& val : x) val = rng.uniform(-1.5, 1.5);
            std::vector<int> y(k);
            for (int& t : y) t = rng.uniform() < 0.5;
            xs.push_back(x);
            ys.push_back(y);
        }
        // stay away from the rectifier kink
        bool near_kink = false;
        for (const auto& x : xs) {
            Vector a = x;
            for (size_t l = 0; l + 1 < p.w.size(); ++l) {
                Vector z = matvec(p.w[l], a);
                for (size_t i = 0; i < z.size(); ++i) {
                    z[i] += p.b[l][i];
                    if (std::abs(z[i]) < 1e-3) near_kink = true;
                }
                for (double& val : z) val = val > 0 ? val : 0;
                a = z;
            }
        }
        if (near_kink) continue;

        SdnParameters grads;
        for (const auto& w : p.w) grads.w.emplace_back(w.rows, w.cols);
        for (const auto& b : p.b) grads.b.emplace_back(b.size(), 0.0);
        sdn_backward(p, xs, ys, 1e-7, grads);
        auto loss = [&]() {
            std::vector<Vector> s;
            for (const auto& x : xs) s.push_back(sdn_forward(p, x));
            return sdn_bce_loss(s, ys, 1e-7);
        };
        const auto bad = gradcheck::check_all(p.param_views(), grads.param_views(), loss);
        REQUIRE_MSG(bad.ok, "seed " << seed << " block " << bad.block << " index " << bad.index
                                    << ": analytic " << bad.analytic << " vs numeric "
                                    << bad.numeric);
        ++checked;
    }
}

// ------------------------------------------------------- criterion 4

void criterion_oracles() {
    SeededRng rng(1);

    // scn step
    for (int inst = 0; inst < 20; ++inst) {
        ScnDims d;
        d.hidden = 3 + static_cast<int>(rng.next_below(4));
        d.factor = 2 + static_cast<int>(rng.next_below(3));
        d.word_dim = 2 + static_cast<int>(rng.next_below(3));
        d.feature_dim = 3 + static_cast<int>(rng.next_below(4));
        d.tag_dim = 2 + static_cast<int>(rng.next_below(2));
        d.vocab = 5;
        const ScnParameters p = init_parameters(d, 100 + inst);
        Vector x(d.word_dim), v(d.feature_dim), s(d.tag_dim);
        CellState prev(d.hidden);
        for (double& t : x) t = rng.uniform(-2, 2);
        for (double& t : v) t = rng.uniform(-2, 2);
        for (double& t : s) t = rng.uniform(0, 1);
        for (double& t : prev.h) t = rng.uniform(-1, 1);
        for (double& t : prev.c) t = rng.uniform(-1, 1);
        auto [got, trace] = scn_step(p, x, v, s, prev);
        const oracles::StepOut want = oracles::scn_step(p, x, v, s, prev.h, prev.c);
        for (int j = 0; j < d.hidden; ++j) {
            REQUIRE_MSG(std::abs(got.h[j] - want.h[j]) <= 1e-9, "scn_step h mismatch " << inst);
            REQUIRE_MSG(std::abs(got.c[j] - want.c[j]) <= 1e-9, "scn_step c mismatch " << inst);
        }
    }

    // caption metrics
    for (int inst = 0; inst < 20; ++inst) {
        const int videos = 3 + static_cast<int>(rng.next_below(4));
        std::vector<TokenSeq> cands;
        std::vector<RefSet> refs;
        for (int i = 0; i < videos; ++i) {
            auto sent = [&](int lo, int hi) {
                TokenSeq s(lo + rng.next_below(hi - lo + 1));
                for (int& t : s) t = static_cast<int>(rng.next_below(7));
                return s;
            };
            cands.push_back(sent(3, 8));
            RefSet rs;
            for (size_t r = 0; r < 1 + rng.next_below(3); ++r) rs.push_back(sent(3, 9));
            refs.push_back(std::move(rs));
        }
        REQUIRE_MSG(std::abs(bleu4(cands, refs) - oracles::bleu4(cands, refs)) <= 1e-9,
                    "bleu4 oracle mismatch " << inst);
        REQUIRE_MSG(std::abs(rouge_l(cands, refs) - oracles::rouge_l(cands, refs)) <= 1e-9,
                    "rouge_l oracle mismatch " << inst);
        REQUIRE_MSG(std::abs(cider(cands, refs) - oracles::cider(cands, refs)) <= 1e-9,
                    "cider oracle mismatch " << inst);
    }

    // mean average precision
    for (int inst = 0; inst < 20; ++inst) {
        const int samples = 4 + static_cast<int>(rng.next_below(6));
        const int tags = 2 + static_cast<int>(rng.next_below(4));
        std::vector<Vector> scores(samples, Vector(tags));
        std::vector<std::vector<int>> truth(samples, std::vector<int>(tags));
        bool any = false;
        for (int i = 0; i < samples; ++i)
            for (int j = 0; j < tags; ++j) {
                scores[i][j] = rng.uniform();
                truth[i][j] = rng.uniform() < 0.35;
                any |= truth[i][j] == 1;
            }
        if (!any) truth[0][0] = 1;
        REQUIRE_MSG(std::abs(mean_average_precision(scores, truth) -
                             oracles::mean_ap(scores, truth)) <= 1e-9,
                    "mAP oracle mismatch " << inst);
    }

    // adam trajectories
    for (int inst = 0; inst < 20; ++inst) {
        const int n = 1 + static_cast<int>(rng.next_below(5));
        Vector x(n);
        std::vector<double> ox(n);
        for (int i = 0; i < n; ++i) ox[i] = x[i] = rng.uniform(-2, 2);
        std::vector<ParamView> pv = {{"x", x.data(), static_cast<size_t>(n)}};
        AdamState st = AdamState::like(pv);
        AdamConfig cfg;
        cfg.clip_norm = 0.0;
        oracles::AdamScalar oracle;
        for (int step = 0; step < 4; ++step) {
            Vector g(n);
            std::vector<double> og(n);
            for (int i = 0; i < n; ++i) og[i] = g[i] = rng.uniform(-1, 1);
            std::vector<ParamView> gv = {{"x", g.data(), static_cast<size_t>(n)}};
            adam_update(pv, gv, st, 0.05, cfg);
            oracle.step(ox, og, 0.05, cfg.beta1, cfg.beta2, cfg.epsilon);
        }
        for (int i = 0; i < n; ++i)
            REQUIRE_MSG(std::abs(x[i] - ox[i]) <= 1e-9, "adam oracle mismatch " << inst);
    }

    // length-modulated loss
    for (int inst = 0; inst < 20; ++inst) {
        const int n = 1 + static_cast<int>(rng.next_below(5));
        std::vector<double> lps(n);
        std::vector<int> lens(n);
        for (int i = 0; i < n; ++i) {
            lps[i] = -rng.uniform(0.1, 15.0);
            lens[i] = 1 + static_cast<int>(rng.next_below(9));
        }
        const double beta = rng.uniform(0, 1.5);
        REQUIRE_MSG(std::abs(length_modulated_loss(lps, lens, beta) -
                             oracles::length_loss(lps, lens, beta)) <= 1e-9,
                    "length loss oracle mismatch " << inst);
    }
}

// ------------------------------------------------------- criterion 5

void criterion_strategy_reduction() {
    const SyntheticData d = toy_dataset(0.0, 21);
    const SemanticMap semantic = all_tags_semantic(d);

    TrainConfig cfg;
    cfg.hidden = 16;
    cfg.factor = 12;
    cfg.word_dim = 8;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.epsilon_rate = 0.0;
    cfg.seed = 5;

    std::vector<std::vector<double>> traces;
    for (Strategy strat : {Strategy::TeacherForcing, Strategy::ScheduledArgmax,
                           Strategy::ScheduledMultinomial}) {
        TrainConfig c = cfg;
        c.strategy = strat;
        const TrainResult r = train_captioner(d.train, d.val, semantic, c);
        std::vector<double> losses;
        for (const auto& rec : r.trace) losses.push_back(rec.loss);
        traces.push_back(std::move(losses));
    }
    REQUIRE_MSG(traces[0] == traces[1],
                "scheduled_argmax trace differs from teacher forcing at epsilon rate 0");
    REQUIRE_MSG(traces[0] == traces[2],
                "scheduled_multinomial trace differs from teacher forcing at epsilon rate 0");
}

// ------------------------------------------------------- criterion 6

void criterion_toy_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    const SyntheticData d = toy_dataset(0.0, 6);

    SdnConfig scfg;
    scfg.hidden = {64};
    scfg.epochs = 120;
    scfg.batch_size = 16;
    scfg.learning_rate = 3e-3;
    scfg.seed = 61;
    const SdnTrainResult sdn = sdn_train(d.train, d.val, scfg);

    SemanticMap semantic;
    for (const Dataset* ds : {&d.train, &d.val, &d.test}) {
        const auto preds = sdn_predict(sdn.params, *ds, scfg.feature_set);
        for (size_t i = 0; i < ds->videos.size(); ++i) semantic[ds->videos[i].id] = preds[i];
    }

    TrainConfig cfg;
    cfg.strategy = Strategy::ScheduledMultinomial;
    cfg.beta = 0.7;
    cfg.epochs = 200;
    cfg.batch_size = 16;
    cfg.learning_rate = 2e-3;
    cfg.seed = 62;
    const TrainResult r = train_captioner(d.train, d.val, semantic, cfg);

    const double acc = token_accuracy(r.best.params, d.test, semantic, cfg.max_caption_len);
    const SplitEvaluation eval =
        evaluate_split(r.best.params, d.test, semantic, cfg.max_caption_len);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::cout << "    sdn mAP " << sdn.best_map << ", token accuracy " << acc << ", BLEU-4 "
              << eval.metrics.bleu4 << ", " << secs << " s\n";
    REQUIRE_MSG(acc >= 0.99, "test token accuracy " << acc << " < 0.99");
    REQUIRE_MSG(eval.metrics.bleu4 >= 0.95, "test BLEU-4 " << eval.metrics.bleu4 << " < 0.95");
    REQUIRE_MSG(secs < 300.0, "runtime " << secs << " s exceeds 5 minutes");
}

// ------------------------------------------------------- criterion 7

// The ordering experiment needs the semantic feature to carry signal the
// visual feature cannot supply: the features are jittered, the test split
// holds subject/verb/object combinations unseen in training, and the
// semantic vectors are tag ground truth with per-label noise.
SyntheticData ordering_dataset() {
    SynthSpec spec;
    spec.train_videos = 55;
    spec.val_videos = 12;
    spec.test_videos = 13;
    spec.captions_per_video = 3;
    spec.subjects = 5;
    spec.verbs = 7;
    spec.objects = 2;
    spec.dim_2d = 8;
    spec.dim_3d = 6;
    spec.noise = 0.0;
    spec.feature_jitter = 0.5;
    spec.seed = 71;
    return generate_synthetic_dataset(spec);
}

SemanticMap degraded_semantic(const SyntheticData& d, double flip_rate, uint64_t seed,
                              double* map_out) {
    SeededRng rng(seed);
    SemanticMap out;
    std::vector<Vector> scores;
    std::vector<std::vector<int>> truth;
    for (const Dataset* ds : {&d.train, &d.val, &d.test}) {
        for (const auto& rec : ds->videos) {
            const auto y = tag_ground_truth(rec, *ds->tags, *ds->vocab);
            Vector s(y.size());
            for (size_t j = 0; j < y.size(); ++j) {
                const int bit = rng.uniform() < flip_rate ? (rng.uniform() < 0.5 ? 1 : 0) : y[j];
                s[j] = bit ? rng.uniform(0.85, 0.95) : rng.uniform(0.05, 0.15);
            }
            scores.push_back(s);
            truth.push_back(y);
            out[rec.id] = std::move(s);
        }
    }
    *map_out = mean_average_precision(scores, truth);
    return out;
}

void criterion_semantic_ordering() {
    const SyntheticData d = ordering_dataset();
    const std::vector<double> flip_rates = {0.65, 0.3, 0.02};

    std::vector<double> maps(flip_rates.size());
    std::vector<MetricReport> reports;
    for (size_t run = 0; run < flip_rates.size(); ++run) {
        const SemanticMap semantic = degraded_semantic(d, flip_rates[run], 900 + run, &maps[run]);

        TrainConfig cfg;
        cfg.strategy = Strategy::ScheduledMultinomial;
        cfg.beta = 0.7;
        cfg.hidden = 32;
        cfg.factor = 32;
        cfg.word_dim = 16;
        cfg.epochs = 120;
        cfg.batch_size = 16;
        cfg.learning_rate = 2e-3;
        cfg.seed = 72;  // fixed across the three runs
        const TrainResult r = train_captioner(d.train, d.val, semantic, cfg);
        reports.push_back(
            evaluate_split(r.best.params, d.test, semantic, cfg.max_caption_len).metrics);
    }

    REQUIRE_MSG(maps[0] < maps[1] && maps[1] < maps[2],
                "mAP degradation not strictly increasing: " << maps[0] << ", " << maps[1] << ", "
                                                            << maps[2]);
    REQUIRE_MSG(maps[0] > 0.2 && maps[0] < 0.45, "low-quality mAP off target: " << maps[0]);
    REQUIRE_MSG(maps[1] > 0.5 && maps[1] < 0.75, "mid-quality mAP off target: " << maps[1]);
    REQUIRE_MSG(maps[2] > 0.9, "high-quality mAP off target: " << maps[2]);

    MetricTops tops;
    for (const auto& rep : reports) {
        tops.bleu4 = std::max(tops.bleu4, rep.bleu4);
        tops.cider = std::max(tops.cider, rep.cider);
        tops.rouge_l = std::max(tops.rouge_l, rep.rouge_l);
    }
    std::vector<double> overall;
    std::cout << "    mAP     B-4     C       R       Overall\n";
    for (size_t run = 0; run < reports.size(); ++run) {
        overall.push_back(overall_score(reports[run], tops));
        std::printf("    %.4f  %.4f  %.4f  %.4f  %.4f\n", maps[run], reports[run].bleu4,
                    reports[run].cider, reports[run].rouge_l, overall.back());
    }
    REQUIRE_MSG(overall[0] <= overall[1] && overall[1] <= overall[2],
                "overall not non-decreasing: " << overall[0] << ", " << overall[1] << ", "
                                               << overall[2]);
}

// ------------------------------------------------------- criterion 8

void criterion_length_ordering() {
    const std::vector<double> betas = {0.0, 0.7, 1.0};
    const std::vector<uint64_t> seeds = {81, 82, 83};
    std::vector<double> mean_len(betas.size(), 0.0);

    for (uint64_t seed : seeds) {
        SynthSpec spec;
        spec.train_videos = 50;
        spec.val_videos = 10;
        spec.test_videos = 10;
        spec.captions_per_video = 5;
        spec.subjects = 5;
        spec.verbs = 5;
        spec.objects = 2;
        spec.dim_2d = 8;
        spec.dim_3d = 6;
        spec.noise = 0.6;
        spec.seed = seed;
        const SyntheticData d = generate_synthetic_dataset(spec);
        const SemanticMap semantic = all_tags_semantic(d);
        for (size_t bi = 0; bi < betas.size(); ++bi) {
            // teacher forcing at a fixed epoch budget isolates the effect of
            // the loss weighting on the converged model; the final state is
            // compared rather than the validation-selected checkpoint
            TrainConfig cfg;
            cfg.strategy = Strategy::TeacherForcing;
            cfg.beta = betas[bi];
            cfg.hidden = 32;
            cfg.factor = 32;
            cfg.word_dim = 16;
            cfg.epochs = 150;
            cfg.batch_size = 16;
            cfg.learning_rate = 2e-3;
            cfg.seed = seed;
            const TrainResult r = train_captioner(d.train, d.val, semantic, cfg);
            const SplitEvaluation eval =
                evaluate_split(r.last.params, d.test, semantic, cfg.max_caption_len);
            mean_len[bi] += caption_length_stats(eval.candidates) / seeds.size();
        }
    }
    std::printf("    mean lengths: beta 0 -> %.3f, beta 0.7 -> %.3f, beta 1 -> %.3f\n",
                mean_len[0], mean_len[1], mean_len[2]);
    REQUIRE_MSG(mean_len[0] <= mean_len[1] + 0.1,
                "mLen(0) " << mean_len[0] << " exceeds mLen(0.7) " << mean_len[1] << " + 0.1");
    REQUIRE_MSG(mean_len[1] <= mean_len[2] + 0.1,
                "mLen(0.7) " << mean_len[1] << " exceeds mLen(1) " << mean_len[2] << " + 0.1");
}

// ------------------------------------------------------- criterion 9

void criterion_schedule_values() {
    for (int ep = 0; ep <= 125; ++ep)
        REQUIRE_MSG(epsilon_for_epoch(ep, 0.008) == ep * 0.008,
                    "epsilon(" << ep << ") != ep*0.008");
    for (int ep = 126; ep <= 400; ++ep)
        REQUIRE_MSG(epsilon_for_epoch(ep, 0.008) == 1.0, "epsilon(" << ep << ") != 1");
    for (long k = 0; k <= 3; ++k) {
        const double want = 4e-4 * std::pow(0.316, static_cast<double>(k));
        REQUIRE_MSG(lr_for_step(k * 20350, 4e-4, 0.316, 20350) == want,
                    "lr at step " << k * 20350 << " mismatch");
        if (k > 0)
            REQUIRE_MSG(lr_for_step(k * 20350 - 1, 4e-4, 0.316, 20350) ==
                            4e-4 * std::pow(0.316, static_cast<double>(k - 1)),
                        "lr just before step " << k * 20350 << " mismatch");
    }
}

// ------------------------------------------------------- criterion 10

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MSG(in.good(), "missing output file " << p);
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

void criterion_cli_determinism() {
    REQUIRE_MSG(!g_cli_path.empty(), "pass --cli <path-to-binary>");
    const fs::path work = fs::temp_directory_path() / "svcap_acceptance_cli";
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path out = work / "run";

    const std::string config = R"({
  "seed": 17,
  "synth": {"train_videos": 12, "val_videos": 4, "test_videos": 4,
            "captions_per_video": 2, "subjects": 2, "verbs": 2, "objects": 2,
            "dim_2d": 6, "dim_3d": 4, "noise": 0.3},
  "sdn": {"hidden": [16], "epochs": 4, "batch_size": 8, "learning_rate": 3e-3},
  "decoder": {"hidden": 12, "factor": 10, "word_dim": 8},
  "train": {"strategy": "scheduled_multinomial", "epochs": 3, "batch_size": 8,
            "learning_rate": 2e-3}
})";
    {
        std::ofstream cfg(work / "config.json");
        cfg << config;
    }

    auto run = [&](const std::string& args) {
        const std::string cmd = g_cli_path + " " + args + " --config " +
                                (work / "config.json").string() + " --out " + out.string() +
                                " >/dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        REQUIRE_MSG(rc == 0, "command failed (" << rc << "): " << cmd);
    };
    auto run_all = [&]() {
        run("synth-data");
        run("train-sdn");
        run("train-caption");
        run("evaluate --split test");
        run("generate --features " + (out / "data" / "test_features.jsonl").string() +
            " --semantic " + (out / "sdn" / "semantic_test.jsonl").string());
    };

    const std::vector<fs::path> outputs = {
        out / "data" / "train_features.jsonl", out / "data" / "train_captions.jsonl",
        out / "data" / "val_features.jsonl",   out / "data" / "val_captions.jsonl",
        out / "data" / "test_features.jsonl",  out / "data" / "test_captions.jsonl",
        out / "data" / "vocab.txt",            out / "data" / "tags.txt",
        out / "sdn" / "sdn_checkpoint.json",   out / "sdn" / "sdn_map_trace.jsonl",
        out / "sdn" / "semantic_train.jsonl",  out / "sdn" / "semantic_val.jsonl",
        out / "sdn" / "semantic_test.jsonl",   out / "caption" / "decoder_checkpoint.json",
        out / "caption" / "metric_trace.jsonl", out / "report_test.json",
        out / "generated.jsonl"};

    run_all();
    std::map<std::string, std::string> first;
    for (const auto& p : outputs) first[p.string()] = slurp(p);

    run_all();
    for (const auto& p : outputs)
        REQUIRE_MSG(first.at(p.string()) == slurp(p), "output differs between runs: " << p);

    // evaluating the stored checkpoint on the validation split reproduces
    // the metric trace's best-epoch row exactly
    run("evaluate --split val");
    const nlohmann::json ckpt =
        nlohmann::json::parse(slurp(out / "caption" / "decoder_checkpoint.json"));
    const int best_epoch = ckpt.at("epoch").get<int>();
    nlohmann::json trace_row;
    {
        std::istringstream lines(slurp(out / "caption" / "metric_trace.jsonl"));
        std::string line;
        while (std::getline(lines, line)) {
            const auto row = nlohmann::json::parse(line);
            if (row.at("epoch").get<int>() == best_epoch) trace_row = row;
        }
    }
    REQUIRE_MSG(!trace_row.is_null(), "best epoch " << best_epoch << " missing from trace");
    const nlohmann::json report = nlohmann::json::parse(slurp(out / "report_val.json"));
    for (const char* key : {"bleu4", "rouge_l", "cider"})
        REQUIRE_MSG(report.at(key).get<double>() == trace_row.at(key).get<double>(),
                    "evaluate does not reproduce the trace at best epoch for " << key);

    // exit codes: 1 for config errors, 2 for data errors
    const int rc_cfg = std::system((g_cli_path + " synth-data --config " +
                                    (work / "bad.json").string() + " >/dev/null 2>&1")
                                       .c_str());
    {
        std::ofstream bad(work / "bad.json");
        bad << R"({"unknown_key": 1})";
    }
    const int rc_unknown = std::system((g_cli_path + " synth-data --config " +
                                        (work / "bad.json").string() + " >/dev/null 2>&1")
                                           .c_str());
    REQUIRE_MSG(WEXITSTATUS(rc_cfg) == 1, "missing config file should exit 1");
    REQUIRE_MSG(WEXITSTATUS(rc_unknown) == 1, "unknown config key should exit 1");
    const int rc_data = std::system((g_cli_path + " train-sdn --config " +
                                     (work / "config.json").string() + " --out " +
                                     (work / "empty").string() + " >/dev/null 2>&1")
                                        .c_str());
    REQUIRE_MSG(WEXITSTATUS(rc_data) == 2, "missing dataset should exit 2");

    fs::remove_all(work);
}

// ----------------------------------------------------------------- main

struct Criterion {
    int id;
    const char* name;
    std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) {
            g_cli_path = argv[++i];
        } else {
            selected.push_back(std::atoi(arg.c_str()));
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "overall-score reproduction", criterion_overall_scores},
        {2, "scn gradient suite", criterion_scn_gradients},
        {3, "sdn gradient suite", criterion_sdn_gradients},
        {4, "oracle equivalence", criterion_oracles},
        {5, "strategy reduction at epsilon 0", criterion_strategy_reduction},
        {6, "toy convergence", criterion_toy_convergence},
        {7, "semantic-quality ordering", criterion_semantic_ordering},
        {8, "caption length ordering", criterion_length_ordering},
        {9, "schedule values", criterion_schedule_values},
        {10, "cli determinism", criterion_cli_determinism},
    };

    int failures = 0;
    for (const auto& crit : criteria) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), crit.id) == selected.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        std::string error;
        try {
            crit.run();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%-4s criterion %2d: %s (%.1f s)\n", error.empty() ? "PASS" : "FAIL", crit.id,
                    crit.name, secs);
        if (!error.empty()) {
            std::printf("     %s\n", error.c_str());
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}
