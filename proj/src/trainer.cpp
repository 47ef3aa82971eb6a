#include "svcap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace svcap {

using nlohmann::json;

Strategy strategy_from_string(const std::string& s) {
    if (s == "teacher_forcing") return Strategy::TeacherForcing;
    if (s == "scheduled_argmax") return Strategy::ScheduledArgmax;
    if (s == "scheduled_multinomial") return Strategy::ScheduledMultinomial;
    throw std::invalid_argument("unknown training strategy: " + s);
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::TeacherForcing: return "teacher_forcing";
        case Strategy::ScheduledArgmax: return "scheduled_argmax";
        default: return "scheduled_multinomial";
    }
}

double epsilon_for_epoch(int ep, double rate, double cap) {
    if (ep < 0) throw std::invalid_argument("epsilon_for_epoch: epoch must be >= 0");
    return std::min(cap, ep * rate);
}

double sequence_log_prob(const std::vector<Vector>& dists, const std::vector<int>& targets) {
    if (dists.size() != targets.size())
        throw std::invalid_argument("sequence_log_prob: " + std::to_string(dists.size()) +
                                    " distributions vs " + std::to_string(targets.size()) +
                                    " targets");
    double lp = 0.0;
    for (size_t t = 0; t < dists.size(); ++t)
        lp += std::log(std::max(dists[t].at(targets[t]), 1e-12));
    return lp;
}

double length_modulated_loss(const std::vector<double>& log_probs,
                             const std::vector<int>& lengths, double beta) {
    if (log_probs.size() != lengths.size())
        throw std::invalid_argument("length_modulated_loss: size mismatch");
    if (beta < 0.0) throw std::invalid_argument("length_modulated_loss: beta must be >= 0");
    double loss = 0.0;
    for (size_t i = 0; i < log_probs.size(); ++i) {
        if (lengths[i] < 1) throw std::invalid_argument("length_modulated_loss: length must be >= 1");
        loss -= log_probs[i] / std::pow(static_cast<double>(lengths[i]), beta);
    }
    return loss;
}

std::vector<RefSet> split_references(const Dataset& ds) {
    std::vector<RefSet> refs;
    refs.reserve(ds.videos.size());
    for (const auto& rec : ds.videos) {
        RefSet rs;
        for (const auto& cap : rec.captions) {
            TokenSeq t;
            for (int id : cap)
                if (id != Vocabulary::kEos) t.push_back(id);
            rs.push_back(std::move(t));
        }
        refs.push_back(std::move(rs));
    }
    return refs;
}

SemanticMap tag_semantic_map(const Dataset& ds, double hi, double lo) {
    SemanticMap out;
    for (const auto& rec : ds.videos) {
        const auto truth = tag_ground_truth(rec, *ds.tags, *ds.vocab);
        Vector s(truth.size());
        for (size_t j = 0; j < truth.size(); ++j) s[j] = truth[j] ? hi : lo;
        out[rec.id] = std::move(s);
    }
    return out;
}

namespace {

const Vector& semantic_for(const SemanticMap& semantic, const std::string& id) {
    auto it = semantic.find(id);
    if (it == semantic.end())
        throw std::invalid_argument("no semantic feature for video id " + id);
    return it->second;
}

// per-metric maxima over a set of epoch records; zero tops drop out of the
// overall mean
struct TraceTops {
    double bleu4 = 0.0, cider = 0.0, rouge_l = 0.0;
    std::optional<double> meteor;
};

TraceTops tops_of(const std::vector<EpochRecord>& trace) {
    TraceTops tops;
    for (const auto& r : trace) {
        tops.bleu4 = std::max(tops.bleu4, r.metrics.bleu4);
        tops.cider = std::max(tops.cider, r.metrics.cider);
        tops.rouge_l = std::max(tops.rouge_l, r.metrics.rouge_l);
        if (r.metrics.meteor)
            tops.meteor = std::max(tops.meteor.value_or(0.0), *r.metrics.meteor);
    }
    return tops;
}

double overall_vs_tops(const MetricReport& m, const TraceTops& tops) {
    double sum = 0.0;
    int n = 0;
    auto acc = [&](double v, double top) {
        if (top > 0.0) {
            sum += v / top;
            ++n;
        }
    };
    acc(m.bleu4, tops.bleu4);
    acc(m.cider, tops.cider);
    if (m.meteor && tops.meteor) acc(*m.meteor, *tops.meteor);
    acc(m.rouge_l, tops.rouge_l);
    return n ? sum / n : 0.0;
}

// Retention order for checkpoint snapshots: at least as good on every
// validation metric and no worse on training loss. The toy-scale splits
// saturate the metrics quickly, so the loss breaks the resulting ties.
bool dominates(const EpochRecord& a, const EpochRecord& b) {
    return a.metrics.bleu4 >= b.metrics.bleu4 && a.metrics.cider >= b.metrics.cider &&
           a.metrics.rouge_l >= b.metrics.rouge_l && a.loss <= b.loss;
}

}  // namespace

TrainResult train_captioner(const Dataset& train, const Dataset& val,
                            const SemanticMap& semantic, const TrainConfig& cfg,
                            const std::string& fingerprint,
                            std::optional<double> injected_meteor) {
    if (train.videos.empty() || val.videos.empty())
        throw std::invalid_argument("train_captioner: train and validation splits must be non-empty");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_captioner: batch size must be >= 1");

    SeededRng master(cfg.seed);
    SeededRng shuffle_rng = master.fork(2);
    SeededRng sample_rng = master.fork(3);

    ScnDims dims;
    dims.hidden = cfg.hidden;
    dims.factor = cfg.factor;
    dims.word_dim = cfg.word_dim;
    dims.feature_dim = train.dim_v();
    dims.tag_dim = static_cast<int>(semantic_for(semantic, train.videos[0].id).size());
    dims.vocab = train.vocab->size();

    TrainResult result;
    result.best.params = init_parameters(dims, master.fork(1).seed());
    result.best.adam = AdamState::like(result.best.params.param_views());
    result.best.config_fingerprint = fingerprint;
    result.last = result.best;
    if (cfg.epochs == 0) return result;

    // per-video constants
    std::vector<Vector> video_v;
    video_v.reserve(train.videos.size());
    for (const auto& rec : train.videos) video_v.push_back(concat_features(rec.res2d, rec.res3d));

    struct Sample {
        int video;
        int caption;
    };
    std::vector<Sample> samples;
    for (size_t i = 0; i < train.videos.size(); ++i)
        for (size_t c = 0; c < train.videos[i].captions.size(); ++c)
            samples.push_back({static_cast<int>(i), static_cast<int>(c)});
    if (samples.empty()) throw std::invalid_argument("train_captioner: no training captions");

    ScnParameters params = result.best.params;
    AdamState adam = AdamState::like(params.param_views());
    ScnParameters grads = zeros_like(params);

    const SampleMode mode = cfg.strategy == Strategy::ScheduledArgmax ? SampleMode::Argmax
                                                                      : SampleMode::Multinomial;
    const bool scheduled = cfg.strategy != Strategy::TeacherForcing;

    struct Snapshot {
        ScnParameters params;
        AdamState adam;
        EpochRecord rec;
    };
    std::vector<Snapshot> front;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double eps =
            scheduled ? epsilon_for_epoch(epoch, cfg.epsilon_rate, cfg.epsilon_max) : 0.0;
        for (size_t i = samples.size(); i > 1; --i)
            std::swap(samples[i - 1], samples[shuffle_rng.next_below(i)]);

        double epoch_loss = 0.0;
        for (size_t start = 0; start < samples.size(); start += cfg.batch_size) {
            const size_t end = std::min(samples.size(), start + cfg.batch_size);
            grads.zero();
            double batch_loss = 0.0;
            for (size_t k = start; k < end; ++k) {
                const Sample& smp = samples[k];
                const VideoRecord& rec = train.videos[smp.video];
                const std::vector<int>& caption = rec.captions[smp.caption];
                std::vector<int> targets = caption;
                if (static_cast<int>(targets.size()) > cfg.max_caption_len)
                    targets.resize(cfg.max_caption_len);

                const SequenceContext ctx =
                    make_sequence_context(params, video_v[smp.video], semantic_for(semantic, rec.id));
                const SequenceResult fwd =
                    forward_sequence(params, ctx, targets, scheduled ? eps : 0.0, mode,
                                     scheduled ? &sample_rng : nullptr, cfg.max_caption_len);

                double lp = 0.0;
                for (size_t t = 0; t < fwd.steps.size(); ++t)
                    lp += std::log(std::max(fwd.steps[t].dist[targets[t]], 1e-12));
                const double w = 1.0 / std::pow(static_cast<double>(targets.size()), cfg.beta);
                batch_loss -= w * lp;
                backward_sequence(params, ctx, fwd, targets, w, grads);
            }
            if (!std::isfinite(batch_loss))
                throw DivergenceError("train_captioner: non-finite loss at epoch " +
                                      std::to_string(epoch) + ", step " + std::to_string(adam.step));
            const double lr =
                lr_for_step(adam.step, cfg.learning_rate, cfg.lr_decay_factor, cfg.lr_decay_interval);
            adam_update(params.param_views(), grads.param_views(), adam, lr, cfg.adam);
            epoch_loss += batch_loss;
        }

        SplitEvaluation eval = evaluate_split(params, val, semantic, cfg.max_caption_len,
                                              injected_meteor);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = epoch_loss;
        rec.epsilon = eps;
        rec.metrics = eval.metrics;
        result.trace.push_back(rec);

        // keep only epochs on the (metrics, loss) Pareto front; the best
        // checkpoint under the selection rule is always among them
        bool dominated = false;
        for (const auto& snap : front)
            if (dominates(snap.rec, rec)) {
                dominated = true;
                break;
            }
        if (!dominated) {
            front.erase(std::remove_if(front.begin(), front.end(),
                                       [&](const Snapshot& snap) {
                                           return dominates(rec, snap.rec);
                                       }),
                        front.end());
            front.push_back({params, adam, rec});
        }
    }

    const TraceTops tops = tops_of(result.trace);
    for (auto& rec : result.trace) rec.metrics.overall = overall_vs_tops(rec.metrics, tops);

    // maximal overall score; ties resolve to lower training loss, then to
    // the earlier epoch
    const Snapshot* best = nullptr;
    double best_overall = -1.0;
    for (const auto& snap : front) {
        const double ov = overall_vs_tops(snap.rec.metrics, tops);
        const bool better =
            !best || ov > best_overall ||
            (ov == best_overall && (snap.rec.loss < best->rec.loss ||
                                    (snap.rec.loss == best->rec.loss &&
                                     snap.rec.epoch < best->rec.epoch)));
        if (better) {
            best_overall = ov;
            best = &snap;
        }
    }
    result.best.params = best->params;
    result.best.adam = best->adam;
    result.best.epoch = best->rec.epoch;
    result.best.validation = best->rec;
    result.best.validation.metrics.overall = best_overall;

    result.last.params = std::move(params);
    result.last.adam = std::move(adam);
    result.last.epoch = cfg.epochs - 1;
    result.last.config_fingerprint = fingerprint;
    result.last.validation = result.trace.back();
    return result;
}

std::vector<int> generate_caption(const ScnParameters& params, const Vector& v, const Vector& s,
                                  SampleMode mode, int max_len, SeededRng* rng) {
    const SequenceContext ctx = make_sequence_context(params, v, s);
    return decode_sequence(params, ctx, mode, rng, max_len);
}

SplitEvaluation evaluate_split(const ScnParameters& params, const Dataset& ds,
                               const SemanticMap& semantic, int max_len,
                               std::optional<double> injected_meteor) {
    SplitEvaluation out;
    for (const auto& rec : ds.videos) {
        const Vector v = concat_features(rec.res2d, rec.res3d);
        out.candidates.push_back(
            generate_caption(params, v, semantic_for(semantic, rec.id), SampleMode::Argmax, max_len));
    }
    const auto refs = split_references(ds);
    out.metrics.bleu4 = bleu4(out.candidates, refs);
    out.metrics.rouge_l = rouge_l(out.candidates, refs);
    out.metrics.cider = cider(out.candidates, refs);
    out.metrics.meteor = injected_meteor;
    return out;
}

double token_accuracy(const ScnParameters& params, const Dataset& ds,
                      const SemanticMap& semantic, int max_len) {
    long correct = 0, total = 0;
    for (const auto& rec : ds.videos) {
        const Vector v = concat_features(rec.res2d, rec.res3d);
        const SequenceContext ctx = make_sequence_context(params, v, semantic_for(semantic, rec.id));
        for (const auto& caption : rec.captions) {
            std::vector<int> targets = caption;
            if (static_cast<int>(targets.size()) > max_len) targets.resize(max_len);
            const SequenceResult fwd = forward_sequence(params, ctx, targets, 0.0,
                                                        SampleMode::Argmax, nullptr, max_len);
            for (size_t t = 0; t < fwd.steps.size(); ++t) {
                correct += argmax(fwd.steps[t].dist) == targets[t] ? 1 : 0;
                ++total;
            }
        }
    }
    if (total == 0) throw std::invalid_argument("token_accuracy: no captions");
    return static_cast<double>(correct) / static_cast<double>(total);
}

void write_metric_trace(const std::string& path, const std::vector<EpochRecord>& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& r : trace) {
        json j;
        j["epoch"] = r.epoch;
        j["loss"] = r.loss;
        j["epsilon"] = r.epsilon;
        j["bleu4"] = r.metrics.bleu4;
        j["rouge_l"] = r.metrics.rouge_l;
        j["cider"] = r.metrics.cider;
        if (r.metrics.meteor) j["meteor"] = *r.metrics.meteor;
        if (r.metrics.overall) j["overall"] = *r.metrics.overall;
        out << j.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

namespace {

json views_to_json(const std::vector<ParamView>& views) {
    json j = json::object();
    for (const auto& v : views) j[v.name] = Vector(v.data, v.data + v.size);
    return j;
}

void views_from_json(const json& j, const std::vector<ParamView>& views, const std::string& path) {
    for (const auto& v : views) {
        if (!j.contains(v.name))
            throw std::runtime_error(path + ": missing parameter block " + v.name);
        const Vector data = j.at(v.name).get<Vector>();
        if (data.size() != v.size)
            throw std::runtime_error(path + ": block " + v.name + " has " +
                                     std::to_string(data.size()) + " values, expected " +
                                     std::to_string(v.size));
        std::copy(data.begin(), data.end(), v.data);
    }
}

json record_to_json(const EpochRecord& r) {
    json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["epsilon"] = r.epsilon;
    j["bleu4"] = r.metrics.bleu4;
    j["rouge_l"] = r.metrics.rouge_l;
    j["cider"] = r.metrics.cider;
    if (r.metrics.meteor) j["meteor"] = *r.metrics.meteor;
    if (r.metrics.overall) j["overall"] = *r.metrics.overall;
    return j;
}

EpochRecord record_from_json(const json& j) {
    EpochRecord r;
    r.epoch = j.value("epoch", 0);
    r.loss = j.value("loss", 0.0);
    r.epsilon = j.value("epsilon", 0.0);
    r.metrics.bleu4 = j.value("bleu4", 0.0);
    r.metrics.rouge_l = j.value("rouge_l", 0.0);
    r.metrics.cider = j.value("cider", 0.0);
    if (j.contains("meteor")) r.metrics.meteor = j.at("meteor").get<double>();
    if (j.contains("overall")) r.metrics.overall = j.at("overall").get<double>();
    return r;
}

}  // namespace

void save_decoder_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    json j;
    j["kind"] = "scn_decoder";
    j["fingerprint"] = ckpt.config_fingerprint;
    j["epoch"] = ckpt.epoch;
    const ScnDims& d = ckpt.params.dims;
    j["dims"] = {{"hidden", d.hidden},         {"factor", d.factor}, {"word_dim", d.word_dim},
                 {"feature_dim", d.feature_dim}, {"tag_dim", d.tag_dim}, {"vocab", d.vocab}};
    j["params"] = views_to_json(const_cast<ScnParameters&>(ckpt.params).param_views());
    json adam;
    adam["step"] = ckpt.adam.step;
    json m = json::object(), v = json::object();
    auto views = const_cast<ScnParameters&>(ckpt.params).param_views();
    for (size_t i = 0; i < views.size(); ++i) {
        m[views[i].name] = ckpt.adam.m[i];
        v[views[i].name] = ckpt.adam.v[i];
    }
    adam["m"] = m;
    adam["v"] = v;
    j["adam"] = adam;
    j["validation"] = record_to_json(ckpt.validation);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

Checkpoint load_decoder_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error(path + ": malformed checkpoint JSON");
    if (j.value("kind", "") != "scn_decoder")
        throw std::runtime_error(path + ": not a decoder checkpoint");

    Checkpoint ckpt;
    ckpt.config_fingerprint = j.value("fingerprint", "");
    ckpt.epoch = j.value("epoch", -1);
    const json& dj = j.at("dims");
    ScnDims dims;
    dims.hidden = dj.at("hidden").get<int>();
    dims.factor = dj.at("factor").get<int>();
    dims.word_dim = dj.at("word_dim").get<int>();
    dims.feature_dim = dj.at("feature_dim").get<int>();
    dims.tag_dim = dj.at("tag_dim").get<int>();
    dims.vocab = dj.at("vocab").get<int>();
    ckpt.params = init_parameters(dims, 0);
    ckpt.params.zero();
    views_from_json(j.at("params"), ckpt.params.param_views(), path);

    auto views = ckpt.params.param_views();
    ckpt.adam = AdamState::like(views);
    if (j.contains("adam")) {
        const json& aj = j.at("adam");
        ckpt.adam.step = aj.value("step", 0L);
        std::vector<ParamView> mv, vv;
        for (size_t i = 0; i < views.size(); ++i) {
            mv.push_back({views[i].name, ckpt.adam.m[i].data(), ckpt.adam.m[i].size()});
            vv.push_back({views[i].name, ckpt.adam.v[i].data(), ckpt.adam.v[i].size()});
        }
        views_from_json(aj.at("m"), mv, path);
        views_from_json(aj.at("v"), vv, path);
    }
    if (j.contains("validation")) ckpt.validation = record_from_json(j.at("validation"));
    return ckpt;
}

}  // namespace svcap
