#include "svcap/sdn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "svcap/metrics.hpp"

namespace svcap {

std::vector<ParamView> SdnParameters::param_views() {
    std::vector<ParamView> views;
    for (size_t l = 0; l < w.size(); ++l) {
        views.push_back({"w" + std::to_string(l), w[l].a.data(), w[l].a.size()});
        views.push_back({"b" + std::to_string(l), b[l].data(), b[l].size()});
    }
    return views;
}

FeatureSet feature_set_from_string(const std::string& s) {
    if (s == "both") return FeatureSet::Both;
    if (s == "res2d") return FeatureSet::Res2d;
    if (s == "res3d") return FeatureSet::Res3d;
    throw std::invalid_argument("unknown feature set: " + s);
}

std::string to_string(FeatureSet fs) {
    switch (fs) {
        case FeatureSet::Both: return "both";
        case FeatureSet::Res2d: return "res2d";
        default: return "res3d";
    }
}

Vector select_features(const VideoRecord& rec, FeatureSet fs) {
    switch (fs) {
        case FeatureSet::Both: return concat_features(rec.res2d, rec.res3d);
        case FeatureSet::Res2d: return rec.res2d;
        default: return rec.res3d;
    }
}

SdnParameters sdn_init(const std::vector<int>& layer_dims, SeededRng& rng) {
    if (layer_dims.size() < 2) throw std::invalid_argument("sdn_init: need at least input and output dims");
    SdnParameters p;
    for (size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        p.w.push_back(xavier_uniform(layer_dims[l + 1], layer_dims[l], rng));
        p.b.emplace_back(layer_dims[l + 1], 0.0);
    }
    return p;
}

namespace {

struct SdnTrace {
    std::vector<Vector> act;  // act[0] = input, act[l+1] = layer l output
    std::vector<Vector> pre;  // pre-activation per layer
};

Vector forward_traced(const SdnParameters& p, const Vector& v, SdnTrace* trace) {
    if (static_cast<int>(v.size()) != p.input_dim())
        throw std::invalid_argument("sdn_forward: input dim " + std::to_string(v.size()) +
                                    " does not match first layer " + std::to_string(p.input_dim()));
    Vector a = v;
    if (trace) trace->act.push_back(a);
    const size_t last = p.w.size() - 1;
    for (size_t l = 0; l < p.w.size(); ++l) {
        Vector z = matvec(p.w[l], a);
        for (size_t i = 0; i < z.size(); ++i) z[i] += p.b[l][i];
        if (trace) trace->pre.push_back(z);
        if (l == last) {
            a = sigmoid(z);
        } else {
            a = z;
            for (double& x : a) x = x > 0.0 ? x : 0.0;  // rectifier
        }
        if (trace) trace->act.push_back(a);
    }
    return a;
}

}  // namespace

Vector sdn_forward(const SdnParameters& params, const Vector& v) {
    return forward_traced(params, v, nullptr);
}

double sdn_bce_loss(const std::vector<Vector>& s, const std::vector<std::vector<int>>& s_hat,
                    double clip_eps) {
    if (s.empty() || s.size() != s_hat.size())
        throw std::invalid_argument("sdn_bce_loss: empty or mismatched batch");
    if (clip_eps <= 0.0 || clip_eps >= 0.1)
        throw std::invalid_argument("sdn_bce_loss: clip must be in (0, 0.1)");
    double total = 0.0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i].size() != s_hat[i].size())
            throw std::invalid_argument("sdn_bce_loss: tag dim mismatch in sample " + std::to_string(i));
        for (size_t j = 0; j < s[i].size(); ++j) {
            const int y = s_hat[i][j];
            if (y != 0 && y != 1)
                throw std::invalid_argument("sdn_bce_loss: ground truth must be binary");
            const double p = std::clamp(s[i][j], clip_eps, 1.0 - clip_eps);
            total -= y ? std::log(p) : std::log(1.0 - p);
        }
    }
    return total / static_cast<double>(s.size());
}

double sdn_backward(const SdnParameters& params, const std::vector<Vector>& inputs,
                    const std::vector<std::vector<int>>& s_hat, double clip_eps,
                    SdnParameters& grads) {
    if (inputs.empty() || inputs.size() != s_hat.size())
        throw std::invalid_argument("sdn_backward: empty or mismatched batch");
    const double inv_batch = 1.0 / static_cast<double>(inputs.size());
    const size_t layers = params.w.size();
    double loss = 0.0;

    for (size_t n = 0; n < inputs.size(); ++n) {
        SdnTrace trace;
        const Vector s = forward_traced(params, inputs[n], &trace);
        Vector delta(s.size());
        for (size_t j = 0; j < s.size(); ++j) {
            const int y = s_hat[n][j];
            if (y != 0 && y != 1)
                throw std::invalid_argument("sdn_backward: ground truth must be binary");
            const double p = std::clamp(s[j], clip_eps, 1.0 - clip_eps);
            loss -= (y ? std::log(p) : std::log(1.0 - p)) * inv_batch;
            // d loss / d logit; zero where the clip is active
            const bool clipped = s[j] < clip_eps || s[j] > 1.0 - clip_eps;
            delta[j] = clipped ? 0.0 : (s[j] - static_cast<double>(y)) * inv_batch;
        }
        for (size_t l = layers; l-- > 0;) {
            add_outer(grads.w[l], delta, trace.act[l]);
            axpy(1.0, delta, grads.b[l]);
            if (l == 0) break;
            Vector prev = matvec_t(params.w[l], delta);
            for (size_t i = 0; i < prev.size(); ++i)
                if (trace.pre[l - 1][i] <= 0.0) prev[i] = 0.0;
            delta = std::move(prev);
        }
    }
    return loss;
}

SdnTrainResult sdn_train(const Dataset& train, const Dataset& val, const SdnConfig& cfg) {
    if (train.videos.empty() || val.videos.empty())
        throw std::invalid_argument("sdn_train: train and validation splits must be non-empty");

    SeededRng master(cfg.seed);
    SeededRng init_rng = master.fork(1);
    SeededRng shuffle_rng = master.fork(2);

    const int input_dim = static_cast<int>(select_features(train.videos[0], cfg.feature_set).size());
    std::vector<int> dims = {input_dim};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(train.tags->size());

    SdnTrainResult result;
    result.params = sdn_init(dims, init_rng);

    std::vector<Vector> train_x;
    std::vector<std::vector<int>> train_y;
    for (const auto& rec : train.videos) {
        train_x.push_back(select_features(rec, cfg.feature_set));
        train_y.push_back(tag_ground_truth(rec, *train.tags, *train.vocab));
    }
    const auto val_truth = split_tag_truth(val);

    SdnParameters best = result.params;
    AdamState adam = AdamState::like(result.params.param_views());
    std::vector<size_t> order(train_x.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<Vector> bx;
            std::vector<std::vector<int>> by;
            for (size_t i = start; i < end; ++i) {
                bx.push_back(train_x[order[i]]);
                by.push_back(train_y[order[i]]);
            }
            SdnParameters grads;
            for (const auto& wm : result.params.w) grads.w.emplace_back(wm.rows, wm.cols);
            for (const auto& bv : result.params.b) grads.b.emplace_back(bv.size(), 0.0);
            const double loss = sdn_backward(result.params, bx, by, cfg.clip_eps, grads);
            if (!std::isfinite(loss))
                throw DivergenceError("sdn_train: non-finite loss at epoch " + std::to_string(epoch) +
                                      ", step " + std::to_string(adam.step));
            adam_update(result.params.param_views(), grads.param_views(), adam,
                        cfg.learning_rate, cfg.adam);
        }
        const double map = mean_average_precision(
            sdn_predict(result.params, val, cfg.feature_set), val_truth);
        result.map_trace.push_back(map);
        if (map > result.best_map || result.best_epoch < 0) {
            result.best_map = map;
            result.best_epoch = epoch;
            best = result.params;
        }
    }
    if (cfg.epochs > 0) result.params = best;
    return result;
}

std::vector<Vector> sdn_predict(const SdnParameters& params, const Dataset& ds, FeatureSet fs) {
    std::vector<Vector> out;
    out.reserve(ds.videos.size());
    for (const auto& rec : ds.videos) out.push_back(sdn_forward(params, select_features(rec, fs)));
    return out;
}

std::vector<std::vector<int>> split_tag_truth(const Dataset& ds) {
    std::vector<std::vector<int>> out;
    out.reserve(ds.videos.size());
    for (const auto& rec : ds.videos) out.push_back(tag_ground_truth(rec, *ds.tags, *ds.vocab));
    return out;
}

void save_sdn_checkpoint(const std::string& path, const SdnCheckpointData& ckpt) {
    nlohmann::json j;
    j["kind"] = "sdn";
    j["fingerprint"] = ckpt.config_fingerprint;
    j["epoch"] = ckpt.best_epoch;
    j["val_map"] = ckpt.best_map;
    j["map_trace"] = ckpt.map_trace;
    j["feature_set"] = to_string(ckpt.feature_set);
    std::vector<int> dims = {ckpt.params.input_dim()};
    for (const auto& b : ckpt.params.b) dims.push_back(static_cast<int>(b.size()));
    j["layer_dims"] = dims;
    nlohmann::json blocks = nlohmann::json::object();
    for (const auto& v : const_cast<SdnParameters&>(ckpt.params).param_views())
        blocks[v.name] = Vector(v.data, v.data + v.size);
    j["params"] = blocks;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

SdnCheckpointData load_sdn_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error(path + ": malformed checkpoint JSON");
    if (j.value("kind", "") != "sdn") throw std::runtime_error(path + ": not an sdn checkpoint");

    SdnCheckpointData ckpt;
    ckpt.config_fingerprint = j.value("fingerprint", "");
    ckpt.best_epoch = j.value("epoch", -1);
    ckpt.best_map = j.value("val_map", 0.0);
    ckpt.map_trace = j.value("map_trace", std::vector<double>{});
    ckpt.feature_set = feature_set_from_string(j.value("feature_set", "both"));
    const auto dims = j.at("layer_dims").get<std::vector<int>>();
    SeededRng rng(0);
    ckpt.params = sdn_init(dims, rng);
    const nlohmann::json& blocks = j.at("params");
    for (const auto& v : ckpt.params.param_views()) {
        if (!blocks.contains(v.name))
            throw std::runtime_error(path + ": missing parameter block " + v.name);
        const Vector data = blocks.at(v.name).get<Vector>();
        if (data.size() != v.size)
            throw std::runtime_error(path + ": block " + v.name + " size mismatch");
        std::copy(data.begin(), data.end(), v.data);
    }
    return ckpt;
}

}  // namespace svcap
