#include "svcap/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace svcap {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& scope) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw std::invalid_argument("config: unknown key '" + scope + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string fingerprint_string(const std::string& canonical) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = hex[h & 0xf];
        h >>= 4;
    }
    return out;
}

RunConfig load_run_config(const std::string& config_path, const CliOverrides& overrides) {
    json doc = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::invalid_argument("config: cannot open " + config_path);
        doc = json::parse(in, nullptr, false);
        if (doc.is_discarded()) throw std::invalid_argument("config: malformed JSON in " + config_path);
        if (!doc.is_object()) throw std::invalid_argument("config: document must be an object");
    }
    reject_unknown(doc, {"out", "seed", "synth", "corpus", "sdn", "decoder", "train", "evaluate"}, "");

    RunConfig cfg;
    read(doc, "out", cfg.out);
    read(doc, "seed", cfg.seed);

    if (doc.contains("synth")) {
        const json& s = doc["synth"];
        reject_unknown(s,
                       {"train_videos", "val_videos", "test_videos", "captions_per_video",
                        "subjects", "verbs", "objects", "dim_2d", "dim_3d", "noise",
                        "feature_jitter"},
                       "synth.");
        read(s, "train_videos", cfg.synth.train_videos);
        read(s, "val_videos", cfg.synth.val_videos);
        read(s, "test_videos", cfg.synth.test_videos);
        read(s, "captions_per_video", cfg.synth.captions_per_video);
        read(s, "subjects", cfg.synth.subjects);
        read(s, "verbs", cfg.synth.verbs);
        read(s, "objects", cfg.synth.objects);
        read(s, "dim_2d", cfg.synth.dim_2d);
        read(s, "dim_3d", cfg.synth.dim_3d);
        read(s, "noise", cfg.synth.noise);
        read(s, "feature_jitter", cfg.synth.feature_jitter);
    }

    if (doc.contains("corpus")) {
        const json& c = doc["corpus"];
        reject_unknown(c, {"data_dir", "semantic_dir", "min_count", "tag_count", "stoplist_file"},
                       "corpus.");
        read(c, "data_dir", cfg.corpus.data_dir);
        read(c, "semantic_dir", cfg.corpus.semantic_dir);
        read(c, "min_count", cfg.corpus.min_count);
        read(c, "tag_count", cfg.corpus.tag_count);
        read(c, "stoplist_file", cfg.corpus.stoplist_file);
    }

    if (doc.contains("sdn")) {
        const json& s = doc["sdn"];
        reject_unknown(s,
                       {"hidden", "feature_set", "epochs", "batch_size", "learning_rate",
                        "clip_eps", "grad_clip_norm"},
                       "sdn.");
        read(s, "hidden", cfg.sdn.hidden);
        if (s.contains("feature_set"))
            cfg.sdn.feature_set = feature_set_from_string(s.at("feature_set").get<std::string>());
        read(s, "epochs", cfg.sdn.epochs);
        read(s, "batch_size", cfg.sdn.batch_size);
        read(s, "learning_rate", cfg.sdn.learning_rate);
        read(s, "clip_eps", cfg.sdn.clip_eps);
        read(s, "grad_clip_norm", cfg.sdn.adam.clip_norm);
    }

    if (doc.contains("decoder")) {
        const json& d = doc["decoder"];
        reject_unknown(d, {"hidden", "factor", "word_dim"}, "decoder.");
        read(d, "hidden", cfg.train.hidden);
        read(d, "factor", cfg.train.factor);
        read(d, "word_dim", cfg.train.word_dim);
    }

    if (doc.contains("train")) {
        const json& t = doc["train"];
        reject_unknown(t,
                       {"strategy", "beta", "epsilon_rate", "epsilon_max", "epochs", "batch_size",
                        "learning_rate", "lr_decay_factor", "lr_decay_interval", "adam_beta1",
                        "adam_beta2", "adam_epsilon", "grad_clip_norm", "max_caption_len"},
                       "train.");
        if (t.contains("strategy"))
            cfg.train.strategy = strategy_from_string(t.at("strategy").get<std::string>());
        read(t, "beta", cfg.train.beta);
        read(t, "epsilon_rate", cfg.train.epsilon_rate);
        read(t, "epsilon_max", cfg.train.epsilon_max);
        read(t, "epochs", cfg.train.epochs);
        read(t, "batch_size", cfg.train.batch_size);
        read(t, "learning_rate", cfg.train.learning_rate);
        read(t, "lr_decay_factor", cfg.train.lr_decay_factor);
        read(t, "lr_decay_interval", cfg.train.lr_decay_interval);
        read(t, "adam_beta1", cfg.train.adam.beta1);
        read(t, "adam_beta2", cfg.train.adam.beta2);
        read(t, "adam_epsilon", cfg.train.adam.epsilon);
        read(t, "grad_clip_norm", cfg.train.adam.clip_norm);
        read(t, "max_caption_len", cfg.train.max_caption_len);
    }

    if (doc.contains("evaluate")) {
        const json& e = doc["evaluate"];
        reject_unknown(e, {"split"}, "evaluate.");
        read(e, "split", cfg.evaluate.split);
    }

    // flags win over the document
    if (overrides.out) cfg.out = *overrides.out;
    if (overrides.seed) cfg.seed = *overrides.seed;
    if (overrides.beta) cfg.train.beta = *overrides.beta;
    if (overrides.strategy) cfg.train.strategy = strategy_from_string(*overrides.strategy);
    if (overrides.epsilon_rate) cfg.train.epsilon_rate = *overrides.epsilon_rate;
    if (overrides.epochs) {
        cfg.train.epochs = *overrides.epochs;
        cfg.sdn.epochs = *overrides.epochs;
    }

    if (cfg.train.beta < 0.0) throw std::invalid_argument("config: train.beta must be >= 0");
    if (cfg.train.epsilon_rate < 0.0)
        throw std::invalid_argument("config: train.epsilon_rate must be >= 0");
    if (cfg.corpus.data_dir.empty()) cfg.corpus.data_dir = cfg.out + "/data";
    if (cfg.corpus.semantic_dir.empty()) cfg.corpus.semantic_dir = cfg.out + "/sdn";

    // one top-level seed; per-module seeds derive from disjoint streams
    SeededRng master(cfg.seed);
    cfg.synth.seed = master.fork(10).seed();
    cfg.sdn.seed = master.fork(11).seed();
    cfg.train.seed = master.fork(12).seed();

    // canonical serialization of everything result-shaping, minus out-paths
    json canon;
    canon["seed"] = cfg.seed;
    canon["synth"] = {{"train_videos", cfg.synth.train_videos},
                      {"val_videos", cfg.synth.val_videos},
                      {"test_videos", cfg.synth.test_videos},
                      {"captions_per_video", cfg.synth.captions_per_video},
                      {"subjects", cfg.synth.subjects},
                      {"verbs", cfg.synth.verbs},
                      {"objects", cfg.synth.objects},
                      {"dim_2d", cfg.synth.dim_2d},
                      {"dim_3d", cfg.synth.dim_3d},
                      {"noise", cfg.synth.noise},
                      {"feature_jitter", cfg.synth.feature_jitter}};
    canon["corpus"] = {{"min_count", cfg.corpus.min_count},
                       {"tag_count", cfg.corpus.tag_count},
                       {"stoplist_file", cfg.corpus.stoplist_file}};
    canon["sdn"] = {{"hidden", cfg.sdn.hidden},
                    {"feature_set", to_string(cfg.sdn.feature_set)},
                    {"epochs", cfg.sdn.epochs},
                    {"batch_size", cfg.sdn.batch_size},
                    {"learning_rate", cfg.sdn.learning_rate},
                    {"clip_eps", cfg.sdn.clip_eps},
                    {"grad_clip_norm", cfg.sdn.adam.clip_norm}};
    canon["decoder"] = {{"hidden", cfg.train.hidden},
                        {"factor", cfg.train.factor},
                        {"word_dim", cfg.train.word_dim}};
    canon["train"] = {{"strategy", to_string(cfg.train.strategy)},
                      {"beta", cfg.train.beta},
                      {"epsilon_rate", cfg.train.epsilon_rate},
                      {"epsilon_max", cfg.train.epsilon_max},
                      {"epochs", cfg.train.epochs},
                      {"batch_size", cfg.train.batch_size},
                      {"learning_rate", cfg.train.learning_rate},
                      {"lr_decay_factor", cfg.train.lr_decay_factor},
                      {"lr_decay_interval", cfg.train.lr_decay_interval},
                      {"adam_beta1", cfg.train.adam.beta1},
                      {"adam_beta2", cfg.train.adam.beta2},
                      {"adam_epsilon", cfg.train.adam.epsilon},
                      {"grad_clip_norm", cfg.train.adam.clip_norm},
                      {"max_caption_len", cfg.train.max_caption_len}};
    canon["evaluate"] = {{"split", cfg.evaluate.split}};
    cfg.fingerprint = fingerprint_string(canon.dump());
    return cfg;
}

}  // namespace svcap
