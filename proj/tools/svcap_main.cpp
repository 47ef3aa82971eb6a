#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "svcap/config.hpp"
#include "svcap/corpus.hpp"
#include "svcap/metrics.hpp"
#include "svcap/sdn.hpp"
#include "svcap/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace svcap;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

Dataset load_split(const RunConfig& cfg, const std::string& split,
                   std::shared_ptr<const Vocabulary> vocab,
                   std::shared_ptr<const TagVocabulary> tags) {
    const std::string base = cfg.corpus.data_dir + "/" + split;
    return load_dataset(base + "_features.jsonl", base + "_captions.jsonl", std::move(vocab),
                        std::move(tags), split);
}

// Missing vocabulary or tag files are built from the train+val caption
// files, so externally produced datasets only need features and captions.
void ensure_vocab_files(const RunConfig& cfg) {
    const std::string vocab_path = cfg.corpus.data_dir + "/vocab.txt";
    const std::string tag_path = cfg.corpus.data_dir + "/tags.txt";
    if (fs::exists(vocab_path) && fs::exists(tag_path)) return;

    auto captions = read_caption_tokens(cfg.corpus.data_dir + "/train_captions.jsonl");
    const auto val = read_caption_tokens(cfg.corpus.data_dir + "/val_captions.jsonl");
    captions.insert(captions.end(), val.begin(), val.end());

    const Vocabulary vocab = fs::exists(vocab_path) ? load_vocab_file(vocab_path)
                                                    : build_vocabulary(captions, cfg.corpus.min_count);
    if (!fs::exists(vocab_path)) write_vocab_file(vocab_path, vocab);
    if (!fs::exists(tag_path)) {
        const std::set<std::string> stop = cfg.corpus.stoplist_file.empty()
                                               ? default_stoplist()
                                               : load_stoplist_file(cfg.corpus.stoplist_file);
        write_tag_file(tag_path,
                       build_tag_vocabulary(captions, cfg.corpus.tag_count, stop, vocab));
    }
}

std::shared_ptr<const Vocabulary> load_vocab(const RunConfig& cfg) {
    return std::make_shared<Vocabulary>(load_vocab_file(cfg.corpus.data_dir + "/vocab.txt"));
}

std::shared_ptr<const TagVocabulary> load_tags(const RunConfig& cfg, const Vocabulary& vocab) {
    return std::make_shared<TagVocabulary>(load_tag_file(cfg.corpus.data_dir + "/tags.txt", vocab));
}

SemanticMap load_semantics(const RunConfig& cfg, std::initializer_list<const char*> splits) {
    SemanticMap all;
    for (const char* split : splits) {
        auto part = load_semantic_file(cfg.corpus.semantic_dir + "/semantic_" +
                                       std::string(split) + ".jsonl");
        all.insert(part.begin(), part.end());
    }
    return all;
}

std::optional<double> load_meteor(const std::string& path) {
    if (path.empty()) return std::nullopt;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open meteor file: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("meteor"))
        throw std::runtime_error(path + ": expected {\"meteor\": <real>}");
    return j.at("meteor").get<double>();
}

std::optional<MetricTops> load_tops(const std::string& path) {
    if (path.empty()) return std::nullopt;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tops file: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("bleu4") || !j.contains("cider") || !j.contains("rouge_l"))
        throw std::runtime_error(path + ": expected {\"bleu4\",\"cider\",\"rouge_l\"[,\"meteor\"]}");
    MetricTops tops;
    tops.bleu4 = j.at("bleu4").get<double>();
    tops.cider = j.at("cider").get<double>();
    tops.rouge_l = j.at("rouge_l").get<double>();
    if (j.contains("meteor")) tops.meteor = j.at("meteor").get<double>();
    return tops;
}

int cmd_synth_data(const RunConfig& cfg) {
    const SyntheticData data = generate_synthetic_dataset(cfg.synth);
    fs::create_directories(cfg.corpus.data_dir);
    for (const Dataset* ds : {&data.train, &data.val, &data.test}) {
        const std::string base = cfg.corpus.data_dir + "/" + ds->split;
        write_feature_file(base + "_features.jsonl", *ds);
        write_caption_file(base + "_captions.jsonl", *ds);
    }
    write_vocab_file(cfg.corpus.data_dir + "/vocab.txt", *data.vocab);
    write_tag_file(cfg.corpus.data_dir + "/tags.txt", *data.tags);
    std::cout << "wrote " << data.train.videos.size() << "/" << data.val.videos.size() << "/"
              << data.test.videos.size() << " train/val/test videos, vocab "
              << data.vocab->size() << ", tags " << data.tags->size() << " -> "
              << cfg.corpus.data_dir << "\n";
    return 0;
}

int cmd_train_sdn(const RunConfig& cfg) {
    ensure_vocab_files(cfg);
    auto vocab = load_vocab(cfg);
    auto tags = load_tags(cfg, *vocab);
    const Dataset train = load_split(cfg, "train", vocab, tags);
    const Dataset val = load_split(cfg, "val", vocab, tags);
    const Dataset test = load_split(cfg, "test", vocab, tags);

    const SdnTrainResult result = sdn_train(train, val, cfg.sdn);
    fs::create_directories(cfg.corpus.semantic_dir);

    SdnCheckpointData ckpt;
    ckpt.params = result.params;
    ckpt.feature_set = cfg.sdn.feature_set;
    ckpt.best_epoch = result.best_epoch;
    ckpt.best_map = result.best_map;
    ckpt.config_fingerprint = cfg.fingerprint;
    ckpt.map_trace = result.map_trace;
    save_sdn_checkpoint(cfg.corpus.semantic_dir + "/sdn_checkpoint.json", ckpt);

    {
        std::ofstream out(cfg.corpus.semantic_dir + "/sdn_map_trace.jsonl");
        for (size_t i = 0; i < result.map_trace.size(); ++i) {
            json j;
            j["epoch"] = i;
            j["map"] = result.map_trace[i];
            out << j.dump() << "\n";
        }
    }
    for (const Dataset* ds : {&train, &val, &test}) {
        std::vector<std::string> ids;
        for (const auto& rec : ds->videos) ids.push_back(rec.id);
        write_semantic_file(cfg.corpus.semantic_dir + "/semantic_" + ds->split + ".jsonl", ids,
                            sdn_predict(result.params, *ds, cfg.sdn.feature_set));
    }
    std::cout << "sdn best validation mAP " << result.best_map << " at epoch "
              << result.best_epoch << "; semantic features -> " << cfg.corpus.semantic_dir << "\n";
    return 0;
}

int cmd_train_caption(const RunConfig& cfg, const std::string& meteor_file) {
    ensure_vocab_files(cfg);
    auto vocab = load_vocab(cfg);
    auto tags = load_tags(cfg, *vocab);
    const Dataset train = load_split(cfg, "train", vocab, tags);
    const Dataset val = load_split(cfg, "val", vocab, tags);
    const SemanticMap semantic = load_semantics(cfg, {"train", "val"});
    const auto meteor = load_meteor(meteor_file);

    const TrainResult result = train_captioner(train, val, semantic, cfg.train, cfg.fingerprint,
                                               meteor);
    const std::string dir = cfg.out + "/caption";
    fs::create_directories(dir);
    save_decoder_checkpoint(dir + "/decoder_checkpoint.json", result.best);
    write_metric_trace(dir + "/metric_trace.jsonl", result.trace);
    std::cout << "best epoch " << result.best.epoch << " with validation overall "
              << result.best.validation.metrics.overall.value_or(0.0) << " -> " << dir << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& split, const std::string& meteor_file,
                 const std::string& tops_file) {
    const std::string path =
        checkpoint_path.empty() ? cfg.out + "/caption/decoder_checkpoint.json" : checkpoint_path;
    const Checkpoint ckpt = load_decoder_checkpoint(path);
    if (!ckpt.config_fingerprint.empty() && ckpt.config_fingerprint != cfg.fingerprint)
        std::cerr << "warning: checkpoint fingerprint " << ckpt.config_fingerprint
                  << " does not match config " << cfg.fingerprint
                  << "; proceeding with checkpoint dimensions\n";

    ensure_vocab_files(cfg);
    auto vocab = load_vocab(cfg);
    auto tags = load_tags(cfg, *vocab);
    const std::string use_split = split.empty() ? cfg.evaluate.split : split;
    const Dataset ds = load_split(cfg, use_split, vocab, tags);
    const SemanticMap semantic = load_semantics(cfg, {use_split.c_str()});

    SplitEvaluation eval = evaluate_split(ckpt.params, ds, semantic, cfg.train.max_caption_len,
                                          load_meteor(meteor_file));
    const auto tops = load_tops(tops_file);
    if (tops) {
        eval.metrics.overall = overall_score(eval.metrics, *tops);
        if (eval.metrics.bleu4 > tops->bleu4 || eval.metrics.cider > tops->cider ||
            eval.metrics.rouge_l > tops->rouge_l)
            std::cerr << "warning: a metric exceeds its supplied top; overall may exceed 1\n";
    }

    json j;
    j["split"] = use_split;
    j["checkpoint"] = path;
    j["bleu4"] = eval.metrics.bleu4;
    j["rouge_l"] = eval.metrics.rouge_l;
    j["cider"] = eval.metrics.cider;
    if (eval.metrics.meteor) j["meteor"] = *eval.metrics.meteor;
    if (eval.metrics.overall) j["overall"] = *eval.metrics.overall;
    j["mean_length"] = caption_length_stats(eval.candidates);

    fs::create_directories(cfg.out);
    const std::string report_path = cfg.out + "/report_" + use_split + ".json";
    std::ofstream out(report_path);
    out << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_generate(const RunConfig& cfg, const std::string& checkpoint_path,
                 const std::string& feature_file, const std::string& semantic_file) {
    const std::string path =
        checkpoint_path.empty() ? cfg.out + "/caption/decoder_checkpoint.json" : checkpoint_path;
    const Checkpoint ckpt = load_decoder_checkpoint(path);
    auto vocab = load_vocab(cfg);

    // feature file only; captions are what we produce
    std::ifstream in(feature_file);
    if (!in) throw std::runtime_error("cannot open feature file: " + feature_file);
    auto semantic = load_semantic_file(semantic_file);

    fs::create_directories(cfg.out);
    std::ofstream out(cfg.out + "/generated.jsonl");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("id") || !j.contains("res2d") || !j.contains("res3d"))
            throw std::runtime_error(feature_file + ":" + std::to_string(line_no) +
                                     ": malformed feature record");
        const std::string id = j.at("id").get<std::string>();
        auto sit = semantic.find(id);
        if (sit == semantic.end())
            throw std::runtime_error(semantic_file + ": no semantic feature for id " + id);
        const Vector v = concat_features(j.at("res2d").get<Vector>(), j.at("res3d").get<Vector>());
        const auto tokens = generate_caption(ckpt.params, v, sit->second, SampleMode::Argmax,
                                             cfg.train.max_caption_len);
        std::string text;
        for (int t : tokens) {
            if (!text.empty()) text.push_back(' ');
            text += vocab->token(t);
        }
        json rec;
        rec["id"] = id;
        rec["captions"] = std::vector<std::string>{text};
        out << rec.dump() << "\n";
    }
    std::cout << "captions -> " << cfg.out << "/generated.jsonl\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semantic video captioning toolkit"};
    app.require_subcommand(1);

    std::string config_path, meteor_file, tops_file, checkpoint_path, split, feature_file,
        semantic_file;
    CliOverrides over;
    auto numeric = [](auto& slot, auto parse) {
        return [&slot, parse](const CLI::results_t& r) {
            try {
                slot = parse(r[0]);
            } catch (const std::exception&) {
                return false;
            }
            return true;
        };
    };
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config document (JSON)");
        cmd->add_option("--seed",
                        numeric(over.seed, [](const std::string& s) { return std::stoull(s); }),
                        "override top-level seed");
        cmd->add_option("--beta",
                        numeric(over.beta, [](const std::string& s) { return std::stod(s); }),
                        "override train.beta");
        cmd->add_option("--strategy", [&over](const CLI::results_t& r) {
            over.strategy = r[0];
            return true;
        }, "override train.strategy");
        cmd->add_option("--epsilon-rate",
                        numeric(over.epsilon_rate,
                                [](const std::string& s) { return std::stod(s); }),
                        "override train.epsilon_rate");
        cmd->add_option("--epochs",
                        numeric(over.epochs, [](const std::string& s) { return std::stoi(s); }),
                        "override epochs");
        cmd->add_option("--out", [&over](const CLI::results_t& r) {
            over.out = r[0];
            return true;
        }, "output directory");
    };

    CLI::App* synth = app.add_subcommand("synth-data", "generate the synthetic dataset files");
    add_common(synth);
    CLI::App* tsdn = app.add_subcommand("train-sdn", "train the tag detector, export features");
    add_common(tsdn);
    CLI::App* tcap = app.add_subcommand("train-caption", "train the caption decoder");
    add_common(tcap);
    tcap->add_option("--meteor-file", meteor_file, "externally supplied METEOR value");
    CLI::App* eval = app.add_subcommand("evaluate", "score a checkpoint on a split");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint_path, "decoder checkpoint path");
    eval->add_option("--split", split, "split to evaluate");
    eval->add_option("--meteor-file", meteor_file, "externally supplied METEOR value");
    eval->add_option("--tops-file", tops_file, "per-metric best values for the overall score");
    CLI::App* gen = app.add_subcommand("generate", "caption a feature file");
    add_common(gen);
    gen->add_option("--checkpoint", checkpoint_path, "decoder checkpoint path");
    gen->add_option("--features", feature_file, "feature file to caption")->required();
    gen->add_option("--semantic", semantic_file, "semantic feature file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    RunConfig cfg;
    try {
        cfg = load_run_config(config_path, over);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth_data(cfg);
        if (tsdn->parsed()) return cmd_train_sdn(cfg);
        if (tcap->parsed()) return cmd_train_caption(cfg, meteor_file);
        if (eval->parsed()) return cmd_evaluate(cfg, checkpoint_path, split, meteor_file, tops_file);
        if (gen->parsed()) return cmd_generate(cfg, checkpoint_path, feature_file, semantic_file);
    } catch (const DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
