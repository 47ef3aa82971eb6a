#include "svcap/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace svcap {

using nlohmann::json;

const std::string Vocabulary::kUnkToken = "<unk>";
const std::string Vocabulary::kEosToken = "<eos>";

std::vector<std::string> tokenize(const std::string& raw) {
    // lowercase; keep [a-z0-9]; keep apostrophes only between alphanumerics
    std::string s;
    s.reserve(raw.size());
    for (char ch : raw) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        s.push_back(static_cast<char>(c));
    }
    auto alnum = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    };
    std::string cleaned(s.size(), ' ');
    for (size_t i = 0; i < s.size(); ++i) {
        if (alnum(s[i])) {
            cleaned[i] = s[i];
        } else if (s[i] == '\'' && i > 0 && i + 1 < s.size() && alnum(s[i - 1]) && alnum(s[i + 1])) {
            cleaned[i] = '\'';
        }
    }
    std::vector<std::string> out;
    std::istringstream iss(cleaned);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

namespace {

// frequency desc, then lexicographic; shared by both vocabulary builders
std::vector<std::pair<std::string, int>> sorted_counts(
    const std::vector<std::vector<std::string>>& captions) {
    std::map<std::string, int> counts;
    for (const auto& cap : captions)
        for (const auto& tok : cap) ++counts[tok];
    std::vector<std::pair<std::string, int>> ordered(counts.begin(), counts.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ordered;
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& captions,
                            int min_count) {
    if (min_count < 1) throw std::invalid_argument("build_vocabulary: min_count must be >= 1");
    Vocabulary v;
    v.tokens = {Vocabulary::kUnkToken, Vocabulary::kEosToken};
    for (const auto& [tok, count] : sorted_counts(captions)) {
        if (count < min_count) continue;
        if (tok == Vocabulary::kUnkToken || tok == Vocabulary::kEosToken) continue;
        v.tokens.push_back(tok);
    }
    for (size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = static_cast<int>(i);
    return v;
}

TagVocabulary build_tag_vocabulary(const std::vector<std::vector<std::string>>& captions,
                                   int k, const std::set<std::string>& stoplist,
                                   const Vocabulary& vocab) {
    TagVocabulary tv;
    for (const auto& [tok, count] : sorted_counts(captions)) {
        if (static_cast<int>(tv.tags.size()) == k) break;
        if (stoplist.count(tok)) continue;
        if (!vocab.index.count(tok)) continue;
        if (tok == Vocabulary::kUnkToken || tok == Vocabulary::kEosToken) continue;
        tv.tags.push_back(tok);
    }
    if (static_cast<int>(tv.tags.size()) < k)
        throw std::invalid_argument("build_tag_vocabulary: requested " + std::to_string(k) +
                                    " tags but only " + std::to_string(tv.tags.size()) +
                                    " eligible tokens exist");
    for (size_t i = 0; i < tv.tags.size(); ++i) tv.index[tv.tags[i]] = static_cast<int>(i);
    return tv;
}

std::vector<int> tag_ground_truth(const VideoRecord& record, const TagVocabulary& tags,
                                  const Vocabulary& vocab) {
    std::vector<int> s_hat(tags.size(), 0);
    for (const auto& cap : record.captions) {
        for (int tok_id : cap) {
            auto it = tags.index.find(vocab.token(tok_id));
            if (it != tags.index.end()) s_hat[it->second] = 1;
        }
    }
    return s_hat;
}

Vector concat_features(const Vector& r, const Vector& e) {
    if (!all_finite(r) || !all_finite(e))
        throw std::invalid_argument("concat_features: non-finite entries");
    Vector v;
    v.reserve(r.size() + e.size());
    v.insert(v.end(), r.begin(), r.end());
    v.insert(v.end(), e.begin(), e.end());
    return v;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

const std::vector<std::string> kSubjectPool = {
    "man", "woman", "dog", "cat", "chef", "boy", "girl", "monkey", "horse", "baby"};
const std::vector<std::string> kVerbPool = {
    "rides", "eats", "plays", "throws", "holds", "kicks", "pushes", "washes", "paints", "carries"};
const std::vector<std::string> kObjectPool = {
    "ball", "guitar", "cake", "bike", "drum", "kite", "rope", "piano", "apple", "broom"};
const std::vector<std::string> kModifierPool = {"outside", "quickly", "slowly", "happily"};

// Stable per-word feature signature, independent of the dataset seed.
Vector word_signature(const std::string& word, int kind, int dim) {
    uint64_t h = 1469598103934665603ULL ^ static_cast<uint64_t>(kind) * 1099511628211ULL;
    for (char c : word) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    SeededRng rng(h);
    Vector sig(dim);
    for (double& v : sig) v = rng.uniform(-1.0, 1.0);
    return sig;
}

}  // namespace

SyntheticData generate_synthetic_dataset(const SynthSpec& spec) {
    if (spec.subjects < 1 || spec.verbs < 1 || spec.objects < 1 ||
        spec.subjects > static_cast<int>(kSubjectPool.size()) ||
        spec.verbs > static_cast<int>(kVerbPool.size()) ||
        spec.objects > static_cast<int>(kObjectPool.size()))
        throw std::invalid_argument("generate_synthetic_dataset: pool sizes out of range");
    if (spec.dim_2d < 2 || spec.dim_3d < 2)
        throw std::invalid_argument("generate_synthetic_dataset: feature dims must be >= 2");
    if (spec.subjects + spec.verbs + spec.objects < 5)
        throw std::invalid_argument(
            "generate_synthetic_dataset: pools too small for an 8-token vocabulary");
    if (spec.train_videos + spec.val_videos + spec.test_videos < 10)
        throw std::invalid_argument("generate_synthetic_dataset: need at least 10 videos");
    if (spec.captions_per_video < 1)
        throw std::invalid_argument("generate_synthetic_dataset: need at least 1 caption per video");
    const int num_templates = spec.subjects * spec.verbs * spec.objects;
    // stride coprime with the template count: the train split walks the
    // template space and val/test sample subjects, verbs and objects evenly
    int stride = std::max(1, static_cast<int>(std::lround(num_templates * 0.382)));
    while (std::gcd(stride, num_templates) != 1) ++stride;
    {
        // every pool word must occur in the training split, or the decoder
        // could never emit it
        std::vector<int> s_seen(spec.subjects, 0), v_seen(spec.verbs, 0), o_seen(spec.objects, 0);
        for (int i = 0; i < spec.train_videos; ++i) {
            const int tpl = (i * stride) % num_templates;
            s_seen[tpl / (spec.verbs * spec.objects)] = 1;
            v_seen[(tpl / spec.objects) % spec.verbs] = 1;
            o_seen[tpl % spec.objects] = 1;
        }
        const auto all = [](const std::vector<int>& v) {
            return std::all_of(v.begin(), v.end(), [](int x) { return x == 1; });
        };
        if (!all(s_seen) || !all(v_seen) || !all(o_seen))
            throw std::invalid_argument(
                "generate_synthetic_dataset: training split does not cover every pool word; "
                "increase train_videos or shrink the pools");
    }

    SeededRng master(spec.seed);
    SeededRng feat_rng = master.fork(1);
    SeededRng cap_rng = master.fork(2);

    const int half_2d = spec.dim_2d / 2;
    auto subj_sig = [&](int i) { return word_signature(kSubjectPool[i], 0, half_2d); };
    auto verb_sig = [&](int i) { return word_signature(kVerbPool[i], 1, spec.dim_2d - half_2d); };
    auto obj_sig = [&](int i) { return word_signature(kObjectPool[i], 2, spec.dim_3d); };

    std::vector<std::vector<std::string>> all_caption_tokens;
    struct RawVideo {
        std::string id;
        Vector r, e;
        std::vector<std::vector<std::string>> caps;
    };
    auto make_split_raw = [&](const std::string& name, int count, int base_index) {
        std::vector<RawVideo> vids;
        for (int k = 0; k < count; ++k) {
            const int global = base_index + k;
            const int tpl = (global * stride) % num_templates;
            const int s_i = tpl / (spec.verbs * spec.objects);
            const int v_i = (tpl / spec.objects) % spec.verbs;
            const int o_i = tpl % spec.objects;

            RawVideo rv;
            rv.id = name + "_" + std::to_string(k);
            rv.r = subj_sig(s_i);
            const Vector vs = verb_sig(v_i);
            rv.r.insert(rv.r.end(), vs.begin(), vs.end());
            rv.e = obj_sig(o_i);
            for (double& x : rv.r) x += spec.feature_jitter * feat_rng.gaussian();
            for (double& x : rv.e) x += spec.feature_jitter * feat_rng.gaussian();

            const std::string& subj = kSubjectPool[s_i];
            const std::string& verb = kVerbPool[v_i];
            const std::string& obj = kObjectPool[o_i];
            const std::string& mod = kModifierPool[tpl % kModifierPool.size()];
            // paraphrase noise appends the video's modifier word; with an
            // odd caption count the short/long majority at the decision
            // point is never tied, so greedy decoding stays stable across
            // loss-weight settings
            for (int c = 0; c < spec.captions_per_video; ++c) {
                std::vector<std::string> cap = {"a", subj, verb, "a", obj};
                if (cap_rng.uniform() < spec.noise) cap.push_back(mod);
                all_caption_tokens.push_back(cap);
                rv.caps.push_back(std::move(cap));
            }
            vids.push_back(std::move(rv));
        }
        return vids;
    };

    auto raw_train = make_split_raw("train", spec.train_videos, 0);
    auto raw_val = make_split_raw("val", spec.val_videos, spec.train_videos);
    auto raw_test = make_split_raw("test", spec.test_videos, spec.train_videos + spec.val_videos);

    auto vocab = std::make_shared<Vocabulary>(build_vocabulary(all_caption_tokens, 1));
    std::set<std::string> stop = {"a", "the"};
    stop.insert(kModifierPool.begin(), kModifierPool.end());
    int eligible = 0;
    for (const auto& t : vocab->tokens)
        if (!stop.count(t) && t != Vocabulary::kUnkToken && t != Vocabulary::kEosToken) ++eligible;
    auto tags = std::make_shared<TagVocabulary>(
        build_tag_vocabulary(all_caption_tokens, eligible, stop, *vocab));

    auto finalize = [&](std::vector<RawVideo>& raw, const std::string& name) {
        Dataset ds;
        ds.split = name;
        ds.vocab = vocab;
        ds.tags = tags;
        for (auto& rv : raw) {
            VideoRecord rec;
            rec.id = std::move(rv.id);
            rec.res2d = std::move(rv.r);
            rec.res3d = std::move(rv.e);
            for (const auto& cap : rv.caps) {
                std::vector<int> ids;
                ids.reserve(cap.size() + 1);
                for (const auto& tok : cap) ids.push_back(vocab->id(tok));
                ids.push_back(Vocabulary::kEos);
                rec.captions.push_back(std::move(ids));
            }
            ds.videos.push_back(std::move(rec));
        }
        return ds;
    };

    SyntheticData out;
    out.vocab = vocab;
    out.tags = tags;
    out.train = finalize(raw_train, "train");
    out.val = finalize(raw_val, "val");
    out.test = finalize(raw_test, "test");
    return out;
}

// ---------------------------------------------------------------------------
// File formats

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

json parse_line(const std::string& line, const std::string& path, int line_no) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed JSON record");
    return j;
}

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
    std::string s;
    for (int id : ids) {
        if (id == Vocabulary::kEos) continue;
        if (!s.empty()) s.push_back(' ');
        s += vocab.token(id);
    }
    return s;
}

}  // namespace

void write_feature_file(const std::string& path, const Dataset& ds) {
    auto out = open_out(path);
    for (const auto& rec : ds.videos) {
        json j;
        j["id"] = rec.id;
        j["res2d"] = rec.res2d;
        j["res3d"] = rec.res3d;
        out << j.dump() << "\n";
    }
}

void write_caption_file(const std::string& path, const Dataset& ds) {
    auto out = open_out(path);
    for (const auto& rec : ds.videos) {
        json j;
        j["id"] = rec.id;
        std::vector<std::string> caps;
        for (const auto& c : rec.captions) caps.push_back(detokenize(c, *ds.vocab));
        j["captions"] = caps;
        out << j.dump() << "\n";
    }
}

void write_vocab_file(const std::string& path, const Vocabulary& vocab) {
    auto out = open_out(path);
    for (const auto& t : vocab.tokens) out << t << "\n";
}

void write_tag_file(const std::string& path, const TagVocabulary& tags) {
    auto out = open_out(path);
    for (const auto& t : tags.tags) out << t << "\n";
}

Vocabulary load_vocab_file(const std::string& path) {
    auto in = open_in(path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        v.tokens.push_back(line);
    }
    if (v.tokens.size() < 2 || v.tokens[0] != Vocabulary::kUnkToken ||
        v.tokens[1] != Vocabulary::kEosToken)
        throw std::runtime_error(path + ": vocabulary must start with " + Vocabulary::kUnkToken +
                                 " and " + Vocabulary::kEosToken);
    for (size_t i = 0; i < v.tokens.size(); ++i) {
        if (v.index.count(v.tokens[i]))
            throw std::runtime_error(path + ": duplicate token '" + v.tokens[i] + "'");
        v.index[v.tokens[i]] = static_cast<int>(i);
    }
    return v;
}

TagVocabulary load_tag_file(const std::string& path, const Vocabulary& vocab) {
    auto in = open_in(path);
    TagVocabulary tv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!vocab.index.count(line))
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": tag '" + line +
                                     "' not in vocabulary");
        if (tv.index.count(line))
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate tag");
        tv.index[line] = static_cast<int>(tv.tags.size());
        tv.tags.push_back(line);
    }
    if (tv.tags.empty()) throw std::runtime_error(path + ": empty tag vocabulary");
    return tv;
}

std::vector<std::vector<std::string>> read_caption_tokens(const std::string& path) {
    auto in = open_in(path);
    std::vector<std::vector<std::string>> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_line(line, path, line_no);
        if (!j.contains("captions") || !j["captions"].is_array())
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": missing 'captions' array");
        for (const auto& c : j["captions"]) out.push_back(tokenize(c.get<std::string>()));
    }
    return out;
}

Dataset load_dataset(const std::string& feature_path, const std::string& caption_path,
                     std::shared_ptr<const Vocabulary> vocab,
                     std::shared_ptr<const TagVocabulary> tags,
                     const std::string& split_name) {
    Dataset ds;
    ds.split = split_name;
    ds.vocab = std::move(vocab);
    ds.tags = std::move(tags);

    auto fin = open_in(feature_path);
    std::string line;
    int line_no = 0;
    std::unordered_map<std::string, size_t> by_id;
    int d2 = -1, d3 = -1;
    while (std::getline(fin, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_line(line, feature_path, line_no);
        if (!j.contains("id") || !j.contains("res2d") || !j.contains("res3d"))
            throw std::runtime_error(feature_path + ":" + std::to_string(line_no) +
                                     ": record needs id/res2d/res3d");
        VideoRecord rec;
        rec.id = j["id"].get<std::string>();
        rec.res2d = j["res2d"].get<Vector>();
        rec.res3d = j["res3d"].get<Vector>();
        if (!all_finite(rec.res2d) || !all_finite(rec.res3d))
            throw std::runtime_error(feature_path + ":" + std::to_string(line_no) +
                                     ": non-finite feature entry");
        if (d2 < 0) {
            d2 = static_cast<int>(rec.res2d.size());
            d3 = static_cast<int>(rec.res3d.size());
        } else if (d2 != static_cast<int>(rec.res2d.size()) ||
                   d3 != static_cast<int>(rec.res3d.size())) {
            throw std::runtime_error(feature_path + ":" + std::to_string(line_no) +
                                     ": inconsistent feature dimensions for id " + rec.id);
        }
        if (by_id.count(rec.id))
            throw std::runtime_error(feature_path + ":" + std::to_string(line_no) +
                                     ": duplicate video id " + rec.id);
        by_id[rec.id] = ds.videos.size();
        ds.videos.push_back(std::move(rec));
    }

    auto cin_ = open_in(caption_path);
    line_no = 0;
    std::vector<std::string> missing;
    while (std::getline(cin_, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_line(line, caption_path, line_no);
        if (!j.contains("id") || !j.contains("captions") || !j["captions"].is_array())
            throw std::runtime_error(caption_path + ":" + std::to_string(line_no) +
                                     ": record needs id + captions array");
        const std::string id = j["id"].get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            missing.push_back(id);
            continue;
        }
        VideoRecord& rec = ds.videos[it->second];
        for (const auto& c : j["captions"]) {
            std::vector<int> ids;
            for (const auto& tok : tokenize(c.get<std::string>()))
                ids.push_back(ds.vocab->id(tok));
            if (ids.empty() || ids.back() != Vocabulary::kEos) ids.push_back(Vocabulary::kEos);
            rec.captions.push_back(std::move(ids));
        }
    }
    if (!missing.empty()) {
        std::string ids;
        for (const auto& m : missing) ids += (ids.empty() ? "" : ", ") + m;
        throw std::runtime_error(caption_path + ": caption ids missing from feature file: " + ids);
    }
    std::string uncaptioned;
    for (const auto& rec : ds.videos)
        if (rec.captions.empty()) uncaptioned += (uncaptioned.empty() ? "" : ", ") + rec.id;
    if (!uncaptioned.empty())
        throw std::runtime_error(caption_path + ": no captions for feature ids: " + uncaptioned);
    return ds;
}

void write_semantic_file(const std::string& path, const std::vector<std::string>& ids,
                         const std::vector<Vector>& features) {
    if (ids.size() != features.size())
        throw std::invalid_argument("write_semantic_file: id/feature count mismatch");
    auto out = open_out(path);
    for (size_t i = 0; i < ids.size(); ++i) {
        json j;
        j["id"] = ids[i];
        j["s"] = features[i];
        out << j.dump() << "\n";
    }
}

std::unordered_map<std::string, Vector> load_semantic_file(const std::string& path) {
    auto in = open_in(path);
    std::unordered_map<std::string, Vector> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_line(line, path, line_no);
        if (!j.contains("id") || !j.contains("s"))
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": record needs id + s");
        out[j["id"].get<std::string>()] = j["s"].get<Vector>();
    }
    return out;
}

const std::set<std::string>& default_stoplist() {
    static const std::set<std::string> kStop = {
        "a",  "an",  "the", "is",  "are", "was", "were", "be",   "been", "being",
        "in", "on",  "at",  "of",  "to",  "and", "or",   "with", "for",  "from",
        "by", "it",  "its", "this", "that", "there", "their", "his", "her", "some"};
    return kStop;
}

std::set<std::string> load_stoplist_file(const std::string& path) {
    auto in = open_in(path);
    std::set<std::string> stop;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) stop.insert(line);
    }
    return stop;
}

}  // namespace svcap
