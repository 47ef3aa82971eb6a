#pragma once

#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "svcap/numkit.hpp"

namespace svcap {

// Caption token table. Indices 0 and 1 are reserved for <unk> and <eos>.
struct Vocabulary {
    static constexpr int kUnk = 0;
    static constexpr int kEos = 1;
    static const std::string kUnkToken;
    static const std::string kEosToken;

    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> index;

    int size() const { return static_cast<int>(tokens.size()); }
    int id(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? kUnk : it->second;
    }
    const std::string& token(int id) const { return tokens.at(id); }
};

struct TagVocabulary {
    std::vector<std::string> tags;
    std::unordered_map<std::string, int> index;
    int size() const { return static_cast<int>(tags.size()); }
};

struct VideoRecord {
    std::string id;
    Vector res2d;  // static visual feature
    Vector res3d;  // spatio-temporal visual feature
    std::vector<std::vector<int>> captions;  // token indices, each ends with kEos
};

struct Dataset {
    std::string split;
    std::vector<VideoRecord> videos;
    std::shared_ptr<const Vocabulary> vocab;
    std::shared_ptr<const TagVocabulary> tags;

    int dim_2d() const { return videos.empty() ? 0 : static_cast<int>(videos[0].res2d.size()); }
    int dim_3d() const { return videos.empty() ? 0 : static_cast<int>(videos[0].res3d.size()); }
    int dim_v() const { return dim_2d() + dim_3d(); }
};

// Lowercase, strip punctuation (alphanumerics plus internal apostrophes
// survive), split on whitespace.
std::vector<std::string> tokenize(const std::string& raw);

// Tokens with frequency >= min_count, ordered by frequency desc then
// lexicographic, behind the reserved <unk>/<eos> slots.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& captions,
                            int min_count);

// The K most frequent tokens that are in the vocabulary and not in the
// stoplist; same frequency-then-lexicographic order.
TagVocabulary build_tag_vocabulary(const std::vector<std::vector<std::string>>& captions,
                                   int k, const std::set<std::string>& stoplist,
                                   const Vocabulary& vocab);

// s_hat[j] = 1 iff tag j appears in any caption of the record.
std::vector<int> tag_ground_truth(const VideoRecord& record, const TagVocabulary& tags,
                                  const Vocabulary& vocab);

// v = (r; e), r entries first.
Vector concat_features(const Vector& r, const Vector& e);

struct SynthSpec {
    int train_videos = 50;
    int val_videos = 10;
    int test_videos = 10;
    int captions_per_video = 3;
    int subjects = 5;
    int verbs = 5;
    int objects = 2;
    int dim_2d = 8;
    int dim_3d = 6;
    double noise = 0.0;           // paraphrase probability per caption
    double feature_jitter = 0.0;  // additive gaussian noise on features
    uint64_t seed = 1;
};

struct SyntheticData {
    Dataset train, val, test;
    std::shared_ptr<const Vocabulary> vocab;
    std::shared_ptr<const TagVocabulary> tags;
};

// Deterministic toy corpus. Video i carries template (i mod S*V*O) encoded
// in its feature vector via per-word signature blocks; captions realize the
// template with bounded paraphrase noise; tags are the template words.
SyntheticData generate_synthetic_dataset(const SynthSpec& spec);

// Line-delimited JSON files, one record per line (see README for schemas).
void write_feature_file(const std::string& path, const Dataset& ds);
void write_caption_file(const std::string& path, const Dataset& ds);
void write_vocab_file(const std::string& path, const Vocabulary& vocab);
void write_tag_file(const std::string& path, const TagVocabulary& tags);

Vocabulary load_vocab_file(const std::string& path);
TagVocabulary load_tag_file(const std::string& path, const Vocabulary& vocab);

// Joins a feature file and a caption file into a validated Dataset.
// Unknown caption tokens map to <unk>; a missing <eos> is appended.
Dataset load_dataset(const std::string& feature_path, const std::string& caption_path,
                     std::shared_ptr<const Vocabulary> vocab,
                     std::shared_ptr<const TagVocabulary> tags,
                     const std::string& split_name);

// Raw caption lines of a caption file, for vocabulary construction.
std::vector<std::vector<std::string>> read_caption_tokens(const std::string& path);

// Per-video semantic feature vectors keyed by video id.
void write_semantic_file(const std::string& path, const std::vector<std::string>& ids,
                         const std::vector<Vector>& features);
std::unordered_map<std::string, Vector> load_semantic_file(const std::string& path);

const std::set<std::string>& default_stoplist();
std::set<std::string> load_stoplist_file(const std::string& path);

}  // namespace svcap
