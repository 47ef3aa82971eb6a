#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "svcap/corpus.hpp"
#include "svcap/metrics.hpp"
#include "svcap/optim.hpp"
#include "svcap/scn_decoder.hpp"

namespace svcap {

enum class Strategy { TeacherForcing, ScheduledArgmax, ScheduledMultinomial };
Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);

struct TrainConfig {
    Strategy strategy = Strategy::ScheduledMultinomial;
    double beta = 0.7;
    double epsilon_rate = 0.008;
    double epsilon_max = 1.0;
    int epochs = 50;
    int batch_size = 64;
    double learning_rate = 2e-4;
    double lr_decay_factor = 0.316;
    long lr_decay_interval = 20350;  // optimizer steps; <= 0 disables decay
    AdamConfig adam;                 // beta1 0.9, beta2 0.999, eps 1e-8, clip 5
    int max_caption_len = 30;
    uint64_t seed = 1;
    int hidden = 64;
    int factor = 64;
    int word_dim = 32;
};

// min(cap, ep * rate): pure teacher forcing in epoch 0, then a linear ramp.
double epsilon_for_epoch(int ep, double rate, double cap = 1.0);

// sum_t log p_t[target_t], probabilities clipped below at 1e-12.
double sequence_log_prob(const std::vector<Vector>& dists, const std::vector<int>& targets);

// -sum_i (1/L_i^beta) * log_prob_i
double length_modulated_loss(const std::vector<double>& log_probs,
                             const std::vector<int>& lengths, double beta);

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double epsilon = 0.0;
    MetricReport metrics;  // validation metrics; overall filled once tops are known
};

struct Checkpoint {
    ScnParameters params;
    AdamState adam;
    int epoch = -1;
    std::string config_fingerprint;
    EpochRecord validation;  // the record that selected this checkpoint
};

struct TrainResult {
    Checkpoint best;  // maximal validation overall score
    Checkpoint last;  // state after the final epoch, for resume and sweeps
    std::vector<EpochRecord> trace;
};

// Semantic feature lookup: every video id in the splits must be present.
using SemanticMap = std::unordered_map<std::string, Vector>;

// Scheduled-sampling training per the epsilon schedule, minimizing the
// length-modulated loss with Adam. After every epoch the validation split
// is decoded (argmax) and scored; the returned checkpoint maximizes the
// overall score where each metric's top is its maximum across the run's
// epochs. An injected METEOR value, when present, joins the score.
TrainResult train_captioner(const Dataset& train, const Dataset& val,
                            const SemanticMap& semantic, const TrainConfig& cfg,
                            const std::string& fingerprint = "",
                            std::optional<double> injected_meteor = std::nullopt);

std::vector<int> generate_caption(const ScnParameters& params, const Vector& v, const Vector& s,
                                  SampleMode mode, int max_len, SeededRng* rng = nullptr);

struct SplitEvaluation {
    MetricReport metrics;
    std::vector<TokenSeq> candidates;  // argmax captions, video order, no EOS
};

// Argmax captions for every video plus BLEU-4 / ROUGE-L / CIDEr against the
// split's references.
SplitEvaluation evaluate_split(const ScnParameters& params, const Dataset& ds,
                               const SemanticMap& semantic, int max_len,
                               std::optional<double> injected_meteor = std::nullopt);

// Teacher-forced next-token argmax accuracy over all captions of the split.
double token_accuracy(const ScnParameters& params, const Dataset& ds,
                      const SemanticMap& semantic, int max_len);

void write_metric_trace(const std::string& path, const std::vector<EpochRecord>& trace);

void save_decoder_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_decoder_checkpoint(const std::string& path);

// References of a split with <eos> stripped, in video order.
std::vector<RefSet> split_references(const Dataset& ds);

// Semantic features from ground-truth tags, squashed into (0,1).
SemanticMap tag_semantic_map(const Dataset& ds, double hi = 0.95, double lo = 0.05);

}  // namespace svcap
