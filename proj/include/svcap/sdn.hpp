#pragma once

#include <string>
#include <vector>

#include "svcap/corpus.hpp"
#include "svcap/numkit.hpp"
#include "svcap/optim.hpp"

namespace svcap {

// Multi-label tag detector: an MLP with rectifier hidden layers and a
// sigmoid output over the K tags.
struct SdnParameters {
    std::vector<Matrix> w;  // one per layer
    std::vector<Vector> b;

    int input_dim() const { return w.empty() ? 0 : w.front().cols; }
    int output_dim() const { return w.empty() ? 0 : b.back().size(); }
    std::vector<ParamView> param_views();
};

// Which blocks of the concatenated video feature feed the detector.
enum class FeatureSet { Both, Res2d, Res3d };
FeatureSet feature_set_from_string(const std::string& s);
std::string to_string(FeatureSet fs);
Vector select_features(const VideoRecord& rec, FeatureSet fs);

struct SdnConfig {
    std::vector<int> hidden = {512, 512};
    FeatureSet feature_set = FeatureSet::Both;
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double clip_eps = 1e-7;  // probability clip inside the loss
    AdamConfig adam;
    uint64_t seed = 1;
};

// layer_dims = [input, hidden..., K]
SdnParameters sdn_init(const std::vector<int>& layer_dims, SeededRng& rng);

// Tag probability vector, strictly inside (0,1)^K.
Vector sdn_forward(const SdnParameters& params, const Vector& v);

// Mean over the batch of the summed binary cross-entropy, probabilities
// clipped to [clip_eps, 1-clip_eps].
double sdn_bce_loss(const std::vector<Vector>& s, const std::vector<std::vector<int>>& s_hat,
                    double clip_eps);

// Adds the analytic gradient of sdn_bce_loss over the batch into grads
// (same shape as params). Returns the batch loss.
double sdn_backward(const SdnParameters& params, const std::vector<Vector>& inputs,
                    const std::vector<std::vector<int>>& s_hat, double clip_eps,
                    SdnParameters& grads);

struct SdnTrainResult {
    SdnParameters params;           // checkpoint with maximal validation mAP
    std::vector<double> map_trace;  // validation mAP per epoch
    int best_epoch = -1;
    double best_map = 0.0;
};

SdnTrainResult sdn_train(const Dataset& train, const Dataset& val, const SdnConfig& cfg);

// Forward pass over a whole split, in video order.
std::vector<Vector> sdn_predict(const SdnParameters& params, const Dataset& ds, FeatureSet fs);

// Ground-truth tag vectors for a split, in video order.
std::vector<std::vector<int>> split_tag_truth(const Dataset& ds);

struct SdnCheckpointData {
    SdnParameters params;
    FeatureSet feature_set = FeatureSet::Both;
    int best_epoch = -1;
    double best_map = 0.0;
    std::string config_fingerprint;
    std::vector<double> map_trace;
};

void save_sdn_checkpoint(const std::string& path, const SdnCheckpointData& ckpt);
SdnCheckpointData load_sdn_checkpoint(const std::string& path);

}  // namespace svcap
