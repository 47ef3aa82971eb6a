#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "svcap/numkit.hpp"

namespace svcap {

// Flat view over one named parameter (or gradient) block. Models expose
// their blocks in a stable order; optimizer state and checkpoints are
// keyed off that order.
struct ParamView {
    std::string name;
    double* data;
    size_t size;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 5.0;  // global-norm gradient clip; <= 0 disables
};

struct AdamState {
    std::vector<Vector> m;  // first moments, one per block
    std::vector<Vector> v;  // second moments
    long step = 0;

    static AdamState like(const std::vector<ParamView>& views);
};

// Scales all gradient blocks by clip/norm when the global L2 norm exceeds
// clip. Returns the pre-clip norm.
double clip_global_norm(const std::vector<ParamView>& grads, double clip);

// Standard Adam step with bias correction, applied in place. Rejects
// non-finite gradients naming the offending block.
void adam_update(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
                 AdamState& state, double lr, const AdamConfig& cfg);

// base * factor^floor(step / interval); interval <= 0 disables decay.
double lr_for_step(long step, double base_lr, double decay_factor, long interval);

}  // namespace svcap
