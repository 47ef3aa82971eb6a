#include "svcap/optim.hpp"

#include <cmath>

namespace svcap {

AdamState AdamState::like(const std::vector<ParamView>& views) {
    AdamState s;
    s.m.reserve(views.size());
    s.v.reserve(views.size());
    for (const auto& view : views) {
        s.m.emplace_back(view.size, 0.0);
        s.v.emplace_back(view.size, 0.0);
    }
    return s;
}

double clip_global_norm(const std::vector<ParamView>& grads, double clip) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (size_t i = 0; i < g.size; ++i) sq += g.data[i] * g.data[i];
    const double norm = std::sqrt(sq);
    if (clip > 0.0 && norm > clip) {
        const double scale = clip / norm;
        for (const auto& g : grads)
            for (size_t i = 0; i < g.size; ++i) g.data[i] *= scale;
    }
    return norm;
}

void adam_update(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
                 AdamState& state, double lr, const AdamConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_update: block count mismatch");
    for (size_t b = 0; b < grads.size(); ++b) {
        if (grads[b].size != params[b].size)
            throw std::invalid_argument("adam_update: size mismatch in block " + params[b].name);
        for (size_t i = 0; i < grads[b].size; ++i)
            if (!std::isfinite(grads[b].data[i]))
                throw DivergenceError("adam_update: non-finite gradient in block " + grads[b].name);
    }
    clip_global_norm(grads, cfg.clip_norm);
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t b = 0; b < params.size(); ++b) {
        double* p = params[b].data;
        const double* g = grads[b].data;
        double* m = state.m[b].data();
        double* v = state.v[b].data();
        for (size_t i = 0; i < params[b].size; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

double lr_for_step(long step, double base_lr, double decay_factor, long interval) {
    if (interval <= 0) return base_lr;
    const long k = step / interval;
    return base_lr * std::pow(decay_factor, static_cast<double>(k));
}

}  // namespace svcap
