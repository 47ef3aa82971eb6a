#include "svcap/scn_decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace svcap {

const char* const kGateNames[kNumGates] = {"c", "i", "f", "o"};

namespace {

void check_dims(const ScnDims& d) {
    if (d.hidden < 1 || d.factor < 1 || d.word_dim < 1 || d.feature_dim < 1 || d.tag_dim < 1 ||
        d.vocab < 2)
        throw std::invalid_argument("scn: all dims must be >= 1 (vocab >= 2)");
}

Vector embed_row(const Matrix& embed, int token) {
    if (token < 0 || token >= embed.rows)
        throw std::invalid_argument("scn: token id " + std::to_string(token) + " out of range");
    const double* row = embed.a.data() + static_cast<size_t>(token) * embed.cols;
    return Vector(row, row + embed.cols);
}

}  // namespace

std::vector<ParamView> ScnParameters::param_views() {
    std::vector<ParamView> views;
    auto push = [&](const std::string& name, Matrix& m) {
        views.push_back({name, m.a.data(), m.a.size()});
    };
    for (int z = 0; z < kNumGates; ++z) {
        GateBlock& g = gates[z];
        const std::string zn = kGateNames[z];
        push("Wa_" + zn, g.w_a);
        push("Wb_" + zn, g.w_b);
        push("Wc_" + zn, g.w_c);
        push("Ca_" + zn, g.c_a);
        push("Cb_" + zn, g.c_b);
        push("Cc_" + zn, g.c_c);
        push("Ua_" + zn, g.u_a);
        push("Ub_" + zn, g.u_b);
        push("Uc_" + zn, g.u_c);
        views.push_back({"b_" + zn, g.bias.data(), g.bias.size()});
    }
    push("embed", embed);
    push("start_w", start_w);
    views.push_back({"start_b", start_b.data(), start_b.size()});
    push("out_w", out_w);
    views.push_back({"out_b", out_b.data(), out_b.size()});
    return views;
}

void ScnParameters::zero() {
    for (auto& view : param_views())
        std::fill(view.data, view.data + view.size, 0.0);
}

ScnParameters init_parameters(const ScnDims& dims, uint64_t seed) {
    check_dims(dims);
    SeededRng rng(seed);
    ScnParameters p;
    p.dims = dims;
    for (int z = 0; z < kNumGates; ++z) {
        GateBlock& g = p.gates[z];
        g.w_a = xavier_uniform(dims.factor, dims.word_dim, rng);
        g.w_b = xavier_uniform(dims.factor, dims.tag_dim, rng);
        g.w_c = xavier_uniform(dims.hidden, dims.factor, rng);
        g.c_a = xavier_uniform(dims.factor, dims.feature_dim, rng);
        g.c_b = xavier_uniform(dims.factor, dims.tag_dim, rng);
        g.c_c = xavier_uniform(dims.hidden, dims.factor, rng);
        g.u_a = xavier_uniform(dims.factor, dims.hidden, rng);
        g.u_b = xavier_uniform(dims.factor, dims.tag_dim, rng);
        g.u_c = xavier_uniform(dims.hidden, dims.factor, rng);
        g.bias = Vector(dims.hidden, 0.0);
    }
    p.embed = xavier_uniform(dims.vocab, dims.word_dim, rng);
    p.start_w = xavier_uniform(dims.word_dim, dims.feature_dim, rng);
    p.start_b = Vector(dims.word_dim, 0.0);
    p.out_w = xavier_uniform(dims.vocab, dims.hidden, rng);
    p.out_b = Vector(dims.vocab, 0.0);
    return p;
}

ScnParameters zeros_like(const ScnParameters& p) {
    ScnParameters g = p;
    g.zero();
    return g;
}

GatePaths semantic_factorize(const ScnParameters& p, int z, const Vector& x_t, const Vector& v,
                             const Vector& s, const Vector& h_prev) {
    if (z < 0 || z >= kNumGates) throw std::invalid_argument("semantic_factorize: bad gate id");
    const GateBlock& g = p.gates[z];
    GatePaths out;
    out.x_hat = matvec(g.w_c, hadamard(matvec(g.w_a, x_t), matvec(g.w_b, s)));
    out.v_hat = matvec(g.c_c, hadamard(matvec(g.c_a, v), matvec(g.c_b, s)));
    out.h_hat = matvec(g.u_c, hadamard(matvec(g.u_a, h_prev), matvec(g.u_b, s)));
    return out;
}

SequenceContext make_sequence_context(const ScnParameters& p, const Vector& v, const Vector& s) {
    if (static_cast<int>(v.size()) != p.dims.feature_dim)
        throw std::invalid_argument("scn: video feature dim " + std::to_string(v.size()) +
                                    " != " + std::to_string(p.dims.feature_dim));
    if (static_cast<int>(s.size()) != p.dims.tag_dim)
        throw std::invalid_argument("scn: semantic feature dim " + std::to_string(s.size()) +
                                    " != " + std::to_string(p.dims.tag_dim));
    SequenceContext ctx;
    ctx.v = v;
    ctx.s = s;
    for (int z = 0; z < kNumGates; ++z) {
        const GateBlock& g = p.gates[z];
        ctx.qw[z] = matvec(g.w_b, s);
        ctx.qu[z] = matvec(g.u_b, s);
        ctx.pv[z] = matvec(g.c_a, v);
        ctx.qv[z] = matvec(g.c_b, s);
        ctx.rv[z] = hadamard(ctx.pv[z], ctx.qv[z]);
        ctx.v_hat[z] = matvec(g.c_c, ctx.rv[z]);
    }
    return ctx;
}

CellState scn_step(const ScnParameters& p, const SequenceContext& ctx, const Vector& x_t,
                   const CellState& prev, StepTrace* trace) {
    const int hidden = p.dims.hidden;
    if (static_cast<int>(prev.h.size()) != hidden || static_cast<int>(prev.c.size()) != hidden)
        throw std::invalid_argument("scn_step: state dim mismatch");
    if (static_cast<int>(x_t.size()) != p.dims.word_dim)
        throw std::invalid_argument("scn_step: input dim mismatch");

    std::array<Vector, kNumGates> pre;
    for (int z = 0; z < kNumGates; ++z) {
        const GateBlock& g = p.gates[z];
        Vector pw = matvec(g.w_a, x_t);
        Vector rw = hadamard(pw, ctx.qw[z]);
        Vector pu = matvec(g.u_a, prev.h);
        Vector ru = hadamard(pu, ctx.qu[z]);
        pre[z] = matvec(g.w_c, rw);
        axpy(1.0, matvec(g.u_c, ru), pre[z]);
        axpy(1.0, ctx.v_hat[z], pre[z]);
        axpy(1.0, g.bias, pre[z]);
        if (trace) {
            trace->pw[z] = std::move(pw);
            trace->rw[z] = std::move(rw);
            trace->pu[z] = std::move(pu);
            trace->ru[z] = std::move(ru);
        }
    }

    CellState next(hidden);
    const Vector chat = tanh_elem(pre[kGateC]);
    const Vector gi = sigmoid(pre[kGateI]);
    const Vector gf = sigmoid(pre[kGateF]);
    const Vector go = sigmoid(pre[kGateO]);
    for (int j = 0; j < hidden; ++j) next.c[j] = gf[j] * prev.c[j] + gi[j] * chat[j];
    const Vector tc = tanh_elem(next.c);
    for (int j = 0; j < hidden; ++j) next.h[j] = go[j] * tc[j];

    if (trace) {
        trace->x = x_t;
        trace->h_prev = prev.h;
        trace->c_prev = prev.c;
        trace->act[kGateC] = chat;
        trace->act[kGateI] = gi;
        trace->act[kGateF] = gf;
        trace->act[kGateO] = go;
        trace->c = next.c;
        trace->tanh_c = tc;
        trace->h = next.h;
    }
    return next;
}

std::pair<CellState, StepTrace> scn_step(const ScnParameters& p, const Vector& x_t,
                                         const Vector& v, const Vector& s,
                                         const CellState& prev) {
    const SequenceContext ctx = make_sequence_context(p, v, s);
    StepTrace trace;
    CellState next = scn_step(p, ctx, x_t, prev, &trace);
    return {std::move(next), std::move(trace)};
}

Vector output_distribution(const ScnParameters& p, const Vector& h_t) {
    Vector logits = matvec(p.out_w, h_t);
    for (size_t i = 0; i < logits.size(); ++i) logits[i] += p.out_b[i];
    return softmax(logits);
}

namespace {

Vector start_embedding(const ScnParameters& p, const Vector& v) {
    Vector x = matvec(p.start_w, v);
    for (size_t i = 0; i < x.size(); ++i) x[i] += p.start_b[i];
    return x;
}

int sample_token(const Vector& dist, SampleMode mode, SeededRng* rng) {
    if (mode == SampleMode::Argmax) return argmax(dist);
    if (!rng) throw std::invalid_argument("scn: multinomial sampling needs an rng");
    return multinomial_draw(dist, *rng);
}

}  // namespace

int scheduled_next_input(const Vector& dist, double epsilon, SampleMode mode, int ground_truth,
                         SeededRng* rng) {
    if (rng) {
        const double u = rng->uniform();
        if (u < epsilon) return sample_token(dist, mode, rng);
    }
    if (ground_truth < 0)
        throw std::invalid_argument("scheduled_next_input: no ground truth on the teacher branch");
    return ground_truth;
}

SequenceResult forward_sequence(const ScnParameters& p, const SequenceContext& ctx,
                                const std::vector<int>& targets, double epsilon,
                                SampleMode mode, SeededRng* sample_rng, int max_steps) {
    if (targets.empty()) throw std::invalid_argument("forward_sequence: empty guide");
    if (max_steps < 1) throw std::invalid_argument("forward_sequence: max_steps must be >= 1");
    if (epsilon > 0.0 && !sample_rng)
        throw std::invalid_argument("forward_sequence: scheduled sampling needs an rng");
    const int steps = std::min<int>(static_cast<int>(targets.size()), max_steps);

    SequenceResult out;
    out.steps.resize(steps);
    out.input_tokens.resize(steps, -1);

    CellState state(p.dims.hidden);
    Vector x = start_embedding(p, ctx.v);
    for (int t = 0; t < steps; ++t) {
        out.steps[t].input_token = out.input_tokens[t];
        state = scn_step(p, ctx, x, state, &out.steps[t]);
        out.steps[t].dist = output_distribution(p, state.h);
        const int next_token =
            scheduled_next_input(out.steps[t].dist, epsilon, mode, targets[t], sample_rng);
        if (t + 1 < steps) {
            out.input_tokens[t + 1] = next_token;
            x = embed_row(p.embed, next_token);
        }
    }
    return out;
}

void backward_sequence(const ScnParameters& p, const SequenceContext& ctx,
                       const SequenceResult& fwd, const std::vector<int>& targets,
                       double weight, ScnParameters& grads) {
    const int steps = static_cast<int>(fwd.steps.size());
    if (steps == 0) throw std::invalid_argument("backward_sequence: empty trace");
    if (static_cast<int>(targets.size()) < steps)
        throw std::invalid_argument("backward_sequence: trace has " + std::to_string(steps) +
                                    " steps but only " + std::to_string(targets.size()) +
                                    " targets");
    const int hidden = p.dims.hidden;

    std::array<Vector, kNumGates> dqw_acc, dqu_acc, dvhat_acc;
    for (int z = 0; z < kNumGates; ++z) {
        dqw_acc[z] = Vector(p.dims.factor, 0.0);
        dqu_acc[z] = Vector(p.dims.factor, 0.0);
        dvhat_acc[z] = Vector(hidden, 0.0);
    }

    Vector dh_carry(hidden, 0.0), dc_carry(hidden, 0.0);
    for (int t = steps - 1; t >= 0; --t) {
        const StepTrace& st = fwd.steps[t];
        const int y = targets[t];
        if (y < 0 || y >= p.dims.vocab)
            throw std::invalid_argument("backward_sequence: target out of vocabulary");

        // d(-log dist[y]) / dlogits = dist - onehot(y)
        Vector dlogits = st.dist;
        dlogits[y] -= 1.0;
        for (double& g : dlogits) g *= weight;
        add_outer(grads.out_w, dlogits, st.h);
        axpy(1.0, dlogits, grads.out_b);

        Vector dh = matvec_t(p.out_w, dlogits);
        axpy(1.0, dh_carry, dh);

        const Vector& go = st.act[kGateO];
        const Vector& gi = st.act[kGateI];
        const Vector& gf = st.act[kGateF];
        const Vector& chat = st.act[kGateC];

        // h = o * tanh(c); c = f * c_prev + i * chat
        Vector dpre_o(hidden), dpre_i(hidden), dpre_f(hidden), dpre_c(hidden), dc(hidden);
        for (int j = 0; j < hidden; ++j) {
            const double do_j = dh[j] * st.tanh_c[j];
            dc[j] = dh[j] * go[j] * (1.0 - st.tanh_c[j] * st.tanh_c[j]) + dc_carry[j];
            dpre_o[j] = do_j * go[j] * (1.0 - go[j]);
            dpre_i[j] = dc[j] * chat[j] * gi[j] * (1.0 - gi[j]);
            dpre_f[j] = dc[j] * st.c_prev[j] * gf[j] * (1.0 - gf[j]);
            dpre_c[j] = dc[j] * gi[j] * (1.0 - chat[j] * chat[j]);
            dc_carry[j] = dc[j] * gf[j];
        }
        const std::array<const Vector*, kNumGates> dpre = {&dpre_c, &dpre_i, &dpre_f, &dpre_o};

        std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
        Vector dx(p.dims.word_dim, 0.0);
        for (int z = 0; z < kNumGates; ++z) {
            const GateBlock& g = p.gates[z];
            GateBlock& gg = grads.gates[z];
            const Vector& d = *dpre[z];
            axpy(1.0, d, gg.bias);
            axpy(1.0, d, dvhat_acc[z]);

            // word path: x_hat = W_c ((W_a x) o qw)
            add_outer(gg.w_c, d, st.rw[z]);
            Vector drw = matvec_t(g.w_c, d);
            Vector dpw = hadamard(drw, ctx.qw[z]);
            axpy(1.0, hadamard(drw, st.pw[z]), dqw_acc[z]);
            add_outer(gg.w_a, dpw, st.x);
            axpy(1.0, matvec_t(g.w_a, dpw), dx);

            // recurrent path: h_hat = U_c ((U_a h_prev) o qu)
            add_outer(gg.u_c, d, st.ru[z]);
            Vector dru = matvec_t(g.u_c, d);
            Vector dpu = hadamard(dru, ctx.qu[z]);
            axpy(1.0, hadamard(dru, st.pu[z]), dqu_acc[z]);
            add_outer(gg.u_a, dpu, st.h_prev);
            axpy(1.0, matvec_t(g.u_a, dpu), dh_carry);
        }

        if (t == 0) {
            add_outer(grads.start_w, dx, ctx.v);
            axpy(1.0, dx, grads.start_b);
        } else {
            const int tok = fwd.input_tokens[t];
            double* row = grads.embed.a.data() + static_cast<size_t>(tok) * grads.embed.cols;
            for (int j = 0; j < grads.embed.cols; ++j) row[j] += dx[j];
        }
    }

    // visual path and all b-projections see constant (v, s): flush the
    // per-sequence accumulators with single outer products
    for (int z = 0; z < kNumGates; ++z) {
        const GateBlock& g = p.gates[z];
        GateBlock& gg = grads.gates[z];
        add_outer(gg.c_c, dvhat_acc[z], ctx.rv[z]);
        Vector drv = matvec_t(g.c_c, dvhat_acc[z]);
        add_outer(gg.c_a, hadamard(drv, ctx.qv[z]), ctx.v);
        add_outer(gg.c_b, hadamard(drv, ctx.pv[z]), ctx.s);
        add_outer(gg.w_b, dqw_acc[z], ctx.s);
        add_outer(gg.u_b, dqu_acc[z], ctx.s);
    }
}

std::vector<int> decode_sequence(const ScnParameters& p, const SequenceContext& ctx,
                                 SampleMode mode, SeededRng* sample_rng, int max_len) {
    std::vector<int> out;
    CellState state(p.dims.hidden);
    Vector x = start_embedding(p, ctx.v);
    for (int t = 0; t < max_len; ++t) {
        state = scn_step(p, ctx, x, state, nullptr);
        const Vector dist = output_distribution(p, state.h);
        const int token = sample_token(dist, mode, sample_rng);
        if (token == 1) break;  // <eos>
        out.push_back(token);
        x = embed_row(p.embed, token);
    }
    return out;
}

}  // namespace svcap
