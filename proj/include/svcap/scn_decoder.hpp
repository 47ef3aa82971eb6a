#pragma once

#include <array>
#include <vector>

#include "svcap/numkit.hpp"
#include "svcap/optim.hpp"

namespace svcap {

// Gate order used everywhere: raw cell, input, forget, output.
enum Gate : int { kGateC = 0, kGateI = 1, kGateF = 2, kGateO = 3 };
constexpr int kNumGates = 4;
extern const char* const kGateNames[kNumGates];

struct ScnDims {
    int hidden = 64;
    int factor = 64;    // shared rank of the a/b/c factorization triples
    int word_dim = 32;  // D_w
    int feature_dim = 0;  // D_v
    int tag_dim = 0;      // K
    int vocab = 0;        // V
};

// One z in {c,i,f,o}: three factorization triples plus the gate bias.
struct GateBlock {
    Matrix w_a, w_b, w_c;  // word path:     factor x D_w, factor x K, hidden x factor
    Matrix c_a, c_b, c_c;  // visual path:   factor x D_v, factor x K, hidden x factor
    Matrix u_a, u_b, u_c;  // recurrent path: factor x hidden, factor x K, hidden x factor
    Vector bias;           // hidden
};

struct ScnParameters {
    ScnDims dims;
    std::array<GateBlock, kNumGates> gates;
    Matrix embed;    // V x D_w
    Matrix start_w;  // D_w x D_v: affine map of v fed as the step-0 input
    Vector start_b;  // D_w
    Matrix out_w;    // V x hidden
    Vector out_b;    // V

    std::vector<ParamView> param_views();
    void zero();
};

ScnParameters init_parameters(const ScnDims& dims, uint64_t seed);
// Gradient accumulator with the same block layout, all zeros.
ScnParameters zeros_like(const ScnParameters& p);

struct CellState {
    Vector h, c;
    explicit CellState(int hidden = 0) : h(hidden, 0.0), c(hidden, 0.0) {}
};

struct GatePaths {
    Vector x_hat, v_hat, h_hat;  // each of size hidden
};

// x_hat = W_c ((W_a x) o (W_b s)), v_hat = C_c ((C_a v) o (C_b s)),
// h_hat = U_c ((U_a h_prev) o (U_b s)).
GatePaths semantic_factorize(const ScnParameters& p, int z, const Vector& x_t, const Vector& v,
                             const Vector& s, const Vector& h_prev);

struct StepTrace {
    int input_token = -1;  // -1 for the step-0 start embedding
    Vector x;              // input embedding fed at this step
    Vector h_prev, c_prev;
    std::array<Vector, kNumGates> pw, rw;  // W_a x and its gated product, per gate
    std::array<Vector, kNumGates> pu, ru;  // U_a h_prev and its gated product
    std::array<Vector, kNumGates> act;     // i/f/o sigmoid outputs; raw cell tanh at kGateC
    Vector c, tanh_c, h;
    Vector dist;  // softmax over the vocabulary
};

// Per-sequence constants: v and s are held fixed across all steps, so the
// visual path and every b-projection are computed once.
struct SequenceContext {
    Vector v, s;
    std::array<Vector, kNumGates> qw, qu;      // W_b s, U_b s
    std::array<Vector, kNumGates> pv, qv, rv;  // C_a v, C_b s, their product
    std::array<Vector, kNumGates> v_hat;       // C_c rv
};

SequenceContext make_sequence_context(const ScnParameters& p, const Vector& v, const Vector& s);

// One recurrence step; fills the trace entry needed by the backward pass.
CellState scn_step(const ScnParameters& p, const SequenceContext& ctx, const Vector& x_t,
                   const CellState& prev, StepTrace* trace);

// Convenience form matching the recurrence as written: builds the context
// on the fly.
std::pair<CellState, StepTrace> scn_step(const ScnParameters& p, const Vector& x_t,
                                         const Vector& v, const Vector& s,
                                         const CellState& prev);

// softmax(out_w h + out_b)
Vector output_distribution(const ScnParameters& p, const Vector& h_t);

enum class SampleMode { Argmax, Multinomial };

// Input-provenance rule for one scheduled-sampling step: draw the coin
// (when an rng is supplied), and with probability epsilon take the model's
// word from dist (argmax or multinomial), otherwise the ground truth.
// A missing ground truth on the teacher branch is rejected.
int scheduled_next_input(const Vector& dist, double epsilon, SampleMode mode, int ground_truth,
                         SeededRng* rng);

struct SequenceResult {
    std::vector<StepTrace> steps;
    std::vector<int> input_tokens;  // realized input per step; [0] is -1
};

// Runs one guided sequence of exactly targets.size() steps (capped at
// max_steps). Step 0 feeds the start embedding; later inputs are the
// previous ground-truth token, except that with probability epsilon the
// previous model output is sampled instead (per-step coin). The coin and
// any sampling consume sample_rng; epsilon 0 with a null rng is plain
// teacher forcing.
SequenceResult forward_sequence(const ScnParameters& p, const SequenceContext& ctx,
                                const std::vector<int>& targets, double epsilon,
                                SampleMode mode, SeededRng* sample_rng, int max_steps);

// Adds weight * d/dtheta [ -sum_t log dist_t[targets[t]] ] into grads.
// Sampled inputs are constants with respect to earlier steps; their
// embedding rows still receive gradient.
void backward_sequence(const ScnParameters& p, const SequenceContext& ctx,
                       const SequenceResult& fwd, const std::vector<int>& targets,
                       double weight, ScnParameters& grads);

// Free-running decode: argmax or multinomial over the output distribution,
// halting on EOS (token id 1) or max_len. EOS is not included in the output.
std::vector<int> decode_sequence(const ScnParameters& p, const SequenceContext& ctx,
                                 SampleMode mode, SeededRng* sample_rng, int max_len);

}  // namespace svcap
