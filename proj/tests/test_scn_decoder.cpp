#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "svcap/scn_decoder.hpp"

using namespace svcap;

namespace {

ScnDims tiny_dims() {
    ScnDims d;
    d.hidden = 5;
    d.factor = 4;
    d.word_dim = 3;
    d.feature_dim = 6;
    d.tag_dim = 2;
    d.vocab = 7;
    return d;
}

Vector rand_vec(SeededRng& rng, int n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("semantic factorization annihilation cases") {
    const ScnParameters p = init_parameters(tiny_dims(), 1);
    SeededRng rng(2);
    const Vector x = rand_vec(rng, 3), v = rand_vec(rng, 6), h = rand_vec(rng, 5);

    // zero semantic feature kills every path
    const GatePaths z = semantic_factorize(p, kGateI, x, v, Vector(2, 0.0), h);
    for (double val : z.x_hat) CHECK(val == 0.0);
    for (double val : z.v_hat) CHECK(val == 0.0);
    for (double val : z.h_hat) CHECK(val == 0.0);

    // zero a-matrices kill the paths regardless of s
    ScnParameters pz = p;
    for (int g = 0; g < kNumGates; ++g) {
        pz.gates[g].w_a.zero();
        pz.gates[g].c_a.zero();
        pz.gates[g].u_a.zero();
    }
    const GatePaths z2 = semantic_factorize(pz, kGateO, x, v, {0.4, 0.8}, h);
    for (double val : z2.x_hat) CHECK(val == 0.0);
    for (double val : z2.v_hat) CHECK(val == 0.0);
    for (double val : z2.h_hat) CHECK(val == 0.0);
}

TEST_CASE("semantic factorization matches the scalar oracle") {
    const ScnParameters p = init_parameters(tiny_dims(), 42);
    SeededRng rng(43);
    const Vector x = rand_vec(rng, 3), v = rand_vec(rng, 6), s = rand_vec(rng, 2, 0.0, 1.0),
                 h = rand_vec(rng, 5);
    for (int z = 0; z < kNumGates; ++z) {
        const GatePaths got = semantic_factorize(p, z, x, v, s, h);
        const oracles::FactorOut want = oracles::factorize(p, z, x, v, s, h);
        for (int j = 0; j < 5; ++j) {
            CHECK(got.x_hat[j] == doctest::Approx(want.x_hat[j]).epsilon(1e-12));
            CHECK(got.v_hat[j] == doctest::Approx(want.v_hat[j]).epsilon(1e-12));
            CHECK(got.h_hat[j] == doctest::Approx(want.h_hat[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("scn step degenerate cases") {
    ScnParameters p = init_parameters(tiny_dims(), 3);
    for (auto& view : p.param_views()) std::fill(view.data, view.data + view.size, 0.0);
    SeededRng rng(4);
    const Vector x = rand_vec(rng, 3), v = rand_vec(rng, 6), s = rand_vec(rng, 2, 0.0, 1.0);

    // all parameters zero, zero previous cell: everything collapses
    CellState zero_state(5);
    auto [st1, tr1] = scn_step(p, x, v, s, zero_state);
    for (int j = 0; j < 5; ++j) {
        CHECK(tr1.act[kGateI][j] == 0.5);
        CHECK(tr1.act[kGateF][j] == 0.5);
        CHECK(tr1.act[kGateO][j] == 0.5);
        CHECK(tr1.act[kGateC][j] == 0.0);
        CHECK(st1.c[j] == 0.0);
        CHECK(st1.h[j] == 0.0);
    }

    // all parameters zero, c_prev = c: gates at one half
    CellState prev(5);
    prev.c = rand_vec(rng, 5);
    auto [st2, tr2] = scn_step(p, x, v, s, prev);
    for (int j = 0; j < 5; ++j) {
        CHECK(st2.c[j] == doctest::Approx(0.5 * prev.c[j]).epsilon(1e-15));
        CHECK(st2.h[j] == doctest::Approx(0.5 * std::tanh(0.5 * prev.c[j])).epsilon(1e-15));
    }

    // saturated forget gate passes the previous cell through
    ScnParameters pf = p;
    pf.gates[kGateF].bias = Vector(5, 100.0);
    auto [st3, tr3] = scn_step(pf, x, v, s, prev);
    for (int j = 0; j < 5; ++j) CHECK(st3.c[j] == doctest::Approx(prev.c[j]).epsilon(1e-12));
}

TEST_CASE("scn step matches the scalar-loop oracle on random instances") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const ScnParameters p = init_parameters(tiny_dims(), 100 + seed);
        SeededRng rng(200 + seed);
        const Vector x = rand_vec(rng, 3), v = rand_vec(rng, 6), s = rand_vec(rng, 2, 0.0, 1.0);
        CellState prev(5);
        prev.h = rand_vec(rng, 5);
        prev.c = rand_vec(rng, 5);
        auto [got, trace] = scn_step(p, x, v, s, prev);
        const oracles::StepOut want = oracles::scn_step(p, x, v, s, prev.h, prev.c);
        for (int j = 0; j < 5; ++j) {
            CHECK(got.h[j] == doctest::Approx(want.h[j]).epsilon(1e-12));
            CHECK(got.c[j] == doctest::Approx(want.c[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("semantic gating: with s = 0 the state depends only on biases") {
    const ScnParameters p = init_parameters(tiny_dims(), 7);
    SeededRng rng(8);
    const Vector s0(2, 0.0);
    CellState prev(5);

    auto [sa, ta] = scn_step(p, rand_vec(rng, 3), rand_vec(rng, 6), s0, prev);
    auto [sb, tb] = scn_step(p, rand_vec(rng, 3), rand_vec(rng, 6), s0, prev);
    CHECK(sa.h == sb.h);
    CHECK(sa.c == sb.c);

    // equals the bias-only computation, exactly
    for (int j = 0; j < 5; ++j) {
        const double gi = 1.0 / (1.0 + std::exp(-p.gates[kGateI].bias[j]));
        const double chat = std::tanh(p.gates[kGateC].bias[j]);
        const double go = 1.0 / (1.0 + std::exp(-p.gates[kGateO].bias[j]));
        CHECK(sa.c[j] == gi * chat);
        CHECK(sa.h[j] == go * std::tanh(sa.c[j]));
    }
}

TEST_CASE("gate ranges") {
    SeededRng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const ScnParameters p = init_parameters(tiny_dims(), 300 + trial);
        CellState prev(5);
        prev.h = rand_vec(rng, 5, -3, 3);
        prev.c = rand_vec(rng, 5, -3, 3);
        auto [st, tr] = scn_step(p, rand_vec(rng, 3, -5, 5), rand_vec(rng, 6, -5, 5),
                                 rand_vec(rng, 2, 0, 1), prev);
        for (int j = 0; j < 5; ++j) {
            for (int g : {kGateI, kGateF, kGateO}) {
                CHECK(tr.act[g][j] > 0.0);
                CHECK(tr.act[g][j] < 1.0);
            }
            CHECK(tr.act[kGateC][j] > -1.0);
            CHECK(tr.act[kGateC][j] < 1.0);
        }
    }
}

TEST_CASE("output distribution") {
    ScnParameters p = init_parameters(tiny_dims(), 10);
    p.out_w.zero();
    p.out_b = Vector(7, 0.0);
    const Vector u = output_distribution(p, Vector(5, 0.3));
    for (double v : u) CHECK(v == doctest::Approx(1.0 / 7).epsilon(1e-12));

    ScnDims d2 = tiny_dims();
    d2.vocab = 2;
    ScnParameters p2 = init_parameters(d2, 11);
    p2.out_w.zero();
    p2.out_b = {std::log(3.0), 0.0};
    const Vector q = output_distribution(p2, Vector(5, 0.0));
    CHECK(q[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(0.25).epsilon(1e-12));

    SeededRng rng(12);
    const ScnParameters p3 = init_parameters(tiny_dims(), 12);
    const Vector dist = output_distribution(p3, rand_vec(rng, 5));
    double sum = 0;
    for (double v : dist) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("teacher-forced forward is a pure function") {
    const ScnParameters p = init_parameters(tiny_dims(), 13);
    SeededRng rng(14);
    const Vector v = rand_vec(rng, 6), s = rand_vec(rng, 2, 0, 1);
    const std::vector<int> targets = {2, 4, 3, 1};
    const SequenceContext ctx = make_sequence_context(p, v, s);
    const SequenceResult a = forward_sequence(p, ctx, targets, 0.0, SampleMode::Argmax, nullptr, 30);
    const SequenceResult b = forward_sequence(p, ctx, targets, 0.0, SampleMode::Argmax, nullptr, 30);
    REQUIRE(a.steps.size() == 4);
    for (size_t t = 0; t < a.steps.size(); ++t) CHECK(a.steps[t].dist == b.steps[t].dist);
    CHECK(a.input_tokens == std::vector<int>{-1, 2, 4, 3});

    CHECK_THROWS_AS(forward_sequence(p, ctx, {}, 0.0, SampleMode::Argmax, nullptr, 30),
                    std::invalid_argument);
}

TEST_CASE("scheduled_next_input provenance rule") {
    const Vector dist = {0.1, 0.2, 0.7};
    SeededRng rng(15);
    // epsilon 0: ground truth always, even with an rng attached
    for (int i = 0; i < 20; ++i) CHECK(scheduled_next_input(dist, 0.0, SampleMode::Argmax, 1, &rng) == 1);
    // epsilon 1 argmax: always the model's best word
    for (int i = 0; i < 20; ++i) CHECK(scheduled_next_input(dist, 1.0, SampleMode::Argmax, 1, &rng) == 2);
    // no rng: teacher forcing
    CHECK(scheduled_next_input(dist, 0.0, SampleMode::Multinomial, 0, nullptr) == 0);
    // teacher branch without ground truth is an error
    CHECK_THROWS_AS(scheduled_next_input(dist, 0.0, SampleMode::Argmax, -1, &rng),
                    std::invalid_argument);
}

TEST_CASE("backward_sequence gradient check, teacher forcing and fixed guides") {
    int checked = 0;
    for (uint64_t seed = 0; checked < 4; ++seed) {
        ScnDims d;
        d.hidden = 4;
        d.factor = 3;
        d.word_dim = 3;
        d.feature_dim = 4;
        d.tag_dim = 2;
        d.vocab = 6;
        ScnParameters p = init_parameters(d, 500 + seed);
        SeededRng rng(600 + seed);
        const Vector v = rand_vec(rng, 4), s = rand_vec(rng, 2, 0, 1);
        const std::vector<int> targets = {3, 5, 2, 1};
        // fixed guide differing from the targets models a frozen sampled path
        const std::vector<int> guide = seed % 2 ? std::vector<int>{4, 0, 2, 1} : targets;
        const double weight = 1.0 / std::pow(4.0, 0.7);

        ScnParameters grads = zeros_like(p);
        {
            const SequenceContext ctx = make_sequence_context(p, v, s);
            const SequenceResult fwd =
                forward_sequence(p, ctx, guide, 0.0, SampleMode::Argmax, nullptr, 30);
            backward_sequence(p, ctx, fwd, targets, weight, grads);
        }
        auto loss = [&]() {
            const SequenceContext ctx = make_sequence_context(p, v, s);
            const SequenceResult fwd =
                forward_sequence(p, ctx, guide, 0.0, SampleMode::Argmax, nullptr, 30);
            double lp = 0;
            for (size_t t = 0; t < fwd.steps.size(); ++t)
                lp += std::log(fwd.steps[t].dist[targets[t]]);
            return -weight * lp;
        };
        const auto bad = gradcheck::check_all(p.param_views(), grads.param_views(), loss);
        INFO("seed ", seed, " block ", bad.block, " idx ", bad.index, " analytic ", bad.analytic,
             " numeric ", bad.numeric);
        CHECK(bad.ok);
        ++checked;
    }
}

TEST_CASE("backward_sequence rejects mismatched targets") {
    const ScnParameters p = init_parameters(tiny_dims(), 20);
    SeededRng rng(21);
    const Vector v = rand_vec(rng, 6), s = rand_vec(rng, 2, 0, 1);
    const SequenceContext ctx = make_sequence_context(p, v, s);
    const SequenceResult fwd =
        forward_sequence(p, ctx, {2, 3, 1}, 0.0, SampleMode::Argmax, nullptr, 30);
    ScnParameters grads = zeros_like(p);
    CHECK_THROWS_AS(backward_sequence(p, ctx, fwd, {2, 3}, 1.0, grads), std::invalid_argument);
}

TEST_CASE("init_parameters is deterministic and respects bounds") {
    const ScnParameters a = init_parameters(tiny_dims(), 99);
    const ScnParameters b = init_parameters(tiny_dims(), 99);
    const ScnParameters c = init_parameters(tiny_dims(), 100);
    CHECK(a.embed.a == b.embed.a);
    CHECK(a.gates[2].u_c.a == b.gates[2].u_c.a);
    CHECK(a.embed.a != c.embed.a);
    for (double x : a.gates[0].bias) CHECK(x == 0.0);

    const double bound = std::sqrt(6.0 / (4 + 3));
    for (double x : a.gates[0].w_a.a) {
        CHECK(x >= -bound);
        CHECK(x <= bound);
    }
}

TEST_CASE("decode halts on eos") {
    ScnParameters p = init_parameters(tiny_dims(), 30);
    // bias the output layer so <eos> (id 1) dominates immediately
    p.out_w.zero();
    p.out_b = Vector(7, 0.0);
    p.out_b[1] = 50.0;
    SeededRng rng(31);
    const SequenceContext ctx = make_sequence_context(
        p, Vector{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, Vector{0.5, 0.5});
    CHECK(decode_sequence(p, ctx, SampleMode::Argmax, nullptr, 10).empty());
}
