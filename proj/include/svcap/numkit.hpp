#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace svcap {

// All numeric work runs in 64-bit reals. Vectors are plain contiguous
// arrays; Matrix is dense row-major.
using Vector = std::vector<double>;

struct Matrix {
    int rows = 0;
    int cols = 0;
    Vector a;  // row-major, size rows*cols

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

// Deterministic generator: mt19937_64 (bit-exact across platforms) with
// hand-rolled double mappings. Single-owner; never share across threads.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : seed_(seed), gen_(seed) {}

    uint64_t seed() const { return seed_; }
    uint64_t next_u64() { return gen_(); }

    // uniform in [0,1), 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller
    double gaussian();

    // uniform integer in [0, n)
    uint64_t next_below(uint64_t n) { return gen_() % n; }

    // independent stream derived from this seed and a stream id
    SeededRng fork(uint64_t stream_id) const;

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// y = M x
Vector matvec(const Matrix& m, const Vector& x);
// y = M^T x
Vector matvec_t(const Matrix& m, const Vector& x);
// M += u v^T
void add_outer(Matrix& m, const Vector& u, const Vector& v);

Vector add(const Vector& x, const Vector& y);
Vector sub(const Vector& x, const Vector& y);
Vector hadamard(const Vector& x, const Vector& y);
void axpy(double alpha, const Vector& x, Vector& y);  // y += alpha*x
double dot(const Vector& x, const Vector& y);

double sigmoid(double x);
Vector sigmoid(const Vector& x);
Vector tanh_elem(const Vector& x);

// max-subtracted softmax; output sums to 1
Vector softmax(const Vector& logits);
int argmax(const Vector& x);

// Draws index i with probability dist[i]. dist must be non-negative and
// sum to 1 within 1e-9.
int multinomial_draw(const Vector& dist, SeededRng& rng);

// Central-difference gradient of a scalar function, default step 1e-5.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                        const Vector& x, double h = 1e-5);

// Uniform init in +-sqrt(6/(fan_in+fan_out)); fan_in = cols, fan_out = rows.
Matrix xavier_uniform(int rows, int cols, SeededRng& rng);

bool all_finite(const Vector& x);
bool all_finite(const Matrix& m);

}  // namespace svcap
