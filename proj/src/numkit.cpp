#include "svcap/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace svcap {

double SeededRng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller on our own uniforms so streams are platform-stable
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

SeededRng SeededRng::fork(uint64_t stream_id) const {
    // splitmix64 over (seed, stream) so sibling streams never overlap in
    // practice and the derivation is reproducible
    uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return SeededRng(z);
}

Vector matvec(const Matrix& m, const Vector& x) {
    if (m.cols != static_cast<int>(x.size())) {
        throw std::invalid_argument("matvec: shape mismatch, matrix " +
                                    std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                                    " vs vector of dim " + std::to_string(x.size()));
    }
    Vector y(m.rows, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        const double* row = m.a.data() + static_cast<size_t>(r) * m.cols;
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

Vector matvec_t(const Matrix& m, const Vector& x) {
    if (m.rows != static_cast<int>(x.size())) {
        throw std::invalid_argument("matvec_t: shape mismatch, matrix " +
                                    std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                                    " vs vector of dim " + std::to_string(x.size()));
    }
    Vector y(m.cols, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        const double* row = m.a.data() + static_cast<size_t>(r) * m.cols;
        const double xr = x[r];
        for (int c = 0; c < m.cols; ++c) y[c] += row[c] * xr;
    }
    return y;
}

void add_outer(Matrix& m, const Vector& u, const Vector& v) {
    if (m.rows != static_cast<int>(u.size()) || m.cols != static_cast<int>(v.size())) {
        throw std::invalid_argument("add_outer: shape mismatch");
    }
    for (int r = 0; r < m.rows; ++r) {
        double* row = m.a.data() + static_cast<size_t>(r) * m.cols;
        const double ur = u[r];
        for (int c = 0; c < m.cols; ++c) row[c] += ur * v[c];
    }
}

static void check_same_dim(const Vector& x, const Vector& y, const char* who) {
    if (x.size() != y.size()) {
        throw std::invalid_argument(std::string(who) + ": dim mismatch " +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    }
}

Vector add(const Vector& x, const Vector& y) {
    check_same_dim(x, y, "add");
    Vector z(x.size());
    for (size_t i = 0; i < x.size(); ++i) z[i] = x[i] + y[i];
    return z;
}

Vector sub(const Vector& x, const Vector& y) {
    check_same_dim(x, y, "sub");
    Vector z(x.size());
    for (size_t i = 0; i < x.size(); ++i) z[i] = x[i] - y[i];
    return z;
}

Vector hadamard(const Vector& x, const Vector& y) {
    check_same_dim(x, y, "hadamard");
    Vector z(x.size());
    for (size_t i = 0; i < x.size(); ++i) z[i] = x[i] * y[i];
    return z;
}

void axpy(double alpha, const Vector& x, Vector& y) {
    check_same_dim(x, y, "axpy");
    for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double dot(const Vector& x, const Vector& y) {
    check_same_dim(x, y, "dot");
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vector sigmoid(const Vector& x) {
    Vector y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
    return y;
}

Vector tanh_elem(const Vector& x) {
    Vector y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
    return y;
}

Vector softmax(const Vector& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    const double m = *std::max_element(logits.begin(), logits.end());
    Vector y(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        y[i] = std::exp(logits[i] - m);
        sum += y[i];
    }
    for (double& v : y) v /= sum;
    return y;
}

int argmax(const Vector& x) {
    if (x.empty()) throw std::invalid_argument("argmax: empty input");
    int best = 0;
    for (size_t i = 1; i < x.size(); ++i)
        if (x[i] > x[best]) best = static_cast<int>(i);
    return best;
}

int multinomial_draw(const Vector& dist, SeededRng& rng) {
    if (dist.empty()) throw std::invalid_argument("multinomial_draw: empty distribution");
    double sum = 0.0;
    for (double p : dist) {
        if (p < 0.0 || !std::isfinite(p))
            throw std::invalid_argument("multinomial_draw: negative or non-finite entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("multinomial_draw: distribution sums to " + std::to_string(sum));
    const double u = rng.uniform() * sum;
    double cdf = 0.0;
    for (size_t i = 0; i < dist.size(); ++i) {
        cdf += dist[i];
        if (u < cdf) return static_cast<int>(i);
    }
    // u landed on the accumulated rounding tail; return last non-zero entry
    for (size_t i = dist.size(); i-- > 0;)
        if (dist[i] > 0.0) return static_cast<int>(i);
    return static_cast<int>(dist.size()) - 1;
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                        const Vector& x, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: step must be positive");
    Vector g(x.size());
    Vector probe = x;
    for (size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        probe[i] = xi + h;
        const double fp = f(probe);
        probe[i] = xi - h;
        const double fm = f(probe);
        probe[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_grad: non-finite function value at coordinate " +
                                     std::to_string(i));
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Matrix xavier_uniform(int rows, int cols, SeededRng& rng) {
    Matrix m(rows, cols);
    const double bound = std::sqrt(6.0 / (rows + cols));
    for (double& v : m.a) v = rng.uniform(-bound, bound);
    return m;
}

bool all_finite(const Vector& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Matrix& m) { return all_finite(m.a); }

}  // namespace svcap
