#include "embsan/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>

#include "embsan/errors.hpp"

namespace embsan {

namespace {

[[noreturn]] void dim_fail(const char* what, const Tensor2D& a, const Tensor2D& b) {
    std::ostringstream os;
    os << what << ": incompatible shapes " << a.rows << "x" << a.cols
       << " and " << b.rows << "x" << b.cols;
    throw DimensionError(os.str());
}

} // namespace

Tensor2D Tensor2D::from_rows(std::initializer_list<std::initializer_list<float>> rows_init) {
    Tensor2D t;
    t.rows = static_cast<int>(rows_init.size());
    t.cols = t.rows > 0 ? static_cast<int>(rows_init.begin()->size()) : 0;
    t.data.reserve(static_cast<size_t>(t.rows) * t.cols);
    for (const auto& r : rows_init) {
        if (static_cast<int>(r.size()) != t.cols)
            throw DimensionError("from_rows: ragged initializer");
        t.data.insert(t.data.end(), r.begin(), r.end());
    }
    return t;
}

bool Tensor2D::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_same_shape(const Tensor2D& a, const Tensor2D& b, const char* what) {
    if (!a.same_shape(b)) dim_fail(what, a, b);
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
    if (a.cols != b.rows) dim_fail("matmul", a, b);
    Tensor2D c(a.rows, b.cols);
    const int m = a.rows, k = a.cols, n = b.cols;
    const float* __restrict__ pa = a.ptr();
    const float* __restrict__ pb = b.ptr();
    float* __restrict__ pc = c.ptr();
    for (int i = 0; i < m; ++i) {
        float* __restrict__ ci = pc + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const float aik = pa[static_cast<size_t>(i) * k + kk];
            const float* __restrict__ bk = pb + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b) {
    if (a.cols != b.cols) dim_fail("matmul_nt", a, b);
    Tensor2D c(a.rows, b.rows);
    const int m = a.rows, k = a.cols, n = b.rows;
    const float* __restrict__ pa = a.ptr();
    const float* __restrict__ pb = b.ptr();
    float* __restrict__ pc = c.ptr();
    for (int i = 0; i < m; ++i) {
        const float* __restrict__ ai = pa + static_cast<size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const float* __restrict__ bj = pb + static_cast<size_t>(j) * k;
            float acc = 0.0f;
            for (int kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
            pc[static_cast<size_t>(i) * n + j] = acc;
        }
    }
    return c;
}

Tensor2D matmul_tn(const Tensor2D& a, const Tensor2D& b) {
    if (a.rows != b.rows) dim_fail("matmul_tn", a, b);
    Tensor2D c(a.cols, b.cols);
    const int m = a.cols, k = a.rows, n = b.cols;
    const float* __restrict__ pa = a.ptr();
    const float* __restrict__ pb = b.ptr();
    float* __restrict__ pc = c.ptr();
    for (int kk = 0; kk < k; ++kk) {
        const float* __restrict__ ak = pa + static_cast<size_t>(kk) * m;
        const float* __restrict__ bk = pb + static_cast<size_t>(kk) * n;
        for (int i = 0; i < m; ++i) {
            const float aki = ak[i];
            float* __restrict__ ci = pc + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Tensor2D transpose(const Tensor2D& a) {
    Tensor2D c(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) c.at(j, i) = a.at(i, j);
    return c;
}

Tensor2D add(const Tensor2D& a, const Tensor2D& b) {
    require_same_shape(a, b, "add");
    Tensor2D c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Tensor2D sub(const Tensor2D& a, const Tensor2D& b) {
    require_same_shape(a, b, "sub");
    Tensor2D c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Tensor2D hadamard(const Tensor2D& a, const Tensor2D& b) {
    require_same_shape(a, b, "hadamard");
    Tensor2D c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Tensor2D scale(const Tensor2D& a, float s) {
    Tensor2D c = a;
    for (float& v : c.data) v *= s;
    return c;
}

Tensor2D add_rowvec(const Tensor2D& x, const Tensor2D& row) {
    if (row.rows != 1 || row.cols != x.cols) dim_fail("add_rowvec", x, row);
    Tensor2D c = x;
    for (int i = 0; i < c.rows; ++i)
        for (int j = 0; j < c.cols; ++j) c.at(i, j) += row.data[j];
    return c;
}

Tensor2D scale_rows(const Tensor2D& x, const Tensor2D& s) {
    if (s.cols != 1 || s.rows != x.rows) dim_fail("scale_rows", x, s);
    Tensor2D c = x;
    for (int i = 0; i < c.rows; ++i) {
        const float f = s.data[i];
        for (int j = 0; j < c.cols; ++j) c.at(i, j) *= f;
    }
    return c;
}

float gelu_scalar(float x) {
    // tanh approximation
    const float k = 0.7978845608028654f; // sqrt(2/pi)
    const float u = k * (x + 0.044715f * x * x * x);
    return 0.5f * x * (1.0f + std::tanh(u));
}

float gelu_grad_scalar(float x) {
    const float k = 0.7978845608028654f;
    const float x3 = x * x * x;
    const float u = k * (x + 0.044715f * x3);
    const float t = std::tanh(u);
    const float du = k * (1.0f + 3.0f * 0.044715f * x * x);
    return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
}

float sigmoid_scalar(float x) {
    if (x >= 0.0f) {
        return 1.0f / (1.0f + std::exp(-x));
    }
    const float e = std::exp(x);
    return e / (1.0f + e);
}

Tensor2D gelu(const Tensor2D& x) {
    Tensor2D c = x;
    for (float& v : c.data) v = gelu_scalar(v);
    return c;
}

Tensor2D sigmoid(const Tensor2D& x) {
    Tensor2D c = x;
    for (float& v : c.data) v = sigmoid_scalar(v);
    return c;
}

Tensor2D softmax_rows(const Tensor2D& x) {
    Tensor2D c = x;
    for (int i = 0; i < c.rows; ++i) {
        float* row = c.ptr() + static_cast<size_t>(i) * c.cols;
        float mx = row[0];
        for (int j = 1; j < c.cols; ++j) mx = std::max(mx, row[j]);
        float sum = 0.0f;
        for (int j = 0; j < c.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const float inv = 1.0f / sum;
        for (int j = 0; j < c.cols; ++j) row[j] *= inv;
    }
    return c;
}

Tensor2D layer_norm(const Tensor2D& x, const Tensor2D& gain, const Tensor2D& bias,
                    float eps, std::vector<float>* mean_out, std::vector<float>* rstd_out) {
    if (gain.rows != 1 || gain.cols != x.cols) dim_fail("layer_norm gain", x, gain);
    if (bias.rows != 1 || bias.cols != x.cols) dim_fail("layer_norm bias", x, bias);
    Tensor2D c(x.rows, x.cols);
    if (mean_out) mean_out->resize(x.rows);
    if (rstd_out) rstd_out->resize(x.rows);
    for (int i = 0; i < x.rows; ++i) {
        const float* row = x.ptr() + static_cast<size_t>(i) * x.cols;
        float mean = 0.0f;
        for (int j = 0; j < x.cols; ++j) mean += row[j];
        mean /= static_cast<float>(x.cols);
        float var = 0.0f;
        for (int j = 0; j < x.cols; ++j) {
            const float d = row[j] - mean;
            var += d * d;
        }
        var /= static_cast<float>(x.cols);
        const float rstd = 1.0f / std::sqrt(var + eps);
        if (mean_out) (*mean_out)[i] = mean;
        if (rstd_out) (*rstd_out)[i] = rstd;
        for (int j = 0; j < x.cols; ++j)
            c.at(i, j) = (row[j] - mean) * rstd * gain.data[j] + bias.data[j];
    }
    return c;
}

double mse(const Tensor2D& a, const Tensor2D& b) {
    require_same_shape(a, b, "mse");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double frobenius_norm(const Tensor2D& a) {
    double acc = 0.0;
    for (float v : a.data) acc += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(acc);
}

double dot_all(const Tensor2D& a, const Tensor2D& b) {
    require_same_shape(a, b, "dot_all");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        acc += static_cast<double>(a.data[i]) * static_cast<double>(b.data[i]);
    return acc;
}

size_t param_count(const ParamSet& params) {
    size_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
}

void require_same_keys(const ParamSet& params, const GradSet& grads) {
    if (params.size() != grads.size())
        throw DimensionError("parameter set mismatch: different tensor counts");
    auto pit = params.begin();
    auto git = grads.begin();
    for (; pit != params.end(); ++pit, ++git) {
        if (pit->first != git->first)
            throw DimensionError("parameter set mismatch: key '" + pit->first +
                                 "' vs '" + git->first + "'");
        if (!pit->second.same_shape(git->second))
            throw DimensionError("parameter set mismatch: shape of '" + pit->first + "'");
    }
}

uint64_t params_fingerprint(const ParamSet& params) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* p, size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, t] : params) {
        feed(name.data(), name.size());
        const int32_t shape[2] = {t.rows, t.cols};
        feed(shape, sizeof(shape));
        feed(t.data.data(), t.size() * sizeof(float));
    }
    return h;
}

double grad_global_norm(const GradSet& grads) {
    double acc = 0.0;
    for (const auto& [name, g] : grads)
        for (float v : g.data) acc += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(acc);
}

bool all_finite(const GradSet& grads) {
    for (const auto& [name, g] : grads)
        if (!g.all_finite()) return false;
    return true;
}

} // namespace embsan
