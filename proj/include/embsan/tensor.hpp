#pragma once

#include <cstddef>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

namespace embsan {

/// Dense row-major float32 matrix. The only tensor shape in this codebase;
/// vectors are n x 1 or 1 x n as context demands.
struct Tensor2D {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Tensor2D() = default;
    Tensor2D(int r, int c, float fill = 0.0f)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    static Tensor2D from_rows(std::initializer_list<std::initializer_list<float>> rows_init);

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor2D& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;

    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }
};

/// Named tensors of one network. std::map keeps iteration sorted by name,
/// which every serialization and reduction below relies on.
using ParamSet = std::map<std::string, Tensor2D>;

/// Gradients mirroring a ParamSet key-for-key.
using GradSet = std::map<std::string, Tensor2D>;

// ---- dense kernels (pure, float32) ----

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);    // a(m,k) * b(k,n)
Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b); // a(m,k) * b(n,k)^T
Tensor2D matmul_tn(const Tensor2D& a, const Tensor2D& b); // a(k,m)^T * b(k,n)
Tensor2D transpose(const Tensor2D& a);

Tensor2D add(const Tensor2D& a, const Tensor2D& b);
Tensor2D sub(const Tensor2D& a, const Tensor2D& b);
Tensor2D hadamard(const Tensor2D& a, const Tensor2D& b);
Tensor2D scale(const Tensor2D& a, float s);

/// x(n,c) + row(1,c) broadcast over rows.
Tensor2D add_rowvec(const Tensor2D& x, const Tensor2D& row);

/// x(n,c) with row i multiplied by s(n,1)[i].
Tensor2D scale_rows(const Tensor2D& x, const Tensor2D& s);

Tensor2D gelu(const Tensor2D& x);
Tensor2D sigmoid(const Tensor2D& x);
Tensor2D softmax_rows(const Tensor2D& x);

/// Row-wise layer norm with per-column gain/bias (1,c). Optionally reports
/// per-row mean and reciprocal stddev for reuse in the backward pass.
Tensor2D layer_norm(const Tensor2D& x, const Tensor2D& gain, const Tensor2D& bias,
                    float eps = 1e-5f, std::vector<float>* mean_out = nullptr,
                    std::vector<float>* rstd_out = nullptr);

/// Mean of squared element differences, accumulated in float64.
double mse(const Tensor2D& a, const Tensor2D& b);

double frobenius_norm(const Tensor2D& a);
double dot_all(const Tensor2D& a, const Tensor2D& b);

float gelu_scalar(float x);
float gelu_grad_scalar(float x);
float sigmoid_scalar(float x);

void require_same_shape(const Tensor2D& a, const Tensor2D& b, const char* what);

// ---- ParamSet helpers ----

size_t param_count(const ParamSet& params);

/// Key sets and shapes must match; used before optimizer steps.
void require_same_keys(const ParamSet& params, const GradSet& grads);

/// FNV-1a over shapes and raw tensor bytes in name order. Used for the
/// frozen-encoder guarantee and cheap identity checks in tests.
uint64_t params_fingerprint(const ParamSet& params);

/// Global L2 norm over all gradient entries, accumulated in float64.
double grad_global_norm(const GradSet& grads);

bool all_finite(const GradSet& grads);

} // namespace embsan
