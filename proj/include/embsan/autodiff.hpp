#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "embsan/tensor.hpp"

namespace embsan {

/// Reverse-mode tape over Tensor2D values.
///
/// Forward values are computed eagerly as ops are recorded; backward() walks
/// the tape once in reverse and accumulates float32 gradients into every
/// node that (transitively) depends on a gradient-carrying leaf. Tapes are
/// single-use and cheap: build one per loss evaluation, read the leaf
/// gradients, drop it. Distinct tapes never share state, so evaluations may
/// run on separate threads freely.
class Tape {
public:
    using Var = int;

    /// Gradient-carrying input (a parameter tensor).
    Var leaf(const Tensor2D& value);

    /// Input treated as a constant; backward never flows into it.
    Var constant(const Tensor2D& value);

    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b); // a * b^T
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, float s);
    Var add_rowvec(Var x, Var row);
    Var scale_rows(Var x, Var s);
    Var layer_norm(Var x, Var gain, Var bias, float eps = 1e-5f);
    Var gelu(Var x);
    Var sigmoid(Var x);
    Var softmax_rows(Var x);
    Var slice_cols(Var x, int c0, int c1);
    Var concat_cols(const std::vector<Var>& parts);
    /// Select rows of table by index; duplicate indices accumulate gradient.
    Var gather_rows(Var table, const std::vector<int>& indices);
    /// 1x1 mean-squared-error node; loss itself is accumulated in float64
    /// and readable exactly via loss64().
    Var mse(Var a, Var b);

    const Tensor2D& val(Var v) const { return nodes_[v].value; }
    double loss64(Var v) const;

    /// Backpropagate from a 1x1 scalar node with seed gradient 1.
    void backward(Var scalar_output);

    /// Gradient of the last backward() w.r.t. a leaf (zeros if untouched).
    Tensor2D grad_of(Var v) const;

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        leaf, matmul, matmul_nt, transpose, add, sub, hadamard, scale,
        add_rowvec, scale_rows, layer_norm, gelu, sigmoid, softmax_rows,
        slice_cols, concat_cols, gather_rows, mse
    };

    struct Node {
        Op op;
        std::vector<Var> in;
        Tensor2D value;
        Tensor2D grad;              // allocated lazily during backward
        bool needs_grad = false;
        float fscalar = 0.0f;       // scale factor / layer-norm eps
        int i0 = 0;                 // slice start
        double scalar64 = 0.0;      // mse loss in float64
        std::vector<float> aux_a;   // layer_norm: per-row mean
        std::vector<float> aux_b;   // layer_norm: per-row rstd
        std::vector<int> indices;   // gather_rows
    };

    Var push(Node&& n);
    Tensor2D& grad_buf(Var v);
    void accumulate(Var v, const Tensor2D& g);
    bool any_needs_grad(const std::vector<Var>& in) const;

    std::vector<Node> nodes_;
};

/// Tape handles for a ParamSet's tensors, keyed by parameter name.
using TapeParams = std::map<std::string, Tape::Var>;

/// Bind every tensor of a ParamSet as a gradient-carrying leaf.
TapeParams bind_params(Tape& tape, const ParamSet& params);

/// Bind as constants (frozen networks).
TapeParams bind_constants(Tape& tape, const ParamSet& params);

/// Collect leaf gradients back into a GradSet shaped like the ParamSet.
GradSet collect_grads(const Tape& tape, const TapeParams& bound);

} // namespace embsan
