#include "embsan/autodiff.hpp"

#include <cmath>

#include "embsan/errors.hpp"

namespace embsan {

Tape::Var Tape::push(Node&& n) {
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
}

bool Tape::any_needs_grad(const std::vector<Var>& in) const {
    for (Var v : in)
        if (nodes_[v].needs_grad) return true;
    return false;
}

Tape::Var Tape::leaf(const Tensor2D& value) {
    Node n;
    n.op = Op::leaf;
    n.value = value;
    n.needs_grad = true;
    return push(std::move(n));
}

Tape::Var Tape::constant(const Tensor2D& value) {
    Node n;
    n.op = Op::leaf;
    n.value = value;
    n.needs_grad = false;
    return push(std::move(n));
}

#define EMBSAN_UNARY_PROLOGUE(opname)     \
    Node n;                               \
    n.op = Op::opname;                    \
    n.in = {a};                           \
    n.needs_grad = nodes_[a].needs_grad;

Tape::Var Tape::matmul(Var a, Var b) {
    Node n;
    n.op = Op::matmul;
    n.in = {a, b};
    n.needs_grad = any_needs_grad(n.in);
    n.value = embsan::matmul(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
    Node n;
    n.op = Op::matmul_nt;
    n.in = {a, b};
    n.needs_grad = any_needs_grad(n.in);
    n.value = embsan::matmul_nt(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::Var Tape::transpose(Var a) {
    EMBSAN_UNARY_PROLOGUE(transpose)
    n.value = embsan::transpose(nodes_[a].value);
    return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
    Node n;
    n.op = Op::add;
    n.in = {a, b};
    n.needs_grad = any_needs_grad(n.in);
    n.value = embsan::add(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b) {
    Node n;
    n.op = Op::sub;
    n.in = {a, b};
    n.needs_grad = any_needs_grad(n.in);
    n.value = embsan::sub(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::Var Tape::hadamard(Var a, Var b) {
    Node n;
    n.op = Op::hadamard;
    n.in = {a, b};
    n.needs_grad = any_needs_grad(n.in);
    n.value = embsan::hadamard(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::Var Tape::scale(Var a, float s) {
    EMBSAN_UNARY_PROLOGUE(scale)
    n.fscalar = s;
    n.value = embsan::scale(nodes_[a].value, s);
    return push(std::move(n));
}

Tape::Var Tape::add_rowvec(Var x, Var row) {
    Node n;
    n.op = Op::add_rowvec;
    n.in = {x, row};
    n.needs_grad = any_needs_grad(n.in);
    n.value = embsan::add_rowvec(nodes_[x].value, nodes_[row].value);
    return push(std::move(n));
}

Tape::Var Tape::scale_rows(Var x, Var s) {
    Node n;
    n.op = Op::scale_rows;
    n.in = {x, s};
    n.needs_grad = any_needs_grad(n.in);
    n.value = embsan::scale_rows(nodes_[x].value, nodes_[s].value);
    return push(std::move(n));
}

Tape::Var Tape::layer_norm(Var x, Var gain, Var bias, float eps) {
    Node n;
    n.op = Op::layer_norm;
    n.in = {x, gain, bias};
    n.needs_grad = any_needs_grad(n.in);
    n.fscalar = eps;
    n.value = embsan::layer_norm(nodes_[x].value, nodes_[gain].value, nodes_[bias].value,
                                 eps, &n.aux_a, &n.aux_b);
    return push(std::move(n));
}

Tape::Var Tape::gelu(Var a) {
    EMBSAN_UNARY_PROLOGUE(gelu)
    n.value = embsan::gelu(nodes_[a].value);
    return push(std::move(n));
}

Tape::Var Tape::sigmoid(Var a) {
    EMBSAN_UNARY_PROLOGUE(sigmoid)
    n.value = embsan::sigmoid(nodes_[a].value);
    return push(std::move(n));
}

Tape::Var Tape::softmax_rows(Var a) {
    EMBSAN_UNARY_PROLOGUE(softmax_rows)
    n.value = embsan::softmax_rows(nodes_[a].value);
    return push(std::move(n));
}

Tape::Var Tape::slice_cols(Var x, int c0, int c1) {
    const Tensor2D& src = nodes_[x].value;
    if (c0 < 0 || c1 > src.cols || c0 >= c1)
        throw DimensionError("slice_cols: bad range");
    Node n;
    n.op = Op::slice_cols;
    n.in = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.i0 = c0;
    n.value = Tensor2D(src.rows, c1 - c0);
    for (int i = 0; i < src.rows; ++i)
        for (int j = c0; j < c1; ++j) n.value.at(i, j - c0) = src.at(i, j);
    return push(std::move(n));
}

Tape::Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    int cols = 0;
    const int rows = nodes_[parts[0]].value.rows;
    for (Var p : parts) {
        if (nodes_[p].value.rows != rows)
            throw DimensionError("concat_cols: row mismatch");
        cols += nodes_[p].value.cols;
    }
    Node n;
    n.op = Op::concat_cols;
    n.in = parts;
    n.needs_grad = any_needs_grad(n.in);
    n.value = Tensor2D(rows, cols);
    int off = 0;
    for (Var p : parts) {
        const Tensor2D& t = nodes_[p].value;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < t.cols; ++j) n.value.at(i, off + j) = t.at(i, j);
        off += t.cols;
    }
    return push(std::move(n));
}

Tape::Var Tape::gather_rows(Var table, const std::vector<int>& indices) {
    const Tensor2D& src = nodes_[table].value;
    Node n;
    n.op = Op::gather_rows;
    n.in = {table};
    n.needs_grad = nodes_[table].needs_grad;
    n.indices = indices;
    n.value = Tensor2D(static_cast<int>(indices.size()), src.cols);
    for (size_t i = 0; i < indices.size(); ++i) {
        const int r = indices[i];
        if (r < 0 || r >= src.rows) throw DimensionError("gather_rows: index out of range");
        for (int j = 0; j < src.cols; ++j)
            n.value.at(static_cast<int>(i), j) = src.at(r, j);
    }
    return push(std::move(n));
}

Tape::Var Tape::mse(Var a, Var b) {
    Node n;
    n.op = Op::mse;
    n.in = {a, b};
    n.needs_grad = any_needs_grad(n.in);
    n.scalar64 = embsan::mse(nodes_[a].value, nodes_[b].value);
    n.value = Tensor2D(1, 1, static_cast<float>(n.scalar64));
    return push(std::move(n));
}

double Tape::loss64(Var v) const {
    const Node& n = nodes_[v];
    if (n.op == Op::mse) return n.scalar64;
    if (n.op == Op::scale) return static_cast<double>(n.fscalar) * loss64(n.in[0]);
    if (n.op == Op::add) return loss64(n.in[0]) + loss64(n.in[1]);
    if (n.value.rows == 1 && n.value.cols == 1) return static_cast<double>(n.value.data[0]);
    throw DimensionError("loss64: node is not scalar");
}

Tensor2D& Tape::grad_buf(Var v) {
    Node& n = nodes_[v];
    if (n.grad.rows == 0) n.grad = Tensor2D(n.value.rows, n.value.cols);
    return n.grad;
}

void Tape::accumulate(Var v, const Tensor2D& g) {
    Tensor2D& buf = grad_buf(v);
    for (size_t i = 0; i < buf.size(); ++i) buf.data[i] += g.data[i];
}

Tensor2D Tape::grad_of(Var v) const {
    const Node& n = nodes_[v];
    if (n.grad.rows == 0) return Tensor2D(n.value.rows, n.value.cols);
    return n.grad;
}

void Tape::backward(Var scalar_output) {
    Node& out = nodes_[scalar_output];
    if (out.value.rows != 1 || out.value.cols != 1)
        throw DimensionError("backward: output is not a 1x1 scalar");
    grad_buf(scalar_output).data[0] = 1.0f;

    for (Var v = scalar_output; v >= 0; --v) {
        Node& n = nodes_[v];
        if (!n.needs_grad || n.grad.rows == 0) continue;
        const Tensor2D& gy = n.grad;
        switch (n.op) {
        case Op::leaf:
            break;
        case Op::matmul: { // c = a*b
            const Node& a = nodes_[n.in[0]];
            const Node& b = nodes_[n.in[1]];
            if (a.needs_grad) accumulate(n.in[0], embsan::matmul_nt(gy, b.value));
            if (b.needs_grad) accumulate(n.in[1], embsan::matmul_tn(a.value, gy));
            break;
        }
        case Op::matmul_nt: { // c = a*b^T
            const Node& a = nodes_[n.in[0]];
            const Node& b = nodes_[n.in[1]];
            if (a.needs_grad) accumulate(n.in[0], embsan::matmul(gy, b.value));
            if (b.needs_grad) accumulate(n.in[1], embsan::matmul_tn(gy, a.value));
            break;
        }
        case Op::transpose:
            if (nodes_[n.in[0]].needs_grad) accumulate(n.in[0], embsan::transpose(gy));
            break;
        case Op::add:
            if (nodes_[n.in[0]].needs_grad) accumulate(n.in[0], gy);
            if (nodes_[n.in[1]].needs_grad) accumulate(n.in[1], gy);
            break;
        case Op::sub:
            if (nodes_[n.in[0]].needs_grad) accumulate(n.in[0], gy);
            if (nodes_[n.in[1]].needs_grad) accumulate(n.in[1], embsan::scale(gy, -1.0f));
            break;
        case Op::hadamard:
            if (nodes_[n.in[0]].needs_grad)
                accumulate(n.in[0], embsan::hadamard(gy, nodes_[n.in[1]].value));
            if (nodes_[n.in[1]].needs_grad)
                accumulate(n.in[1], embsan::hadamard(gy, nodes_[n.in[0]].value));
            break;
        case Op::scale:
            if (nodes_[n.in[0]].needs_grad) accumulate(n.in[0], embsan::scale(gy, n.fscalar));
            break;
        case Op::add_rowvec: {
            if (nodes_[n.in[0]].needs_grad) accumulate(n.in[0], gy);
            if (nodes_[n.in[1]].needs_grad) {
                Tensor2D gb(1, gy.cols);
                for (int i = 0; i < gy.rows; ++i)
                    for (int j = 0; j < gy.cols; ++j) gb.data[j] += gy.at(i, j);
                accumulate(n.in[1], gb);
            }
            break;
        }
        case Op::scale_rows: {
            const Tensor2D& x = nodes_[n.in[0]].value;
            const Tensor2D& s = nodes_[n.in[1]].value;
            if (nodes_[n.in[0]].needs_grad) accumulate(n.in[0], embsan::scale_rows(gy, s));
            if (nodes_[n.in[1]].needs_grad) {
                Tensor2D gs(x.rows, 1);
                for (int i = 0; i < x.rows; ++i) {
                    float acc = 0.0f;
                    for (int j = 0; j < x.cols; ++j) acc += gy.at(i, j) * x.at(i, j);
                    gs.data[i] = acc;
                }
                accumulate(n.in[1], gs);
            }
            break;
        }
        case Op::layer_norm: {
            const Node& xn = nodes_[n.in[0]];
            const Tensor2D& x = xn.value;
            const Tensor2D& gain = nodes_[n.in[1]].value;
            const int cols = x.cols;
            const float invc = 1.0f / static_cast<float>(cols);
            Tensor2D gx(x.rows, x.cols);
            Tensor2D gg(1, cols);
            Tensor2D gb(1, cols);
            for (int i = 0; i < x.rows; ++i) {
                const float mean = n.aux_a[i];
                const float rstd = n.aux_b[i];
                // xhat = (x - mean)*rstd; y = xhat*g + b
                float sum_gyg = 0.0f;     // sum(gy*g)
                float sum_gyg_xhat = 0.0f;
                for (int j = 0; j < cols; ++j) {
                    const float xhat = (x.at(i, j) - mean) * rstd;
                    const float gyg = gy.at(i, j) * gain.data[j];
                    sum_gyg += gyg;
                    sum_gyg_xhat += gyg * xhat;
                    gg.data[j] += gy.at(i, j) * xhat;
                    gb.data[j] += gy.at(i, j);
                }
                for (int j = 0; j < cols; ++j) {
                    const float xhat = (x.at(i, j) - mean) * rstd;
                    const float gyg = gy.at(i, j) * gain.data[j];
                    gx.at(i, j) = rstd * (gyg - invc * sum_gyg - xhat * invc * sum_gyg_xhat);
                }
            }
            if (xn.needs_grad) accumulate(n.in[0], gx);
            if (nodes_[n.in[1]].needs_grad) accumulate(n.in[1], gg);
            if (nodes_[n.in[2]].needs_grad) accumulate(n.in[2], gb);
            break;
        }
        case Op::gelu: {
            if (nodes_[n.in[0]].needs_grad) {
                const Tensor2D& x = nodes_[n.in[0]].value;
                Tensor2D gx = gy;
                for (size_t i = 0; i < gx.size(); ++i)
                    gx.data[i] *= gelu_grad_scalar(x.data[i]);
                accumulate(n.in[0], gx);
            }
            break;
        }
        case Op::sigmoid: {
            if (nodes_[n.in[0]].needs_grad) {
                Tensor2D gx = gy;
                for (size_t i = 0; i < gx.size(); ++i) {
                    const float y = n.value.data[i];
                    gx.data[i] *= y * (1.0f - y);
                }
                accumulate(n.in[0], gx);
            }
            break;
        }
        case Op::softmax_rows: {
            if (nodes_[n.in[0]].needs_grad) {
                Tensor2D gx(gy.rows, gy.cols);
                for (int i = 0; i < gy.rows; ++i) {
                    float dot = 0.0f;
                    for (int j = 0; j < gy.cols; ++j) dot += gy.at(i, j) * n.value.at(i, j);
                    for (int j = 0; j < gy.cols; ++j)
                        gx.at(i, j) = (gy.at(i, j) - dot) * n.value.at(i, j);
                }
                accumulate(n.in[0], gx);
            }
            break;
        }
        case Op::slice_cols: {
            if (nodes_[n.in[0]].needs_grad) {
                const Tensor2D& src = nodes_[n.in[0]].value;
                Tensor2D gx(src.rows, src.cols);
                for (int i = 0; i < gy.rows; ++i)
                    for (int j = 0; j < gy.cols; ++j) gx.at(i, n.i0 + j) = gy.at(i, j);
                accumulate(n.in[0], gx);
            }
            break;
        }
        case Op::concat_cols: {
            int off = 0;
            for (Var p : n.in) {
                const Tensor2D& t = nodes_[p].value;
                if (nodes_[p].needs_grad) {
                    Tensor2D gp(t.rows, t.cols);
                    for (int i = 0; i < t.rows; ++i)
                        for (int j = 0; j < t.cols; ++j) gp.at(i, j) = gy.at(i, off + j);
                    accumulate(p, gp);
                }
                off += t.cols;
            }
            break;
        }
        case Op::gather_rows: {
            if (nodes_[n.in[0]].needs_grad) {
                const Tensor2D& src = nodes_[n.in[0]].value;
                Tensor2D gt(src.rows, src.cols);
                for (size_t i = 0; i < n.indices.size(); ++i)
                    for (int j = 0; j < src.cols; ++j)
                        gt.at(n.indices[i], j) += gy.at(static_cast<int>(i), j);
                accumulate(n.in[0], gt);
            }
            break;
        }
        case Op::mse: {
            const Tensor2D& a = nodes_[n.in[0]].value;
            const Tensor2D& b = nodes_[n.in[1]].value;
            const float gscale = gy.data[0] * 2.0f / static_cast<float>(a.size());
            if (nodes_[n.in[0]].needs_grad || nodes_[n.in[1]].needs_grad) {
                Tensor2D d = embsan::scale(embsan::sub(a, b), gscale);
                if (nodes_[n.in[0]].needs_grad) accumulate(n.in[0], d);
                if (nodes_[n.in[1]].needs_grad) accumulate(n.in[1], embsan::scale(d, -1.0f));
            }
            break;
        }
        }
    }
}

#undef EMBSAN_UNARY_PROLOGUE

TapeParams bind_params(Tape& tape, const ParamSet& params) {
    TapeParams bound;
    for (const auto& [name, t] : params) bound.emplace(name, tape.leaf(t));
    return bound;
}

TapeParams bind_constants(Tape& tape, const ParamSet& params) {
    TapeParams bound;
    for (const auto& [name, t] : params) bound.emplace(name, tape.constant(t));
    return bound;
}

GradSet collect_grads(const Tape& tape, const TapeParams& bound) {
    GradSet grads;
    for (const auto& [name, var] : bound) grads.emplace(name, tape.grad_of(var));
    return grads;
}

} // namespace embsan
