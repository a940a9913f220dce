#pragma once

// Reverse-mode differentiation over an eagerly evaluated tape.
//
// Every op computes its value when it is recorded, so a graph is "forwarded"
// by building it. backward() then walks the tape in reverse once, seeding the
// scalar output with 1. Values are dense row-major blocks (rows x cols); a
// vector is a 1 x n block and a scalar is 1 x 1.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bico/common.hpp"

namespace bico::ad {

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Scale,
    Mul,
    ComplexMul,
    Cos,
    Sin,
    Concat,
    MatVec,
    VecMat,
    Linear,
    Softmax,
    LeakyRelu,
    Elu,
    Tanh,
    Dot,
    Cosine,
    CosineMatrix,
    LogSumExp,
    Pick,
    Gather,
    Stack,
    StackRows,
    Sum,
    Mean,
};

struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    // Leaves. constant() never receives a gradient; parameter() does.
    // The span overloads of parameter() do not copy: the storage must
    // outlive the tape and stay unchanged while it is in use.
    Var constant(std::vector<double> values, std::size_t rows, std::size_t cols);
    Var constant(std::span<const double> values) { return constant({values.begin(), values.end()}, 1, values.size()); }
    Var constant(const Matrix& m) { return constant(m.data, m.rows, m.cols); }
    Var parameter(std::span<const double> values, std::size_t rows, std::size_t cols);
    Var parameter(std::span<const double> values) { return parameter(values, 1, values.size()); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double s);
    Var mul(Var a, Var b);
    // Element-wise complex product; operands of even length hold [re | im].
    Var complex_mul(Var a, Var b);
    Var cos(Var a);
    Var sin(Var a);
    Var concat(Var a, Var b);

    // M (r x c) times vector x (c) -> r.
    Var matvec(Var m, Var x);
    // w (r) times M (r x c) -> c, i.e. M^T w.
    Var vecmat(Var w, Var m);
    // Row-wise affine map: X (r x in), W (out x in), b (out) -> r x out.
    // b may be an invalid Var for no bias.
    Var linear(Var x, Var w, Var b);

    Var softmax(Var a);
    Var leaky_relu(Var a, double negative_slope);
    Var elu(Var a);
    Var tanh(Var a);

    Var dot(Var a, Var b);
    // Throws NumericError when either operand has zero norm.
    Var cosine(Var a, Var b);
    // Row-by-row cosine similarity: P (p x d), Q (q x d) -> p x q.
    Var cosine_matrix(Var p, Var q);
    Var logsumexp(Var a);
    Var pick(Var a, std::size_t index);
    Var gather(Var a, std::vector<std::size_t> indices);

    // Scalars -> vector.
    Var stack(std::span<const Var> scalars);
    // Vertical concatenation: vectors become one row each, matrices keep
    // their rows. All pieces must have the same width.
    Var stack_rows(std::span<const Var> rows);
    Var sum(std::span<const Var> terms);
    Var mean(std::span<const Var> terms);

    std::span<const double> value(Var v) const;
    double scalar(Var v) const;
    std::span<const double> grad(Var v) const;
    std::size_t rows(Var v) const { return node(v).rows; }
    std::size_t cols(Var v) const { return node(v).cols; }
    std::size_t size() const { return nodes_.size(); }
    Op op(Var v) const { return node(v).op; }

    // Accumulates d(output)/d(node) into every node that depends on a
    // parameter. output must be a scalar. May run once per tape.
    void backward(Var output);

private:
    struct Node {
        Op op = Op::Leaf;
        std::uint32_t rows = 0;
        std::uint32_t cols = 0;
        std::vector<double> value;
        const double* external = nullptr;
        std::vector<double> grad;
        std::int32_t in0 = -1;
        std::int32_t in1 = -1;
        std::int32_t in2 = -1;
        std::vector<std::int32_t> inputs;
        std::vector<std::size_t> index;
        std::vector<double> cache;
        double attr = 0.0;
        bool needs_grad = false;

        std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
        const double* data() const { return external ? external : value.data(); }
    };

    const Node& node(Var v) const;
    Node& node(Var v);
    Var push(Node n);
    Node make(Op op, std::size_t rows, std::size_t cols) const;
    bool needs(Var v) const { return node(v).needs_grad; }
    void backward_node(std::size_t id);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

}  // namespace bico::ad
