#include "bico/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "bico/kernels.hpp"

namespace bico::ad {

namespace {

void require(bool cond, const char* what) {
    if (!cond) {
        throw std::invalid_argument(std::string("autodiff shape mismatch: ") + what);
    }
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw std::out_of_range("autodiff: variable does not belong to this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

Tape::Node& Tape::node(Var v) {
    return const_cast<Node&>(static_cast<const Tape&>(*this).node(v));
}

Var Tape::push(Node n) {
    if (backward_done_) {
        throw std::logic_error("autodiff: cannot record after backward()");
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tape::Node Tape::make(Op op, std::size_t rows, std::size_t cols) const {
    Node n;
    n.op = op;
    n.rows = static_cast<std::uint32_t>(rows);
    n.cols = static_cast<std::uint32_t>(cols);
    n.value.assign(rows * cols, 0.0);
    return n;
}

Var Tape::constant(std::vector<double> values, std::size_t rows, std::size_t cols) {
    require(values.size() == rows * cols, "constant");
    Node n;
    n.rows = static_cast<std::uint32_t>(rows);
    n.cols = static_cast<std::uint32_t>(cols);
    n.value = std::move(values);
    return push(std::move(n));
}

Var Tape::parameter(std::span<const double> values, std::size_t rows, std::size_t cols) {
    require(values.size() == rows * cols, "parameter");
    Node n;
    n.rows = static_cast<std::uint32_t>(rows);
    n.cols = static_cast<std::uint32_t>(cols);
    n.external = values.data();
    n.needs_grad = true;
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require(na.rows == nb.rows && na.cols == nb.cols, "add");
    Node n = make(Op::Add, na.rows, na.cols);
    const double* x = na.data();
    const double* y = nb.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = x[i] + y[i];
    }
    n.in0 = a.id;
    n.in1 = b.id;
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require(na.rows == nb.rows && na.cols == nb.cols, "sub");
    Node n = make(Op::Sub, na.rows, na.cols);
    const double* x = na.data();
    const double* y = nb.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = x[i] - y[i];
    }
    n.in0 = a.id;
    n.in1 = b.id;
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
    const Node& na = node(a);
    Node n = make(Op::Scale, na.rows, na.cols);
    const double* x = na.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = s * x[i];
    }
    n.attr = s;
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require(na.rows == nb.rows && na.cols == nb.cols, "mul");
    Node n = make(Op::Mul, na.rows, na.cols);
    kernels::active().hadamard(na.data(), nb.data(), n.value.data(), n.value.size());
    n.in0 = a.id;
    n.in1 = b.id;
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

Var Tape::complex_mul(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require(na.rows == 1 && nb.rows == 1 && na.cols == nb.cols && na.cols % 2 == 0, "complex_mul");
    Node n = make(Op::ComplexMul, 1, na.cols);
    kernels::active().complex_mul(na.data(), nb.data(), n.value.data(), na.cols / 2);
    n.in0 = a.id;
    n.in1 = b.id;
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

Var Tape::cos(Var a) {
    const Node& na = node(a);
    Node n = make(Op::Cos, na.rows, na.cols);
    const double* x = na.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = std::cos(x[i]);
    }
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::sin(Var a) {
    const Node& na = node(a);
    Node n = make(Op::Sin, na.rows, na.cols);
    const double* x = na.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = std::sin(x[i]);
    }
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require(na.rows == 1 && nb.rows == 1, "concat");
    Node n = make(Op::Concat, 1, na.cols + nb.cols);
    std::copy_n(na.data(), na.cols, n.value.begin());
    std::copy_n(nb.data(), nb.cols, n.value.begin() + na.cols);
    n.in0 = a.id;
    n.in1 = b.id;
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

Var Tape::matvec(Var m, Var x) {
    const Node& nm = node(m);
    const Node& nx = node(x);
    require(nx.rows == 1 && nx.cols == nm.cols, "matvec");
    Node n = make(Op::MatVec, 1, nm.rows);
    kernels::active().gemv(nm.data(), nx.data(), nullptr, n.value.data(), nm.rows, nm.cols);
    n.in0 = m.id;
    n.in1 = x.id;
    n.needs_grad = nm.needs_grad || nx.needs_grad;
    return push(std::move(n));
}

Var Tape::vecmat(Var w, Var m) {
    const Node& nw = node(w);
    const Node& nm = node(m);
    require(nw.rows == 1 && nw.cols == nm.rows, "vecmat");
    Node n = make(Op::VecMat, 1, nm.cols);
    kernels::active().gemv_t_acc(nm.data(), nw.data(), n.value.data(), nm.rows, nm.cols);
    n.in0 = w.id;
    n.in1 = m.id;
    n.needs_grad = nw.needs_grad || nm.needs_grad;
    return push(std::move(n));
}

Var Tape::linear(Var x, Var w, Var b) {
    const Node& nx = node(x);
    const Node& nw = node(w);
    const double* bias = nullptr;
    bool bias_grad = false;
    if (b.valid()) {
        const Node& nb = node(b);
        require(nb.size() == nw.rows, "linear bias");
        bias = nb.data();
        bias_grad = nb.needs_grad;
    }
    require(nx.cols == nw.cols, "linear");
    Node n = make(Op::Linear, nx.rows, nw.rows);
    const auto& k = kernels::active();
    for (std::size_t r = 0; r < nx.rows; ++r) {
        k.gemv(nw.data(), nx.data() + r * nx.cols, bias, n.value.data() + r * nw.rows, nw.rows, nw.cols);
    }
    n.in0 = x.id;
    n.in1 = w.id;
    n.in2 = b.id;
    n.needs_grad = nx.needs_grad || nw.needs_grad || bias_grad;
    return push(std::move(n));
}

Var Tape::softmax(Var a) {
    const Node& na = node(a);
    require(na.rows == 1 && na.cols >= 1, "softmax");
    Node n = make(Op::Softmax, 1, na.cols);
    const double* x = na.data();
    const double mx = *std::max_element(x, x + na.cols);
    double total = 0.0;
    for (std::size_t i = 0; i < na.cols; ++i) {
        n.value[i] = std::exp(x[i] - mx);
        total += n.value[i];
    }
    for (double& v : n.value) {
        v /= total;
    }
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double negative_slope) {
    const Node& na = node(a);
    Node n = make(Op::LeakyRelu, na.rows, na.cols);
    const double* x = na.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = x[i] > 0.0 ? x[i] : negative_slope * x[i];
    }
    n.attr = negative_slope;
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::elu(Var a) {
    const Node& na = node(a);
    Node n = make(Op::Elu, na.rows, na.cols);
    const double* x = na.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = x[i] > 0.0 ? x[i] : std::expm1(x[i]);
    }
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    const Node& na = node(a);
    Node n = make(Op::Tanh, na.rows, na.cols);
    const double* x = na.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = std::tanh(x[i]);
    }
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::dot(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require(na.size() == nb.size(), "dot");
    Node n = make(Op::Dot, 1, 1);
    n.value[0] = kernels::active().dot(na.data(), nb.data(), na.size());
    n.in0 = a.id;
    n.in1 = b.id;
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

Var Tape::cosine(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    require(na.size() == nb.size(), "cosine");
    const auto& k = kernels::active();
    const double norm_a = std::sqrt(k.dot(na.data(), na.data(), na.size()));
    const double norm_b = std::sqrt(k.dot(nb.data(), nb.data(), nb.size()));
    if (!(norm_a > 0.0) || !(norm_b > 0.0)) {
        throw NumericError("cosine similarity of a zero-norm vector is undefined");
    }
    Node n = make(Op::Cosine, 1, 1);
    n.value[0] = k.dot(na.data(), nb.data(), na.size()) / (norm_a * norm_b);
    n.cache = {norm_a, norm_b};
    n.in0 = a.id;
    n.in1 = b.id;
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

Var Tape::cosine_matrix(Var p, Var q) {
    const Node& np = node(p);
    const Node& nq = node(q);
    require(np.cols == nq.cols, "cosine_matrix");
    const auto& k = kernels::active();
    const std::size_t d = np.cols;
    Node n = make(Op::CosineMatrix, np.rows, nq.rows);
    n.cache.resize(np.rows + nq.rows);
    for (std::size_t i = 0; i < np.rows; ++i) {
        const double* row = np.data() + i * d;
        n.cache[i] = std::sqrt(k.dot(row, row, d));
    }
    for (std::size_t j = 0; j < nq.rows; ++j) {
        const double* row = nq.data() + j * d;
        n.cache[np.rows + j] = std::sqrt(k.dot(row, row, d));
    }
    for (double norm : n.cache) {
        if (!(norm > 0.0)) {
            throw NumericError("cosine similarity of a zero-norm vector is undefined");
        }
    }
    for (std::size_t i = 0; i < np.rows; ++i) {
        for (std::size_t j = 0; j < nq.rows; ++j) {
            const double dp = k.dot(np.data() + i * d, nq.data() + j * d, d);
            n.value[i * nq.rows + j] = dp / (n.cache[i] * n.cache[np.rows + j]);
        }
    }
    n.in0 = p.id;
    n.in1 = q.id;
    n.needs_grad = np.needs_grad || nq.needs_grad;
    return push(std::move(n));
}

Var Tape::logsumexp(Var a) {
    const Node& na = node(a);
    require(na.size() >= 1, "logsumexp");
    Node n = make(Op::LogSumExp, 1, 1);
    const double* x = na.data();
    const double mx = *std::max_element(x, x + na.size());
    double total = 0.0;
    for (std::size_t i = 0; i < na.size(); ++i) {
        total += std::exp(x[i] - mx);
    }
    n.value[0] = mx + std::log(total);
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::pick(Var a, std::size_t index) {
    const Node& na = node(a);
    require(index < na.size(), "pick");
    Node n = make(Op::Pick, 1, 1);
    n.value[0] = na.data()[index];
    n.index = {index};
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::gather(Var a, std::vector<std::size_t> indices) {
    const Node& na = node(a);
    Node n = make(Op::Gather, 1, indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        require(indices[k] < na.size(), "gather");
        n.value[k] = na.data()[indices[k]];
    }
    n.index = std::move(indices);
    n.in0 = a.id;
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

Var Tape::stack(std::span<const Var> scalars) {
    require(!scalars.empty(), "stack of nothing");
    Node n = make(Op::Stack, 1, scalars.size());
    for (std::size_t k = 0; k < scalars.size(); ++k) {
        const Node& nk = node(scalars[k]);
        require(nk.size() == 1, "stack expects scalars");
        n.value[k] = nk.data()[0];
        n.inputs.push_back(scalars[k].id);
        n.needs_grad = n.needs_grad || nk.needs_grad;
    }
    return push(std::move(n));
}

Var Tape::stack_rows(std::span<const Var> rows) {
    require(!rows.empty(), "stack_rows of nothing");
    // Single-row inputs are taken whole (their shape is ignored); matrices
    // are stacked by rows and must share the column count.
    auto width_of = [this](Var v) { return node(v).rows == 1 ? node(v).size() : node(v).cols; };
    const std::size_t width = width_of(rows[0]);
    std::size_t total = 0;
    for (Var r : rows) {
        require(width_of(r) == width, "stack_rows width");
        total += node(r).size() / width;
    }
    Node n = make(Op::StackRows, total, width);
    std::size_t offset = 0;
    for (Var r : rows) {
        const Node& nr = node(r);
        std::copy_n(nr.data(), nr.size(), n.value.begin() + offset);
        offset += nr.size();
        n.inputs.push_back(r.id);
        n.needs_grad = n.needs_grad || nr.needs_grad;
    }
    return push(std::move(n));
}

Var Tape::sum(std::span<const Var> terms) {
    require(!terms.empty(), "sum of nothing");
    const Node& first = node(terms[0]);
    Node n = make(Op::Sum, first.rows, first.cols);
    for (Var t : terms) {
        const Node& nt = node(t);
        require(nt.rows == first.rows && nt.cols == first.cols, "sum");
        const double* x = nt.data();
        for (std::size_t i = 0; i < n.value.size(); ++i) {
            n.value[i] += x[i];
        }
        n.inputs.push_back(t.id);
        n.needs_grad = n.needs_grad || nt.needs_grad;
    }
    return push(std::move(n));
}

Var Tape::mean(std::span<const Var> terms) {
    require(!terms.empty(), "mean of nothing");
    const Node& first = node(terms[0]);
    Node n = make(Op::Mean, first.rows, first.cols);
    for (Var t : terms) {
        const Node& nt = node(t);
        require(nt.rows == first.rows && nt.cols == first.cols, "mean");
        const double* x = nt.data();
        for (std::size_t i = 0; i < n.value.size(); ++i) {
            n.value[i] += x[i];
        }
        n.inputs.push_back(t.id);
        n.needs_grad = n.needs_grad || nt.needs_grad;
    }
    const double inv = 1.0 / static_cast<double>(terms.size());
    for (double& v : n.value) {
        v *= inv;
    }
    return push(std::move(n));
}

std::span<const double> Tape::value(Var v) const {
    const Node& n = node(v);
    return {n.data(), n.size()};
}

double Tape::scalar(Var v) const {
    const Node& n = node(v);
    if (n.size() != 1) {
        throw std::invalid_argument("autodiff: scalar() on a non-scalar node");
    }
    return n.data()[0];
}

std::span<const double> Tape::grad(Var v) const {
    const Node& n = node(v);
    if (!backward_done_) {
        throw std::logic_error("autodiff: grad() before backward()");
    }
    if (n.grad.size() != n.size()) {
        // Constants (and nodes past the output) never get a gradient buffer.
        thread_local std::vector<double> zeros;
        zeros.assign(n.size(), 0.0);
        return {zeros.data(), zeros.size()};
    }
    return {n.grad.data(), n.grad.size()};
}

void Tape::backward(Var output) {
    if (nodes_.empty() || !output.valid()) {
        throw std::logic_error("autodiff: backward() called before any forward computation");
    }
    if (backward_done_) {
        throw std::logic_error("autodiff: backward() may only run once per tape");
    }
    Node& out = node(output);
    if (out.size() != 1) {
        throw std::invalid_argument("autodiff: backward() requires a scalar output");
    }
    const auto last = static_cast<std::size_t>(output.id);
    for (std::size_t i = 0; i <= last; ++i) {
        if (nodes_[i].needs_grad) {
            nodes_[i].grad.assign(nodes_[i].size(), 0.0);
        }
    }
    backward_done_ = true;
    if (!out.needs_grad) {
        return;
    }
    out.grad[0] = 1.0;
    for (std::size_t i = last + 1; i-- > 0;) {
        if (nodes_[i].needs_grad && nodes_[i].op != Op::Leaf) {
            backward_node(i);
        }
    }
}

void Tape::backward_node(std::size_t id) {
    const Node& n = nodes_[id];
    const double* g = n.grad.data();
    const std::size_t size = n.size();
    const auto& k = kernels::active();

    auto grad_of = [this](std::int32_t in) -> double* {
        Node& src = nodes_[static_cast<std::size_t>(in)];
        return src.needs_grad ? src.grad.data() : nullptr;
    };
    auto value_of = [this](std::int32_t in) -> const double* {
        return nodes_[static_cast<std::size_t>(in)].data();
    };

    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add:
        case Op::Sub: {
            const double sign = n.op == Op::Add ? 1.0 : -1.0;
            if (double* ga = grad_of(n.in0)) {
                k.axpy(1.0, g, ga, size);
            }
            if (double* gb = grad_of(n.in1)) {
                k.axpy(sign, g, gb, size);
            }
            break;
        }
        case Op::Scale:
            if (double* ga = grad_of(n.in0)) {
                k.axpy(n.attr, g, ga, size);
            }
            break;
        case Op::Mul: {
            const double* a = value_of(n.in0);
            const double* b = value_of(n.in1);
            if (double* ga = grad_of(n.in0)) {
                for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * b[i];
            }
            if (double* gb = grad_of(n.in1)) {
                for (std::size_t i = 0; i < size; ++i) gb[i] += g[i] * a[i];
            }
            break;
        }
        case Op::ComplexMul: {
            const std::size_t half = size / 2;
            if (double* ga = grad_of(n.in0)) {
                k.complex_mul_conj_acc(g, value_of(n.in1), ga, half);
            }
            if (double* gb = grad_of(n.in1)) {
                k.complex_mul_conj_acc(g, value_of(n.in0), gb, half);
            }
            break;
        }
        case Op::Cos: {
            const double* a = value_of(n.in0);
            if (double* ga = grad_of(n.in0)) {
                for (std::size_t i = 0; i < size; ++i) ga[i] -= g[i] * std::sin(a[i]);
            }
            break;
        }
        case Op::Sin: {
            const double* a = value_of(n.in0);
            if (double* ga = grad_of(n.in0)) {
                for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * std::cos(a[i]);
            }
            break;
        }
        case Op::Concat: {
            const std::size_t first = nodes_[static_cast<std::size_t>(n.in0)].size();
            if (double* ga = grad_of(n.in0)) {
                k.axpy(1.0, g, ga, first);
            }
            if (double* gb = grad_of(n.in1)) {
                k.axpy(1.0, g + first, gb, size - first);
            }
            break;
        }
        case Op::MatVec: {
            const Node& m = nodes_[static_cast<std::size_t>(n.in0)];
            if (double* gm = grad_of(n.in0)) {
                k.ger_acc(g, value_of(n.in1), gm, m.rows, m.cols);
            }
            if (double* gx = grad_of(n.in1)) {
                k.gemv_t_acc(m.data(), g, gx, m.rows, m.cols);
            }
            break;
        }
        case Op::VecMat: {
            const Node& m = nodes_[static_cast<std::size_t>(n.in1)];
            if (double* gw = grad_of(n.in0)) {
                // d/dw_r = <M_r, g>
                for (std::size_t r = 0; r < m.rows; ++r) {
                    gw[r] += k.dot(m.data() + r * m.cols, g, m.cols);
                }
            }
            if (double* gm = grad_of(n.in1)) {
                k.ger_acc(value_of(n.in0), g, gm, m.rows, m.cols);
            }
            break;
        }
        case Op::Linear: {
            const Node& x = nodes_[static_cast<std::size_t>(n.in0)];
            const Node& w = nodes_[static_cast<std::size_t>(n.in1)];
            double* gx = grad_of(n.in0);
            double* gw = grad_of(n.in1);
            double* gb = n.in2 >= 0 ? grad_of(n.in2) : nullptr;
            for (std::size_t r = 0; r < x.rows; ++r) {
                const double* gr = g + r * w.rows;
                if (gx) k.gemv_t_acc(w.data(), gr, gx + r * x.cols, w.rows, w.cols);
                if (gw) k.ger_acc(gr, x.data() + r * x.cols, gw, w.rows, w.cols);
                if (gb) k.axpy(1.0, gr, gb, w.rows);
            }
            break;
        }
        case Op::Softmax: {
            if (double* ga = grad_of(n.in0)) {
                const double* y = n.value.data();
                const double gy = k.dot(g, y, size);
                for (std::size_t i = 0; i < size; ++i) ga[i] += y[i] * (g[i] - gy);
            }
            break;
        }
        case Op::LeakyRelu: {
            const double* a = value_of(n.in0);
            if (double* ga = grad_of(n.in0)) {
                for (std::size_t i = 0; i < size; ++i) ga[i] += a[i] > 0.0 ? g[i] : n.attr * g[i];
            }
            break;
        }
        case Op::Elu: {
            const double* a = value_of(n.in0);
            if (double* ga = grad_of(n.in0)) {
                for (std::size_t i = 0; i < size; ++i) {
                    ga[i] += a[i] > 0.0 ? g[i] : g[i] * (n.value[i] + 1.0);
                }
            }
            break;
        }
        case Op::Tanh: {
            if (double* ga = grad_of(n.in0)) {
                for (std::size_t i = 0; i < size; ++i) {
                    ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
                }
            }
            break;
        }
        case Op::Dot: {
            const std::size_t len = nodes_[static_cast<std::size_t>(n.in0)].size();
            if (double* ga = grad_of(n.in0)) {
                k.axpy(g[0], value_of(n.in1), ga, len);
            }
            if (double* gb = grad_of(n.in1)) {
                k.axpy(g[0], value_of(n.in0), gb, len);
            }
            break;
        }
        case Op::Cosine: {
            const std::size_t len = nodes_[static_cast<std::size_t>(n.in0)].size();
            const double* a = value_of(n.in0);
            const double* b = value_of(n.in1);
            const double na = n.cache[0];
            const double nb = n.cache[1];
            const double f = n.value[0];
            if (double* ga = grad_of(n.in0)) {
                k.axpy(g[0] / (na * nb), b, ga, len);
                k.axpy(-g[0] * f / (na * na), a, ga, len);
            }
            if (double* gb = grad_of(n.in1)) {
                k.axpy(g[0] / (na * nb), a, gb, len);
                k.axpy(-g[0] * f / (nb * nb), b, gb, len);
            }
            break;
        }
        case Op::CosineMatrix: {
            const Node& p = nodes_[static_cast<std::size_t>(n.in0)];
            const Node& q = nodes_[static_cast<std::size_t>(n.in1)];
            const std::size_t d = p.cols;
            double* gp = grad_of(n.in0);
            double* gq = grad_of(n.in1);
            for (std::size_t i = 0; i < p.rows; ++i) {
                const double np_i = n.cache[i];
                const double* pi = p.data() + i * d;
                for (std::size_t j = 0; j < q.rows; ++j) {
                    const double gij = g[i * q.rows + j];
                    if (gij == 0.0) continue;
                    const double nq_j = n.cache[p.rows + j];
                    const double* qj = q.data() + j * d;
                    const double s = n.value[i * q.rows + j];
                    if (gp) {
                        k.axpy(gij / (np_i * nq_j), qj, gp + i * d, d);
                        k.axpy(-gij * s / (np_i * np_i), pi, gp + i * d, d);
                    }
                    if (gq) {
                        k.axpy(gij / (np_i * nq_j), pi, gq + j * d, d);
                        k.axpy(-gij * s / (nq_j * nq_j), qj, gq + j * d, d);
                    }
                }
            }
            break;
        }
        case Op::LogSumExp: {
            if (double* ga = grad_of(n.in0)) {
                const double* a = value_of(n.in0);
                const std::size_t len = nodes_[static_cast<std::size_t>(n.in0)].size();
                for (std::size_t i = 0; i < len; ++i) ga[i] += g[0] * std::exp(a[i] - n.value[0]);
            }
            break;
        }
        case Op::Pick:
            if (double* ga = grad_of(n.in0)) {
                ga[n.index[0]] += g[0];
            }
            break;
        case Op::Gather:
            if (double* ga = grad_of(n.in0)) {
                for (std::size_t j = 0; j < n.index.size(); ++j) ga[n.index[j]] += g[j];
            }
            break;
        case Op::Stack:
            for (std::size_t j = 0; j < n.inputs.size(); ++j) {
                if (double* gi = grad_of(n.inputs[j])) gi[0] += g[j];
            }
            break;
        case Op::StackRows: {
            std::size_t offset = 0;
            for (std::int32_t in : n.inputs) {
                const std::size_t len = nodes_[static_cast<std::size_t>(in)].size();
                if (double* gi = grad_of(in)) k.axpy(1.0, g + offset, gi, len);
                offset += len;
            }
            break;
        }
        case Op::Sum:
        case Op::Mean: {
            const double w = n.op == Op::Sum ? 1.0 : 1.0 / static_cast<double>(n.inputs.size());
            for (std::int32_t in : n.inputs) {
                if (double* gi = grad_of(in)) k.axpy(w, g, gi, size);
            }
            break;
        }
    }
}

}  // namespace bico::ad
