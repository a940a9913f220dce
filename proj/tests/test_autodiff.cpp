#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "bico/autodiff.hpp"
#include "bico/gradcheck.hpp"
#include "oracles.hpp"

using bico::ad::Tape;
using bico::ad::Var;

namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Builds the graph over parameter leaves, backprops, and compares with
// central differences of the same graph.
double check_graph(std::vector<std::vector<double>> params, const Builder& build) {
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& p : params) vars.push_back(tape.parameter(p));
        tape.backward(build(tape, vars));
        for (Var v : vars) {
            const auto g = tape.grad(v);
            analytic.emplace_back(g.begin(), g.end());
        }
    }
    std::vector<bico::ParamGroup> groups;
    for (std::size_t i = 0; i < params.size(); ++i) groups.push_back({"p" + std::to_string(i), params[i]});
    auto loss = [&]() -> long double {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& p : params) vars.push_back(tape.parameter(p));
        return tape.scalar(build(tape, vars));
    };
    bico::GradCheckOptions opt;
    opt.step = 1e-6;
    opt.tolerance = 1e-5;
    const auto report = bico::finite_diff_check(loss, groups, analytic, opt);
    CHECK(report.passed);
    return report.max_rel_error;
}

// Reduce a vector-valued node to a scalar with fixed random weights.
Var project(Tape& t, Var v, std::uint64_t seed = 5) {
    std::mt19937_64 rng(seed);
    const std::size_t n = t.rows(v) * t.cols(v);
    const Var w = t.constant(oracle::random_vec(n, rng));
    if (t.rows(v) == 1) return t.dot(w, v);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return t.dot(w, t.gather(v, idx));
}

}  // namespace

TEST_CASE("y = x^2 at 3") {
    const std::vector<double> x{3.0};
    Tape t;
    const Var v = t.parameter(x);
    const Var y = t.dot(v, v);
    CHECK(t.scalar(y) == 9.0);
    t.backward(y);
    CHECK(t.grad(v)[0] == 6.0);
}

TEST_CASE("softmax of equal inputs is uniform") {
    Tape t;
    const Var s = t.softmax(t.constant(std::vector<double>{0.0, 0.0}));
    CHECK(t.value(s)[0] == 0.5);
    CHECK(t.value(s)[1] == 0.5);
}

TEST_CASE("constant output gives zero gradients") {
    const std::vector<double> x{1.0, 2.0};
    Tape t;
    const Var p = t.parameter(x);
    const Var c = t.constant(std::vector<double>{4.0});
    const Var out = t.scale(c, 2.0);
    t.backward(out);
    CHECK(t.grad(p)[0] == 0.0);
    CHECK(t.grad(p)[1] == 0.0);
}

TEST_CASE("backward error semantics") {
    Tape empty;
    CHECK_THROWS_AS(empty.backward(Var{}), std::logic_error);

    Tape t;
    const std::vector<double> x{1.0, 2.0};
    const Var p = t.parameter(x);
    CHECK_THROWS_AS(t.grad(p), std::logic_error);
    CHECK_THROWS_AS(t.backward(p), std::invalid_argument);  // not a scalar
    const Var y = t.dot(p, p);
    t.backward(y);
    CHECK_THROWS_AS(t.backward(y), std::logic_error);
    CHECK_THROWS_AS(t.add(p, p), std::logic_error);
}

TEST_CASE("shape mismatches are rejected") {
    Tape t;
    const Var a = t.constant(std::vector<double>{1, 2});
    const Var b = t.constant(std::vector<double>{1, 2, 3});
    CHECK_THROWS_AS(t.add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(t.dot(a, b), std::invalid_argument);
    CHECK_THROWS_AS(t.complex_mul(b, b), std::invalid_argument);
}

TEST_CASE("cosine of a zero vector is a numeric error") {
    Tape t;
    const Var a = t.constant(std::vector<double>{0, 0});
    const Var b = t.constant(std::vector<double>{1, 2});
    CHECK_THROWS_AS(t.cosine(a, b), bico::NumericError);
}

TEST_CASE("stack_rows concatenates vectors and matrices vertically") {
    Tape t;
    const Var v = t.constant(std::vector<double>{1, 2});
    const Var m = t.constant(bico::Matrix(2, 2, {3, 4, 5, 6}));
    const std::vector<Var> parts{v, m, v};
    const Var s = t.stack_rows(parts);
    CHECK(t.rows(s) == 4);
    CHECK(t.cols(s) == 2);
    const std::vector<double> expect{1, 2, 3, 4, 5, 6, 1, 2};
    const auto got = t.value(s);
    CHECK(std::vector<double>(got.begin(), got.end()) == expect);
    const Var w = t.constant(std::vector<double>{1, 2, 3});
    const std::vector<Var> bad{v, w};
    CHECK_THROWS_AS(t.stack_rows(bad), std::invalid_argument);
}

TEST_CASE("per-op gradients match central differences") {
    std::mt19937_64 rng(17);
    auto r = [&](std::size_t n) { return oracle::random_vec(n, rng); };

    SUBCASE("add, sub, scale, mul") {
        check_graph({r(5), r(5)}, [](Tape& t, const std::vector<Var>& v) {
            return project(t, t.mul(t.add(v[0], t.scale(v[1], 1.5)), t.sub(v[0], v[1])));
        });
    }
    SUBCASE("complex_mul, cos, sin, concat") {
        check_graph({r(6), r(3)}, [](Tape& t, const std::vector<Var>& v) {
            const Var rot = t.concat(t.cos(v[1]), t.sin(v[1]));
            return project(t, t.complex_mul(v[0], rot));
        });
    }
    SUBCASE("matvec, vecmat, linear") {
        check_graph({r(12), r(4), r(3), r(3)}, [](Tape& t, const std::vector<Var>& v) {
            const Var m = t.stack_rows(std::vector<Var>{t.gather(v[0], {0, 1, 2, 3}), t.gather(v[0], {4, 5, 6, 7}),
                                                        t.gather(v[0], {8, 9, 10, 11})});
            const Var a = t.matvec(m, v[1]);
            const Var b = t.vecmat(v[2], m);
            const Var x = t.stack_rows(std::vector<Var>{v[1], b});
            const Var l = t.linear(x, m, v[3]);
            return t.add(project(t, a), project(t, l, 9));
        });
    }
    SUBCASE("softmax, leaky_relu, elu, tanh") {
        check_graph({r(7)}, [](Tape& t, const std::vector<Var>& v) {
            const Var a = t.softmax(v[0]);
            const Var b = t.leaky_relu(v[0], 0.2);
            const Var c = t.elu(v[0]);
            const Var d = t.tanh(v[0]);
            return t.add(t.add(project(t, a), project(t, b, 6)), t.add(project(t, c, 7), project(t, d, 8)));
        });
    }
    SUBCASE("cosine, cosine_matrix, logsumexp, pick") {
        check_graph({r(4), r(4), r(12)}, [](Tape& t, const std::vector<Var>& v) {
            const Var m = t.stack_rows(std::vector<Var>{t.gather(v[2], {0, 1, 2, 3}), t.gather(v[2], {4, 5, 6, 7}),
                                                        t.gather(v[2], {8, 9, 10, 11})});
            const Var p = t.stack_rows(std::vector<Var>{v[0], v[1]});
            const Var cm = t.cosine_matrix(p, m);
            const Var c = t.cosine(v[0], v[1]);
            const Var lse = t.logsumexp(t.gather(cm, {0, 1, 2, 3, 4, 5}));
            return t.add(t.add(c, lse), t.pick(cm, 4));
        });
    }
    SUBCASE("stack, sum, mean") {
        check_graph({r(3), r(3)}, [](Tape& t, const std::vector<Var>& v) {
            const std::vector<Var> s{t.dot(v[0], v[1]), t.pick(v[0], 2), t.pick(v[1], 0)};
            const Var st = t.stack(s);
            const std::vector<Var> terms{v[0], v[1], t.scale(v[0], -2.0)};
            return t.add(project(t, st), t.add(project(t, t.sum(terms), 4), project(t, t.mean(terms), 5)));
        });
    }
}

TEST_CASE("gradient of a sum is the sum of gradients") {
    std::mt19937_64 rng(4);
    const auto x = oracle::random_vec(6, rng);
    auto grad_of = [&](int which) {
        Tape t;
        const Var p = t.parameter(x);
        const Var f = t.logsumexp(p);
        const Var g = t.dot(t.tanh(p), t.tanh(p));
        const Var out = which == 0 ? f : which == 1 ? g : t.add(f, g);
        t.backward(out);
        const auto gr = t.grad(p);
        return std::vector<double>(gr.begin(), gr.end());
    };
    const auto a = grad_of(0), b = grad_of(1), ab = grad_of(2);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(ab[i] == doctest::Approx(a[i] + b[i]).epsilon(1e-14));
}

TEST_CASE("softmax backward conserves probability") {
    std::mt19937_64 rng(8);
    const auto x = oracle::random_vec(5, rng);
    Tape t;
    const Var p = t.parameter(x);
    const Var s = t.softmax(p);
    const Var total = t.dot(t.constant(std::vector<double>(5, 1.0)), s);
    t.backward(total);
    double sum = 0.0;
    for (double g : t.grad(p)) sum += std::abs(g);
    CHECK(sum < 1e-15);
}

TEST_CASE("finite_diff_check on a quadratic") {
    std::vector<double> x{0.3, -1.2, 2.0};
    const std::vector<bico::ParamGroup> groups{{"x", x}};
    const std::vector<std::vector<double>> analytic{{2 * 0.3, 2 * -1.2, 2 * 2.0}};
    auto loss = [&]() -> long double { return (long double)x[0] * x[0] + (long double)x[1] * x[1] + (long double)x[2] * x[2]; };
    const auto report = bico::finite_diff_check(loss, groups, analytic);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-8);
    CHECK(x[1] == -1.2);  // restored

    const std::vector<std::vector<double>> wrong{{0.6, -2.4, 5.0}};
    CHECK_FALSE(bico::finite_diff_check(loss, groups, wrong).passed);

    auto bad = []() -> long double { return NAN; };
    CHECK_THROWS_AS(bico::finite_diff_check(bad, groups, analytic), bico::NumericError);
}
