#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bico/model.hpp"
#include "oracles.hpp"

using namespace bico;

namespace {

std::vector<std::vector<double>> random_texts(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::vector<std::vector<double>> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(oracle::random_vec(d, rng));
    return t;
}

std::array<std::vector<double>, 3> random_anchors(std::size_t d, std::mt19937_64& rng) {
    return {oracle::random_vec(d, rng), oracle::random_vec(d, rng), oracle::random_vec(d, rng)};
}

std::vector<int> as_int(const std::vector<Stance>& s) {
    std::vector<int> out;
    for (Stance x : s) out.push_back(static_cast<int>(x));
    return out;
}

// Unit vectors with pairwise cosine exactly 0.5 would need care; all copies of
// one vector give uniform similarity 1 between everything.
std::vector<double> same(std::size_t d) { return std::vector<double>(d, 1.0); }

}  // namespace

TEST_CASE("attentive match") {
    const Matrix x(2, 2, {1, 0, 0, 1});
    const std::vector<double> c{1, 0};
    std::vector<double> w;
    const auto t = attentive_match(c, x, &w);
    const double a = 1.0 / (1.0 + std::exp(-1.0 / std::sqrt(2.0)));
    CHECK(w[0] == doctest::Approx(a).epsilon(1e-15));
    CHECK(w[0] == doctest::Approx(0.6698).epsilon(1e-4));
    CHECK(w[1] == doctest::Approx(0.3302).epsilon(1e-4));
    CHECK(t[0] == doctest::Approx(a).epsilon(1e-15));

    const Matrix rep(3, 2, {0.3, -0.4, 0.3, -0.4, 0.3, -0.4});
    const auto same_rows = attentive_match(std::vector<double>{5, 1}, rep);
    CHECK(same_rows[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(same_rows[1] == doctest::Approx(-0.4).epsilon(1e-15));

    const Matrix orth(2, 2, {0, 1, 0, 3});
    const auto mean = attentive_match(std::vector<double>{1, 0}, orth, &w);
    CHECK(w[0] == 0.5);
    CHECK(mean[1] == 2.0);

    CHECK_THROWS_AS(attentive_match(c, Matrix(0, 2)), std::invalid_argument);
    CHECK_THROWS_AS(attentive_match(std::vector<double>{1, 0, 0}, x), std::invalid_argument);

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix tok(5, 6, oracle::random_vec(30, rng));
        const auto out = attentive_match(oracle::random_vec(6, rng), tok, &w);
        double s = 0.0;
        for (double v : w) s += v;
        CHECK(std::abs(s - 1.0) <= 1e-12);
        double maxrow = 0.0, norm = 0.0;
        for (std::size_t r = 0; r < 5; ++r) {
            double n2 = 0.0;
            for (double v : tok.row(r)) n2 += v * v;
            maxrow = std::max(maxrow, std::sqrt(n2));
        }
        for (double v : out) norm += v * v;
        CHECK(std::sqrt(norm) <= maxrow + 1e-12);
    }
}

TEST_CASE("classify") {
    std::mt19937_64 rng(2);
    FacetHead zero = FacetHead::random(4, 5, 3, rng);
    std::fill(zero.w1.data.begin(), zero.w1.data.end(), 0.0);
    std::fill(zero.b1.begin(), zero.b1.end(), 0.0);
    std::fill(zero.w2.data.begin(), zero.w2.data.end(), 0.0);
    std::fill(zero.b2.begin(), zero.b2.end(), 0.0);
    for (double p : classify(std::vector<double>{1, 2, 3, 4}, zero)) CHECK(p == doctest::Approx(1.0 / 3));

    zero.b2 = {std::log(2.0), 0.0, 0.0};
    const auto p = classify(std::vector<double>{1, 2, 3, 4}, zero);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-15));

    const FacetHead h = FacetHead::random(6, 7, 3, rng);
    for (int trial = 0; trial < 20; ++trial) {
        const auto t = oracle::random_vec(6, rng);
        const auto got = classify(t, h);
        // matvec, tanh, matvec, softmax
        std::vector<double> hid(7), logit(3);
        for (std::size_t i = 0; i < 7; ++i) {
            double s = h.b1[i];
            for (std::size_t j = 0; j < 6; ++j) s += h.w1(i, j) * t[j];
            hid[i] = std::tanh(s);
        }
        double z = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            double s = h.b2[i];
            for (std::size_t j = 0; j < 7; ++j) s += h.w2(i, j) * hid[j];
            z += (logit[i] = std::exp(s));
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(std::abs(got[i] - logit[i] / z) <= 1e-12);
            sum += got[i];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    CHECK_THROWS_AS(classify(std::vector<double>{1, 2}, h), std::invalid_argument);
}

TEST_CASE("adapter") {
    std::mt19937_64 rng(3);
    const auto x = oracle::random_vec(4, rng);
    CHECK(adapter_apply(Adapter::identity(4, false), x) == x);
    CHECK(adapter_apply(Adapter::identity(4, true), x) == x);
    Adapter a = Adapter::identity(4, true);
    a.w.data = oracle::random_vec(16, rng);
    a.b = oracle::random_vec(4, rng);
    const auto y = adapter_apply(a, x);
    for (std::size_t i = 0; i < 4; ++i) {
        double s = a.b[i];
        for (std::size_t j = 0; j < 4; ++j) s += a.w(i, j) * x[j];
        CHECK(std::abs(y[i] - s) <= 1e-14);
    }
}

TEST_CASE("contrastive closed forms") {
    const std::array<std::vector<double>, 3> anchors{same(4), same(4), same(4)};
    const std::vector<Stance> left3{Stance::Left, Stance::Left, Stance::Left};
    CHECK(std::abs(cgcl_loss(anchors, {same(4), same(4), same(4)}, left3, 0.1) + std::log(3.0 / 5.0)) <= 1e-10);
    const std::vector<Stance> lr{Stance::Left, Stance::Right};
    CHECK(std::abs(cgcl_loss(anchors, {same(4), same(4)}, lr, 0.1) - std::log(4.0)) <= 1e-10);

    const std::vector<int> rru{kRelated, kRelated, kUnrelated};
    CHECK(std::abs(cl_loss({same(4), same(4), same(4)}, rru, 0.5) - std::log(2.0)) <= 1e-10);
    std::mt19937_64 rng(4);
    const std::vector<int> pair{kRelated, kRelated};
    CHECK(cl_loss(random_texts(2, 4, rng), pair, 0.5) == doctest::Approx(0.0));

    CHECK_THROWS_AS(cgcl_loss(anchors, {std::vector<double>(4, 0.0)}, std::vector<Stance>{Stance::Left}, 0.1),
                    NumericError);
    CHECK_THROWS_AS(cgcl_loss(anchors, {}, {}, 0.1), std::invalid_argument);
}

TEST_CASE("contrastive losses match straight-line oracles") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto anchors = random_anchors(6, rng);
        const auto texts = random_texts(4, 6, rng);
        std::vector<Stance> labels;
        for (int i = 0; i < 4; ++i) labels.push_back(kStances[rng() % 3]);
        const double want = oracle::cgcl(anchors, texts, as_int(labels), 0.1);
        CHECK(std::abs(cgcl_loss(anchors, texts, labels, 0.1) - want) <= 1e-12 * std::max(1.0, want));

        const auto t5 = random_texts(5, 6, rng);
        std::vector<int> rel;
        for (int i = 0; i < 5; ++i) rel.push_back(static_cast<int>(rng() % 2));
        const double want_cl = oracle::cl(t5, rel, 0.5);
        CHECK(std::abs(cl_loss(t5, rel, 0.5) - want_cl) <= 1e-12 * std::max(1.0, want_cl));

        // tape versions, per-text variables and a stacked matrix
        ad::Tape tape;
        std::array<ad::Var, 3> av;
        for (int i = 0; i < 3; ++i) av[i] = tape.constant(anchors[i]);
        std::vector<ad::Var> tv;
        for (const auto& t : texts) tv.push_back(tape.constant(t));
        const auto g1 = graph::cgcl_loss(tape, av, tv, labels, 0.1);
        const auto g2 = graph::cgcl_loss(tape, av, tape.stack_rows(tv), labels, 0.1);
        REQUIRE(g1);
        REQUIRE(g2);
        CHECK(std::abs(tape.scalar(*g1) - want) <= 1e-12 * std::max(1.0, want));
        CHECK(tape.scalar(*g2) == tape.scalar(*g1));
        std::vector<ad::Var> cv;
        for (const auto& t : t5) cv.push_back(tape.constant(t));
        const auto c1 = graph::cl_loss(tape, cv, rel, 0.5);
        if (c1) CHECK(std::abs(tape.scalar(*c1) - want_cl) <= 1e-12 * std::max(1.0, want_cl));
        else CHECK(want_cl == 0.0);
    }
}

TEST_CASE("contrastive invariances") {
    std::mt19937_64 rng(6);
    const auto anchors = random_anchors(5, rng);
    auto texts = random_texts(6, 5, rng);
    std::vector<Stance> labels{Stance::Left, Stance::Right, Stance::Center, Stance::Left, Stance::Right, Stance::Left};
    const double base = cgcl_loss(anchors, texts, labels, 0.1);
    std::vector<int> rel{0, 1, 0, 0, 1, 1};
    const double base_cl = cl_loss(texts, rel, 0.5);

    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<std::vector<double>> pt;
    std::vector<Stance> pl;
    std::vector<int> pr;
    for (std::size_t i : perm) {
        pt.push_back(texts[i]);
        pl.push_back(labels[i]);
        pr.push_back(rel[i]);
    }
    CHECK(std::abs(cgcl_loss(anchors, pt, pl, 0.1) - base) <= 1e-10);
    CHECK(std::abs(cl_loss(pt, pr, 0.5) - base_cl) <= 1e-10);

    for (double& v : texts[2]) v *= 7.5;
    CHECK(std::abs(cgcl_loss(anchors, texts, labels, 0.1) - base) <= 1e-10);
}

TEST_CASE("a small descent step does not increase the anchored loss") {
    std::mt19937_64 rng(7);
    const auto anchors = random_anchors(6, rng);
    auto flat = oracle::random_vec(24, rng);
    const std::vector<Stance> labels{Stance::Left, Stance::Center, Stance::Right, Stance::Left};
    auto eval = [&](bool grad, std::vector<double>* g) {
        ad::Tape tape;
        std::array<ad::Var, 3> av;
        for (int i = 0; i < 3; ++i) av[i] = tape.constant(anchors[i]);
        const ad::Var x = tape.parameter(flat, 4, 6);
        const ad::Var loss = *graph::cgcl_loss(tape, av, x, labels, 0.1);
        const double v = tape.scalar(loss);
        if (grad) {
            tape.backward(loss);
            const auto gr = tape.grad(x);
            g->assign(gr.begin(), gr.end());
        }
        return v;
    };
    std::vector<double> g;
    const double before = eval(true, &g);
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= 1e-4 * g[i];
    CHECK(eval(false, nullptr) <= before);
}

TEST_CASE("total loss") {
    const std::vector<double> ce{1.0, 2.0}, cl{0.5, 0.5};
    CHECK(total_loss(ce, cl, 0.3, 2) == doctest::Approx(1.65).epsilon(1e-15));
    CHECK(total_loss(ce, cl, 0.0, 2) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("subtask names and loss config") {
    CHECK(parse_subtask("relevance") == Subtask::Relevance);
    CHECK(parse_subtask(subtask_name(Subtask::Ideology)) == Subtask::Ideology);
    CHECK_FALSE(parse_subtask("stance"));
    CHECK(class_count(Subtask::Relevance) == 2);
    CHECK(class_count(Subtask::Ideology) == 3);
    CHECK_THROWS_AS((LossConfig{0.0, 0.3}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((LossConfig{0.1, -1.0}.validate()), std::invalid_argument);
}
