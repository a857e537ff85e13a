#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "combi/gradcheck.hpp"
#include "combi/mlp.hpp"

using namespace combi;

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double max_abs_row_sum(const Tensor& w) {
    double worst = 0;
    for (int r = 0; r < w.dim(0); ++r) {
        double s = 0;
        for (int c = 0; c < w.dim(1); ++c) s += std::abs(w.at(r, c));
        worst = std::max(worst, s);
    }
    return worst;
}

}  // namespace

TEST_CASE("row normalization caps the absolute row sum at softplus(k)") {
    Tensor w({2, 3});
    double vals[6] = {3.0, -4.0, 5.0, 0.01, -0.02, 0.005};
    for (int i = 0; i < 6; ++i) w[i] = vals[i];
    double k = 0.5;
    Tensor wn = lipschitz_normalize_value(w, k);
    double bound = softplus(k);
    // row 0 exceeds the bound: scaled so its row sum equals the bound
    double s0 = std::abs(wn.at(0, 0)) + std::abs(wn.at(0, 1)) + std::abs(wn.at(0, 2));
    CHECK(s0 == doctest::Approx(bound).epsilon(1e-12));
    // scaled row keeps its direction
    CHECK(wn.at(0, 0) / wn.at(0, 1) == doctest::Approx(3.0 / -4.0).epsilon(1e-12));
    // row 1 is already within the bound: unchanged
    CHECK(wn.at(1, 0) == 0.01);
    CHECK(wn.at(1, 1) == -0.02);
    CHECK(wn.at(1, 2) == 0.005);
}

TEST_CASE("row normalization is exact at the boundary and idempotent") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor w({3, 4});
        for (double& v : w.data) v = rng.uniform(-2, 2);
        double k = rng.uniform(-2, 2);
        Tensor wn = lipschitz_normalize_value(w, k);
        CHECK(max_abs_row_sum(wn) <= softplus(k) * (1 + 1e-12));
        Tensor wnn = lipschitz_normalize_value(wn, k);
        for (std::int64_t i = 0; i < wn.numel(); ++i)
            CHECK(wnn[i] == doctest::Approx(wn[i]).epsilon(1e-12));
    }
}

TEST_CASE("row normalization gradients match finite differences") {
    // loss = sum(square(normalize(W, k))); perturb W entries and k jointly
    Rng rng(12);
    const int rows = 2, cols = 3;
    auto build = [&](const std::vector<double>& x, Graph& g) {
        Tensor w({rows, cols});
        for (int i = 0; i < rows * cols; ++i) w[i] = x[static_cast<std::size_t>(i)];
        Tensor k = Tensor::scalar(x.back());
        NodeId wn = g.param(0, std::move(w));
        NodeId kn = g.param(1, std::move(k));
        return g.sum(g.square(lipschitz_normalize(g, wn, kn)));
    };
    auto f = [&](const std::vector<double>& x) {
        Graph g;
        return g.value(build(x, g))[0];
    };
    auto grad_f = [&](const std::vector<double>& x) {
        Graph g;
        auto grads = g.backward(build(x, g));
        std::vector<double> out(grads.at(0).data);
        out.push_back(grads.at(1)[0]);
        return out;
    };
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x0(rows * cols + 1);
        for (double& v : x0) v = rng.uniform(-1.5, 1.5);
        CHECK(finite_diff_check(f, grad_f, x0) < 1e-5);
    }
}

TEST_CASE("mlp forward matches a hand-rolled evaluation") {
    ParamStore ps;
    Rng rng(13);
    Mlp net("t", {2, 4, 3}, Activation::Relu, Activation::None, false, ps, rng);
    Tensor x({2, 2});
    x[0] = 0.3; x[1] = -0.7; x[2] = 1.2; x[3] = 0.4;
    Graph g;
    NodeId y = net.forward(g, ps, g.constant(x));
    const Tensor& yv = g.value(y);
    CHECK(yv.dim(0) == 2);
    CHECK(yv.dim(1) == 3);

    for (int r = 0; r < 2; ++r) {
        std::vector<double> h = {x.at(r, 0), x.at(r, 1)};
        for (std::size_t li = 0; li < net.layers().size(); ++li) {
            const MlpLayer& l = net.layers()[li];
            const Tensor& w = ps.value(l.w_key);
            const Tensor& bias = ps.value(l.b_key);
            std::vector<double> next(static_cast<std::size_t>(l.out));
            for (int o = 0; o < l.out; ++o) {
                double s = bias[o];
                for (int i = 0; i < l.in; ++i) s += w.at(o, i) * h[static_cast<std::size_t>(i)];
                next[static_cast<std::size_t>(o)] = apply_activation(l.act, s);
            }
            h = next;
        }
        for (int c = 0; c < 3; ++c) CHECK(yv.at(r, c) == doctest::Approx(h[static_cast<std::size_t>(c)]).epsilon(1e-12));
    }
}

TEST_CASE("lipschitz mlp initializes k at the initial max row sum") {
    ParamStore ps;
    Rng rng(14);
    Mlp net("t", {3, 8, 8, 2}, Activation::Relu, Activation::None, true, ps, rng);
    for (const MlpLayer& l : net.layers()) {
        REQUIRE(l.k_key >= 0);
        double bound = softplus(ps.value(l.k_key)[0]);
        CHECK(bound == doctest::Approx(max_abs_row_sum(ps.value(l.w_key))).epsilon(1e-10));
    }
    // at init, normalization leaves the forward pass bounded by the product
    double prod = net.lipschitz_bound(ps);
    double expect = 1.0;
    for (const MlpLayer& l : net.layers()) expect *= softplus(ps.value(l.k_key)[0]);
    CHECK(prod == doctest::Approx(expect).epsilon(1e-12));
    CHECK(net.row_sum_violation(ps) == 0.0);
}

TEST_CASE("lipschitz mlp output change is bounded by the certified constant") {
    ParamStore ps;
    Rng rng(15);
    Mlp net("t", {3, 16, 16, 1}, Activation::Relu, Activation::None, true, ps, rng);
    // inflate weights so normalization is active, then shrink k
    for (const MlpLayer& l : net.layers()) {
        for (double& v : ps.value(l.w_key).data) v *= 10.0;
        ps.value(l.k_key)[0] = 0.3;
    }
    double bound = net.lipschitz_bound(ps);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor a({1, 3}), b({1, 3});
        for (int i = 0; i < 3; ++i) {
            a[i] = rng.uniform(-2, 2);
            b[i] = a[i] + rng.uniform(-0.5, 0.5);
        }
        double din = 0;
        for (int i = 0; i < 3; ++i) din = std::max(din, std::abs(a[i] - b[i]));
        Graph g;
        double ya = g.value(net.forward(g, ps, g.constant(a)))[0];
        double yb = g.value(net.forward(g, ps, g.constant(b)))[0];
        CHECK(std::abs(ya - yb) <= bound * din * (1 + 1e-9));
    }
}

TEST_CASE("mlp gradients match finite differences through normalization") {
    Rng rng(16);
    Tensor x({3, 2});
    for (double& v : x.data) v = rng.uniform(-1, 1);
    auto build = [&](const std::vector<double>& flat, Graph& g, ParamStore& ps, Mlp& net) {
        Rng r0(16);
        net = Mlp("t", {2, 4, 1}, Activation::Softplus, Activation::None, true, ps, r0);
        std::size_t pos = 0;
        for (int i = 0; i < ps.size(); ++i)
            for (double& v : ps.value(i).data) v = flat[pos++];
        return g.sum(g.square(net.forward(g, ps, g.constant(x))));
    };
    std::size_t total = 0;
    {
        ParamStore ps;
        Rng r0(16);
        Mlp net("t", {2, 4, 1}, Activation::Softplus, Activation::None, true, ps, r0);
        for (int i = 0; i < ps.size(); ++i) total += static_cast<std::size_t>(ps.value(i).numel());
    }
    auto f = [&](const std::vector<double>& flat) {
        Graph g;
        ParamStore ps;
        Mlp net;
        return g.value(build(flat, g, ps, net))[0];
    };
    auto grad_f = [&](const std::vector<double>& flat) {
        Graph g;
        ParamStore ps;
        Mlp net;
        auto grads = g.backward(build(flat, g, ps, net));
        std::vector<double> out;
        for (int i = 0; i < ps.size(); ++i) {
            auto it = grads.find(i);
            if (it == grads.end()) {
                out.insert(out.end(), static_cast<std::size_t>(ps.value(i).numel()), 0.0);
            } else {
                out.insert(out.end(), it->second.data.begin(), it->second.data.end());
            }
        }
        return out;
    };
    Rng rinit(17);
    std::vector<double> x0(total);
    for (double& v : x0) v = rinit.uniform(-0.8, 0.8);
    CHECK(finite_diff_check(f, grad_f, x0) < 1e-5);
}

TEST_CASE("plain mlp refuses a lipschitz bound query") {
    ParamStore ps;
    Rng rng(18);
    Mlp net("t", {2, 4, 1}, Activation::Relu, Activation::None, false, ps, rng);
    CHECK_THROWS(net.lipschitz_bound(ps));
}

TEST_CASE("attach rebinds to an existing parameter layout") {
    ParamStore ps;
    Rng rng(19);
    Mlp net("t", {2, 4, 3}, Activation::Relu, Activation::Sigmoid, true, ps, rng);
    Mlp again = Mlp::attach("t", {2, 4, 3}, Activation::Relu, Activation::Sigmoid, true, ps);
    Tensor x({1, 2});
    x[0] = 0.2; x[1] = -0.9;
    Graph g;
    double y1 = g.value(net.forward(g, ps, g.constant(x)))[0];
    double y2 = g.value(again.forward(g, ps, g.constant(x)))[0];
    CHECK(y1 == y2);
}
