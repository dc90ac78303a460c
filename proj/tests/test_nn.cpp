#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "isd/nn/rng.hpp"
#include "isd/nn/tape.hpp"
#include "test_util.hpp"

using namespace isd;
using namespace isd::nn;
using isd::testutil::max_grad_error;

namespace {

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = scale * rng.normal();
    return t;
}

} // namespace

TEST_CASE("tensor shape checks") {
    CHECK_THROWS_AS(Tensor({2, 0}), DimError);
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.at(1, 2) == 1.5);
    CHECK_THROWS_AS(reshaped(t, {4, 2}), DimError);
    Tensor r = reshaped(t, {3, 2});
    CHECK(r.dim(0) == 3);
}

TEST_CASE("rng determinism and moments") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

    Rng c(7);
    double mean = 0.0, var = 0.0;
    const int n = 20000;
    std::vector<double> xs(n);
    for (auto& x : xs) x = c.normal();
    for (double x : xs) mean += x;
    mean /= n;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= n;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);

    Rng d(9);
    int lo_seen = 0, hi_seen = 0;
    for (int i = 0; i < 1000; ++i) {
        int v = d.uniform_int(2, 5);
        CHECK(v >= 2);
        CHECK(v <= 5);
        if (v == 2) ++lo_seen;
        if (v == 5) ++hi_seen;
    }
    CHECK(lo_seen > 100);
    CHECK(hi_seen > 100);
}

TEST_CASE("norm_groups gcd rule") {
    CHECK(norm_groups(16, 8) == 8);
    CHECK(norm_groups(2, 8) == 2);
    CHECK(norm_groups(1, 8) == 1);
    CHECK(norm_groups(12, 8) == 4);
    CHECK(norm_groups(6, 8) == 2);
}

TEST_CASE("conv2d known values and geometry") {
    Tape t;
    Tensor x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    Tensor w({1, 1, 1, 1}, std::vector<double>{2});
    Tensor b({1}, std::vector<double>{1});
    Var y = t.conv2d(t.input(x), t.input(w), t.input(b), 1, 0);
    const Tensor& yv = t.val(y);
    CHECK(yv.shape == std::vector<int>{1, 2, 2});
    CHECK(yv[0] == 3.0);
    CHECK(yv[3] == 9.0);

    Rng rng(1);
    Tensor x2 = rand_tensor({3, 8, 8}, rng);
    Tensor w2 = rand_tensor({4, 3, 3, 3}, rng);
    Tensor b2 = rand_tensor({4}, rng);
    Var y2 = t.conv2d(t.input(x2), t.input(w2), t.input(b2), 2, 1);
    CHECK(t.val(y2).shape == std::vector<int>{4, 4, 4});

    CHECK_THROWS_AS(t.conv2d(t.input(x2), t.input(w), t.input(b), 1, 1), DimError);
}

TEST_CASE("forward determinism is bitwise") {
    Rng rng(5);
    Tensor x = rand_tensor({4, 6, 6}, rng);
    Tensor w = rand_tensor({4, 4, 3, 3}, rng);
    Tensor b = rand_tensor({4}, rng);
    auto run = [&]() {
        Tape t;
        Var y = t.silu(t.conv2d(t.input(x), t.input(w), t.input(b), 1, 1));
        y = t.group_norm(y, 2);
        return t.val(y);
    };
    Tensor a = run(), c = run();
    for (long long i = 0; i < a.size(); ++i) CHECK(a[i] == c[i]);
}

TEST_CASE("gradients: conv2d stride 1") {
    Rng rng(11);
    Tensor x = rand_tensor({2, 5, 5}, rng);
    Tensor w = rand_tensor({3, 2, 3, 3}, rng, 0.5);
    Tensor b = rand_tensor({3}, rng, 0.1);
    Tensor target = rand_tensor({3, 5, 5}, rng);
    double err = max_grad_error({x, w, b}, [&](Tape& t, const std::vector<Var>& v) {
        return t.mse(t.conv2d(v[0], v[1], v[2], 1, 1), target);
    });
    CHECK(err < 1e-6);
}

TEST_CASE("gradients: conv2d stride 2 and 1x1") {
    Rng rng(12);
    Tensor x = rand_tensor({2, 6, 6}, rng);
    Tensor w = rand_tensor({3, 2, 3, 3}, rng, 0.5);
    Tensor b = rand_tensor({3}, rng, 0.1);
    Tensor target = rand_tensor({3, 3, 3}, rng);
    double err = max_grad_error({x, w, b}, [&](Tape& t, const std::vector<Var>& v) {
        return t.mse(t.conv2d(v[0], v[1], v[2], 2, 1), target);
    });
    CHECK(err < 1e-6);

    Tensor w1 = rand_tensor({4, 2, 1, 1}, rng, 0.5);
    Tensor b1 = rand_tensor({4}, rng, 0.1);
    Tensor target1 = rand_tensor({4, 6, 6}, rng);
    err = max_grad_error({x, w1, b1}, [&](Tape& t, const std::vector<Var>& v) {
        return t.mse(t.conv2d(v[0], v[1], v[2], 1, 0), target1);
    });
    CHECK(err < 1e-6);
}

TEST_CASE("gradients: linear") {
    Rng rng(13);
    Tensor x = rand_tensor({7}, rng);
    Tensor w = rand_tensor({5, 7}, rng, 0.5);
    Tensor b = rand_tensor({5}, rng, 0.1);
    Tensor target = rand_tensor({5}, rng);
    double err = max_grad_error({x, w, b}, [&](Tape& t, const std::vector<Var>& v) {
        return t.mse(t.silu(t.linear(v[0], v[1], v[2])), target);
    });
    CHECK(err < 1e-6);
}

TEST_CASE("gradients: group_norm") {
    Rng rng(14);
    Tensor x = rand_tensor({4, 4, 4}, rng, 2.0);
    Tensor target = rand_tensor({4, 4, 4}, rng);
    for (int groups : {1, 2, 4}) {
        double err = max_grad_error({x}, [&](Tape& t, const std::vector<Var>& v) {
            return t.mse(t.group_norm(v[0], groups), target);
        });
        CHECK(err < 1e-5);
    }
}

TEST_CASE("gradients: silu, add, sum") {
    Rng rng(15);
    Tensor x = rand_tensor({3, 4, 4}, rng);
    Tensor y = rand_tensor({3, 4, 4}, rng);
    double err = max_grad_error({x, y}, [&](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.silu(t.add(v[0], v[1])));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("gradients: modulate broadcast and elementwise") {
    Rng rng(16);
    Tensor x = rand_tensor({3, 4, 4}, rng);
    Tensor s = rand_tensor({3}, rng);
    Tensor b = rand_tensor({3}, rng);
    Tensor target = rand_tensor({3, 4, 4}, rng);
    double err = max_grad_error({x, s, b}, [&](Tape& t, const std::vector<Var>& v) {
        return t.mse(t.modulate(v[0], v[1], v[2]), target);
    });
    CHECK(err < 1e-6);

    Tensor se = rand_tensor({3, 4, 4}, rng);
    Tensor be = rand_tensor({3, 4, 4}, rng);
    err = max_grad_error({x, se, be}, [&](Tape& t, const std::vector<Var>& v) {
        return t.mse(t.modulate(v[0], v[1], v[2]), target);
    });
    CHECK(err < 1e-6);
}

TEST_CASE("gradients: upsample, avg_pool, concat, slice") {
    Rng rng(17);
    Tensor x = rand_tensor({2, 4, 4}, rng);
    Tensor y = rand_tensor({3, 4, 4}, rng);
    Tensor target_up = rand_tensor({2, 8, 8}, rng);
    double err = max_grad_error({x}, [&](Tape& t, const std::vector<Var>& v) {
        return t.mse(t.upsample_nearest2x(v[0]), target_up);
    });
    CHECK(err < 1e-6);

    Tensor target_dn = rand_tensor({2, 2, 2}, rng);
    err = max_grad_error({x}, [&](Tape& t, const std::vector<Var>& v) {
        return t.mse(t.avg_pool2x(v[0]), target_dn);
    });
    CHECK(err < 1e-6);

    Tensor target_cat = rand_tensor({3, 4, 4}, rng);
    err = max_grad_error({x, y}, [&](Tape& t, const std::vector<Var>& v) {
        Var cat = t.concat0(v[0], v[1]); // {5,4,4}
        return t.mse(t.slice0(cat, 1, 4), target_cat);
    });
    CHECK(err < 1e-6);
}

TEST_CASE("gradient accumulates across fan-out") {
    Rng rng(18);
    Tensor x = rand_tensor({2, 4, 4}, rng);
    // x used twice: y = x + silu(x)
    double err = max_grad_error({x}, [&](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.add(v[0], t.silu(v[0])));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("param gradients accumulate into the store") {
    Rng rng(19);
    ParamStore store;
    int wi = store.add("w", rand_tensor({3, 2, 3, 3}, rng, 0.5));
    int bi = store.add("b", rand_tensor({3}, rng, 0.1));
    Tensor x = rand_tensor({2, 4, 4}, rng);
    Tensor target = rand_tensor({3, 4, 4}, rng);

    Tape t(&store);
    Var loss = t.mse(t.conv2d(t.input(x), t.param(wi), t.param(bi), 1, 1), target);
    t.backward(loss);

    auto eval = [&]() {
        Tape t2(&store);
        return t2.val(t2.mse(t2.conv2d(t2.input(x), t2.param(wi), t2.param(bi), 1, 1), target))[0];
    };
    double worst = 0.0;
    for (int i = 0; i < store.count(); ++i)
        for (long long j = 0; j < store.value(i).size(); ++j) {
            double fd =
                testutil::central_diff(&store.value(i).data[static_cast<size_t>(j)], eval);
            worst = std::max(worst, testutil::combined_rel_err(store.grad(i)[j], fd));
        }
    CHECK(worst < 1e-6);
}

TEST_CASE("backward requires scalar root") {
    Tape t;
    Var x = t.input(Tensor({2, 2}, 1.0));
    CHECK_THROWS_AS(t.backward(x), DimError);
}
