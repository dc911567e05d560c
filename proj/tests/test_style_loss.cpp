#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stgn/gradcheck.hpp"
#include "stgn/style_loss.hpp"

using namespace stgn;
namespace op = stgn::ops;
namespace sl = stgn::style_loss;

namespace {

Tensor rand_img(int h, int w, Rng& rng) {
    Tensor t = Tensor::zeros({h, w, 3});
    for (auto& v : t.raw()) v = rng.uniform();
    return t;
}

double frob_sq(const Tensor& g) {
    double s = 0;
    for (double v : g.data()) s += v * v;
    return s;
}

}  // namespace

TEST_CASE("feature_pyramid: zero image maps to zero features") {
    auto feats = sl::feature_pyramid(Tensor::zeros({32, 32, 3}));
    REQUIRE(feats.size() == 3);
    for (const auto& f : feats) {
        for (double v : f.data()) CHECK(v == 0.0);
    }
}

TEST_CASE("feature_pyramid: spatial sizes halve per layer") {
    Rng rng(1);
    auto feats = sl::feature_pyramid(rand_img(32, 32, rng));
    CHECK(feats[0].dim(0) == 8);
    CHECK(feats[0].dim(1) == 16 * 16);
    CHECK(feats[1].dim(0) == 16);
    CHECK(feats[1].dim(1) == 8 * 8);
    CHECK(feats[2].dim(0) == 32);
    CHECK(feats[2].dim(1) == 4 * 4);

    CHECK_THROWS_AS(sl::feature_pyramid(Tensor::zeros({4, 4, 3})), DomainError);
}

TEST_CASE("feature_pyramid: frozen weights give identical features across calls") {
    Rng rng(2);
    Tensor img = rand_img(16, 16, rng);
    auto a = sl::feature_pyramid(img);
    auto b = sl::feature_pyramid(img);
    for (std::size_t j = 0; j < a.size(); ++j) {
        for (std::size_t i = 0; i < a[j].size(); ++i) CHECK(a[j].data()[i] == b[j].data()[i]);
    }
}

TEST_CASE("tsc_loss: identical operands and fully masked-out operands give zero") {
    Rng rng(3);
    Tensor img = rand_img(16, 16, rng);
    Tensor ones = Tensor::full({16, 16}, 1.0);
    Tensor zeros = Tensor::zeros({16, 16});
    CHECK(sl::tsc_loss(img, ones, img, ones).value() == 0.0);

    Tensor other = rand_img(16, 16, rng);
    CHECK(sl::tsc_loss(img, zeros, other, zeros).value() == 0.0);
}

TEST_CASE("tsc_loss: gram scale law on a doubled image") {
    Rng rng(4);
    Tensor ref = rand_img(16, 16, rng);
    Tensor ones = Tensor::full({16, 16}, 1.0);
    double sum_g = 0;
    for (const auto& f : sl::feature_pyramid(ref)) sum_g += frob_sq(op::gram_matrix(f));
    double loss = sl::tsc_loss(op::scale(ref, 2.0), ones, ref, ones).value();
    CHECK(loss == doctest::Approx(9.0 * sum_g).epsilon(1e-9));
}

TEST_CASE("tsc_loss: symmetric under operand swap") {
    Rng rng(5);
    Tensor a = rand_img(16, 16, rng);
    Tensor b = rand_img(16, 16, rng);
    Tensor ma = Tensor::zeros({16, 16});
    Tensor mb = Tensor::zeros({16, 16});
    for (auto& v : ma.raw()) v = rng.uniform() > 0.5 ? 1.0 : 0.0;
    for (auto& v : mb.raw()) v = rng.uniform() > 0.5 ? 1.0 : 0.0;
    CHECK(sl::tsc_loss(a, ma, b, mb).value() == doctest::Approx(sl::tsc_loss(b, mb, a, ma).value()).epsilon(1e-12));
}

TEST_CASE("tsc_loss: nonnegative on random pairs") {
    Rng rng(6);
    for (int it = 0; it < 10; ++it) {
        Tensor a = rand_img(16, 16, rng);
        Tensor b = rand_img(16, 16, rng);
        Tensor ones = Tensor::full({16, 16}, 1.0);
        CHECK(sl::tsc_loss(a, ones, b, ones).value() >= 0.0);
    }
}

TEST_CASE("tsc_loss: gradient w.r.t. gen passes the finite-difference check") {
    Rng rng(7);
    Tensor ref = rand_img(8, 8, rng);
    Tensor m = Tensor::full({8, 8}, 1.0);
    for (auto& v : m.raw()) v = rng.uniform() > 0.3 ? 1.0 : 0.0;
    double err = grad_check([&](const Tensor& g) { return sl::tsc_loss(g, m, ref, m); }, rand_img(8, 8, rng));
    CHECK(err < 1e-4);
}

TEST_CASE("total_loss combines exactly with lambda 10 by default") {
    auto r1 = sl::total_loss(Tensor::scalar(1.0), Tensor::scalar(0.0));
    CHECK(r1.total.value() == 1.0);
    auto r2 = sl::total_loss(Tensor::scalar(0.0), Tensor::scalar(1.0));
    CHECK(r2.total.value() == 10.0);
    CHECK(r2.lambda_tsc == 10.0);
    auto r3 = sl::total_loss(Tensor::scalar(0.5), Tensor::scalar(0.2));
    CHECK(r3.total.value() == doctest::Approx(2.5).epsilon(1e-12));

    CHECK_THROWS_AS(sl::total_loss(Tensor::scalar(-0.1), Tensor::scalar(0.0)), DomainError);
}
