#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lesiongen/core/array_store.hpp"
#include "lesiongen/core/error.hpp"
#include "lesiongen/core/image.hpp"
#include "lesiongen/core/image_io.hpp"
#include "lesiongen/core/optim.hpp"
#include "lesiongen/core/rng.hpp"
#include "lesiongen/core/tensor.hpp"
#include "oracles.hpp"

using namespace lesiongen;

namespace {

std::vector<float> random_vec(size_t n, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::vector<float> v(n);
    rng.fill_normal(v, scale);
    return v;
}

// Checks d loss / d x against central differences for a scalar-valued graph.
void check_grad(const std::function<nn::Tensor(const nn::Tensor&)>& build,
                const std::vector<int>& shape, uint64_t seed, double tol = 2e-2) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    const auto x0 = random_vec(n, seed);

    auto x = nn::leaf(shape, x0);
    auto loss = build(x);
    REQUIRE(loss.numel() == 1);
    nn::backward(loss);

    auto f = [&](const std::vector<double>& xs) {
        std::vector<float> xf(xs.begin(), xs.end());
        auto xt = nn::from_vec(shape, xf);
        nn::NoGradGuard ng;
        return static_cast<double>(build(xt).item());
    };
    const auto fd = oracles::finite_difference(f, std::vector<double>(x0.begin(), x0.end()), 1e-3);

    double max_rel = 0;
    for (size_t i = 0; i < n; ++i) {
        const double denom = std::max(1e-4, std::abs(fd[i]));
        max_rel = std::max(max_rel, std::abs(x.grad()[i] - fd[i]) / denom);
    }
    CHECK(max_rel < tol);
}

}  // namespace

TEST_CASE("rng: deterministic and seed-sensitive") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng(42).normal() != Rng(43).normal());
    (void)c;

    Rng d(7);
    double mean = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) mean += d.normal();
    mean /= n;
    CHECK(std::abs(mean) < 0.05);
}

TEST_CASE("rng: uniform_int bounds") {
    Rng r(9);
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.uniform_int(3, 7);
        CHECK(v >= 3);
        CHECK(v <= 7);
    }
}

TEST_CASE("tensor: elementwise forward values") {
    auto a = nn::from_vec({3}, {1.f, -2.f, 3.f});
    auto b = nn::from_vec({3}, {0.5f, 0.5f, 0.5f});
    CHECK(nn::add(a, b).data()[1] == doctest::Approx(-1.5));
    CHECK(nn::axpby(2.f, a, -1.f, b).data()[0] == doctest::Approx(1.5));
    CHECK(nn::scale(a, 3.f).data()[2] == doctest::Approx(9.0));
    CHECK(nn::mul(a, b).data()[1] == doctest::Approx(-1.0));
}

TEST_CASE("tensor: gradient checks for every op") {
    SUBCASE("axpby+mul+silu") {
        check_grad(
            [](const nn::Tensor& x) {
                auto y = nn::silu(nn::axpby(1.7f, x, -0.3f, nn::mul(x, x)));
                return nn::mean_all(y);
            },
            {2, 3, 3}, 11);
    }
    SUBCASE("relu") {
        check_grad([](const nn::Tensor& x) { return nn::mean_all(nn::relu(x)); }, {7}, 12);
    }
    SUBCASE("conv2d wrt input") {
        const auto wv = random_vec(4 * 3 * 3 * 3, 21, 0.5);
        const auto bv = random_vec(4, 22, 0.1);
        check_grad(
            [&](const nn::Tensor& x) {
                auto w = nn::from_vec({4, 3, 3, 3}, wv);
                auto b = nn::from_vec({4}, bv);
                return nn::mean_all(nn::conv2d(x, w, b, 1, 1));
            },
            {3, 5, 5}, 23);
    }
    SUBCASE("conv2d wrt weights and bias, strided") {
        const auto xv = random_vec(3 * 6 * 6, 31);
        auto w = nn::leaf({2, 3, 2, 2}, random_vec(2 * 3 * 2 * 2, 32, 0.5));
        auto b = nn::leaf({2}, random_vec(2, 33, 0.1));
        auto x = nn::from_vec({3, 6, 6}, xv);
        auto y = nn::conv2d(x, w, b, 2, 0);
        auto loss = nn::mse_loss(y, nn::constant(y.shape(), 0.3f));
        nn::backward(loss);

        auto f_w = [&](const std::vector<double>& ws) {
            nn::NoGradGuard ng;
            std::vector<float> wf(ws.begin(), ws.end());
            auto wt = nn::from_vec({2, 3, 2, 2}, wf);
            auto yy = nn::conv2d(x, wt, b, 2, 0);
            return static_cast<double>(nn::mse_loss(yy, nn::constant(yy.shape(), 0.3f)).item());
        };
        const auto fd = oracles::finite_difference(
            f_w, std::vector<double>(w.data().begin(), w.data().end()), 1e-3);
        for (size_t i = 0; i < fd.size(); ++i)
            CHECK(w.grad()[i] == doctest::Approx(fd[i]).epsilon(2e-2));
    }
    SUBCASE("group_norm") {
        check_grad(
            [](const nn::Tensor& x) {
                auto g = nn::from_vec({4}, {1.1f, 0.9f, 1.f, 1.2f}, true);
                auto b = nn::from_vec({4}, {0.f, 0.1f, -0.1f, 0.f}, true);
                return nn::mean_all(nn::mul(nn::group_norm(x, g, b, 2), x));
            },
            {4, 3, 3}, 41, 5e-2);
    }
    SUBCASE("upsample+avgpool+global") {
        check_grad(
            [](const nn::Tensor& x) {
                auto u = nn::upsample_nearest(x, 2);
                auto p = nn::avg_pool(u, 2);
                return nn::mean_all(nn::mul(nn::global_avg_pool(p), nn::global_avg_pool(p)));
            },
            {2, 4, 4}, 51);
    }
    SUBCASE("matmul/transpose/softmax/bias") {
        const auto wv = random_vec(4 * 3, 61, 0.7);
        check_grad(
            [&](const nn::Tensor& x) {
                auto w = nn::from_vec({4, 3}, wv);
                auto y = nn::softmax_rows(nn::add_row_bias(nn::matmul(x, w),
                                                           nn::from_vec({3}, {0.1f, -0.2f, 0.3f})));
                return nn::mean_all(nn::mul(y, nn::matmul(x, w)));
            },
            {5, 4}, 62);
        check_grad([](const nn::Tensor& x) { return nn::mean_all(nn::mul(nn::transpose(x), nn::transpose(x))); },
                   {3, 4}, 63);
    }
    SUBCASE("channel ops") {
        check_grad(
            [](const nn::Tensor& x) {
                auto head = nn::slice_channels(x, 0, 2);
                auto tail = nn::slice_channels(x, 2, 3);
                auto cat = nn::concat_channels(tail, head);
                auto biased = nn::add_channel_bias(cat, nn::from_vec({3}, {0.2f, -0.1f, 0.05f}));
                return nn::mean_all(nn::mul(biased, biased));
            },
            {3, 4, 4}, 71);
    }
    SUBCASE("token reshapes") {
        check_grad(
            [](const nn::Tensor& x) {
                auto t = nn::chw_to_tokens(x);
                auto back = nn::tokens_to_chw(t, 3, 2);
                return nn::mean_all(nn::mul(back, back));
            },
            {4, 3, 2}, 81);
    }
    SUBCASE("losses") {
        auto target = nn::from_vec({2, 3, 3}, random_vec(18, 91));
        check_grad([&](const nn::Tensor& x) { return nn::mse_loss(x, target); }, {2, 3, 3}, 92);
        std::vector<float> bin(16);
        Rng rb(93);
        for (auto& v : bin) v = rb.uniform() < 0.4 ? 1.f : 0.f;
        auto bint = nn::from_vec({1, 4, 4}, bin);
        check_grad([&](const nn::Tensor& x) { return nn::bce_with_logits_loss(x, bint); }, {1, 4, 4}, 94);
        check_grad([&](const nn::Tensor& x) { return nn::soft_dice_loss(x, bint, 1.f); }, {1, 4, 4}, 95);
        check_grad([](const nn::Tensor& x) { return nn::softmax_cross_entropy(x, 2); }, {5}, 96);
    }
    SUBCASE("conv weight assembly") {
        check_grad(
            [](const nn::Tensor& x) {
                auto extra = nn::from_vec({2, 1, 2, 2}, random_vec(8, 97, 0.3), true);
                auto base = nn::from_vec({2, 2, 2, 2}, random_vec(16, 98, 0.3), true);
                auto w = nn::concat_conv_in(base, extra, 2, 2, 1, 2, 2);
                auto b = nn::from_vec({2}, {0.f, 0.f});
                return nn::mean_all(nn::conv2d(x, w, b, 2, 0));
            },
            {3, 4, 4}, 99);
    }
}

TEST_CASE("tensor: frozen parameters receive no gradient") {
    auto frozen = nn::from_vec({2, 2}, {1.f, 2.f, 3.f, 4.f}, false);
    auto live = nn::leaf({2, 2}, {0.5f, 0.5f, 0.5f, 0.5f});
    auto loss = nn::mean_all(nn::matmul(frozen, live));
    nn::backward(loss);
    CHECK(frozen.grad().empty());
    CHECK(live.grad().size() == 4);
}

TEST_CASE("tensor: NoGradGuard builds value-only graphs") {
    nn::NoGradGuard ng;
    auto x = nn::leaf({2}, {1.f, 2.f});
    auto y = nn::scale(x, 2.f);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
}

TEST_CASE("optim: AdamW moves parameters against the gradient") {
    auto p = nn::leaf({2}, {1.f, -1.f});
    std::vector<nn::Param> params{{"p", p, nn::ParamKind::base}};
    nn::AdamW opt({0.1, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 50; ++i) {
        nn::zero_grads(params);
        auto loss = nn::mse_loss(p, nn::constant({2}, 0.f));
        nn::backward(loss);
        opt.step(params);
    }
    CHECK(std::abs(p.data()[0]) < 0.2);
    CHECK(std::abs(p.data()[1]) < 0.2);
}

TEST_CASE("optim: gradient clipping scales the global norm") {
    auto p = nn::leaf({2}, {0.f, 0.f});
    p.node()->grad = {30.f, 40.f};
    std::vector<nn::Param> params{{"p", p, nn::ParamKind::base}};
    const double before = nn::AdamW::clip_grad_norm(params, 1.0);
    CHECK(before == doctest::Approx(50.0));
    CHECK(std::hypot(p.grad()[0], p.grad()[1]) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("image: lanczos resize basics") {
    ImageF img(1, 4, 4, 0.5f);
    const auto same = resize_lanczos(img, 4, 4);
    for (size_t i = 0; i < img.px.size(); ++i) CHECK(same.px[i] == img.px[i]);

    const auto up = resize_lanczos(img, 8, 8);
    for (float v : up.px) CHECK(v == doctest::Approx(0.5).epsilon(1e-4));
    CHECK_THROWS_AS(resize_lanczos(img, 0, 4), ArgumentError);
}

TEST_CASE("image: nearest mask resize stays binary") {
    Mask m(2, 2);
    m.at(0, 0) = 1;
    const auto up = resize_nearest(m, 4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(up.at(y, x) == ((y < 2 && x < 2) ? 1 : 0));
}

TEST_CASE("image io: png round trips exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "lg_png_test";
    std::filesystem::create_directories(dir);

    ImageF img(3, 9, 7);
    Rng rng(5);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    write_rgb_png(dir / "x.png", img);
    const auto back = read_image(dir / "x.png");
    REQUIRE(back.height == 9);
    REQUIRE(back.width == 7);
    for (size_t i = 0; i < img.px.size(); ++i)
        CHECK(std::abs(back.px[i] - img.px[i]) <= 0.5f / 255.f + 1e-6f);

    Mask m(5, 5);
    for (size_t i = 0; i < m.px.size(); ++i) m.px[i] = (i * 7) % 3 == 0;
    write_mask_png(dir / "m.png", m);
    const auto mb = read_mask_png(dir / "m.png");
    CHECK(mb.px == m.px);

    CHECK_THROWS_AS(read_image(dir / "missing.png"), IoError);
}

TEST_CASE("array store: round trip") {
    const auto file = std::filesystem::temp_directory_path() / "lg_store_test.bin";
    ArrayMap arrays;
    arrays["a"] = {{2, 3}, {1, 2, 3, 4, 5, 6}};
    arrays["b.c"] = {{1}, {42.5f}};
    save_arrays(file, arrays);
    const auto back = load_arrays(file);
    REQUIRE(back.size() == 2);
    CHECK(back.at("a").shape == std::vector<int>{2, 3});
    CHECK(back.at("a").data == arrays["a"].data);
    CHECK(back.at("b.c").data[0] == 42.5f);
}
