#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "rslaq/nn.hpp"
#include "rslaq/rng.hpp"

using namespace rslaq;

namespace {

NetworkState random_state(Rng& rng, int num_slices) {
    NetworkState st;
    st.num_slices = num_slices;
    st.m.resize(std::size_t(4) * (num_slices + 1));
    for (auto& v : st.m) v = rng.uniform();
    return st;
}

}  // namespace

TEST_CASE("convolution with a centred identity kernel") {
    Rng rng(1);
    Conv2d conv(1, 1, rng);
    std::fill(conv.w.begin(), conv.w.end(), 0.0);
    conv.w[4] = 1.0;  // centre of the single 3x3 kernel
    conv.b[0] = 0.0;
    Tensor x(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) x.v[i] = i + 1;
    Tensor y = conv.forward(x);
    REQUIRE(y.v == x.v);

    // Kernel looking one pixel left shifts the image right; zero padding
    // feeds the first column.
    std::fill(conv.w.begin(), conv.w.end(), 0.0);
    conv.w[3] = 1.0;
    Tensor s = conv.forward(x);
    CHECK(s.at(0, 0, 0, 0) == 0.0);
    CHECK(s.at(0, 0, 0, 1) == 1.0);
    CHECK(s.at(0, 0, 0, 2) == 2.0);
    CHECK(s.at(0, 0, 1, 0) == 0.0);
    CHECK(s.at(0, 0, 1, 1) == 4.0);
}

TEST_CASE("convolution bias adds per output channel") {
    Rng rng(1);
    Conv2d conv(1, 2, rng);
    std::fill(conv.w.begin(), conv.w.end(), 0.0);
    conv.b = {1.5, -2.0};
    Tensor x(1, 1, 2, 2);
    Tensor y = conv.forward(x);
    REQUIRE(y.c == 2);
    CHECK(y.at(0, 0, 1, 1) == 1.5);
    CHECK(y.at(0, 1, 0, 0) == -2.0);
}

TEST_CASE("batch norm hand example with running update") {
    BatchNorm2d bn(1);
    Tensor x(2, 1, 1, 2);
    x.v = {1.0, 2.0, 3.0, 4.0};
    Tensor y = bn.forward(x, true, true);
    double invstd = 1.0 / std::sqrt(1.25 + 1e-5);
    CHECK_THAT(y.v[0], Catch::Matchers::WithinAbs(-1.5 * invstd, 1e-12));
    CHECK_THAT(y.v[1], Catch::Matchers::WithinAbs(-0.5 * invstd, 1e-12));
    CHECK_THAT(y.v[3], Catch::Matchers::WithinAbs(1.5 * invstd, 1e-12));
    // momentum 0.1, unbiased variance 1.25 * 4/3
    CHECK_THAT(bn.running_mean[0], Catch::Matchers::WithinAbs(0.25, 1e-12));
    CHECK_THAT(bn.running_var[0], Catch::Matchers::WithinAbs(1.0666666666666667, 1e-12));

    // Inference normalizes with the running estimates.
    Tensor e = bn.forward(x, false, false);
    double rinv = 1.0 / std::sqrt(bn.running_var[0] + 1e-5);
    CHECK_THAT(e.v[0], Catch::Matchers::WithinAbs((1.0 - 0.25) * rinv, 1e-12));
}

TEST_CASE("tanh backward uses the cached activation") {
    TanhLayer t;
    Tensor x(1, 1, 1, 3);
    x.v = {0.0, 0.5, -1.0};
    Tensor y = t.forward(x);
    CHECK_THAT(y.v[1], Catch::Matchers::WithinAbs(std::tanh(0.5), 1e-15));
    Tensor dy(1, 1, 1, 3);
    dy.v = {1.0, 1.0, 1.0};
    Tensor dx = t.backward(dy);
    for (int i = 0; i < 3; ++i)
        CHECK_THAT(dx.v[i], Catch::Matchers::WithinAbs(1.0 - y.v[i] * y.v[i], 1e-15));
}

TEST_CASE("dense layer hand example") {
    Rng rng(1);
    Dense d(2, 2, rng);
    d.w = {1.0, 2.0, -1.0, 0.5};  // row major [out][in]
    d.b = {0.0, 1.0};
    Tensor x(1, 2, 1, 1);
    x.v = {3.0, 4.0};
    Tensor y = d.forward(x);
    CHECK_THAT(y.v[0], Catch::Matchers::WithinAbs(11.0, 1e-15));
    CHECK_THAT(y.v[1], Catch::Matchers::WithinAbs(0.0, 1e-15));
}

TEST_CASE("adam first step moves by the learning rate") {
    Adam opt;
    std::vector<double> theta = {1.0};
    std::vector<double> grad = {10.0};
    opt.resize(1);
    opt.step(theta.data(), grad.data(), 1, 0.001);
    CHECK_THAT(theta[0], Catch::Matchers::WithinAbs(1.0 - 0.001, 1e-9));
}

TEST_CASE("q network output shape and determinism") {
    QNetwork a(3, 198, 42), b(3, 198, 42), c(3, 198, 43);
    Rng rng(7);
    NetworkState st = random_state(rng, 3);
    std::vector<double> qa = a.predict(st);
    REQUIRE(qa.size() == 198);
    for (double q : qa) REQUIRE(std::isfinite(q));
    REQUIRE(qa == a.predict(st));
    REQUIRE(qa == b.predict(st));
    REQUIRE(qa != c.predict(st));
}

TEST_CASE("batch prediction matches single prediction") {
    QNetwork net(3, 24, 9);
    Rng rng(11);
    std::vector<NetworkState> states;
    for (int i = 0; i < 5; ++i) states.push_back(random_state(rng, 3));
    auto batch = net.predict_batch(states);
    REQUIRE(batch.size() == 5);
    for (int i = 0; i < 5; ++i) {
        auto single = net.predict(states[i]);
        for (int k = 0; k < 24; ++k)
            REQUIRE_THAT(batch[i][k], Catch::Matchers::WithinAbs(single[k], 1e-12));
    }
}

TEST_CASE("analytic gradients agree with finite differences") {
    QNetwork net(3, 12, 17);
    Rng rng(23);
    std::vector<NetworkState> states;
    std::vector<int> actions;
    std::vector<double> targets;
    for (int i = 0; i < 3; ++i) {
        states.push_back(random_state(rng, 3));
        actions.push_back(int(rng.uniform_int(12)));
        targets.push_back(rng.uniform() * 2.0 - 1.0);
    }
    net.zero_grads();
    net.forward_loss(states, actions, targets, true, false);
    net.backward();
    auto views = net.params();
    REQUIRE(views.size() == 18);  // 4 conv, 4 norm, 1 dense, weights and biases
    const double eps = 1e-5;
    for (auto& view : views) {
        int samples = std::min(12, view.size);
        int stride = std::max(1, view.size / samples);
        for (int k = 0; k < samples; ++k) {
            int idx = k * stride;
            double saved = view.data[idx];
            view.data[idx] = saved + eps;
            double up = net.forward_loss(states, actions, targets, true, false);
            view.data[idx] = saved - eps;
            double dn = net.forward_loss(states, actions, targets, true, false);
            view.data[idx] = saved;
            double numeric = (up - dn) / (2 * eps);
            double analytic = view.grad[idx];
            double denom = std::abs(numeric) + std::abs(analytic);
            // A conv bias feeding batch norm has a true gradient of zero;
            // both sides are then finite-difference noise.
            if (denom < 1e-8) continue;
            INFO(view.name << "[" << idx << "] analytic " << analytic << " numeric "
                           << numeric);
            REQUIRE(std::abs(numeric - analytic) / std::max(denom, 1e-6) < 1e-4);
        }
    }
}

TEST_CASE("training drives the loss down on a fixed batch") {
    QNetwork net(3, 12, 29);
    Rng rng(31);
    std::vector<NetworkState> states;
    std::vector<int> actions;
    std::vector<double> targets;
    for (int i = 0; i < 8; ++i) {
        states.push_back(random_state(rng, 3));
        actions.push_back(i % 12);
        targets.push_back(rng.uniform());
    }
    double first = net.fit(states, actions, targets, 1e-3);
    double loss = first;
    for (int it = 0; it < 300; ++it) loss = net.fit(states, actions, targets, 1e-3);
    REQUIRE(loss < first * 0.1);
    REQUIRE(loss < 1e-2);
}

TEST_CASE("target sync copies every parameter and statistic") {
    QNetwork online(3, 12, 3), target(3, 12, 4);
    Rng rng(5);
    std::vector<NetworkState> states;
    std::vector<int> actions;
    std::vector<double> targets;
    for (int i = 0; i < 4; ++i) {
        states.push_back(random_state(rng, 3));
        actions.push_back(i);
        targets.push_back(0.5);
    }
    for (int it = 0; it < 5; ++it) online.fit(states, actions, targets, 1e-3);
    NetworkState probe = random_state(rng, 3);
    REQUIRE(online.predict(probe) != target.predict(probe));
    target.copy_from(online);
    REQUIRE(online.predict(probe) == target.predict(probe));
}

TEST_CASE("checkpoints round trip bit for bit") {
    QNetwork net(3, 12, 77);
    Rng rng(78);
    std::vector<NetworkState> states;
    std::vector<int> actions;
    std::vector<double> targets;
    for (int i = 0; i < 4; ++i) {
        states.push_back(random_state(rng, 3));
        actions.push_back(i + 2);
        targets.push_back(rng.uniform());
    }
    for (int it = 0; it < 10; ++it) net.fit(states, actions, targets, 1e-3);
    std::ostringstream os;
    net.save(os);
    QNetwork other(3, 12, 1);
    std::istringstream is(os.str());
    other.load(is);
    NetworkState probe = random_state(rng, 3);
    REQUIRE(net.predict(probe) == other.predict(probe));

    QNetwork wrong_actions(3, 13, 1);
    std::istringstream is2(os.str());
    REQUIRE_THROWS_AS(wrong_actions.load(is2), std::runtime_error);
    QNetwork wrong_slices(2, 12, 1);
    std::istringstream is3(os.str());
    REQUIRE_THROWS_AS(wrong_slices.load(is3), std::runtime_error);
    std::istringstream truncated(os.str().substr(0, os.str().size() / 2));
    QNetwork victim(3, 12, 1);
    REQUIRE_THROWS_AS(victim.load(truncated), std::runtime_error);
}

TEST_CASE("running statistics move during training") {
    QNetwork net(3, 12, 55);
    Rng rng(56);
    std::vector<NetworkState> states;
    std::vector<int> actions;
    std::vector<double> targets;
    for (int i = 0; i < 6; ++i) {
        states.push_back(random_state(rng, 3));
        actions.push_back(i);
        targets.push_back(rng.uniform());
    }
    auto before = net.predict(states[0]);
    net.fit(states, actions, targets, 0.0);  // zero rate: only statistics move
    auto after = net.predict(states[0]);
    REQUIRE(before != after);
}
