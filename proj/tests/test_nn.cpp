#include <doctest.h>

#include <cmath>
#include <sstream>

#include "uhm/nn.hpp"

using namespace uhm;

TEST_CASE("zero-weight network outputs its output bias") {
    Rng rng(61);
    Mlp net = Mlp::create({3, 8, 2}, rng);
    for (auto& w : net.w) w.setZero();
    net.b[0].setZero();
    net.b[1] << 0.5, -1.5;
    const Eigen::VectorXd y = net.apply(Eigen::VectorXd(Eigen::Vector3d{1.0, -2.0, 3.0}));
    CHECK(y[0] == doctest::Approx(0.5));
    CHECK(y[1] == doctest::Approx(-1.5));
}

TEST_CASE("single linear layer computes W x + b exactly") {
    Rng rng(62);
    Mlp net = Mlp::create({2, 2}, rng);
    net.w[0] << 1.0, 2.0, -3.0, 4.0;
    net.b[0] << 0.5, -0.5;
    const Eigen::VectorXd y = net.apply(Eigen::VectorXd(Eigen::Vector2d{1.0, 1.0}));
    CHECK(y[0] == doctest::Approx(3.5));
    CHECK(y[1] == doctest::Approx(0.5));
}

TEST_CASE("flatten/unflatten round-trips and matches param_count") {
    Rng rng(63);
    Mlp net = Mlp::create({4, 7, 3}, rng);
    const Eigen::VectorXd flat = net.flatten();
    CHECK(flat.size() == net.param_count());
    Mlp other = Mlp::create({4, 7, 3}, rng);
    other.unflatten(flat);
    CHECK((other.flatten() - flat).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd x = Eigen::Vector4d{0.1, -0.2, 0.3, -0.4};
    CHECK((other.apply(x) - net.apply(x)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batched apply agrees with per-column apply") {
    Rng rng(64);
    const Mlp net = Mlp::create({3, 16, 2}, rng);
    Eigen::MatrixXd x(3, 5);
    for (int i = 0; i < x.size(); ++i) x(i) = rng.split("x").uniform(-1.0, 1.0);
    for (int c = 0; c < 5; ++c) x.col(c) = Eigen::Vector3d{0.1 * c, -0.2 * c, 0.3};
    const Eigen::MatrixXd y = net.apply(x);
    for (int c = 0; c < 5; ++c)
        CHECK((y.col(c) - net.apply(Eigen::VectorXd(x.col(c)))).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("squared-error gradient passes a finite-difference check") {
    Rng rng(65);
    Mlp net = Mlp::create({3, 12, 2}, rng);
    Eigen::MatrixXd x(3, 8);
    Eigen::MatrixXd t(2, 8);
    Rng data = rng.split("data");
    for (int i = 0; i < x.size(); ++i) x(i) = data.uniform(-1.0, 1.0);
    for (int i = 0; i < t.size(); ++i) t(i) = data.uniform(-1.0, 1.0);
    MlpGrads grads = MlpGrads::zeros_like(net);
    squared_error_gradient(net, x, t, grads);
    const auto loss = [&](const Eigen::VectorXd& p) {
        Mlp probe = net;
        probe.unflatten(p);
        return (probe.apply(x) - t).colwise().squaredNorm().mean();
    };
    Rng fd = rng.split("fd");
    CHECK(finite_difference_check(loss, net.flatten(), grads.flatten(), 80, fd) <= 1e-5);
}

TEST_CASE("mlp_backward input gradient matches finite differences") {
    Rng rng(66);
    const Mlp net = Mlp::create({3, 10, 1}, rng);
    Eigen::MatrixXd x(3, 1);
    x << 0.3, -0.7, 0.2;
    MlpCache cache;
    const Eigen::MatrixXd y = mlp_forward(net, x, cache);
    MlpGrads grads = MlpGrads::zeros_like(net);
    const Eigen::MatrixXd dx = mlp_backward(net, cache, Eigen::MatrixXd::Ones(1, 1), grads);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
        Eigen::MatrixXd xp = x;
        Eigen::MatrixXd xm = x;
        xp(i, 0) += h;
        xm(i, 0) -= h;
        const double num = (net.apply(xp)(0, 0) - net.apply(xm)(0, 0)) / (2.0 * h);
        CHECK(dx(i, 0) == doctest::Approx(num).epsilon(1e-5));
    }
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    AdamState state = AdamState::create(4, 0.01);
    const Eigen::VectorXd p = Eigen::Vector4d{1.0, -2.0, 3.0, 0.0};
    const Eigen::VectorXd p2 = adam_update(state, p, Eigen::Vector4d::Zero());
    CHECK((p2 - p).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("first adam step moves by roughly -lr * sign(grad)") {
    AdamState state = AdamState::create(3, 0.01);
    const Eigen::VectorXd p = Eigen::Vector3d::Zero();
    const Eigen::VectorXd g = Eigen::Vector3d{2.0, -0.5, 1e-3};
    const Eigen::VectorXd p2 = adam_update(state, p, g);
    CHECK(p2[0] == doctest::Approx(-0.01).epsilon(1e-3));
    CHECK(p2[1] == doctest::Approx(0.01).epsilon(1e-3));
    CHECK(p2[2] == doctest::Approx(-0.01).epsilon(1e-2));
}

TEST_CASE("adam step sizes stay bounded by lr up to bias correction") {
    Rng rng(67);
    AdamState state = AdamState::create(5, 0.02);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(5);
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXd g(5);
        for (int i = 0; i < 5; ++i) g[i] = rng.uniform(-3.0, 3.0);
        const Eigen::VectorXd p2 = adam_update(state, p, g);
        CHECK((p2 - p).cwiseAbs().maxCoeff() <= 0.02 * 3.5);
        p = p2;
    }
}

TEST_CASE("EMA shadow is a fixed point when live equals shadow") {
    Rng rng(68);
    EmaPair pair = EmaPair::create(Mlp::create({2, 4, 1}, rng), 0.1);
    const Eigen::VectorXd before = pair.shadow.flatten();
    pair.live.unflatten(before);
    pair.update();
    CHECK((pair.shadow.flatten() - before).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("EMA shadow decays geometrically toward a frozen live net") {
    Rng rng(69);
    EmaPair pair = EmaPair::create(Mlp::create({2, 4, 1}, rng), 0.25);
    const Eigen::VectorXd live = pair.live.flatten();
    Eigen::VectorXd shadow = live;
    shadow.array() += 1.0;
    pair.shadow.unflatten(shadow);
    for (int t = 0; t < 10; ++t) {
        pair.update();
        const double expected = std::pow(0.75, t + 1);
        CHECK((pair.shadow.flatten() - live).cwiseAbs().maxCoeff() ==
              doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("EMA with decay 1 copies the live network") {
    Rng rng(70);
    EmaPair pair = EmaPair::create(Mlp::create({2, 4, 1}, rng), 1.0);
    Eigen::VectorXd live = pair.live.flatten();
    live.array() += 2.5;
    pair.live.unflatten(live);
    pair.update();
    CHECK((pair.shadow.flatten() - live).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("checkpoint round-trips multiple networks bit-exactly") {
    Rng rng(71);
    const Mlp a = Mlp::create({3, 8, 2}, rng);
    const Mlp b = Mlp::create({5, 4, 4, 1}, rng);
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    save_checkpoint(buf, {&a, &b});
    const std::vector<Mlp> loaded = load_checkpoint(buf);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].widths == a.widths);
    CHECK(loaded[1].widths == b.widths);
    CHECK((loaded[0].flatten() - a.flatten()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded[1].flatten() - b.flatten()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint loading rejects corrupted headers") {
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    buf << "not a checkpoint";
    CHECK_THROWS(load_checkpoint(buf));
}

TEST_CASE("network creation is deterministic given the stream") {
    Rng a(72);
    Rng b(72);
    const Mlp n1 = Mlp::create({4, 8, 2}, a);
    const Mlp n2 = Mlp::create({4, 8, 2}, b);
    CHECK((n1.flatten() - n2.flatten()).cwiseAbs().maxCoeff() == 0.0);
}
