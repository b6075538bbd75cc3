#include <doctest.h>

#include <cmath>

#include "uhm/measures.hpp"
#include "uhm/verify.hpp"

using namespace uhm;

namespace {

// Three-state deterministic chain s0 -> s1 -> s2 -> s2, one action.
TabularMdp three_chain() {
    TabularMdp mdp;
    mdp.num_states = 3;
    mdp.num_actions = 1;
    mdp.gamma = 0.9;
    mdp.transition.resize(3, 3);
    mdp.transition << 0, 1, 0, 0, 0, 1, 0, 0, 1;
    mdp.reward = Eigen::MatrixXd::Zero(3, 1);
    mdp.terminal = {0, 0, 0};
    mdp.initial_dist = Eigen::Vector3d{1, 0, 0};
    mdp.validate();
    return mdp;
}

}  // namespace

TEST_CASE("n-step measures on the deterministic chain hit the n-th state") {
    const TabularMdp mdp = three_chain();
    const TabularPolicy pi = TabularPolicy::uniform(3, 1);
    const NStepMeasureTable table = nstep_measures_direct(mdp, pi, 4);
    CHECK(table.row(0, 0, 1)[1] == doctest::Approx(1.0));
    CHECK(table.row(0, 0, 2)[2] == doctest::Approx(1.0));
    CHECK(table.row(0, 0, 3)[2] == doctest::Approx(1.0));
}

TEST_CASE("depth-1 tables equal the transition kernel") {
    Rng rng(31);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const NStepMeasureTable direct = nstep_measures_direct(mdp, pi, 1);
    const NStepMeasureTable boot = nstep_measures_bootstrap(mdp, pi, 1);
    CHECK((direct.table(1) - mdp.transition).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((boot.table(1) - mdp.transition).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("branching MDP with absorbing leaves keeps the split at every depth") {
    TabularMdp mdp;
    mdp.num_states = 3;
    mdp.num_actions = 1;
    mdp.gamma = 0.9;
    mdp.transition.resize(3, 3);
    mdp.transition << 0, 0.5, 0.5, 0, 1, 0, 0, 0, 1;
    mdp.reward = Eigen::MatrixXd::Zero(3, 1);
    mdp.terminal = {0, 0, 0};
    mdp.initial_dist = Eigen::Vector3d{1, 0, 0};
    mdp.validate();
    const NStepMeasureTable table =
        nstep_measures_direct(mdp, TabularPolicy::uniform(3, 1), 6);
    for (int n = 1; n <= 6; ++n) {
        CHECK(table.row(0, 0, n)[1] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(table.row(0, 0, n)[2] == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("bootstrap recursion equals the direct computation to 1e-12") {
    Rng rng(32);
    for (int trial = 0; trial < 5; ++trial) {
        const TabularMdp mdp = random_mdp(6, 2, 0.9, rng);
        const TabularPolicy pi = random_policy(6, 2, rng);
        const NStepMeasureTable direct = nstep_measures_direct(mdp, pi, 32);
        const NStepMeasureTable boot = nstep_measures_bootstrap(mdp, pi, 32);
        for (int n = 1; n <= 32; ++n) {
            const double tv =
                0.5 * (direct.table(n) - boot.table(n)).cwiseAbs().rowwise().sum().maxCoeff();
            CHECK(tv <= 1e-12);
        }
    }
}

TEST_CASE("measure rows are probability vectors at every depth") {
    Rng rng(33);
    const TabularMdp mdp = random_mdp(5, 3, 0.95, rng);
    const TabularPolicy pi = random_policy(5, 3, rng);
    const NStepMeasureTable table = nstep_measures_direct(mdp, pi, 16);
    for (int n = 1; n <= 16; ++n)
        for (int row = 0; row < table.table(n).rows(); ++row) {
            CHECK(table.table(n).row(row).minCoeff() >= 0.0);
            CHECK(table.table(n).row(row).sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("Chapman-Kolmogorov composition of n-step measures") {
    Rng rng(34);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const NStepMeasureTable table = nstep_measures_direct(mdp, pi, 8);
    // m[n+m](x|s,a) = sum_{s',a'} m[n](s'|s,a) pi(a'|s') m[m](x|s',a')
    for (const auto [n, m] : {std::pair{2, 3}, std::pair{4, 4}, std::pair{1, 6}}) {
        for (int s = 0; s < mdp.num_states; ++s)
            for (int a = 0; a < mdp.num_actions; ++a) {
                Eigen::VectorXd composed = Eigen::VectorXd::Zero(mdp.num_states);
                const Eigen::VectorXd mid = table.row(s, a, n);
                for (int sp = 0; sp < mdp.num_states; ++sp)
                    for (int ap = 0; ap < mdp.num_actions; ++ap)
                        composed += mid[sp] * pi.probs(sp, ap) * table.row(sp, ap, m);
                CHECK((composed - table.row(s, a, n + m)).cwiseAbs().maxCoeff() <= 1e-10);
            }
    }
}

TEST_CASE("successor measure of an absorbing state is a point mass") {
    const TabularMdp mdp = three_chain();
    const GhmMeasure m = successor_measure(mdp, TabularPolicy::uniform(3, 1), 0.7);
    CHECK(m.m(2, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("successor measure approaches P as gamma_tilde goes to zero") {
    Rng rng(35);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const GhmMeasure m = successor_measure(mdp, pi, 1e-9);
    CHECK((m.m - mdp.transition).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("successor measure equals the geometric series over n-step tables") {
    Rng rng(36);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const double gt = 0.6;
    const int depth = 70;  // gt^70 ~ 3e-16
    const NStepMeasureTable table = nstep_measures_direct(mdp, pi, depth);
    Eigen::MatrixXd series = Eigen::MatrixXd::Zero(mdp.num_sa(), mdp.num_states);
    for (int n = 1; n <= depth; ++n) series += (1.0 - gt) * std::pow(gt, n - 1) * table.table(n);
    const GhmMeasure m = successor_measure(mdp, pi, gt);
    CHECK((series - m.m).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("marginal under the one-step atom is the transition kernel") {
    Rng rng(37);
    const TabularMdp mdp = random_mdp(4, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(4, 2, rng);
    const NStepMeasureTable table = nstep_measures_direct(mdp, pi, 3);
    const Eigen::MatrixXd mix = marginal_measure(table, HorizonDistribution({1.0}));
    CHECK((mix - mdp.transition).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("two-atom marginal on the chain mixes the two reachable states") {
    const TabularMdp mdp = three_chain();
    const NStepMeasureTable table =
        nstep_measures_direct(mdp, TabularPolicy::uniform(3, 1), 2);
    const Eigen::MatrixXd mix = marginal_measure(table, HorizonDistribution({0.5, 0.5}));
    CHECK(mix(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mix(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("marginal rejects distributions deeper than the table") {
    const TabularMdp mdp = three_chain();
    const NStepMeasureTable table =
        nstep_measures_direct(mdp, TabularPolicy::uniform(3, 1), 2);
    CHECK_THROWS_AS(marginal_measure(table, HorizonDistribution({0.5, 0.25, 0.25})),
                    std::invalid_argument);
}

TEST_CASE("sample_future on the chain is deterministic and exact") {
    const TabularMdp mdp = three_chain();
    const NStepMeasureTable table =
        nstep_measures_direct(mdp, TabularPolicy::uniform(3, 1), 3);
    Rng rng(38);
    for (int i = 0; i < 50; ++i) CHECK(sample_future(table, 0, 0, 2, rng) == 2);
}

TEST_CASE("sample_future frequencies match the measure row") {
    Rng rng(39);
    const TabularMdp mdp = random_mdp(4, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(4, 2, rng);
    const NStepMeasureTable table = nstep_measures_direct(mdp, pi, 3);
    const int n = 100000;
    Eigen::Vector4d counts = Eigen::Vector4d::Zero();
    for (int i = 0; i < n; ++i) counts[sample_future(table, 1, 0, 3, rng)] += 1.0;
    const Eigen::VectorXd row = table.row(1, 0, 3);
    for (int x = 0; x < 4; ++x) {
        const double p = row[x];
        const double se = std::sqrt(p * (1.0 - p) / n);
        CHECK(std::abs(counts[x] / n - p) <= 4.0 * se + 1e-9);
    }
}
