#include <doctest.h>

#include <cmath>

#include "uhm/value.hpp"
#include "uhm/verify.hpp"

using namespace uhm;

namespace {

QTable random_q(int ns, int na, Rng& rng, double scale = 3.0) {
    QTable q = QTable::zeros(ns, na);
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a) q.values(s, a) = rng.uniform(-scale, scale);
    return q;
}

}  // namespace

TEST_CASE("one-step atom collapses the backup to the Bellman operator") {
    Rng rng(41);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const QTable q = random_q(5, 2, rng);
    const QTable backed = apply_nu_bellman(mdp, pi, q, geometric_measure(0.0, mdp.gamma));
    const Eigen::MatrixXd d = state_action_kernel(mdp, pi);
    const Eigen::VectorXd expected = mdp.reward_vector() + mdp.gamma * d * q.flat();
    CHECK((backed.flat() - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("n-step measures reproduce the enumerated n-step expectation") {
    Rng rng(42);
    const TabularMdp mdp = random_mdp(4, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(4, 2, rng);
    const QTable q = random_q(4, 2, rng);
    for (int n = 1; n <= 4; ++n) {
        const QTable backed = apply_nu_bellman(mdp, pi, q, nstep_measure(n, mdp.gamma));
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 2; ++a)
                CHECK(backed.values(s, a) ==
                      doctest::Approx(enumerate_nstep_target(mdp, pi, q, s, a, n))
                          .epsilon(1e-10));
    }
}

TEST_CASE("geometric measure reproduces the TD(lambda) resolvent") {
    Rng rng(43);
    const TabularMdp mdp = random_mdp(6, 2, 0.95, rng);
    const TabularPolicy pi = random_policy(6, 2, rng);
    const QTable q = random_q(6, 2, rng);
    for (const double lambda : {0.1, 0.5, 0.9}) {
        const QTable a = apply_nu_bellman(mdp, pi, q, geometric_measure(lambda, mdp.gamma));
        const QTable b = td_lambda_operator(mdp, pi, q, lambda);
        CHECK((a.values - b.values).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("td_lambda_operator at lambda=0 is the one-step backup") {
    Rng rng(44);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const QTable q = random_q(5, 2, rng);
    const QTable tdl = td_lambda_operator(mdp, pi, q, 0.0);
    const Eigen::MatrixXd d = state_action_kernel(mdp, pi);
    const Eigen::VectorXd expected = mdp.reward_vector() + mdp.gamma * d * q.flat();
    CHECK((tdl.flat() - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("td_lambda_operator near lambda=1 approaches the Monte Carlo value") {
    Rng rng(45);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const QTable q = random_q(5, 2, rng);
    const QTable tdl = td_lambda_operator(mdp, pi, q, 1.0 - 1e-6);
    const QTable q_star = exact_q(mdp, pi);
    CHECK((tdl.values - q_star.values).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("gamma-MVE operator equals the TD(lambda) operator") {
    Rng rng(46);
    for (int trial = 0; trial < 5; ++trial) {
        const TabularMdp mdp = random_mdp(6, 2, trial % 2 ? 0.99 : 0.9, rng);
        const TabularPolicy pi = random_policy(6, 2, rng);
        const QTable q = random_q(6, 2, rng);
        for (const double lambda : {0.1, 0.5, 0.8, 0.99}) {
            const QTable mve = gamma_mve_operator(mdp, pi, q, lambda);
            const QTable tdl = td_lambda_operator(mdp, pi, q, lambda);
            CHECK((mve.values - tdl.values).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("exact_q is a fixed point of the backup for any sub-probability measure") {
    Rng rng(47);
    const TabularMdp mdp = random_mdp(6, 2, 0.95, rng);
    const TabularPolicy pi = random_policy(6, 2, rng);
    const QTable q_star = exact_q(mdp, pi);
    for (int trial = 0; trial < 10; ++trial) {
        const HorizonMeasure nu = random_subprob_measure(10, mdp.gamma, rng);
        const QTable backed = apply_nu_bellman(mdp, pi, q_star, nu);
        CHECK((backed.values - q_star.values).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("fixed-point iteration converges to exact_q with the contraction rate") {
    Rng rng(48);
    const TabularMdp mdp = random_mdp(6, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(6, 2, rng);
    const HorizonMeasure nu = random_subprob_measure(8, mdp.gamma, rng);
    const QTable q_star = exact_q(mdp, pi);
    const QTable q0 = QTable::zeros(6, 2);
    const double initial_gap = q_star.values.cwiseAbs().maxCoeff();
    QTable q = q0;
    for (int n = 1; n <= 20; ++n) {
        q = apply_nu_bellman(mdp, pi, q, nu);
        const double gap = (q.values - q_star.values).cwiseAbs().maxCoeff();
        CHECK(gap <= std::pow(mdp.gamma, n) * initial_gap + 1e-9);
    }
    const FixedPointResult fp = nu_fixed_point(mdp, pi, nu, q0, 1e-12, 10000);
    CHECK(fp.converged);
    CHECK((fp.q.values - q_star.values).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("starting at the fixed point converges immediately") {
    Rng rng(49);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const HorizonMeasure nu = random_subprob_measure(6, mdp.gamma, rng);
    const FixedPointResult fp = nu_fixed_point(mdp, pi, nu, exact_q(mdp, pi), 1e-10, 50);
    CHECK(fp.converged);
    CHECK(fp.iterations <= 1);
}

TEST_CASE("enumerated one-sample target is unbiased for the exact backup") {
    Rng rng(50);
    const TabularMdp mdp = random_mdp(4, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(4, 2, rng);
    const QTable q = random_q(4, 2, rng);
    const double lambda = 0.7;
    const int k_max = winsorized_kmax(lambda, mdp.gamma, 0.2);
    const HorizonMeasure nu = winsorized_geometric_measure(lambda, mdp.gamma, k_max);
    const std::vector<double> xi = xi_coefficients(nu, mdp.gamma, k_max);
    const HorizonDistribution p_h =
        winsorized_geometric_distribution(lambda, mdp.gamma, k_max);
    const NStepMeasureTable table = nstep_measures_direct(mdp, pi, k_max);
    const QTable backed = apply_nu_bellman(mdp, pi, q, nu);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 2; ++a) {
            const double mean = enumerate_target_gnu(s, a, mdp.reward(s, a), table, pi, q,
                                                     mdp.reward, nu, xi, p_h, mdp.gamma);
            CHECK(mean == doctest::Approx(backed.values(s, a)).epsilon(1e-12));
        }
}

TEST_CASE("k_max=1 target is the one-step SARSA target") {
    Rng rng(51);
    const TabularMdp mdp = random_mdp(4, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(4, 2, rng);
    const QTable q = random_q(4, 2, rng);
    const HorizonMeasure nu = winsorized_geometric_measure(0.0, mdp.gamma, 1);
    const std::vector<double> xi = xi_coefficients(nu, mdp.gamma, 1);
    const HorizonDistribution p_h = winsorized_geometric_distribution(0.0, mdp.gamma, 1);
    const NStepMeasureTable table = nstep_measures_direct(mdp, pi, 1);
    Rng sampler(52);
    for (int i = 0; i < 200; ++i) {
        Rng probe = sampler.split(i);
        Rng replay = sampler.split(i);
        const double g = sample_target_gnu(0, 1, mdp.reward(0, 1), table, pi, q, mdp.reward,
                                           nu, xi, p_h, mdp.gamma, probe);
        // Replay the same draws to identify (n, s_e, a_e).
        const int n = sample_horizon(p_h, replay);
        CHECK(n == 1);
        const int s_e = sample_future(table, 0, 1, 1, replay);
        const int a_e = pi.sample(s_e, replay);
        CHECK(g == doctest::Approx(mdp.reward(0, 1) + mdp.gamma * q.values(s_e, a_e))
                       .epsilon(1e-12));
    }
}

TEST_CASE("synchronous unit-step sweeps reproduce fixed-point iterates") {
    Rng rng(53);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    Dataset data;
    data.transitions.push_back({0, 0, mdp.reward(0, 0), 1, 0, false});
    data.episode_starts = {0, 1};

    LearningConfig lc;
    lc.method = Method::UhmNu;
    lc.model_source = ModelSource::Exact;
    lc.synchronous = true;
    lc.schedule_trace = false;
    lc.lambda_f = 0.8;
    lc.q_quantile = 0.2;
    lc.step_size = 1.0;
    lc.updates = 30;
    lc.eval_every = 1;
    const auto curve = run_tabular_learning(mdp, data, pi, lc);

    const int k_max = winsorized_kmax(lc.lambda_f, mdp.gamma, lc.q_quantile);
    const HorizonMeasure nu = winsorized_geometric_measure(lc.lambda_f, mdp.gamma, k_max);
    const QTable q_star = exact_q(mdp, pi);
    QTable q = QTable::zeros(5, 2);
    REQUIRE(curve.size() == static_cast<std::size_t>(lc.updates) + 1);
    for (int t = 0; t <= lc.updates; ++t) {
        const double expected = (q.values - q_star.values).cwiseAbs().maxCoeff();
        CHECK(curve[t].sup_error == doctest::Approx(expected).epsilon(1e-12));
        q = apply_nu_bellman(mdp, pi, q, nu);
    }
}

TEST_CASE("synchronous exact-model updates have monotone error decay") {
    Rng rng(54);
    const TabularMdp mdp = random_mdp(6, 2, 0.95, rng);
    const TabularPolicy pi = random_policy(6, 2, rng);
    Dataset data;
    data.transitions.push_back({0, 0, mdp.reward(0, 0), 1, 0, false});
    data.episode_starts = {0, 1};
    LearningConfig lc;
    lc.method = Method::UhmNu;
    lc.model_source = ModelSource::Exact;
    lc.synchronous = true;
    lc.step_size = 0.5;
    lc.updates = 50;
    lc.eval_every = 1;
    const auto curve = run_tabular_learning(mdp, data, pi, lc);
    for (std::size_t i = 1; i < curve.size(); ++i)
        CHECK(curve[i].sup_error <= curve[i - 1].sup_error + 1e-12);
}

TEST_CASE("empirical model recovers exact frequencies and flags unseen pairs") {
    Rng rng(55);
    const TabularMdp mdp = random_mdp(3, 2, 0.9, rng);
    Dataset data;
    // Visit (0,0) twice -> s1, once -> s2; never visit (2,1).
    data.transitions.push_back({0, 0, mdp.reward(0, 0), 1, -1, false});
    data.transitions.push_back({0, 0, mdp.reward(0, 0), 1, -1, false});
    data.transitions.push_back({0, 0, mdp.reward(0, 0), 2, -1, false});
    data.episode_starts = {0, 1, 2, 3};
    const EmpiricalModel model = empirical_model(mdp, data);
    CHECK(model.mdp.transition(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(model.mdp.transition(0, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(model.unseen[model.mdp.sa_index(0, 0)] == 0);
    CHECK(model.unseen[model.mdp.sa_index(2, 1)] == 1);
    // Unseen rows are zero-reward self-loops.
    CHECK(model.mdp.transition(model.mdp.sa_index(2, 1), 2) == doctest::Approx(1.0));
    CHECK(model.mdp.reward(2, 1) == doctest::Approx(0.0));
}

TEST_CASE("on-policy DTD(lambda) converges near the true value function") {
    BenchmarkSpec spec;
    spec.kind = BenchmarkKind::Gridworld;
    spec.size = 5;
    spec.noise = 0.2;
    spec.gamma = 0.95;
    const TabularMdp mdp = make_benchmark_mdp(spec);
    const TabularPolicy pi = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
    const Dataset data = generate_dataset(mdp, pi, 2000, 100, 3);
    LearningConfig lc;
    lc.method = Method::DtdLambda;
    lc.lambda_f = 0.8;
    lc.step_size = 0.1;
    lc.decay_tau = 5000.0;
    lc.updates = 200000;
    lc.eval_every = 200000;
    lc.seed = 3;
    const auto curve = run_tabular_learning(mdp, data, pi, lc);
    CHECK(curve.back().sup_error <= 5e-2);
}

TEST_CASE("off-policy lambda-return fixed point matches exact_q when on-policy") {
    Rng rng(56);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const QTable fp = dtd_lambda_fixed_point(mdp, pi, pi, 0.8);
    const QTable q_star = exact_q(mdp, pi);
    CHECK((fp.values - q_star.values).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("off-policy lambda-return fixed point is biased off-policy") {
    Rng rng(57);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy behavior = random_policy(5, 2, rng);
    const TabularPolicy eval_policy = random_policy(5, 2, rng);
    const QTable fp = dtd_lambda_fixed_point(mdp, behavior, eval_policy, 0.8);
    const QTable q_star = exact_q(mdp, eval_policy);
    CHECK((fp.values - q_star.values).cwiseAbs().maxCoeff() > 1e-4);
}

TEST_CASE("method names round-trip") {
    for (const Method m : {Method::OneStep, Method::NStep, Method::DtdLambda,
                           Method::MbtdLambda, Method::GhmMve, Method::UhmNu})
        CHECK(parse_method(method_name(m)) == m);
    CHECK_THROWS_AS(parse_method("bogus"), std::invalid_argument);
}

TEST_CASE("learning runs are deterministic given the seed") {
    Rng rng(58);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const TabularPolicy pi = random_policy(5, 2, rng);
    const Dataset data = generate_dataset(mdp, pi, 100, 30, 5);
    LearningConfig lc;
    lc.method = Method::UhmNu;
    lc.updates = 2000;
    lc.eval_every = 500;
    lc.seed = 11;
    const auto a = run_tabular_learning(mdp, data, pi, lc);
    const auto b = run_tabular_learning(mdp, data, pi, lc);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].sup_error == b[i].sup_error);
}
