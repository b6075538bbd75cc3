#include "uhm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uhm/agent.hpp"
#include "uhm/measures.hpp"
#include "uhm/nn.hpp"
#include "uhm/value.hpp"

namespace uhm {

TabularMdp random_mdp(int num_states, int num_actions, double gamma, Rng& rng) {
    TabularMdp mdp;
    mdp.num_states = num_states;
    mdp.num_actions = num_actions;
    mdp.gamma = gamma;
    mdp.transition.resize(num_states * num_actions, num_states);
    mdp.reward.resize(num_states, num_actions);
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) {
            double total = 0.0;
            for (int x = 0; x < num_states; ++x) {
                const double p = rng.uniform();
                mdp.transition(mdp.sa_index(s, a), x) = p;
                total += p;
            }
            mdp.transition.row(mdp.sa_index(s, a)) /= total;
            mdp.reward(s, a) = rng.uniform(-1.0, 1.0);
        }
    mdp.terminal.assign(num_states, 0);
    mdp.initial_dist = Eigen::VectorXd::Constant(num_states, 1.0 / num_states);
    mdp.validate();
    return mdp;
}

TabularPolicy random_policy(int num_states, int num_actions, Rng& rng) {
    TabularPolicy pi;
    pi.probs.resize(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        double total = 0.0;
        for (int a = 0; a < num_actions; ++a) {
            const double p = 0.05 + rng.uniform();
            pi.probs(s, a) = p;
            total += p;
        }
        pi.probs.row(s) /= total;
    }
    pi.validate();
    return pi;
}

HorizonMeasure random_subprob_measure(int max_support, double gamma, Rng& rng) {
    const int support = 1 + static_cast<int>(rng.index(max_support));
    std::vector<double> w(support);
    double total = 0.0;
    for (double& v : w) {
        v = rng.uniform();
        total += v;
    }
    const double mass = 0.05 + 0.95 * rng.uniform();  // total mass in (0, 1]
    for (double& v : w) v *= mass / total;
    return HorizonMeasure(std::move(w), gamma);
}

double enumerate_nstep_target(const TabularMdp& mdp, const TabularPolicy& policy,
                              const QTable& q, int s, int a, int n) {
    // Exhaustive path expectation of sum_{t<n} gamma^t r_t + gamma^n Q(s_n, a_n).
    double expectation = 0.0;
    std::function<void(int, int, int, double, double)> recurse =
        [&](int state, int action, int depth, double prob, double partial) {
            partial += std::pow(mdp.gamma, depth) * mdp.reward(state, action);
            if (depth + 1 == n) {
                for (int x = 0; x < mdp.num_states; ++x) {
                    const double px = mdp.transition(mdp.sa_index(state, action), x);
                    if (px == 0.0) continue;
                    for (int ax = 0; ax < mdp.num_actions; ++ax) {
                        const double pa = policy.probs(x, ax);
                        if (pa == 0.0) continue;
                        expectation += prob * px * pa *
                                       (partial + std::pow(mdp.gamma, n) * q.values(x, ax));
                    }
                }
                return;
            }
            for (int x = 0; x < mdp.num_states; ++x) {
                const double px = mdp.transition(mdp.sa_index(state, action), x);
                if (px == 0.0) continue;
                for (int ax = 0; ax < mdp.num_actions; ++ax) {
                    const double pa = policy.probs(x, ax);
                    if (pa == 0.0) continue;
                    recurse(x, ax, depth + 1, prob * px * pa, partial);
                }
            }
        };
    recurse(s, a, 0, 1.0, 0.0);
    return expectation;
}

namespace {

CheckResult make_result(const std::string& name, double observed, double bound,
                        std::string detail = "") {
    CheckResult r;
    r.name = name;
    r.observed = observed;
    r.bound = bound;
    r.passed = observed <= bound;
    r.detail = std::move(detail);
    return r;
}

CheckResult check_xi_identity(Rng& rng) {
    // gamma * xi(k) + gamma * sum_{i<=k} gamma^{k-i} nu(i) must equal gamma^k.
    double worst = 0.0;
    const double gammas[] = {0.9, 0.99, 0.999};
    for (int trial = 0; trial < 200; ++trial) {
        const double gamma = gammas[trial % 3];
        const HorizonMeasure nu = random_subprob_measure(64, gamma, rng);
        const int big_k = nu.finite_support() + 16;
        const std::vector<double> xi = xi_coefficients(nu, gamma, big_k);
        for (int k = 1; k <= big_k; ++k) {
            double conv = 0.0;
            for (int i = 1; i <= k; ++i) conv += std::pow(gamma, k - i) * nu.weight(i);
            const double err = std::abs(gamma * xi[k - 1] + gamma * conv - std::pow(gamma, k));
            worst = std::max(worst, err);
        }
    }
    return make_result("xi_identity", worst, 1e-12);
}

CheckResult check_contraction(Rng& rng) {
    double worst_contraction = 0.0;
    double worst_fixed_point = 0.0;
    const double gammas[] = {0.9, 0.95, 0.99};
    for (int trial = 0; trial < 50; ++trial) {
        const double gamma = gammas[trial % 3];
        const int ns = 2 + static_cast<int>(rng.index(9));
        const int na = 1 + static_cast<int>(rng.index(3));
        const TabularMdp mdp = random_mdp(ns, na, gamma, rng);
        const TabularPolicy pi = random_policy(ns, na, rng);
        const HorizonMeasure nu = random_subprob_measure(12, gamma, rng);

        QTable q1 = QTable::zeros(ns, na);
        QTable q2 = QTable::zeros(ns, na);
        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a) {
                q1.values(s, a) = rng.uniform(-5.0, 5.0);
                q2.values(s, a) = rng.uniform(-5.0, 5.0);
            }
        const QTable t1 = apply_nu_bellman(mdp, pi, q1, nu);
        const QTable t2 = apply_nu_bellman(mdp, pi, q2, nu);
        const double lhs = (t1.values - t2.values).cwiseAbs().maxCoeff();
        const double rhs = gamma * (q1.values - q2.values).cwiseAbs().maxCoeff();
        worst_contraction = std::max(worst_contraction, lhs - rhs);

        const FixedPointResult fp =
            nu_fixed_point(mdp, pi, nu, QTable::zeros(ns, na), 1e-12, 20000);
        const QTable q_star = exact_q(mdp, pi);
        worst_fixed_point =
            std::max(worst_fixed_point, (fp.q.values - q_star.values).cwiseAbs().maxCoeff());
    }
    CheckResult r;
    r.name = "contraction_fixed_point";
    r.passed = worst_contraction <= 1e-12 && worst_fixed_point <= 1e-8;
    r.observed = std::max(worst_contraction, worst_fixed_point);
    r.bound = 1e-8;
    std::ostringstream d;
    d << "contraction slack " << worst_contraction << " (tol 1e-12), fixed-point gap "
      << worst_fixed_point << " (tol 1e-8)";
    r.detail = d.str();
    return r;
}

CheckResult check_special_cases(Rng& rng) {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const double gamma = trial % 2 == 0 ? 0.9 : 0.99;
        const int ns = 2 + static_cast<int>(rng.index(4));
        const int na = 1 + static_cast<int>(rng.index(2));
        const TabularMdp mdp = random_mdp(ns, na, gamma, rng);
        const TabularPolicy pi = random_policy(ns, na, rng);
        QTable q = QTable::zeros(ns, na);
        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a) q.values(s, a) = rng.uniform(-3.0, 3.0);

        for (int n = 1; n <= 4; ++n) {
            const QTable backed = apply_nu_bellman(mdp, pi, q, nstep_measure(n, gamma));
            for (int s = 0; s < ns; ++s)
                for (int a = 0; a < na; ++a) {
                    const double oracle = enumerate_nstep_target(mdp, pi, q, s, a, n);
                    worst = std::max(worst, std::abs(backed.values(s, a) - oracle));
                }
        }
        for (const double lambda : {0.0, 0.3, 0.8}) {
            const QTable backed = apply_nu_bellman(mdp, pi, q, geometric_measure(lambda, gamma));
            const QTable resolvent = td_lambda_operator(mdp, pi, q, lambda);
            worst = std::max(worst, (backed.values - resolvent.values).cwiseAbs().maxCoeff());
        }
    }
    return make_result("special_case_collapse", worst, 1e-10);
}

CheckResult check_mve_identity(Rng& rng) {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const double gamma = trial % 2 == 0 ? 0.9 : 0.99;
        const int ns = 2 + static_cast<int>(rng.index(9));
        const int na = 1 + static_cast<int>(rng.index(3));
        const TabularMdp mdp = random_mdp(ns, na, gamma, rng);
        const TabularPolicy pi = random_policy(ns, na, rng);
        QTable q = QTable::zeros(ns, na);
        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a) q.values(s, a) = rng.uniform(-3.0, 3.0);
        for (const double lambda : {0.1, 0.5, 0.8, 0.99}) {
            const QTable mve = gamma_mve_operator(mdp, pi, q, lambda);
            const QTable tdl = td_lambda_operator(mdp, pi, q, lambda);
            worst = std::max(worst, (mve.values - tdl.values).cwiseAbs().maxCoeff());
        }
    }
    return make_result("mve_td_lambda_identity", worst, 1e-10);
}

CheckResult check_measure_recursion(Rng& rng) {
    double worst_tv = 0.0;
    double worst_marginal = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const double gamma = trial % 2 == 0 ? 0.9 : 0.99;
        const int ns = 2 + static_cast<int>(rng.index(7));
        const int na = 1 + static_cast<int>(rng.index(3));
        const TabularMdp mdp = random_mdp(ns, na, gamma, rng);
        const TabularPolicy pi = random_policy(ns, na, rng);

        const NStepMeasureTable direct = nstep_measures_direct(mdp, pi, 32);
        const NStepMeasureTable boot = nstep_measures_bootstrap(mdp, pi, 32);
        for (int n = 1; n <= 32; ++n) {
            const double tv =
                0.5 * (direct.table(n) - boot.table(n)).cwiseAbs().rowwise().sum().maxCoeff();
            worst_tv = std::max(worst_tv, tv);
        }

        const double lambda = 0.8;
        const double gt = lambda * gamma;
        // Depth at which the truncated geometric tail mass drops below 1e-13.
        const int depth = winsorized_kmax(lambda, gamma, 1e-13) + 1;
        const NStepMeasureTable deep = nstep_measures_direct(mdp, pi, depth);
        const HorizonDistribution p_h = winsorized_geometric_distribution(lambda, gamma, depth);
        const Eigen::MatrixXd mix = marginal_measure(deep, p_h);
        const GhmMeasure ghm = successor_measure(mdp, pi, gt);
        worst_marginal = std::max(worst_marginal, (mix - ghm.m).cwiseAbs().maxCoeff());
    }
    CheckResult r = make_result("measure_bootstrap_exactness", worst_tv, 1e-12);
    r.passed = worst_tv <= 1e-12 && worst_marginal <= 1e-10;
    r.observed = std::max(worst_tv, worst_marginal);
    r.bound = 1e-10;
    std::ostringstream d;
    d << "table TV " << worst_tv << " (tol 1e-12), marginal gap " << worst_marginal
      << " (tol 1e-10)";
    r.detail = d.str();
    return r;
}

CheckResult check_target_unbiasedness(Rng& rng) {
    double worst_enum = 0.0;
    double worst_sigma = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
        const double gamma = trial % 2 == 0 ? 0.9 : 0.99;
        const int ns = 3 + static_cast<int>(rng.index(4));
        const int na = 2;
        const TabularMdp mdp = random_mdp(ns, na, gamma, rng);
        const TabularPolicy pi = random_policy(ns, na, rng);
        QTable q = QTable::zeros(ns, na);
        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a) q.values(s, a) = rng.uniform(-2.0, 2.0);

        const double lambda = 0.7;
        const int k_max = winsorized_kmax(lambda, gamma, 0.2);
        const HorizonMeasure nu = winsorized_geometric_measure(lambda, gamma, k_max);
        const std::vector<double> xi = xi_coefficients(nu, gamma, k_max);
        const HorizonDistribution p_h =
            winsorized_geometric_distribution(lambda, gamma, k_max);
        const NStepMeasureTable table = nstep_measures_direct(mdp, pi, k_max);
        const QTable backed = apply_nu_bellman(mdp, pi, q, nu);

        for (int s = 0; s < ns; ++s)
            for (int a = 0; a < na; ++a) {
                const double mean = enumerate_target_gnu(s, a, mdp.reward(s, a), table, pi, q,
                                                         mdp.reward, nu, xi, p_h, gamma);
                worst_enum = std::max(worst_enum, std::abs(mean - backed.values(s, a)));
            }

        // Monte Carlo agreement at one probe pair.
        const int s = static_cast<int>(rng.index(ns));
        const int a = static_cast<int>(rng.index(na));
        const int draws = 100000;
        double acc = 0.0;
        double acc2 = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double g = sample_target_gnu(s, a, mdp.reward(s, a), table, pi, q, mdp.reward,
                                               nu, xi, p_h, gamma, rng);
            acc += g;
            acc2 += g * g;
        }
        const double mean = acc / draws;
        const double var = std::max(0.0, acc2 / draws - mean * mean);
        const double se = std::sqrt(var / draws);
        const double sigmas = std::abs(mean - backed.values(s, a)) / std::max(se, 1e-300);
        worst_sigma = std::max(worst_sigma, sigmas);
    }
    CheckResult r = make_result("target_unbiasedness", worst_enum, 1e-12);
    r.passed = worst_enum <= 1e-12 && worst_sigma <= 4.0;
    std::ostringstream d;
    d << "enumeration gap " << worst_enum << " (tol 1e-12), Monte Carlo deviation "
      << worst_sigma << " standard errors (tol 4)";
    r.detail = d.str();
    return r;
}

CheckResult check_winsorized_forms(Rng& rng) {
    double worst = 0.0;
    bool mass_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        const double lambda = 0.05 + 0.9 * rng.uniform();
        const bool unit_gamma = trial % 5 == 0;
        const double gamma = unit_gamma ? 1.0 : 0.5 + 0.49 * rng.uniform();
        // k_max follows the quantile rule, as everywhere in the library; this
        // also keeps lambda^(k_max-1) > q so the ratio checks stay conditioned.
        const double quantile = 0.05 + 0.45 * rng.uniform();
        const int k_max = winsorized_kmax(lambda, gamma, quantile);
        const double lg = lambda * gamma;

        const HorizonMeasure nu = winsorized_geometric_measure(lambda, gamma, k_max);
        const std::vector<double> xi = xi_coefficients(nu, gamma, k_max + 8);
        const HorizonDistribution p_h =
            winsorized_geometric_distribution(lambda, gamma, k_max);
        const ImportanceRatios w = importance_ratios(nu, xi, p_h);

        for (int k = 1; k <= k_max + 8; ++k) {
            const double nu_ref = k < k_max   ? (1.0 - lambda) * std::pow(lg, k - 1)
                                  : k == k_max ? std::pow(lg, k_max - 1)
                                               : 0.0;
            const double xi_ref = k < k_max ? std::pow(gamma, k - 1) * std::pow(lambda, k) : 0.0;
            worst = std::max(worst, std::abs(nu.weight(k) - nu_ref));
            worst = std::max(worst, std::abs(xi[k - 1] - xi_ref));
            if (k <= k_max) {
                const double wxi_ref = k < k_max ? lambda / (1.0 - lg) : 0.0;
                const double wnu_ref = k < k_max ? (1.0 - lambda) / (1.0 - lg) : 1.0;
                worst = std::max(worst, std::abs(w.w_xi[k - 1] - wxi_ref));
                worst = std::max(worst, std::abs(w.w_nu[k - 1] - wnu_ref));
            }
        }

        double mass = 0.0;
        for (int k = 1; k <= k_max; ++k) mass += nu.weight(k);
        if (unit_gamma || k_max == 1) {
            // k_max = 1 collapses to the unit atom at horizon 1 for any gamma.
            if (std::abs(mass - 1.0) > 1e-12) mass_ok = false;
        } else {
            if (!(mass < 1.0 - 1e-15) || mass > 1.0 + 1e-12) mass_ok = false;
        }
    }
    CheckResult r = make_result("winsorized_closed_forms", worst, 1e-12);
    r.passed = r.passed && mass_ok;
    r.detail = mass_ok ? "mass <= 1 with equality exactly at gamma = 1"
                       : "total-mass condition violated";
    return r;
}

CheckResult check_lambda_schedule(Rng& rng) {
    double worst = 0.0;
    bool horizons_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        const double lambda_f = 0.05 + 0.9 * rng.uniform();
        const double gamma = 0.5 + 0.49 * rng.uniform();

        // 1/(1 - lambda(r)) must be affine in r: three-point collinearity.
        const double r0 = rng.uniform();
        const double r1 = rng.uniform();
        const double r2 = 0.5 * (r0 + r1);
        const auto inv = [&](double r) { return 1.0 / (1.0 - schedule_lambda(r, lambda_f)); };
        worst = std::max(worst, std::abs(inv(r2) - 0.5 * (inv(r0) + inv(r1))));

        worst = std::max(worst, std::abs(inv(0.0) - 1.0));
        worst = std::max(worst, std::abs(inv(1.0) - 1.0 / (1.0 - lambda_f)));

        // At r = 0 the winsorized horizon distribution is the atom at 1.
        const LambdaSchedule sched{lambda_f, 0.2};
        const int k0 = sched.kmax_at(0.0, gamma);
        const HorizonDistribution p_h =
            winsorized_geometric_distribution(sched.lambda_at(0.0), gamma, k0);
        for (int i = 0; i < 100; ++i)
            if (sample_horizon(p_h, rng) != 1) horizons_ok = false;
    }
    CheckResult r = make_result("lambda_schedule", worst, 1e-12);
    r.passed = r.passed && horizons_ok;
    if (!horizons_ok) r.detail = "sampled a horizon > 1 at progress 0";
    return r;
}

}  // namespace

std::vector<CheckResult> verify_core(std::uint64_t seed) {
    Rng root(seed);
    std::vector<CheckResult> out;
    {
        Rng rng = root.split("xi-identity");
        out.push_back(check_xi_identity(rng));
    }
    {
        Rng rng = root.split("contraction");
        out.push_back(check_contraction(rng));
    }
    {
        Rng rng = root.split("special-cases");
        out.push_back(check_special_cases(rng));
    }
    {
        Rng rng = root.split("mve-identity");
        out.push_back(check_mve_identity(rng));
    }
    {
        Rng rng = root.split("measure-recursion");
        out.push_back(check_measure_recursion(rng));
    }
    {
        Rng rng = root.split("target-unbiasedness");
        out.push_back(check_target_unbiasedness(rng));
    }
    {
        Rng rng = root.split("winsorized-forms");
        out.push_back(check_winsorized_forms(rng));
    }
    {
        Rng rng = root.split("lambda-schedule");
        out.push_back(check_lambda_schedule(rng));
    }
    return out;
}

namespace {

CheckResult check_squared_loss_gradient(const std::string& name, const std::vector<int>& widths,
                                        int batch, Rng& rng) {
    Mlp net = Mlp::create(widths, rng);
    Eigen::MatrixXd x(widths.front(), batch);
    Eigen::MatrixXd t(widths.back(), batch);
    for (int j = 0; j < batch; ++j) {
        for (int i = 0; i < widths.front(); ++i) x(i, j) = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < widths.back(); ++i) t(i, j) = rng.uniform(-1.0, 1.0);
    }
    MlpGrads grads = MlpGrads::zeros_like(net);
    squared_error_gradient(net, x, t, grads);

    Mlp scratch = net;
    const auto loss = [&](const Eigen::VectorXd& params) {
        scratch.unflatten(params);
        return (scratch.apply(x) - t).colwise().squaredNorm().sum() / batch;
    };
    const double err = finite_difference_check(loss, net.flatten(), grads.flatten(), 100, rng);
    return make_result(name, err, 1e-4);
}

CheckResult check_actor_gradient(Rng& rng) {
    const double bound = 0.1;
    const double alpha = 1.0;
    const int batch = 16;
    Mlp actor = Mlp::create({3, 16, 16, 2}, rng);
    Mlp critic = Mlp::create({5, 16, 16, 1}, rng);
    Eigen::MatrixXd states(3, batch);
    Eigen::MatrixXd actions(2, batch);
    for (int j = 0; j < batch; ++j) {
        states(0, j) = rng.uniform(-1.0, 1.0);
        states(1, j) = rng.uniform(-1.0, 1.0);
        states(2, j) = 0.0;
        actions(0, j) = rng.uniform(-bound, bound);
        actions(1, j) = rng.uniform(-bound, bound);
    }
    MlpGrads grads = MlpGrads::zeros_like(actor);
    actor_loss_gradient(actor, critic, states, actions, alpha, bound, grads);

    Mlp scratch = actor;
    const auto loss = [&](const Eigen::VectorXd& params) {
        scratch.unflatten(params);
        const Eigen::MatrixXd mu = actor_forward(scratch, states, bound);
        Eigen::MatrixXd critic_in(5, batch);
        critic_in.topRows(3) = states;
        critic_in.bottomRows(2) = mu;
        const Eigen::MatrixXd q = critic.apply(critic_in);
        return alpha * (mu - actions).squaredNorm() / batch - q.sum() / batch;
    };
    const double err = finite_difference_check(loss, actor.flatten(), grads.flatten(), 100, rng);
    return make_result("policy_loss_gradient", err, 1e-4);
}

}  // namespace

std::vector<CheckResult> verify_neural(std::uint64_t seed) {
    Rng root(seed);
    std::vector<CheckResult> out;
    {
        // Flow field: input = noisy sample (3) + condition (6) + time (1).
        Rng rng = root.split("flow-gradient");
        out.push_back(check_squared_loss_gradient("flow_loss_gradient", {10, 16, 16, 3}, 16, rng));
    }
    {
        Rng rng = root.split("critic-gradient");
        out.push_back(
            check_squared_loss_gradient("critic_loss_gradient", {5, 16, 16, 1}, 16, rng));
    }
    {
        Rng rng = root.split("actor-gradient");
        out.push_back(check_actor_gradient(rng));
    }
    {
        Rng rng = root.split("reward-gradient");
        out.push_back(
            check_squared_loss_gradient("reward_loss_gradient", {5, 16, 16, 1}, 16, rng));
    }
    return out;
}

}  // namespace uhm
