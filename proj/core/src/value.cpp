#include "uhm/value.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace uhm {

namespace {

// c = sum_i nu(i) gamma^(1-i) over the finite support.  xi(k) for k beyond
// the support equals gamma^(k-1) (1 - c), so c = 1 means xi vanishes there.
double discounted_mass(const HorizonMeasure& nu, double gamma, int support) {
    double c = 0.0;
    double gpow = 1.0;
    for (int i = 1; i <= support; ++i) {
        c += nu.weight(i) / gpow;
        gpow *= gamma;
    }
    return c;
}

}  // namespace

QTable apply_nu_bellman(const TabularMdp& mdp, const TabularPolicy& policy, const QTable& q,
                        const HorizonMeasure& nu) {
    const Eigen::MatrixXd d = state_action_kernel(mdp, policy);
    const Eigen::VectorXd r = mdp.reward_vector();
    const Eigen::VectorXd qv = q.flat();
    const double gamma = mdp.gamma;
    const int sa = mdp.num_sa();
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(sa, sa);

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(sa);

    if (nu.has_tail()) {
        // Geometric tail nu(k) = c0 rho^(k-1) from k = 1 (TD(lambda) family):
        // closed forms through the resolvents (I - rho D)^(-1), (I - gamma D)^(-1).
        const GeometricTail& tail = nu.tail();
        if (tail.start != 1 || nu.finite_support() != 0)
            throw std::invalid_argument("apply_nu_bellman: unsupported tail form");
        const double c0 = tail.coef;
        const double rho = tail.ratio;
        const double denom = 1.0 - rho / gamma;
        if (std::abs(denom) < 1e-15)
            throw std::invalid_argument("apply_nu_bellman: unsupported tail form (rho == gamma)");
        Eigen::PartialPivLU<Eigen::MatrixXd> lu_rho(identity - rho * d);
        // sum_k nu(k) D^k q = c0 D (I - rho D)^(-1) q
        acc += c0 * (d * lu_rho.solve(qv));
        // sum_k xi(k) D^k r with
        // xi(k) = gamma^(k-1) - c0 (gamma^(k-1) - rho^k / gamma) / (1 - rho / gamma)
        const double a1 = 1.0 - c0 / denom;
        if (a1 != 0.0) {
            const Eigen::VectorXd res_g = (identity - gamma * d).partialPivLu().solve(r);
            acc += a1 * (d * res_g);
        }
        const double a2 = (c0 / denom) * (rho / gamma);
        if (a2 != 0.0) acc += a2 * (d * lu_rho.solve(r));
    } else {
        const int support = nu.finite_support();
        const std::vector<double> xi = xi_coefficients(nu, gamma, std::max(support, 1));
        Eigen::VectorXd dk_r = r;
        Eigen::VectorXd dk_q = qv;
        for (int k = 1; k <= support; ++k) {
            dk_r = d * dk_r;
            dk_q = d * dk_q;
            acc += xi[k - 1] * dk_r + nu.weight(k) * dk_q;
        }
        // Residual xi tail: (1 - c) sum_{k > K} gamma^(k-1) D^k r.
        const double c = discounted_mass(nu, gamma, support);
        if (std::abs(1.0 - c) > 1e-15) {
            Eigen::VectorXd v = (identity - gamma * d).partialPivLu().solve(r);
            v = d * v;  // D^(K+1) (I - gamma D)^(-1) r, built up below
            for (int k = 0; k < support; ++k) v = d * v;
            acc += (1.0 - c) * std::pow(gamma, support) * v;
        }
    }

    return QTable::from_flat(r + gamma * acc, mdp.num_states, mdp.num_actions);
}

FixedPointResult nu_fixed_point(const TabularMdp& mdp, const TabularPolicy& policy,
                                const HorizonMeasure& nu, const QTable& q0, double tol,
                                int max_iter) {
    if (tol <= 0.0) throw std::invalid_argument("nu_fixed_point: tol must be positive");
    FixedPointResult out;
    out.q = q0;
    for (int it = 1; it <= max_iter; ++it) {
        QTable next = apply_nu_bellman(mdp, policy, out.q, nu);
        out.residual = (next.values - out.q.values).cwiseAbs().maxCoeff();
        out.q = std::move(next);
        out.iterations = it;
        if (out.residual <= tol) {
            out.converged = true;
            return out;
        }
    }
    return out;
}

QTable td_lambda_operator(const TabularMdp& mdp, const TabularPolicy& policy, const QTable& q,
                          double lambda) {
    if (lambda < 0.0 || lambda >= 1.0)
        throw std::invalid_argument("td_lambda_operator: lambda must lie in [0,1)");
    const Eigen::MatrixXd d = state_action_kernel(mdp, policy);
    const Eigen::VectorXd r = mdp.reward_vector();
    const Eigen::VectorXd qv = q.flat();
    const double gamma = mdp.gamma;
    const int sa = mdp.num_sa();
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(sa, sa) - lambda * gamma * d;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const Eigen::VectorXd target =
        lu.solve(r) + (1.0 - lambda) * gamma * (d * lu.solve(qv));
    return QTable::from_flat(target, mdp.num_states, mdp.num_actions);
}

QTable gamma_mve_operator(const TabularMdp& mdp, const TabularPolicy& policy, const QTable& q,
                          double lambda) {
    if (lambda <= 0.0 || lambda > 1.0)
        throw std::invalid_argument("gamma_mve_operator: lambda must lie in (0,1]");
    const double gamma = mdp.gamma;
    const double gt = lambda * gamma;
    const GhmMeasure m = successor_measure(mdp, policy, gt);
    // With rewards indexed on the visited (s,a) pair, the coefficients that
    // make the single-rollout expansion equal the lambda-return are the
    // geometric-measure importance weights lambda/(1-lg) and (1-lambda)/(1-lg).
    const double c_r = lambda / (1.0 - gt);
    const double c_q = (1.0 - lambda) / (1.0 - gt);
    // u(x) = E_{a_e ~ pi(.|x)}[c_r R(x,a_e) + c_q Q(x,a_e)]
    Eigen::VectorXd u(mdp.num_states);
    for (int x = 0; x < mdp.num_states; ++x) {
        double v = 0.0;
        for (int a = 0; a < mdp.num_actions; ++a)
            v += policy.probs(x, a) * (c_r * mdp.reward(x, a) + c_q * q.values(x, a));
        u[x] = v;
    }
    const Eigen::VectorXd target = mdp.reward_vector() + gamma * (m.m * u);
    return QTable::from_flat(target, mdp.num_states, mdp.num_actions);
}

namespace {

TargetWeights target_weights(const HorizonMeasure& nu, const std::vector<double>& xi,
                             const HorizonDistribution& p_h, int n) {
    const double p = p_h.prob(n);
    if (p <= 0.0)
        throw std::invalid_argument("target weights: sampled horizon has zero probability");
    return TargetWeights{xi[n - 1] / p, nu.weight(n) / p, n};
}

}  // namespace

double sample_target_gnu(int s, int a, double r, const NStepMeasureTable& table,
                         const TabularPolicy& policy, const QTable& q,
                         const Eigen::MatrixXd& reward_table, const HorizonMeasure& nu,
                         const std::vector<double>& xi, const HorizonDistribution& p_h,
                         double gamma, Rng& rng) {
    if (p_h.k_max() > table.depth())
        throw std::invalid_argument("sample_target_gnu: p_H support exceeds table depth");
    const int n = sample_horizon(p_h, rng);
    const int s_e = sample_future(table, s, a, n, rng);
    const int a_e = policy.sample(s_e, rng);
    const TargetWeights w = target_weights(nu, xi, p_h, n);
    return r + gamma * (w.w_xi * reward_table(s_e, a_e) + w.w_nu * q.values(s_e, a_e));
}

double enumerate_target_gnu(int s, int a, double r, const NStepMeasureTable& table,
                            const TabularPolicy& policy, const QTable& q,
                            const Eigen::MatrixXd& reward_table, const HorizonMeasure& nu,
                            const std::vector<double>& xi, const HorizonDistribution& p_h,
                            double gamma) {
    if (p_h.k_max() > table.depth())
        throw std::invalid_argument("enumerate_target_gnu: p_H support exceeds table depth");
    double acc = 0.0;
    for (int n = 1; n <= p_h.k_max(); ++n) {
        const double p = p_h.prob(n);
        if (p <= 0.0) continue;
        const TargetWeights w = target_weights(nu, xi, p_h, n);
        const Eigen::VectorXd m = table.row(s, a, n);
        double inner = 0.0;
        for (int x = 0; x < table.num_states(); ++x) {
            if (m[x] == 0.0) continue;
            double ux = 0.0;
            for (int ae = 0; ae < table.num_actions(); ++ae)
                ux += policy.probs(x, ae) *
                      (w.w_xi * reward_table(x, ae) + w.w_nu * q.values(x, ae));
            inner += m[x] * ux;
        }
        acc += p * inner;
    }
    return r + gamma * acc;
}

EmpiricalModel empirical_model(const TabularMdp& shape, const Dataset& data) {
    const int ns = shape.num_states;
    const int na = shape.num_actions;
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(ns * na, ns);
    Eigen::MatrixXd reward_sum = Eigen::MatrixXd::Zero(ns, na);
    Eigen::MatrixXd visits = Eigen::MatrixXd::Zero(ns, na);
    for (const Transition& t : data.transitions) {
        counts(t.state * na + t.action, t.next_state) += 1.0;
        reward_sum(t.state, t.action) += t.reward;
        visits(t.state, t.action) += 1.0;
    }
    EmpiricalModel out;
    out.mdp = shape;
    out.mdp.transition = Eigen::MatrixXd::Zero(ns * na, ns);
    out.mdp.reward = Eigen::MatrixXd::Zero(ns, na);
    out.unseen.assign(ns * na, 0);
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a) {
            const int row = s * na + a;
            const double n = visits(s, a);
            if (n > 0.0) {
                out.mdp.transition.row(row) = counts.row(row) / n;
                out.mdp.reward(s, a) = reward_sum(s, a) / n;
            } else {
                out.mdp.transition(row, s) = 1.0;  // zero-reward self-loop
                out.unseen[row] = 1;
            }
        }
    return out;
}

namespace {

// Sampled one-step bootstrap value Q(s', a' ~ pi), zero at terminals.
double bootstrap_value(const TabularMdp& mdp, const TabularPolicy& pi, const QTable& q, int s,
                       Rng& rng) {
    if (mdp.terminal[s]) return 0.0;
    const int a = pi.sample(s, rng);
    return q.values(s, a);
}

// Forward lambda-return along a dataset episode from index t; bootstraps on
// Q at the final stored state of a truncated episode, zero past terminals.
double dataset_lambda_return(const TabularMdp& mdp, const Dataset& data, std::size_t start,
                             std::size_t episode_end, const TabularPolicy& pi, const QTable& q,
                             double lambda, Rng& rng) {
    const double gamma = mdp.gamma;
    // Backward recursion over the episode suffix.
    double g = 0.0;
    for (std::size_t i = episode_end; i-- > start;) {
        const Transition& tr = data.transitions[i];
        double v = tr.terminal ? 0.0 : bootstrap_value(mdp, pi, q, tr.next_state, rng);
        if (i + 1 == episode_end) {
            g = tr.reward + gamma * v;
        } else {
            g = tr.reward + gamma * ((1.0 - lambda) * v + lambda * g);
        }
    }
    return g;
}

int sample_transition_row(const Eigen::MatrixXd& probs, int row, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < probs.cols(); ++i) {
        acc += probs(row, i);
        if (u < acc) return i;
    }
    return static_cast<int>(probs.cols()) - 1;
}

}  // namespace

std::vector<LearningCurvePoint> run_tabular_learning(const TabularMdp& mdp, const Dataset& data,
                                                     const TabularPolicy& eval_policy,
                                                     const LearningConfig& config) {
    if (data.transitions.empty())
        throw std::invalid_argument("run_tabular_learning: dataset is empty");
    if (config.step_size <= 0.0 || config.step_size > 1.0)
        throw std::invalid_argument("run_tabular_learning: step size must lie in (0,1]");
    if (config.synchronous &&
        (config.method != Method::UhmNu || config.model_source != ModelSource::Exact))
        throw std::invalid_argument(
            "run_tabular_learning: synchronous sweeps require UHM_NU with the exact model");

    const double gamma = mdp.gamma;
    const QTable q_star = exact_q(mdp, eval_policy);
    QTable q = QTable::zeros(mdp.num_states, mdp.num_actions);
    Rng rng = Rng(config.seed).split("tabular-learning").split(method_name(config.method));

    const TabularMdp* model = &mdp;
    EmpiricalModel emp;
    if (config.model_source == ModelSource::Empirical) {
        emp = empirical_model(mdp, data);
        model = &emp.mdp;
    }

    // Horizon machinery for the measure-based methods.
    const int k_final = winsorized_kmax(config.lambda_f, gamma, config.q_quantile);
    NStepMeasureTable* table = nullptr;
    NStepMeasureTable table_storage({Eigen::MatrixXd::Zero(1, 1)}, 1, 1);
    if (config.method == Method::UhmNu) {
        table_storage = nstep_measures_bootstrap(*model, eval_policy, k_final);
        table = &table_storage;
    }
    GhmMeasure ghm;
    if (config.method == Method::GhmMve)
        ghm = successor_measure(*model, eval_policy, config.lambda_f * gamma);

    std::vector<LearningCurvePoint> curve;
    auto record = [&](int step) {
        curve.push_back({step, (q.values - q_star.values).cwiseAbs().maxCoeff()});
    };
    record(0);

    // Geometric-measure importance weights; see gamma_mve_operator.
    const double c_r = config.lambda_f / (1.0 - config.lambda_f * gamma);
    const double c_q = (1.0 - config.lambda_f) / (1.0 - config.lambda_f * gamma);

    for (int t = 1; t <= config.updates; ++t) {
        const double progress = config.updates > 1
                                    ? static_cast<double>(t - 1) / (config.updates - 1)
                                    : 1.0;
        const double step =
            config.decay_tau > 0.0
                ? config.step_size * config.decay_tau / (config.decay_tau + t)
                : config.step_size;

        if (config.synchronous) {
            const double lam = config.schedule_trace
                                   ? schedule_lambda(progress, config.lambda_f)
                                   : config.lambda_f;
            const int k_max = winsorized_kmax(lam, gamma, config.q_quantile);
            const HorizonMeasure nu = winsorized_geometric_measure(lam, gamma, k_max);
            const QTable target = apply_nu_bellman(*model, eval_policy, q, nu);
            q.values += step * (target.values - q.values);
            if (t % config.eval_every == 0 || t == config.updates) record(t);
            continue;
        }

        const std::size_t idx = rng.index(data.transitions.size());
        const Transition& tr = data.transitions[idx];
        double g = 0.0;

        switch (config.method) {
            case Method::OneStep: {
                const double v =
                    tr.terminal ? 0.0 : bootstrap_value(mdp, eval_policy, q, tr.next_state, rng);
                g = tr.reward + gamma * v;
                break;
            }
            case Method::NStep: {
                // Walk the dataset episode forward up to n steps.
                std::size_t ep = 0;
                while (data.episode_starts[ep + 1] <= idx) ++ep;
                const std::size_t ep_end = data.episode_starts[ep + 1];
                double ret = 0.0;
                double disc = 1.0;
                std::size_t i = idx;
                bool hit_terminal = false;
                int steps = 0;
                while (steps < config.nstep && i < ep_end) {
                    const Transition& step_tr = data.transitions[i];
                    ret += disc * step_tr.reward;
                    disc *= gamma;
                    ++steps;
                    if (step_tr.terminal) {
                        hit_terminal = true;
                        break;
                    }
                    ++i;
                }
                if (!hit_terminal) {
                    // i now points one past the last consumed transition.
                    const int boot_state = data.transitions[i - 1].next_state;
                    ret += disc * bootstrap_value(mdp, eval_policy, q, boot_state, rng);
                }
                g = ret;
                break;
            }
            case Method::DtdLambda: {
                std::size_t ep = 0;
                while (data.episode_starts[ep + 1] <= idx) ++ep;
                g = dataset_lambda_return(mdp, data, idx, data.episode_starts[ep + 1],
                                          eval_policy, q, config.lambda_f, rng);
                break;
            }
            case Method::MbtdLambda: {
                // Synthetic rollout of the model under the evaluation policy,
                // out to a sampled winsorized horizon.
                const HorizonDistribution p_h =
                    winsorized_geometric_distribution(config.lambda_f, gamma, k_final);
                const int horizon = sample_horizon(p_h, rng);
                // rewards[i] = r(s_i, a_i); boot[i] = Q(s_{i+1}, a_{i+1}) (0 at
                // terminals).  Root reward comes from the dataset transition.
                std::vector<double> rewards{tr.reward};
                std::vector<double> boot;
                int s = tr.state;
                int a = tr.action;
                for (int k = 1; k <= horizon; ++k) {
                    const int sn =
                        sample_transition_row(model->transition, s * mdp.num_actions + a, rng);
                    if (mdp.terminal[sn]) {
                        boot.push_back(0.0);
                        break;
                    }
                    const int an = eval_policy.sample(sn, rng);
                    boot.push_back(q.values(sn, an));
                    if (k == horizon) break;
                    rewards.push_back(model->reward(sn, an));
                    s = sn;
                    a = an;
                }
                // Backward lambda-return over the rollout; the final step
                // bootstraps fully (truncation at the sampled horizon).
                double ret = 0.0;
                for (std::size_t i = boot.size(); i-- > 0;) {
                    if (i + 1 == boot.size()) {
                        ret = rewards[i] + gamma * boot[i];
                    } else {
                        ret = rewards[i] +
                              gamma * ((1.0 - config.lambda_f) * boot[i] + config.lambda_f * ret);
                    }
                }
                g = ret;
                break;
            }
            case Method::GhmMve: {
                const int s_e = sample_transition_row(ghm.m, tr.state * mdp.num_actions + tr.action,
                                                      rng);
                const int a_e = eval_policy.sample(s_e, rng);
                g = tr.reward +
                    gamma * (c_r * model->reward(s_e, a_e) + c_q * q.values(s_e, a_e));
                break;
            }
            case Method::UhmNu: {
                const double lam = config.schedule_trace
                                       ? schedule_lambda(progress, config.lambda_f)
                                       : config.lambda_f;
                const int k_max = winsorized_kmax(lam, gamma, config.q_quantile);
                const HorizonMeasure nu = winsorized_geometric_measure(lam, gamma, k_max);
                const std::vector<double> xi = xi_coefficients(nu, gamma, k_max);
                const HorizonDistribution p_h =
                    winsorized_geometric_distribution(lam, gamma, k_max);
                g = sample_target_gnu(tr.state, tr.action, tr.reward, *table, eval_policy, q,
                                      model->reward, nu, xi, p_h, gamma, rng);
                break;
            }
        }

        q.values(tr.state, tr.action) += step * (g - q.values(tr.state, tr.action));
        if (t % config.eval_every == 0 || t == config.updates) record(t);
    }
    return curve;
}

QTable dtd_lambda_fixed_point(const TabularMdp& mdp, const TabularPolicy& behavior,
                              const TabularPolicy& eval_policy, double lambda) {
    const Eigen::MatrixXd d_b = state_action_kernel(mdp, behavior);
    const Eigen::MatrixXd d_pi = state_action_kernel(mdp, eval_policy);
    const int sa = mdp.num_sa();
    const double gamma = mdp.gamma;
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(sa, sa) -
                                   lambda * gamma * d_b - (1.0 - lambda) * gamma * d_pi;
    const Eigen::VectorXd q = system.partialPivLu().solve(mdp.reward_vector());
    return QTable::from_flat(q, mdp.num_states, mdp.num_actions);
}

const char* method_name(Method m) {
    switch (m) {
        case Method::OneStep: return "one_step";
        case Method::NStep: return "nstep";
        case Method::DtdLambda: return "dtd_lambda";
        case Method::MbtdLambda: return "mbtd_lambda";
        case Method::GhmMve: return "ghm_mve";
        case Method::UhmNu: return "uhm_nu";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "one_step") return Method::OneStep;
    if (name == "nstep") return Method::NStep;
    if (name == "dtd_lambda") return Method::DtdLambda;
    if (name == "mbtd_lambda") return Method::MbtdLambda;
    if (name == "ghm_mve") return Method::GhmMve;
    if (name == "uhm_nu") return Method::UhmNu;
    throw std::invalid_argument("unknown method: " + name);
}

}  // namespace uhm
