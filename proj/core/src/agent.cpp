#include "uhm/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uhm {

AgentNets AgentNets::create(const AgentConfig& config, Rng& rng) {
    auto widths = [&](int in, int out) {
        std::vector<int> w{in};
        w.insert(w.end(), config.hidden.begin(), config.hidden.end());
        w.push_back(out);
        return w;
    };
    Rng init = rng.split("net-init");
    AgentNets nets;
    nets.flow = EmaPair::create(Mlp::create(widths(10, 3), init), config.ema);
    nets.actor = EmaPair::create(Mlp::create(widths(3, 2), init), config.ema);
    nets.critic = EmaPair::create(Mlp::create(widths(5, 1), init), config.ema);
    nets.critic2 = EmaPair::create(Mlp::create(widths(5, 1), init), config.ema);
    nets.reward = EmaPair::create(Mlp::create(widths(5, 1), init), config.ema);
    nets.twin = config.twin_critic;
    nets.flow_opt = AdamState::create(nets.flow.live.param_count(), config.lr);
    nets.actor_opt = AdamState::create(nets.actor.live.param_count(), config.lr);
    nets.critic_opt = AdamState::create(nets.critic.live.param_count(), config.lr);
    nets.critic2_opt = AdamState::create(nets.critic2.live.param_count(), config.lr);
    nets.reward_opt = AdamState::create(nets.reward.live.param_count(), config.lr);
    nets.k_max_final = winsorized_kmax(config.lambda_f, config.gamma, config.q_quantile);
    return nets;
}

Eigen::MatrixXd flow_sample_batch(const Mlp& field, const Eigen::MatrixXd& cond,
                                  const Eigen::MatrixXd& x0, int n_flow) {
    if (n_flow < 1) throw std::invalid_argument("flow_sample_batch: n_flow must be >= 1");
    if (cond.rows() != 6 || x0.rows() != 3 || cond.cols() != x0.cols())
        throw std::invalid_argument("flow_sample_batch: shape mismatch");
    const auto batch = x0.cols();
    const double h = 1.0 / n_flow;
    Eigen::MatrixXd x = x0;
    Eigen::MatrixXd input(10, batch);
    input.middleRows(3, 6) = cond;
    for (int j = 0; j < n_flow; ++j) {
        const double tau = j * h;
        input.topRows(3) = x;
        input.row(9).setConstant(tau);
        const Eigen::MatrixXd k1 = field.apply(input);
        input.topRows(3) = x + 0.5 * h * k1;
        input.row(9).setConstant(tau + 0.5 * h);
        x += h * field.apply(input);
    }
    return x;
}

Eigen::Vector3d flow_sample(const Mlp& field, const Eigen::Vector3d& state,
                            const Eigen::Vector2d& action, double n_norm,
                            const Eigen::Vector3d& noise, int n_flow) {
    Eigen::MatrixXd cond(6, 1);
    cond << state.x(), state.y(), state.z(), action.x(), action.y(), n_norm;
    return flow_sample_batch(field, cond, Eigen::MatrixXd(noise), n_flow).col(0);
}

Eigen::MatrixXd actor_forward(const Mlp& actor, const Eigen::MatrixXd& states,
                              double action_bound) {
    return action_bound * actor.apply(states).array().tanh().matrix();
}

Eigen::Vector2d mix_next_action(const Mlp& actor_shadow, const Eigen::Vector3d& next_state,
                                const Eigen::Vector2d& dataset_action, double sigma, double beta,
                                double action_bound, Rng& rng) {
    if (beta < 0.0 || beta > 1.0)
        throw std::invalid_argument("mix_next_action: beta must lie in [0,1]");
    // Draws are consumed unconditionally so the stream layout does not
    // depend on the branch taken.
    const double u = rng.uniform();
    const double g0 = rng.gaussian();
    const double g1 = rng.gaussian();
    if (u < beta) return dataset_action;
    const Eigen::VectorXd raw = actor_shadow.apply(Eigen::VectorXd(next_state));
    Eigen::Vector2d a{action_bound * std::tanh(raw[0]) + sigma * g0,
                      action_bound * std::tanh(raw[1]) + sigma * g1};
    a.x() = std::clamp(a.x(), -action_bound, action_bound);
    a.y() = std::clamp(a.y(), -action_bound, action_bound);
    return a;
}

double actor_loss_gradient(const Mlp& actor, const Mlp& critic, const Eigen::MatrixXd& states,
                           const Eigen::MatrixXd& actions, double alpha, double action_bound,
                           MlpGrads& grads) {
    const double batch = static_cast<double>(states.cols());
    MlpCache actor_cache;
    const Eigen::MatrixXd raw = mlp_forward(actor, states, actor_cache);
    const Eigen::MatrixXd tanh_raw = raw.array().tanh().matrix();
    const Eigen::MatrixXd mu = action_bound * tanh_raw;

    // Behavior cloning term.
    const Eigen::MatrixXd resid = mu - actions;
    const double bc_loss = alpha * resid.squaredNorm() / batch;
    Eigen::MatrixXd dmu = (2.0 * alpha / batch) * resid;

    // Critic term -Q(s, mu(s)); critic parameters are stop-gradiented, the
    // action-input gradient flows back into the actor.
    Eigen::MatrixXd critic_in(5, states.cols());
    critic_in.topRows(3) = states;
    critic_in.bottomRows(2) = mu;
    MlpCache critic_cache;
    const Eigen::MatrixXd q = mlp_forward(critic, critic_in, critic_cache);
    const double q_loss = -q.sum() / batch;
    MlpGrads critic_scratch = MlpGrads::zeros_like(critic);
    const Eigen::MatrixXd dq_in = mlp_backward(
        critic, critic_cache, Eigen::MatrixXd::Constant(1, states.cols(), -1.0 / batch),
        critic_scratch);
    dmu += dq_in.bottomRows(2);

    // Through the tanh squashing.
    const Eigen::MatrixXd draw =
        dmu.cwiseProduct(action_bound * (1.0 - tanh_raw.array().square()).matrix());
    mlp_backward(actor, actor_cache, draw, grads);
    return bc_loss + q_loss;
}

ToyBatch sample_toy_batch(const ToyDataset& data, int batch, Rng& rng) {
    if (data.transitions.empty()) throw std::invalid_argument("sample_toy_batch: empty dataset");
    ToyBatch out;
    out.s.resize(3, batch);
    out.a.resize(2, batch);
    out.r.resize(batch);
    out.sp.resize(3, batch);
    out.ap.resize(2, batch);
    out.terminal.resize(batch);
    out.has_next_action.resize(batch);
    for (int i = 0; i < batch; ++i) {
        const ToyTransition& tr = data.transitions[rng.index(data.transitions.size())];
        out.s.col(i) = tr.state;
        out.a.col(i) = tr.action;
        out.r[i] = tr.reward;
        out.sp.col(i) = tr.next_state;
        out.ap.col(i) = tr.next_action;
        out.terminal[i] = tr.terminal ? 1 : 0;
        out.has_next_action[i] = tr.has_next_action ? 1 : 0;
    }
    return out;
}

StepDiagnostics train_step(AgentNets& nets, const ToyBatch& batch, double progress,
                           const AgentConfig& config, const ToyEnvSpec& env_spec, Rng& rng) {
    const int b = static_cast<int>(batch.s.cols());
    const double gamma = config.gamma;
    StepDiagnostics diag;

    // Schedule lambda and k_max from training progress.
    const double lambda = schedule_lambda(progress, config.lambda_f);
    const int k_max = winsorized_kmax(lambda, gamma, config.q_quantile);
    const HorizonDistribution p_h =
        winsorized_geometric_distribution(lambda, gamma, k_max);
    diag.lambda = lambda;
    diag.k_max = k_max;

    // Sample horizons and mixed next actions.
    diag.horizons.resize(b);
    Eigen::MatrixXd mixed(2, b);
    for (int i = 0; i < b; ++i) {
        diag.horizons[i] = sample_horizon(p_h, rng);
        const double beta_eff = batch.has_next_action[i] ? config.beta : 0.0;
        mixed.col(i) = mix_next_action(nets.actor.shadow, batch.sp.col(i), batch.ap.col(i),
                                       config.sigma, beta_eff, env_spec.action_bound, rng);
    }

    // Flow bootstrap: s_e^1 from the shadow field at horizon n-1, except the
    // n = 1 branch and terminal next states, which use s' directly.
    Eigen::MatrixXd noise(3, b);
    for (int i = 0; i < b; ++i)
        for (int d = 0; d < 3; ++d) noise(d, i) = rng.gaussian();

    std::vector<int> boot_cols;
    for (int i = 0; i < b; ++i)
        if (diag.horizons[i] > 1 && batch.sp(2, i) < 0.5) boot_cols.push_back(i);

    Eigen::MatrixXd target_states = batch.sp;  // s_e^1 defaults to s'
    if (!boot_cols.empty()) {
        const int nb = static_cast<int>(boot_cols.size());
        Eigen::MatrixXd cond(6, nb);
        Eigen::MatrixXd x0(3, nb);
        for (int c = 0; c < nb; ++c) {
            const int i = boot_cols[c];
            cond.col(c).head<3>() = batch.sp.col(i);
            cond.col(c).segment<2>(3) = mixed.col(i);
            cond(5, c) = static_cast<double>(diag.horizons[i] - 1) / nets.k_max_final;
            x0.col(c) = noise.col(i);
        }
        const Eigen::MatrixXd boot =
            flow_sample_batch(nets.flow.shadow, cond, x0, config.n_flow);
        for (int c = 0; c < nb; ++c) target_states.col(boot_cols[c]) = boot.col(c);
    }

    // Coupled-CFM interpolation path, reusing the same noise sample.
    Eigen::MatrixXd flow_in(10, b);
    Eigen::MatrixXd flow_target(3, b);
    for (int i = 0; i < b; ++i) {
        const double tau = rng.uniform();
        const Eigen::Vector3d x_tau =
            (1.0 - tau) * noise.col(i) + tau * target_states.col(i);
        flow_in.col(i).head<3>() = x_tau;
        flow_in.col(i).segment<3>(3) = batch.s.col(i);
        flow_in.col(i).segment<2>(6) = batch.a.col(i);
        flow_in(8, i) = static_cast<double>(diag.horizons[i]) / nets.k_max_final;
        flow_in(9, i) = tau;
        flow_target.col(i) = target_states.col(i) - noise.col(i);
    }
    MlpGrads flow_grads = MlpGrads::zeros_like(nets.flow.live);
    diag.loss_v = squared_error_gradient(nets.flow.live, flow_in, flow_target, flow_grads);

    // Bootstrap actions at the generated future states.
    Eigen::MatrixXd a_e(2, b);
    {
        const Eigen::MatrixXd mu_e =
            actor_forward(nets.actor.shadow, target_states, env_spec.action_bound);
        for (int i = 0; i < b; ++i) {
            a_e(0, i) = std::clamp(mu_e(0, i) + config.sigma * rng.gaussian(),
                                   -env_spec.action_bound, env_spec.action_bound);
            a_e(1, i) = std::clamp(mu_e(1, i) + config.sigma * rng.gaussian(),
                                   -env_spec.action_bound, env_spec.action_bound);
        }
    }

    // G = r + gamma (w_xi R_sg + w_nu Q_bar), zero continuation at terminal
    // future states (absorbing convention).
    Eigen::MatrixXd critic_target_in(5, b);
    critic_target_in.topRows(3) = target_states;
    critic_target_in.bottomRows(2) = a_e;
    const Eigen::MatrixXd r_e = nets.reward.live.apply(critic_target_in);
    Eigen::MatrixXd q_e = nets.critic.shadow.apply(critic_target_in);
    if (nets.twin)
        q_e = q_e.cwiseMin(nets.critic2.shadow.apply(critic_target_in));

    const double w_xi_inner = lambda / (1.0 - lambda * gamma);
    const double w_nu_inner = (1.0 - lambda) / (1.0 - lambda * gamma);
    Eigen::MatrixXd g(1, b);
    for (int i = 0; i < b; ++i) {
        const bool boundary = diag.horizons[i] == k_max;
        const double w_xi = boundary ? 0.0 : w_xi_inner;
        const double w_nu = boundary ? 1.0 : w_nu_inner;
        const bool terminal_e = target_states(2, i) >= 0.5;
        g(0, i) = batch.r[i];
        if (!terminal_e)
            g(0, i) += gamma * (w_xi * r_e(0, i) + w_nu * q_e(0, i));
    }

    Eigen::MatrixXd critic_in(5, b);
    critic_in.topRows(3) = batch.s;
    critic_in.bottomRows(2) = batch.a;
    MlpGrads critic_grads = MlpGrads::zeros_like(nets.critic.live);
    diag.loss_q = squared_error_gradient(nets.critic.live, critic_in, g, critic_grads);
    MlpGrads critic2_grads = MlpGrads::zeros_like(nets.critic2.live);
    if (nets.twin)
        diag.loss_q += squared_error_gradient(nets.critic2.live, critic_in, g, critic2_grads);

    MlpGrads actor_grads = MlpGrads::zeros_like(nets.actor.live);
    diag.loss_pi = actor_loss_gradient(nets.actor.live, nets.critic.live, batch.s, batch.a,
                                       config.alpha, env_spec.action_bound, actor_grads);

    MlpGrads reward_grads = MlpGrads::zeros_like(nets.reward.live);
    diag.loss_r = squared_error_gradient(nets.reward.live, critic_in, batch.r.transpose(),
                                         reward_grads);

    // Summed-loss Adam step (parameter sets are disjoint, so per-net steps
    // realize the joint update) followed by EMA tracking.
    nets.flow.live.unflatten(
        adam_update(nets.flow_opt, nets.flow.live.flatten(), flow_grads.flatten()));
    nets.critic.live.unflatten(
        adam_update(nets.critic_opt, nets.critic.live.flatten(), critic_grads.flatten()));
    if (nets.twin)
        nets.critic2.live.unflatten(
            adam_update(nets.critic2_opt, nets.critic2.live.flatten(), critic2_grads.flatten()));
    nets.actor.live.unflatten(
        adam_update(nets.actor_opt, nets.actor.live.flatten(), actor_grads.flatten()));
    nets.reward.live.unflatten(
        adam_update(nets.reward_opt, nets.reward.live.flatten(), reward_grads.flatten()));

    nets.flow.update();
    nets.actor.update();
    nets.critic.update();
    if (nets.twin) nets.critic2.update();
    nets.reward.update();
    return diag;
}

double evaluate(const ToyEnv& env, const Mlp& actor, int episodes, std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
    Rng rng = Rng(seed).split("evaluate");
    int successes = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        Eigen::Vector2d s = env.reset(rng);
        for (int t = 0; t < env.spec().max_episode_len; ++t) {
            const Eigen::Vector3d aug = augment(s, false);
            const Eigen::VectorXd raw = actor.apply(Eigen::VectorXd(aug));
            const Eigen::Vector2d a{env.spec().action_bound * std::tanh(raw[0]),
                                    env.spec().action_bound * std::tanh(raw[1])};
            const ToyEnv::Step step = env.step(s, a, rng);
            if (step.terminal) {
                ++successes;
                break;
            }
            s = step.next_state;
        }
    }
    return static_cast<double>(successes) / episodes;
}

double flow_one_step_error(const AgentNets& nets, const ToyDataset& data, int probes,
                           int samples, int n_flow, Rng& rng) {
    double total = 0.0;
    int used = 0;
    for (int p = 0; p < probes; ++p) {
        const ToyTransition& tr = data.transitions[rng.index(data.transitions.size())];
        Eigen::MatrixXd cond(6, samples);
        Eigen::MatrixXd x0(3, samples);
        for (int i = 0; i < samples; ++i) {
            cond.col(i).head<3>() = tr.state;
            cond.col(i).segment<2>(3) = tr.action;
            cond(5, i) = 1.0 / nets.k_max_final;
            for (int d = 0; d < 3; ++d) x0(d, i) = rng.gaussian();
        }
        const Eigen::MatrixXd out = flow_sample_batch(nets.flow.shadow, cond, x0, n_flow);
        const Eigen::Vector2d mean = out.topRows(2).rowwise().mean();
        total += (mean - tr.next_state.head<2>()).norm();
        ++used;
    }
    return used > 0 ? total / used : 0.0;
}

ToyRunResult train_toy_agent(const ToyEnv& env, const ToyDataset& data,
                             const AgentConfig& config, std::uint64_t seed) {
    Rng root = Rng(seed).split("toy-agent");
    Rng init = root.split("init");
    Rng loop = root.split("train");
    ToyRunResult result{AgentNets::create(config, init), {}, 0.0, 0.0};
    AgentNets& nets = result.nets;

    for (int t = 1; t <= config.train_steps; ++t) {
        const double progress =
            config.train_steps > 1 ? static_cast<double>(t - 1) / (config.train_steps - 1) : 1.0;
        const ToyBatch batch = sample_toy_batch(data, config.batch, loop);
        const StepDiagnostics diag = train_step(nets, batch, progress, config, env.spec(), loop);
        if (t % config.eval_every == 0 || t == config.train_steps) {
            const double success =
                evaluate(env, nets.actor.live, config.eval_episodes, seed ^ (0xabcdu + t));
            result.metrics.push_back({t, "loss_v", diag.loss_v});
            result.metrics.push_back({t, "loss_q", diag.loss_q});
            result.metrics.push_back({t, "loss_pi", diag.loss_pi});
            result.metrics.push_back({t, "loss_r", diag.loss_r});
            result.metrics.push_back({t, "success_rate", success});
            result.final_success = success;
        }
    }
    Rng probe = root.split("flow-probe");
    result.flow_n1_error = flow_one_step_error(nets, data, 16, 256, config.n_flow, probe);
    return result;
}

}  // namespace uhm
