#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "uhm/horizon.hpp"
#include "uhm/nn.hpp"
#include "uhm/toy_env.hpp"

namespace uhm {

/// Hyperparameters of the toy offline RL track.
struct AgentConfig {
    std::vector<int> hidden{64, 64};
    double lr = 3e-4;
    int batch = 64;
    double gamma = 0.99;
    double lambda_f = 0.8;
    double q_quantile = 0.2;
    double beta = 0.3;    // behavior mixing coefficient
    double sigma = 0.1;   // actor smoothing noise scale
    double alpha = 100.0;  // actor BC coefficient
    double ema = 0.005;
    int n_flow = 5;
    bool twin_critic = false;
    int train_steps = 50000;
    int eval_every = 5000;
    int eval_episodes = 50;
};

/// Parameter bundle: flow field, actor, critic(s), reward model, each with
/// an EMA shadow and its own Adam accumulator.
struct AgentNets {
    EmaPair flow;
    EmaPair actor;
    EmaPair critic;
    EmaPair critic2;
    EmaPair reward;
    bool twin = false;
    AdamState flow_opt;
    AdamState actor_opt;
    AdamState critic_opt;
    AdamState critic2_opt;
    AdamState reward_opt;
    int k_max_final = 1;  // horizon normalizer for the flow conditioning

    static AgentNets create(const AgentConfig& config, Rng& rng);
};

/// Midpoint integration of the flow ODE from tau = 0 to 1 in n_flow steps.
/// cond rows: augmented state (3), action (2), normalized horizon (1).
Eigen::MatrixXd flow_sample_batch(const Mlp& field, const Eigen::MatrixXd& cond,
                                  const Eigen::MatrixXd& x0, int n_flow);

/// Single-sample convenience wrapper.
Eigen::Vector3d flow_sample(const Mlp& field, const Eigen::Vector3d& state,
                            const Eigen::Vector2d& action, double n_norm,
                            const Eigen::Vector3d& noise, int n_flow);

/// Deterministic actor output: action_bound * tanh(net(s)).
Eigen::MatrixXd actor_forward(const Mlp& actor, const Eigen::MatrixXd& states,
                              double action_bound);

/// pi_mix: the dataset action with probability beta, otherwise the shadow
/// actor plus sigma-scaled Gaussian noise, clipped to the bound.
Eigen::Vector2d mix_next_action(const Mlp& actor_shadow, const Eigen::Vector3d& next_state,
                                const Eigen::Vector2d& dataset_action, double sigma, double beta,
                                double action_bound, Rng& rng);

/// TD3+BC actor loss alpha ||mu(s) - a||^2 - Q(s, mu(s)) with stop-gradient
/// on the critic parameters; fills `grads` for the actor.  Returns the loss.
double actor_loss_gradient(const Mlp& actor, const Mlp& critic, const Eigen::MatrixXd& states,
                           const Eigen::MatrixXd& actions, double alpha, double action_bound,
                           MlpGrads& grads);

struct ToyBatch {
    Eigen::MatrixXd s;   // 3 x B augmented states
    Eigen::MatrixXd a;   // 2 x B
    Eigen::VectorXd r;   // B
    Eigen::MatrixXd sp;  // 3 x B augmented next states
    Eigen::MatrixXd ap;  // 2 x B dataset next actions
    std::vector<std::uint8_t> terminal;
    std::vector<std::uint8_t> has_next_action;
};

ToyBatch sample_toy_batch(const ToyDataset& data, int batch, Rng& rng);

struct StepDiagnostics {
    double loss_v = 0.0;
    double loss_q = 0.0;
    double loss_pi = 0.0;
    double loss_r = 0.0;
    double lambda = 0.0;
    int k_max = 1;
    std::vector<int> horizons;  // sampled n per batch element
};

/// One full training iteration: schedule, horizon sampling, behavior mixing,
/// flow bootstrap, the four losses, a summed-loss Adam step and EMA updates.
StepDiagnostics train_step(AgentNets& nets, const ToyBatch& batch, double progress,
                           const AgentConfig& config, const ToyEnvSpec& env_spec, Rng& rng);

/// Deterministic-actor success rate over `episodes` rollouts.
double evaluate(const ToyEnv& env, const Mlp& actor, int episodes, std::uint64_t seed);

struct ToyMetricRow {
    int step = 0;
    std::string metric;
    double value = 0.0;
};

struct ToyRunResult {
    AgentNets nets;
    std::vector<ToyMetricRow> metrics;
    double final_success = 0.0;
    double flow_n1_error = 0.0;
};

/// Mean displacement between the empirical mean of `samples` one-step flow
/// draws and the true next state, averaged over dataset transitions.
double flow_one_step_error(const AgentNets& nets, const ToyDataset& data, int probes,
                           int samples, int n_flow, Rng& rng);

ToyRunResult train_toy_agent(const ToyEnv& env, const ToyDataset& data,
                             const AgentConfig& config, std::uint64_t seed);

}  // namespace uhm
