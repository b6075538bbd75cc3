#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "uhm/rng.hpp"

namespace uhm {

/// Finite MDP (S, A, R, gamma, P, rho) with per-state terminal flags.
/// Transition rows are probability vectors; rewards depend on (s, a) only.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    Eigen::MatrixXd transition;    // (S*A) x S, row (s*A + a) is P(.|s,a)
    Eigen::MatrixXd reward;        // S x A
    double gamma = 0.99;
    std::vector<std::uint8_t> terminal;  // per state
    Eigen::VectorXd initial_dist;  // over states

    [[nodiscard]] int sa_index(int s, int a) const { return s * num_actions + a; }
    [[nodiscard]] int num_sa() const { return num_states * num_actions; }

    /// Reward table flattened to a state-action vector.
    [[nodiscard]] Eigen::VectorXd reward_vector() const;

    /// Throws std::invalid_argument if any structural invariant fails.
    void validate(double tol = 1e-12) const;
};

/// Row-stochastic policy table pi(a|s).
struct TabularPolicy {
    Eigen::MatrixXd probs;  // S x A

    void validate(double tol = 1e-12) const;
    int sample(int state, Rng& rng) const;

    static TabularPolicy uniform(int num_states, int num_actions);
};

/// Action-value table Q(s,a).
struct QTable {
    Eigen::MatrixXd values;  // S x A

    static QTable zeros(int num_states, int num_actions) {
        return QTable{Eigen::MatrixXd::Zero(num_states, num_actions)};
    }
    [[nodiscard]] Eigen::VectorXd flat() const;
    static QTable from_flat(const Eigen::VectorXd& v, int num_states, int num_actions);
};

struct Transition {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    int next_action = -1;  // -1 when no successor action is stored
    bool terminal = false; // next_state is terminal (truncation does not set this)
};

/// Flat transition log with episode boundaries.  episode_starts[i] is the
/// index of episode i's first transition; a final sentinel equal to
/// transitions.size() closes the last episode.
struct Dataset {
    std::vector<Transition> transitions;
    std::vector<std::size_t> episode_starts;

    [[nodiscard]] std::size_t num_episodes() const {
        return episode_starts.empty() ? 0 : episode_starts.size() - 1;
    }
};

/// D[(s,a),(s',a')] = P(s'|s,a) * pi(a'|s'), the on-policy state-action chain.
Eigen::MatrixXd state_action_kernel(const TabularMdp& mdp, const TabularPolicy& policy);

/// Exact Q^pi by dense linear solve of (I - gamma D) q = r.
QTable exact_q(const TabularMdp& mdp, const TabularPolicy& policy);

/// Terminal states become zero-reward self-loops; other rows untouched.
TabularMdp absorb_terminals(const TabularMdp& mdp);

/// Rolls out `episodes` trajectories from rho under `behavior`, truncating
/// at max_len or on entering a terminal state.
Dataset generate_dataset(const TabularMdp& mdp, const TabularPolicy& behavior,
                         int episodes, int max_len, std::uint64_t seed);

enum class BenchmarkKind { Chain, Gridworld, FourRooms };

struct BenchmarkSpec {
    BenchmarkKind kind = BenchmarkKind::Chain;
    int size = 5;
    double noise = 0.0;
    double gamma = 0.99;
};

/// Desk-scale benchmark MDPs with a sparse terminal goal.  The goal state is
/// absorbing; the reward R(s,a) is the probability of entering the goal from
/// (s,a), so reaching the goal pays 1 in expectation.
TabularMdp make_benchmark_mdp(const BenchmarkSpec& spec);

BenchmarkKind parse_benchmark_kind(const std::string& name);

}  // namespace uhm
