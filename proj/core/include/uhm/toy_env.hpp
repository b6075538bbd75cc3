#pragma once

#include <Eigen/Dense>

#include "uhm/mdp.hpp"
#include "uhm/rng.hpp"

namespace uhm {

enum class ToyReward { DistanceShaped, SparseGoal };

/// 2D navigation in a bounded square arena with a terminal goal disc.
/// Actions are bounded displacements; transition noise is isotropic Gaussian.
struct ToyEnvSpec {
    double arena_half_width = 1.0;
    double action_bound = 0.1;
    Eigen::Vector2d goal{0.8, 0.8};
    double goal_radius = 0.15;
    double noise_scale = 0.0;
    ToyReward reward = ToyReward::DistanceShaped;
    int max_episode_len = 100;
    double gamma = 0.99;
};

class ToyEnv {
public:
    explicit ToyEnv(ToyEnvSpec spec) : spec_(spec) {}

    [[nodiscard]] const ToyEnvSpec& spec() const { return spec_; }

    /// Uniform start outside the goal region.
    Eigen::Vector2d reset(Rng& rng) const;

    struct Step {
        Eigen::Vector2d next_state;
        double reward = 0.0;
        bool terminal = false;
    };
    Step step(const Eigen::Vector2d& state, const Eigen::Vector2d& action, Rng& rng) const;

    [[nodiscard]] bool in_goal(const Eigen::Vector2d& state) const {
        return (state - spec_.goal).norm() <= spec_.goal_radius;
    }
    [[nodiscard]] Eigen::Vector2d clip_action(const Eigen::Vector2d& a) const;
    [[nodiscard]] Eigen::Vector2d clip_state(const Eigen::Vector2d& s) const;

private:
    ToyEnvSpec spec_;
};

/// Continuous transition record in the augmented (state + terminal flag)
/// representation used by the neural track.
struct ToyTransition {
    Eigen::Vector3d state;       // (x, y, terminal indicator)
    Eigen::Vector2d action;
    double reward = 0.0;
    Eigen::Vector3d next_state;
    Eigen::Vector2d next_action; // zero vector on the final step of an episode
    bool has_next_action = false;
    bool terminal = false;
};

struct ToyDataset {
    std::vector<ToyTransition> transitions;
    std::vector<std::size_t> episode_starts;
};

/// Appends the terminal indicator coordinate.
Eigen::Vector3d augment(const Eigen::Vector2d& state, bool terminal);

/// Mixture of noisy scripted goal-seeking episodes and uniform-random
/// episodes, mirroring a play-style offline dataset at desk scale.
ToyDataset generate_toy_dataset(const ToyEnv& env, int scripted_episodes, int random_episodes,
                                std::uint64_t seed);

}  // namespace uhm
