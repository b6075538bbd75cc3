#include "uhm/toy_env.hpp"

#include <algorithm>

namespace uhm {

Eigen::Vector2d ToyEnv::clip_action(const Eigen::Vector2d& a) const {
    const double b = spec_.action_bound;
    return {std::clamp(a.x(), -b, b), std::clamp(a.y(), -b, b)};
}

Eigen::Vector2d ToyEnv::clip_state(const Eigen::Vector2d& s) const {
    const double b = spec_.arena_half_width;
    return {std::clamp(s.x(), -b, b), std::clamp(s.y(), -b, b)};
}

Eigen::Vector2d ToyEnv::reset(Rng& rng) const {
    const double b = spec_.arena_half_width;
    for (;;) {
        Eigen::Vector2d s{rng.uniform(-b, b), rng.uniform(-b, b)};
        if (!in_goal(s)) return s;
    }
}

ToyEnv::Step ToyEnv::step(const Eigen::Vector2d& state, const Eigen::Vector2d& action,
                          Rng& rng) const {
    Eigen::Vector2d next = state + clip_action(action);
    if (spec_.noise_scale > 0.0) {
        next.x() += spec_.noise_scale * rng.gaussian();
        next.y() += spec_.noise_scale * rng.gaussian();
    }
    next = clip_state(next);
    Step out;
    out.next_state = next;
    out.terminal = in_goal(next);
    switch (spec_.reward) {
        case ToyReward::DistanceShaped:
            out.reward = -(next - spec_.goal).norm();
            break;
        case ToyReward::SparseGoal:
            out.reward = out.terminal ? 1.0 : 0.0;
            break;
    }
    return out;
}

Eigen::Vector3d augment(const Eigen::Vector2d& state, bool terminal) {
    return {state.x(), state.y(), terminal ? 1.0 : 0.0};
}

namespace {

Eigen::Vector2d scripted_action(const ToyEnv& env, const Eigen::Vector2d& state, Rng& rng) {
    // Step toward the goal with Gaussian jitter, clipped to the bound.
    Eigen::Vector2d dir = env.spec().goal - state;
    const double norm = dir.norm();
    if (norm > 1e-9) dir *= env.spec().action_bound / norm;
    dir.x() += 0.3 * env.spec().action_bound * rng.gaussian();
    dir.y() += 0.3 * env.spec().action_bound * rng.gaussian();
    return env.clip_action(dir);
}

Eigen::Vector2d random_action(const ToyEnv& env, Rng& rng) {
    const double b = env.spec().action_bound;
    return {rng.uniform(-b, b), rng.uniform(-b, b)};
}

}  // namespace

ToyDataset generate_toy_dataset(const ToyEnv& env, int scripted_episodes, int random_episodes,
                                std::uint64_t seed) {
    ToyDataset data;
    Rng rng = Rng(seed).split("toy-dataset");
    const int total = scripted_episodes + random_episodes;
    for (int ep = 0; ep < total; ++ep) {
        const bool scripted = ep < scripted_episodes;
        data.episode_starts.push_back(data.transitions.size());
        Eigen::Vector2d s = env.reset(rng);
        Eigen::Vector2d a = scripted ? scripted_action(env, s, rng) : random_action(env, rng);
        for (int t = 0; t < env.spec().max_episode_len; ++t) {
            const ToyEnv::Step step = env.step(s, a, rng);
            ToyTransition tr;
            tr.state = augment(s, false);
            tr.action = a;
            tr.reward = step.reward;
            tr.next_state = augment(step.next_state, step.terminal);
            tr.terminal = step.terminal;
            const bool last = step.terminal || t + 1 == env.spec().max_episode_len;
            if (!last) {
                tr.next_action = scripted ? scripted_action(env, step.next_state, rng)
                                          : random_action(env, rng);
                tr.has_next_action = true;
            } else {
                tr.next_action.setZero();
            }
            data.transitions.push_back(tr);
            if (step.terminal) break;
            s = step.next_state;
            a = tr.has_next_action ? tr.next_action
                                   : (scripted ? scripted_action(env, s, rng)
                                               : random_action(env, rng));
            if (t + 1 == env.spec().max_episode_len) break;
        }
    }
    data.episode_starts.push_back(data.transitions.size());
    return data;
}

}  // namespace uhm
