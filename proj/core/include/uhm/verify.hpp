#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uhm/horizon.hpp"
#include "uhm/mdp.hpp"

namespace uhm {

/// Outcome of one invariant check.  `observed` is the worst error found and
/// `bound` the tolerance it was held to.
struct CheckResult {
    std::string name;
    bool passed = false;
    double observed = 0.0;
    double bound = 0.0;
    std::string detail;
};

/// Random finite MDP with row-stochastic transitions, rewards in [-1, 1],
/// no terminal states, and a uniform initial distribution.
TabularMdp random_mdp(int num_states, int num_actions, double gamma, Rng& rng);

/// Random row-stochastic policy.
TabularPolicy random_policy(int num_states, int num_actions, Rng& rng);

/// Random finite-support measure with total mass drawn in (0, 1].
HorizonMeasure random_subprob_measure(int max_support, double gamma, Rng& rng);

/// Expectation of the n-step return target by explicit enumeration of all
/// length-n action/state paths: sum_t gamma^t r_t + gamma^n Q(s_n, a_n).
double enumerate_nstep_target(const TabularMdp& mdp, const TabularPolicy& policy,
                              const QTable& q, int s, int a, int n);

/// Exact-identity checks over the tabular operators and measures:
/// coefficient identities, contraction and fixed-point convergence,
/// special-case collapses, measure recursions, target unbiasedness,
/// winsorized closed forms and the trace schedule.
std::vector<CheckResult> verify_core(std::uint64_t seed);

/// Central finite-difference validation of the four training-loss
/// gradients (flow matching, critic, actor, reward model).
std::vector<CheckResult> verify_neural(std::uint64_t seed);

}  // namespace uhm
