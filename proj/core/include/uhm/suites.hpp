#pragma once

#include <string>
#include <vector>

#include "uhm/config.hpp"
#include "uhm/csv.hpp"
#include "uhm/mdp.hpp"

namespace uhm {

struct SuiteResult {
    std::vector<ResultRow> rows;
    bool all_passed = true;  // false when a verification check fails
};

/// Greedy policy for the optimal Q (by value iteration) mixed with the
/// uniform policy: pi = (1 - epsilon) greedy + epsilon uniform.
TabularPolicy greedy_mixture_policy(const TabularMdp& mdp, double epsilon);

/// Maximum over states of the total-variation distance between the two
/// policies' action distributions.
double policy_total_variation(const TabularPolicy& a, const TabularPolicy& b);

/// Runs the configured suite; rows come out in a fixed deterministic order
/// independent of the worker count.
SuiteResult run_suite(const ExperimentConfig& config);

}  // namespace uhm
