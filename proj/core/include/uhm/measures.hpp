#pragma once

#include <Eigen/Dense>
#include <vector>

#include "uhm/horizon.hpp"
#include "uhm/mdp.hpp"

namespace uhm {

/// Exact n-step transition measures m(x|s,a,n) for n = 1..N_max.
/// Row (s*A + a) of table(n) is the distribution of the state reached n
/// steps after taking a in s and then following the policy.
class NStepMeasureTable {
public:
    NStepMeasureTable(std::vector<Eigen::MatrixXd> tables, int num_states, int num_actions);

    [[nodiscard]] int depth() const { return static_cast<int>(tables_.size()); }
    [[nodiscard]] const Eigen::MatrixXd& table(int n) const;
    [[nodiscard]] Eigen::VectorXd row(int s, int a, int n) const;
    [[nodiscard]] int num_states() const { return num_states_; }
    [[nodiscard]] int num_actions() const { return num_actions_; }

private:
    std::vector<Eigen::MatrixXd> tables_;  // tables_[n-1] is (S*A) x S
    int num_states_;
    int num_actions_;
};

/// Normalized successor measure rows m(x|s,a) under discount gamma_tilde.
struct GhmMeasure {
    Eigen::MatrixXd m;  // (S*A) x S
    double gamma_tilde = 0.0;
};

/// m[n] via the state-marginal chain: m[n](x|s,a) = (P M^(n-1))(x) with
/// M the on-policy state chain.
NStepMeasureTable nstep_measures_direct(const TabularMdp& mdp, const TabularPolicy& policy,
                                        int n_max);

/// m[n] via the bootstrap recursion m[n+1](x|s,a) = E_{s',a'}[m[n](x|s',a')]
/// evaluated exactly with the state-action kernel.
NStepMeasureTable nstep_measures_bootstrap(const TabularMdp& mdp, const TabularPolicy& policy,
                                           int n_max);

/// (1 - gt) * sum_k gt^k Pr(s_{k+1} = x | s, a, pi) by linear solve.
GhmMeasure successor_measure(const TabularMdp& mdp, const TabularPolicy& policy,
                             double gamma_tilde);

/// Horizon-weighted mixture sum_k p_H(k) m[k].
Eigen::MatrixXd marginal_measure(const NStepMeasureTable& table, const HorizonDistribution& p_h);

/// Inverse-CDF draw from m[n](.|s,a).
int sample_future(const NStepMeasureTable& table, int s, int a, int n, Rng& rng);

}  // namespace uhm
