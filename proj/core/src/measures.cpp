#include "uhm/measures.hpp"

#include <stdexcept>
#include <string>

namespace uhm {

NStepMeasureTable::NStepMeasureTable(std::vector<Eigen::MatrixXd> tables, int num_states,
                                     int num_actions)
    : tables_(std::move(tables)), num_states_(num_states), num_actions_(num_actions) {
    if (tables_.empty()) throw std::invalid_argument("NStepMeasureTable: empty table");
    for (const auto& t : tables_)
        if (t.rows() != num_states_ * num_actions_ || t.cols() != num_states_)
            throw std::invalid_argument("NStepMeasureTable: shape mismatch");
}

const Eigen::MatrixXd& NStepMeasureTable::table(int n) const {
    if (n < 1 || n > depth())
        throw std::out_of_range("NStepMeasureTable: horizon " + std::to_string(n) +
                                " out of range");
    return tables_[n - 1];
}

Eigen::VectorXd NStepMeasureTable::row(int s, int a, int n) const {
    return table(n).row(s * num_actions_ + a).transpose();
}

NStepMeasureTable nstep_measures_direct(const TabularMdp& mdp, const TabularPolicy& policy,
                                        int n_max) {
    if (n_max < 1) throw std::invalid_argument("nstep_measures_direct: n_max must be >= 1");
    // On-policy state chain M(s, x) = sum_a pi(a|s) P(x|s,a).
    Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            chain.row(s) += policy.probs(s, a) * mdp.transition.row(mdp.sa_index(s, a));

    std::vector<Eigen::MatrixXd> tables;
    tables.reserve(n_max);
    tables.push_back(mdp.transition);  // m[1] = P
    for (int n = 2; n <= n_max; ++n) tables.push_back(tables.back() * chain);
    return NStepMeasureTable(std::move(tables), mdp.num_states, mdp.num_actions);
}

NStepMeasureTable nstep_measures_bootstrap(const TabularMdp& mdp, const TabularPolicy& policy,
                                           int n_max) {
    if (n_max < 1) throw std::invalid_argument("nstep_measures_bootstrap: n_max must be >= 1");
    const Eigen::MatrixXd d = state_action_kernel(mdp, policy);
    std::vector<Eigen::MatrixXd> tables;
    tables.reserve(n_max);
    tables.push_back(mdp.transition);
    for (int n = 2; n <= n_max; ++n) tables.push_back(d * tables.back());
    return NStepMeasureTable(std::move(tables), mdp.num_states, mdp.num_actions);
}

GhmMeasure successor_measure(const TabularMdp& mdp, const TabularPolicy& policy,
                             double gamma_tilde) {
    if (gamma_tilde <= 0.0 || gamma_tilde >= 1.0)
        throw std::invalid_argument("successor_measure: gamma_tilde must lie in (0,1)");
    const Eigen::MatrixXd d = state_action_kernel(mdp, policy);
    const int sa = mdp.num_sa();
    // m = (1 - gt) (I - gt D)^(-1) P
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(sa, sa) - gamma_tilde * d;
    GhmMeasure out;
    out.gamma_tilde = gamma_tilde;
    out.m = (1.0 - gamma_tilde) * system.partialPivLu().solve(mdp.transition);
    return out;
}

Eigen::MatrixXd marginal_measure(const NStepMeasureTable& table, const HorizonDistribution& p_h) {
    if (p_h.k_max() > table.depth())
        throw std::invalid_argument("marginal_measure: p_H support exceeds table depth");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(table.table(1).rows(), table.table(1).cols());
    for (int k = 1; k <= p_h.k_max(); ++k) out += p_h.prob(k) * table.table(k);
    return out;
}

int sample_future(const NStepMeasureTable& table, int s, int a, int n, Rng& rng) {
    const Eigen::MatrixXd& m = table.table(n);
    const int row = s * table.num_actions() + a;
    const double u = rng.uniform();
    double acc = 0.0;
    for (int x = 0; x < m.cols(); ++x) {
        acc += m(row, x);
        if (u < acc) return x;
    }
    return static_cast<int>(m.cols()) - 1;
}

}  // namespace uhm
