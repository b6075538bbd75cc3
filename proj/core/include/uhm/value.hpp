#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "uhm/horizon.hpp"
#include "uhm/mdp.hpp"
#include "uhm/measures.hpp"

namespace uhm {

/// Per-horizon importance weights used in the one-sample target G.
struct TargetWeights {
    double w_xi = 0.0;
    double w_nu = 0.0;
    int horizon = 1;
};

/// Exact nu-Bellman backup: T Q = r + gamma * sum_k [xi(k) D^k r + nu(k) D^k q].
/// Finite supports are summed directly (with the residual geometric xi tail
/// in closed form); the pure geometric measure uses the resolvent solve.
QTable apply_nu_bellman(const TabularMdp& mdp, const TabularPolicy& policy, const QTable& q,
                        const HorizonMeasure& nu);

struct FixedPointResult {
    QTable q;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Iterates Q <- T Q until the sup-norm change drops below tol.
FixedPointResult nu_fixed_point(const TabularMdp& mdp, const TabularPolicy& policy,
                                const HorizonMeasure& nu, const QTable& q0, double tol,
                                int max_iter);

/// Exact expectation of the lambda-return: (I - lg D)^(-1) r + (1-lambda) gamma
/// D (I - lg D)^(-1) q with lg = lambda * gamma.
QTable td_lambda_operator(const TabularMdp& mdp, const TabularPolicy& policy, const QTable& q,
                          double lambda);

/// Model-based value expansion through the successor measure with
/// gamma_tilde = lambda * gamma, evaluated exactly.
QTable gamma_mve_operator(const TabularMdp& mdp, const TabularPolicy& policy, const QTable& q,
                          double lambda);

/// One-sample backup target: draws n ~ p_H, s_e ~ m[n](.|s,a), a_e ~ pi,
/// and returns r + gamma (w_xi R(s_e,a_e) + w_nu Q(s_e,a_e)).
double sample_target_gnu(int s, int a, double r, const NStepMeasureTable& table,
                         const TabularPolicy& policy, const QTable& q,
                         const Eigen::MatrixXd& reward_table, const HorizonMeasure& nu,
                         const std::vector<double>& xi, const HorizonDistribution& p_h,
                         double gamma, Rng& rng);

/// Exact expectation of sample_target_gnu over (n, s_e, a_e) by enumeration.
double enumerate_target_gnu(int s, int a, double r, const NStepMeasureTable& table,
                            const TabularPolicy& policy, const QTable& q,
                            const Eigen::MatrixXd& reward_table, const HorizonMeasure& nu,
                            const std::vector<double>& xi, const HorizonDistribution& p_h,
                            double gamma);

enum class Method { OneStep, NStep, DtdLambda, MbtdLambda, GhmMve, UhmNu };

enum class ModelSource { Exact, Empirical };

struct LearningConfig {
    Method method = Method::UhmNu;
    int nstep = 3;             // NStep only
    double lambda_f = 0.8;
    double q_quantile = 0.2;   // winsorization quantile (UhmNu / MbtdLambda)
    double step_size = 0.1;
    double decay_tau = 0.0;    // step at update t is step_size * tau/(tau + t); 0 = constant
    int updates = 100000;
    int eval_every = 1000;
    std::uint64_t seed = 0;
    ModelSource model_source = ModelSource::Empirical;
    bool synchronous = false;      // full-sweep expected updates (exact model only)
    bool schedule_trace = true;    // lambda scheduled over progress (UHM only)
};

struct LearningCurvePoint {
    int step = 0;
    double sup_error = 0.0;
};

/// Maximum-likelihood transition/reward model from counts; unseen (s,a)
/// pairs fall back to a zero-reward self-loop and are flagged.
struct EmpiricalModel {
    TabularMdp mdp;
    std::vector<std::uint8_t> unseen;  // per (s,a)
};

EmpiricalModel empirical_model(const TabularMdp& shape, const Dataset& data);

/// Runs stochastic TD updates for one method family and reports the
/// sup-norm error against exact_q(eval_policy) on an evaluation cadence.
std::vector<LearningCurvePoint> run_tabular_learning(const TabularMdp& mdp, const Dataset& data,
                                                     const TabularPolicy& eval_policy,
                                                     const LearningConfig& config);

/// Fixed point of the off-policy lambda-return operator along behavior
/// trajectories with on-policy bootstrap, by closed-form linear solve.
/// This is the biased limit DTD(lambda) converges to off-policy.
QTable dtd_lambda_fixed_point(const TabularMdp& mdp, const TabularPolicy& behavior,
                              const TabularPolicy& eval_policy, double lambda);

/// Method name as used in configs and CSV output.
const char* method_name(Method m);
Method parse_method(const std::string& name);

}  // namespace uhm
