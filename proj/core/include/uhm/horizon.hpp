#pragma once

#include <optional>
#include <vector>

#include "uhm/rng.hpp"

namespace uhm {

/// Exact geometric tail: nu(k) = coef * ratio^(k - start) for k >= start.
struct GeometricTail {
    int start = 1;
    double coef = 0.0;
    double ratio = 0.0;  // in [0, 1)
};

/// Sub-probability measure nu over horizons k >= 1, stored as a finite
/// prefix plus an optional exact geometric tail.  `gamma` is the discount
/// that pairs with nu when deriving the reward coefficients xi.
class HorizonMeasure {
public:
    HorizonMeasure(std::vector<double> weights, double gamma,
                   std::optional<GeometricTail> tail = std::nullopt);

    /// nu(k) for k >= 1 (exact, including the tail).
    [[nodiscard]] double weight(int k) const;

    /// Sum of all weights, tails summed in closed form.
    [[nodiscard]] double total_mass() const;

    /// Last horizon with nonzero finite-part weight; 0 for an empty prefix.
    [[nodiscard]] int finite_support() const { return static_cast<int>(weights_.size()); }

    [[nodiscard]] bool has_tail() const { return tail_.has_value(); }
    [[nodiscard]] const GeometricTail& tail() const { return *tail_; }
    [[nodiscard]] double gamma() const { return gamma_; }

private:
    std::vector<double> weights_;  // weights_[i] = nu(i + 1), valid below tail start
    double gamma_;
    std::optional<GeometricTail> tail_;
};

/// TD(lambda) measure nu(k) = (1 - lambda) (lambda gamma)^(k-1).
HorizonMeasure geometric_measure(double lambda, double gamma);

/// n-step measure: single atom gamma^(n-1) at k = n.
HorizonMeasure nstep_measure(int n, double gamma);

/// Geometric measure with all tail mass beyond k_max moved onto k_max.
HorizonMeasure winsorized_geometric_measure(double lambda, double gamma, int k_max);

/// xi(k) = gamma^(k-1) - sum_{i=1}^{k} gamma^(k-i) nu(i), for k = 1..K.
std::vector<double> xi_coefficients(const HorizonMeasure& nu, double gamma, int K);

/// Finite-support sampling distribution over horizons 1..k_max.
class HorizonDistribution {
public:
    explicit HorizonDistribution(std::vector<double> probs);

    [[nodiscard]] double prob(int k) const;
    [[nodiscard]] int k_max() const { return static_cast<int>(probs_.size()); }
    [[nodiscard]] const std::vector<double>& probs() const { return probs_; }

private:
    std::vector<double> probs_;  // probs_[i] = p_H(i + 1)
};

/// p_H(k) = (1 - lambda gamma)(lambda gamma)^(k-1) for k < k_max, remainder
/// at k_max: the law of min(Geom(1 - lambda gamma), k_max).
HorizonDistribution winsorized_geometric_distribution(double lambda, double gamma, int k_max);

struct ImportanceRatios {
    std::vector<double> w_xi;  // index k-1
    std::vector<double> w_nu;
};

/// w_xi(k) = xi(k)/p_H(k), w_nu(k) = nu(k)/p_H(k) over the support of p_H.
/// Throws if p_H(k) = 0 while nu(k) or xi(k) is nonzero.
ImportanceRatios importance_ratios(const HorizonMeasure& nu, const std::vector<double>& xi,
                                   const HorizonDistribution& p_h);

/// Smallest k >= 1 with upper-tail mass (lambda gamma)^k <= q.
int winsorized_kmax(double lambda, double gamma, double q);

/// Inverse-CDF draw from p_H.
int sample_horizon(const HorizonDistribution& p_h, Rng& rng);

/// lambda(r) = r lambda_f / (1 - (1 - r) lambda_f); lambda(0)=0, lambda(1)=lambda_f.
double schedule_lambda(double r, double lambda_f);

/// Progress-indexed trace schedule paired with a winsorization quantile.
struct LambdaSchedule {
    double lambda_f = 0.8;
    double q = 0.2;

    [[nodiscard]] double lambda_at(double r) const { return schedule_lambda(r, lambda_f); }
    [[nodiscard]] int kmax_at(double r, double gamma) const {
        return winsorized_kmax(lambda_at(r), gamma, q);
    }
};

}  // namespace uhm
