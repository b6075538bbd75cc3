#include "uhm/horizon.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace uhm {

HorizonMeasure::HorizonMeasure(std::vector<double> weights, double gamma,
                               std::optional<GeometricTail> tail)
    : weights_(std::move(weights)), gamma_(gamma), tail_(std::move(tail)) {
    for (double w : weights_)
        if (w < 0.0) throw std::invalid_argument("HorizonMeasure: negative weight");
    if (tail_) {
        if (tail_->start < 1 || tail_->coef < 0.0 || tail_->ratio < 0.0 || tail_->ratio >= 1.0)
            throw std::invalid_argument("HorizonMeasure: malformed geometric tail");
        if (static_cast<int>(weights_.size()) >= tail_->start)
            throw std::invalid_argument("HorizonMeasure: finite prefix overlaps tail");
    }
    if (total_mass() > 1.0 + 1e-12)
        throw std::invalid_argument("HorizonMeasure: mass exceeds 1");
}

double HorizonMeasure::weight(int k) const {
    if (k < 1) throw std::invalid_argument("HorizonMeasure: horizon must be >= 1");
    if (k <= static_cast<int>(weights_.size())) return weights_[k - 1];
    if (tail_ && k >= tail_->start)
        return tail_->coef * std::pow(tail_->ratio, k - tail_->start);
    return 0.0;
}

double HorizonMeasure::total_mass() const {
    double m = 0.0;
    for (double w : weights_) m += w;
    if (tail_) m += tail_->coef / (1.0 - tail_->ratio);
    return m;
}

HorizonMeasure geometric_measure(double lambda, double gamma) {
    if (lambda < 0.0 || lambda >= 1.0)
        throw std::invalid_argument("geometric_measure: lambda must lie in [0,1)");
    if (gamma <= 0.0 || gamma >= 1.0)
        throw std::invalid_argument("geometric_measure: gamma must lie in (0,1)");
    if (lambda == 0.0) return HorizonMeasure({1.0}, gamma);
    return HorizonMeasure({}, gamma, GeometricTail{1, 1.0 - lambda, lambda * gamma});
}

HorizonMeasure nstep_measure(int n, double gamma) {
    if (n < 1) throw std::invalid_argument("nstep_measure: n must be >= 1");
    std::vector<double> w(n, 0.0);
    w[n - 1] = std::pow(gamma, n - 1);
    return HorizonMeasure(std::move(w), gamma);
}

HorizonMeasure winsorized_geometric_measure(double lambda, double gamma, int k_max) {
    if (k_max < 1) throw std::invalid_argument("winsorized_geometric_measure: k_max must be >= 1");
    if (lambda < 0.0 || lambda >= 1.0)
        throw std::invalid_argument("winsorized_geometric_measure: lambda must lie in [0,1)");
    if (gamma <= 0.0 || gamma > 1.0)
        throw std::invalid_argument("winsorized_geometric_measure: gamma must lie in (0,1]");
    const double lg = lambda * gamma;
    std::vector<double> w(k_max, 0.0);
    for (int k = 1; k < k_max; ++k) w[k - 1] = (1.0 - lambda) * std::pow(lg, k - 1);
    w[k_max - 1] = std::pow(lg, k_max - 1);
    return HorizonMeasure(std::move(w), gamma);
}

std::vector<double> xi_coefficients(const HorizonMeasure& nu, double gamma, int K) {
    if (K < 1) throw std::invalid_argument("xi_coefficients: K must be >= 1");
    // xi(k) = gamma^(k-1) (1 - c_k) with c_k = sum_{i<=k} nu(i) gamma^(1-i),
    // accumulated incrementally so the whole sequence is O(K).
    std::vector<double> xi(K);
    double c = 0.0;
    double gpow = 1.0;  // gamma^(k-1)
    for (int k = 1; k <= K; ++k) {
        c += nu.weight(k) / gpow;
        xi[k - 1] = gpow * (1.0 - c);
        gpow *= gamma;
    }
    return xi;
}

HorizonDistribution::HorizonDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("HorizonDistribution: empty support");
    double total = 0.0;
    for (double p : probs_) {
        if (p < 0.0) throw std::invalid_argument("HorizonDistribution: negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("HorizonDistribution: probabilities sum to " +
                                    std::to_string(total));
}

double HorizonDistribution::prob(int k) const {
    if (k < 1 || k > k_max()) return 0.0;
    return probs_[k - 1];
}

HorizonDistribution winsorized_geometric_distribution(double lambda, double gamma, int k_max) {
    if (k_max < 1)
        throw std::invalid_argument("winsorized_geometric_distribution: k_max must be >= 1");
    const double lg = lambda * gamma;
    if (lg < 0.0 || lg >= 1.0)
        throw std::invalid_argument("winsorized_geometric_distribution: lambda*gamma out of range");
    std::vector<double> p(k_max, 0.0);
    double remaining = 1.0;
    for (int k = 1; k < k_max; ++k) {
        p[k - 1] = (1.0 - lg) * std::pow(lg, k - 1);
        remaining -= p[k - 1];
    }
    p[k_max - 1] = remaining;
    return HorizonDistribution(std::move(p));
}

ImportanceRatios importance_ratios(const HorizonMeasure& nu, const std::vector<double>& xi,
                                   const HorizonDistribution& p_h) {
    const int k_max = p_h.k_max();
    if (static_cast<int>(xi.size()) < k_max)
        throw std::invalid_argument("importance_ratios: xi sequence shorter than p_H support");
    ImportanceRatios out;
    out.w_xi.resize(k_max);
    out.w_nu.resize(k_max);
    for (int k = 1; k <= k_max; ++k) {
        const double p = p_h.prob(k);
        const double nuk = nu.weight(k);
        const double xik = xi[k - 1];
        if (p <= 0.0) {
            if (nuk != 0.0 || xik != 0.0)
                throw std::invalid_argument(
                    "importance_ratios: p_H(k) = 0 but nu or xi is nonzero at k = " +
                    std::to_string(k));
            out.w_xi[k - 1] = 0.0;
            out.w_nu[k - 1] = 0.0;
        } else {
            out.w_xi[k - 1] = xik / p;
            out.w_nu[k - 1] = nuk / p;
        }
    }
    // Mass beyond p_H's support must also be representable.
    if (nu.weight(k_max + 1) != 0.0)
        throw std::invalid_argument("importance_ratios: nu has mass beyond p_H support");
    return out;
}

int winsorized_kmax(double lambda, double gamma, double q) {
    if (q <= 0.0 || q >= 1.0) throw std::invalid_argument("winsorized_kmax: q must lie in (0,1)");
    const double lg = lambda * gamma;
    if (lg < 0.0 || lg >= 1.0)
        throw std::invalid_argument("winsorized_kmax: lambda*gamma must lie in [0,1)");
    if (lg == 0.0) return 1;
    const double k = std::ceil(std::log(q) / std::log(lg) - 1e-12);
    return std::max(1, static_cast<int>(k));
}

int sample_horizon(const HorizonDistribution& p_h, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int k = 1; k <= p_h.k_max(); ++k) {
        acc += p_h.prob(k);
        if (u < acc) return k;
    }
    return p_h.k_max();
}

double schedule_lambda(double r, double lambda_f) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("schedule_lambda: r must lie in [0,1]");
    if (lambda_f < 0.0 || lambda_f >= 1.0)
        throw std::invalid_argument("schedule_lambda: lambda_f must lie in [0,1)");
    return r * lambda_f / (1.0 - (1.0 - r) * lambda_f);
}

}  // namespace uhm
