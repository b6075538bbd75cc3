#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <vector>

#include "uhm/rng.hpp"

namespace uhm {

/// Fully connected network with GELU gates on all hidden layers and a
/// linear output layer.  Columns of input/output matrices are samples.
struct Mlp {
    std::vector<int> widths;            // {in, hidden..., out}
    std::vector<Eigen::MatrixXd> w;     // w[l]: widths[l+1] x widths[l]
    std::vector<Eigen::VectorXd> b;

    static Mlp create(const std::vector<int>& widths, Rng& rng);

    [[nodiscard]] int input_dim() const { return widths.front(); }
    [[nodiscard]] int output_dim() const { return widths.back(); }
    [[nodiscard]] int param_count() const;

    [[nodiscard]] Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& flat);

    /// Forward pass without caching.
    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

/// Layer activations retained by mlp_forward for the backward pass.
struct MlpCache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
};

struct MlpGrads {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;

    static MlpGrads zeros_like(const Mlp& net);
    void add(const MlpGrads& other, double scale = 1.0);
    void scale(double factor);
    [[nodiscard]] Eigen::VectorXd flatten() const;
};

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& x, MlpCache& cache);

/// Reverse pass: accumulates parameter gradients into `grads` and returns
/// the gradient with respect to the input batch.
Eigen::MatrixXd mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& dy,
                             MlpGrads& grads);

/// Mean over the batch of the squared residual ||net(x) - t||^2.
/// Returns the loss and fills `grads` with its exact gradient.
double squared_error_gradient(const Mlp& net, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& targets, MlpGrads& grads);

/// Bias-corrected Adam over a flat parameter vector.
struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState create(int param_count, double lr = 3e-4);
};

/// One Adam step; returns the updated parameters.
Eigen::VectorXd adam_update(AdamState& state, const Eigen::VectorXd& params,
                            const Eigen::VectorXd& grads);

/// Live parameters with an exponential-moving-average shadow.
struct EmaPair {
    Mlp live;
    Mlp shadow;
    double decay = 0.005;

    static EmaPair create(Mlp net, double decay);
    /// shadow <- (1 - decay) shadow + decay * live, elementwise.
    void update();
};

/// Max relative error of `grads` against central finite differences of
/// `loss` over `probes` randomly chosen parameter coordinates.
double finite_difference_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                               const Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                               int probes, Rng& rng, double h = 1e-5);

/// Versioned little-endian binary checkpoint of one or more networks.
void save_checkpoint(std::ostream& out, const std::vector<const Mlp*>& nets);
std::vector<Mlp> load_checkpoint(std::istream& in);

}  // namespace uhm
