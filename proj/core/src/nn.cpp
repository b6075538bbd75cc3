#include "uhm/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace uhm {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / kSqrt2)); }

double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x / kSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace

Mlp Mlp::create(const std::vector<int>& widths, Rng& rng) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
    Mlp net;
    net.widths = widths;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const double scale = std::sqrt(2.0 / fan_in);
        Eigen::MatrixXd wl(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) wl(i, j) = scale * rng.gaussian();
        net.w.push_back(std::move(wl));
        net.b.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

int Mlp::param_count() const {
    int n = 0;
    for (std::size_t l = 0; l < w.size(); ++l)
        n += static_cast<int>(w[l].size() + b[l].size());
    return n;
}

Eigen::VectorXd Mlp::flatten() const {
    Eigen::VectorXd flat(param_count());
    int pos = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        for (int i = 0; i < w[l].rows(); ++i)
            for (int j = 0; j < w[l].cols(); ++j) flat[pos++] = w[l](i, j);
        for (int i = 0; i < b[l].size(); ++i) flat[pos++] = b[l][i];
    }
    return flat;
}

void Mlp::unflatten(const Eigen::VectorXd& flat) {
    if (flat.size() != param_count()) throw std::invalid_argument("Mlp: flat size mismatch");
    int pos = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        for (int i = 0; i < w[l].rows(); ++i)
            for (int j = 0; j < w[l].cols(); ++j) w[l](i, j) = flat[pos++];
        for (int i = 0; i < b[l].size(); ++i) b[l][i] = flat[pos++];
    }
}

Eigen::MatrixXd Mlp::apply(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim()) throw std::invalid_argument("Mlp: input width mismatch");
    Eigen::MatrixXd h = x;
    for (std::size_t l = 0; l < w.size(); ++l) {
        Eigen::MatrixXd z = (w[l] * h).colwise() + b[l];
        if (l + 1 < w.size()) z = z.unaryExpr([](double v) { return gelu(v); });
        h = std::move(z);
    }
    return h;
}

Eigen::VectorXd Mlp::apply(const Eigen::VectorXd& x) const {
    return Eigen::VectorXd(apply(Eigen::MatrixXd(x)));
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
    MlpGrads g;
    for (std::size_t l = 0; l < net.w.size(); ++l) {
        g.w.push_back(Eigen::MatrixXd::Zero(net.w[l].rows(), net.w[l].cols()));
        g.b.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
    }
    return g;
}

void MlpGrads::add(const MlpGrads& other, double s) {
    for (std::size_t l = 0; l < w.size(); ++l) {
        w[l] += s * other.w[l];
        b[l] += s * other.b[l];
    }
}

void MlpGrads::scale(double factor) {
    for (std::size_t l = 0; l < w.size(); ++l) {
        w[l] *= factor;
        b[l] *= factor;
    }
}

Eigen::VectorXd MlpGrads::flatten() const {
    int n = 0;
    for (std::size_t l = 0; l < w.size(); ++l) n += static_cast<int>(w[l].size() + b[l].size());
    Eigen::VectorXd flat(n);
    int pos = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        for (int i = 0; i < w[l].rows(); ++i)
            for (int j = 0; j < w[l].cols(); ++j) flat[pos++] = w[l](i, j);
        for (int i = 0; i < b[l].size(); ++i) flat[pos++] = b[l][i];
    }
    return flat;
}

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& x, MlpCache& cache) {
    if (x.rows() != net.input_dim()) throw std::invalid_argument("mlp_forward: width mismatch");
    cache.inputs.clear();
    cache.pre.clear();
    Eigen::MatrixXd h = x;
    for (std::size_t l = 0; l < net.w.size(); ++l) {
        cache.inputs.push_back(h);
        Eigen::MatrixXd z = (net.w[l] * h).colwise() + net.b[l];
        cache.pre.push_back(z);
        if (l + 1 < net.w.size()) z = z.unaryExpr([](double v) { return gelu(v); });
        h = std::move(z);
    }
    return h;
}

Eigen::MatrixXd mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& dy,
                             MlpGrads& grads) {
    Eigen::MatrixXd delta = dy;
    for (std::size_t li = net.w.size(); li-- > 0;) {
        if (li + 1 < net.w.size())
            delta = delta.cwiseProduct(
                cache.pre[li].unaryExpr([](double v) { return gelu_grad(v); }));
        grads.w[li] += delta * cache.inputs[li].transpose();
        grads.b[li] += delta.rowwise().sum();
        if (li > 0) delta = net.w[li].transpose() * delta;
        else delta = net.w[0].transpose() * delta;
    }
    return delta;
}

double squared_error_gradient(const Mlp& net, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& targets, MlpGrads& grads) {
    MlpCache cache;
    const Eigen::MatrixXd y = mlp_forward(net, x, cache);
    const Eigen::MatrixXd resid = y - targets;
    const double batch = static_cast<double>(x.cols());
    const double loss = resid.squaredNorm() / batch;
    mlp_backward(net, cache, (2.0 / batch) * resid, grads);
    return loss;
}

AdamState AdamState::create(int param_count, double lr) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(param_count);
    s.v = Eigen::VectorXd::Zero(param_count);
    s.lr = lr;
    return s;
}

Eigen::VectorXd adam_update(AdamState& state, const Eigen::VectorXd& params,
                            const Eigen::VectorXd& grads) {
    if (params.size() != state.m.size() || grads.size() != state.m.size())
        throw std::invalid_argument("adam_update: size mismatch");
    ++state.step;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
    const double bc1 = 1.0 - std::pow(state.beta1, state.step);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step);
    const Eigen::VectorXd m_hat = state.m / bc1;
    const Eigen::VectorXd v_hat = state.v / bc2;
    return params -
           state.lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
}

EmaPair EmaPair::create(Mlp net, double decay) {
    EmaPair pair;
    pair.live = net;
    pair.shadow = std::move(net);
    pair.decay = decay;
    return pair;
}

void EmaPair::update() {
    for (std::size_t l = 0; l < live.w.size(); ++l) {
        shadow.w[l] = (1.0 - decay) * shadow.w[l] + decay * live.w[l];
        shadow.b[l] = (1.0 - decay) * shadow.b[l] + decay * live.b[l];
    }
}

double finite_difference_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                               const Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                               int probes, Rng& rng, double h) {
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        const auto i = static_cast<Eigen::Index>(rng.index(params.size()));
        Eigen::VectorXd plus = params;
        Eigen::VectorXd minus = params;
        plus[i] += h;
        minus[i] -= h;
        const double fd = (loss(plus) - loss(minus)) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grads[i]), 1e-8});
        worst = std::max(worst, std::abs(fd - grads[i]) / denom);
    }
    return worst;
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& out, double d) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(d));
    std::memcpy(&bits, &d, 8);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

double read_f64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

constexpr char kMagic[4] = {'U', 'H', 'M', 'W'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(std::ostream& out, const std::vector<const Mlp*>& nets) {
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(nets.size()));
    for (const Mlp* net : nets) {
        write_u32(out, static_cast<std::uint32_t>(net->widths.size()));
        for (int wd : net->widths) write_u32(out, static_cast<std::uint32_t>(wd));
        for (std::size_t l = 0; l < net->w.size(); ++l) {
            for (int i = 0; i < net->w[l].rows(); ++i)
                for (int j = 0; j < net->w[l].cols(); ++j) write_f64(out, net->w[l](i, j));
            for (int i = 0; i < net->b[l].size(); ++i) write_f64(out, net->b[l][i]);
        }
    }
}

std::vector<Mlp> load_checkpoint(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic");
    if (read_u32(in) != kVersion) throw std::runtime_error("load_checkpoint: unsupported version");
    const std::uint32_t count = read_u32(in);
    std::vector<Mlp> nets;
    for (std::uint32_t n = 0; n < count; ++n) {
        const std::uint32_t nwidths = read_u32(in);
        std::vector<int> widths(nwidths);
        for (auto& wd : widths) wd = static_cast<int>(read_u32(in));
        Mlp net;
        net.widths = widths;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            Eigen::MatrixXd wl(widths[l + 1], widths[l]);
            for (int i = 0; i < wl.rows(); ++i)
                for (int j = 0; j < wl.cols(); ++j) wl(i, j) = read_f64(in);
            Eigen::VectorXd bl(widths[l + 1]);
            for (int i = 0; i < bl.size(); ++i) bl[i] = read_f64(in);
            net.w.push_back(std::move(wl));
            net.b.push_back(std::move(bl));
        }
        if (!in) throw std::runtime_error("load_checkpoint: truncated stream");
        nets.push_back(std::move(net));
    }
    return nets;
}

}  // namespace uhm
