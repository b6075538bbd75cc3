#include "uhm/mdp.hpp"

#include <cmath>
#include <stdexcept>

namespace uhm {

Eigen::VectorXd TabularMdp::reward_vector() const {
    Eigen::VectorXd r(num_sa());
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) r[sa_index(s, a)] = reward(s, a);
    return r;
}

void TabularMdp::validate(double tol) const {
    if (num_states <= 0 || num_actions <= 0)
        throw std::invalid_argument("TabularMdp: empty state or action space");
    if (transition.rows() != num_sa() || transition.cols() != num_states)
        throw std::invalid_argument("TabularMdp: transition shape mismatch");
    if (reward.rows() != num_states || reward.cols() != num_actions)
        throw std::invalid_argument("TabularMdp: reward shape mismatch");
    if (static_cast<int>(terminal.size()) != num_states)
        throw std::invalid_argument("TabularMdp: terminal flag count mismatch");
    if (initial_dist.size() != num_states)
        throw std::invalid_argument("TabularMdp: initial distribution size mismatch");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("TabularMdp: gamma must lie in (0,1)");
    if (transition.minCoeff() < 0.0)
        throw std::invalid_argument("TabularMdp: negative transition probability");
    for (int row = 0; row < transition.rows(); ++row) {
        if (std::abs(transition.row(row).sum() - 1.0) > tol)
            throw std::invalid_argument("TabularMdp: transition row " + std::to_string(row) +
                                        " does not sum to 1");
    }
    if (initial_dist.minCoeff() < 0.0 || std::abs(initial_dist.sum() - 1.0) > tol)
        throw std::invalid_argument("TabularMdp: initial distribution is not a probability vector");
}

void TabularPolicy::validate(double tol) const {
    if (probs.minCoeff() < 0.0)
        throw std::invalid_argument("TabularPolicy: negative probability");
    for (int s = 0; s < probs.rows(); ++s) {
        if (std::abs(probs.row(s).sum() - 1.0) > tol)
            throw std::invalid_argument("TabularPolicy: row " + std::to_string(s) +
                                        " does not sum to 1");
    }
}

int TabularPolicy::sample(int state, Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    const int n = static_cast<int>(probs.cols());
    for (int a = 0; a < n; ++a) {
        acc += probs(state, a);
        if (u < acc) return a;
    }
    return n - 1;
}

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions) {
    return TabularPolicy{Eigen::MatrixXd::Constant(num_states, num_actions,
                                                   1.0 / num_actions)};
}

Eigen::VectorXd QTable::flat() const {
    Eigen::VectorXd v(values.rows() * values.cols());
    for (int s = 0; s < values.rows(); ++s)
        for (int a = 0; a < values.cols(); ++a) v[s * values.cols() + a] = values(s, a);
    return v;
}

QTable QTable::from_flat(const Eigen::VectorXd& v, int num_states, int num_actions) {
    QTable q = QTable::zeros(num_states, num_actions);
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) q.values(s, a) = v[s * num_actions + a];
    return q;
}

Eigen::MatrixXd state_action_kernel(const TabularMdp& mdp, const TabularPolicy& policy) {
    if (policy.probs.rows() != mdp.num_states || policy.probs.cols() != mdp.num_actions)
        throw std::invalid_argument("state_action_kernel: policy shape mismatch");
    const int sa = mdp.num_sa();
    Eigen::MatrixXd d(sa, sa);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a) {
            const int row = mdp.sa_index(s, a);
            for (int sn = 0; sn < mdp.num_states; ++sn)
                for (int an = 0; an < mdp.num_actions; ++an)
                    d(row, mdp.sa_index(sn, an)) =
                        mdp.transition(row, sn) * policy.probs(sn, an);
        }
    return d;
}

QTable exact_q(const TabularMdp& mdp, const TabularPolicy& policy) {
    const Eigen::MatrixXd d = state_action_kernel(mdp, policy);
    const int sa = mdp.num_sa();
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(sa, sa) - mdp.gamma * d;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const Eigen::VectorXd r = mdp.reward_vector();
    const Eigen::VectorXd q = lu.solve(r);
    const double residual = (system * q - r).lpNorm<Eigen::Infinity>();
    if (!q.allFinite() || residual > 1e-10)
        throw std::runtime_error("exact_q: linear solve failed, residual " +
                                 std::to_string(residual));
    return QTable::from_flat(q, mdp.num_states, mdp.num_actions);
}

TabularMdp absorb_terminals(const TabularMdp& mdp) {
    TabularMdp out = mdp;
    for (int s = 0; s < mdp.num_states; ++s) {
        if (!mdp.terminal[s]) continue;
        for (int a = 0; a < mdp.num_actions; ++a) {
            out.transition.row(out.sa_index(s, a)).setZero();
            out.transition(out.sa_index(s, a), s) = 1.0;
            out.reward(s, a) = 0.0;
        }
    }
    return out;
}

namespace {

int sample_row(const Eigen::MatrixXd& probs, int row, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    const int n = static_cast<int>(probs.cols());
    for (int i = 0; i < n; ++i) {
        acc += probs(row, i);
        if (u < acc) return i;
    }
    return n - 1;
}

int sample_initial(const Eigen::VectorXd& dist, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        if (u < acc) return i;
    }
    return static_cast<int>(dist.size()) - 1;
}

}  // namespace

Dataset generate_dataset(const TabularMdp& mdp, const TabularPolicy& behavior,
                         int episodes, int max_len, std::uint64_t seed) {
    if (episodes < 1 || max_len < 1)
        throw std::invalid_argument("generate_dataset: episodes and max_len must be >= 1");
    Dataset data;
    Rng rng = Rng(seed).split("dataset");
    for (int ep = 0; ep < episodes; ++ep) {
        int s = sample_initial(mdp.initial_dist, rng);
        if (mdp.terminal[s]) continue;  // degenerate start, no episode recorded
        data.episode_starts.push_back(data.transitions.size());
        int a = behavior.sample(s, rng);
        for (int t = 0; t < max_len; ++t) {
            const int sn = sample_row(mdp.transition, mdp.sa_index(s, a), rng);
            const bool term = mdp.terminal[sn] != 0;
            const bool last = term || t + 1 == max_len;
            const int an = last ? -1 : behavior.sample(sn, rng);
            data.transitions.push_back({s, a, mdp.reward(s, a), sn, an, term});
            if (term) break;
            s = sn;
            a = an >= 0 ? an : behavior.sample(sn, rng);
        }
    }
    data.episode_starts.push_back(data.transitions.size());
    return data;
}

namespace {

// Shared gridworld builder: `blocked` marks wall cells, 4 actions
// (up, down, left, right); with probability `noise` the effect of the
// chosen action is replaced by a uniformly random one.
TabularMdp build_grid(int width, int height, const std::vector<std::uint8_t>& blocked,
                      int start_cell, int goal_cell, double noise, double gamma) {
    std::vector<int> cell_to_state(width * height, -1);
    std::vector<int> cells;
    for (int c = 0; c < width * height; ++c) {
        if (!blocked[c]) {
            cell_to_state[c] = static_cast<int>(cells.size());
            cells.push_back(c);
        }
    }
    const int n = static_cast<int>(cells.size());
    const int num_actions = 4;
    TabularMdp mdp;
    mdp.num_states = n;
    mdp.num_actions = num_actions;
    mdp.gamma = gamma;
    mdp.transition = Eigen::MatrixXd::Zero(n * num_actions, n);
    mdp.reward = Eigen::MatrixXd::Zero(n, num_actions);
    mdp.terminal.assign(n, 0);
    mdp.initial_dist = Eigen::VectorXd::Zero(n);

    const int goal = cell_to_state[goal_cell];
    mdp.terminal[goal] = 1;
    mdp.initial_dist[cell_to_state[start_cell]] = 1.0;

    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {-1, 1, 0, 0};
    auto step_cell = [&](int cell, int action) {
        const int x = cell % width, y = cell / width;
        const int nx = x + dx[action], ny = y + dy[action];
        if (nx < 0 || nx >= width || ny < 0 || ny >= height) return cell;
        const int nc = ny * width + nx;
        return blocked[nc] ? cell : nc;
    };

    for (int st = 0; st < n; ++st) {
        for (int a = 0; a < num_actions; ++a) {
            const int row = mdp.sa_index(st, a);
            for (int eff = 0; eff < num_actions; ++eff) {
                const double p =
                    (eff == a ? 1.0 - noise : 0.0) + noise / num_actions;
                const int ns = cell_to_state[step_cell(cells[st], eff)];
                mdp.transition(row, ns) += p;
            }
            mdp.reward(st, a) = mdp.transition(row, goal);
        }
    }
    return absorb_terminals(mdp);
}

}  // namespace

TabularMdp make_benchmark_mdp(const BenchmarkSpec& spec) {
    if (spec.size < 2) throw std::invalid_argument("make_benchmark_mdp: size must be >= 2");
    if (spec.noise < 0.0 || spec.noise >= 1.0)
        throw std::invalid_argument("make_benchmark_mdp: noise must lie in [0,1)");

    switch (spec.kind) {
        case BenchmarkKind::Chain: {
            // States 0..size-1, two actions (back, forward), goal at the end.
            const int n = spec.size;
            TabularMdp mdp;
            mdp.num_states = n;
            mdp.num_actions = 2;
            mdp.gamma = spec.gamma;
            mdp.transition = Eigen::MatrixXd::Zero(n * 2, n);
            mdp.reward = Eigen::MatrixXd::Zero(n, 2);
            mdp.terminal.assign(n, 0);
            mdp.terminal[n - 1] = 1;
            mdp.initial_dist = Eigen::VectorXd::Zero(n);
            mdp.initial_dist[0] = 1.0;
            for (int s = 0; s < n; ++s) {
                for (int a = 0; a < 2; ++a) {
                    const int row = mdp.sa_index(s, a);
                    for (int eff = 0; eff < 2; ++eff) {
                        const double p =
                            (eff == a ? 1.0 - spec.noise : 0.0) + spec.noise / 2.0;
                        const int ns = eff == 1 ? std::min(s + 1, n - 1) : std::max(s - 1, 0);
                        mdp.transition(row, ns) += p;
                    }
                    mdp.reward(s, a) = mdp.transition(row, n - 1);
                }
            }
            return absorb_terminals(mdp);
        }
        case BenchmarkKind::Gridworld: {
            const int w = spec.size;
            std::vector<std::uint8_t> blocked(w * w, 0);
            return build_grid(w, w, blocked, /*start=*/0, /*goal=*/w * w - 1,
                              spec.noise, spec.gamma);
        }
        case BenchmarkKind::FourRooms: {
            // Four rooms separated by walls along the middle row/column with
            // one doorway per wall segment.  Requires odd size >= 5.
            const int w = spec.size;
            if (w < 5 || w % 2 == 0)
                throw std::invalid_argument("make_benchmark_mdp: four_rooms needs odd size >= 5");
            const int mid = w / 2;
            std::vector<std::uint8_t> blocked(w * w, 0);
            for (int i = 0; i < w; ++i) {
                blocked[mid * w + i] = 1;  // horizontal wall
                blocked[i * w + mid] = 1;  // vertical wall
            }
            const int q = mid / 2;
            blocked[mid * w + q] = 0;                  // left doorway
            blocked[mid * w + (mid + 1 + q)] = 0;      // right doorway
            blocked[q * w + mid] = 0;                  // top doorway
            blocked[(mid + 1 + q) * w + mid] = 0;      // bottom doorway
            return build_grid(w, w, blocked, /*start=*/0, /*goal=*/w * w - 1,
                              spec.noise, spec.gamma);
        }
    }
    throw std::invalid_argument("make_benchmark_mdp: unknown kind");
}

BenchmarkKind parse_benchmark_kind(const std::string& name) {
    if (name == "chain") return BenchmarkKind::Chain;
    if (name == "gridworld") return BenchmarkKind::Gridworld;
    if (name == "four_rooms") return BenchmarkKind::FourRooms;
    throw std::invalid_argument("unknown benchmark kind: " + name);
}

}  // namespace uhm
