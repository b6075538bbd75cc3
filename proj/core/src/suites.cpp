#include "uhm/suites.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <functional>
#include <stdexcept>
#include <thread>

#include "uhm/agent.hpp"
#include "uhm/nn.hpp"
#include "uhm/toy_env.hpp"
#include "uhm/value.hpp"
#include "uhm/verify.hpp"

namespace uhm {

TabularPolicy greedy_mixture_policy(const TabularMdp& mdp, double epsilon) {
    // Value iteration to the optimal action values.
    QTable q = QTable::zeros(mdp.num_states, mdp.num_actions);
    for (int iter = 0; iter < 100000; ++iter) {
        QTable next = q;
        for (int s = 0; s < mdp.num_states; ++s)
            for (int a = 0; a < mdp.num_actions; ++a) {
                double backup = mdp.reward(s, a);
                for (int x = 0; x < mdp.num_states; ++x) {
                    const double p = mdp.transition(mdp.sa_index(s, a), x);
                    if (p > 0.0) backup += mdp.gamma * p * q.values.row(x).maxCoeff();
                }
                next.values(s, a) = backup;
            }
        const double delta = (next.values - q.values).cwiseAbs().maxCoeff();
        q = next;
        if (delta < 1e-13) break;
    }

    TabularPolicy pi;
    pi.probs = Eigen::MatrixXd::Constant(mdp.num_states, mdp.num_actions,
                                         epsilon / mdp.num_actions);
    for (int s = 0; s < mdp.num_states; ++s) {
        int best = 0;
        q.values.row(s).maxCoeff(&best);
        pi.probs(s, best) += 1.0 - epsilon;
    }
    pi.validate();
    return pi;
}

double policy_total_variation(const TabularPolicy& a, const TabularPolicy& b) {
    return 0.5 * (a.probs - b.probs).cwiseAbs().rowwise().sum().maxCoeff();
}

namespace {

/// Runs `tasks` with up to `jobs` workers; each task fills its own slot so
/// the combined output order does not depend on scheduling.
void run_parallel(const std::vector<std::function<void()>>& tasks, int jobs) {
    if (jobs <= 1 || tasks.size() <= 1) {
        for (const auto& task : tasks) task();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const int workers = std::min<int>(jobs, static_cast<int>(tasks.size()));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                try {
                    tasks[i]();
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<ResultRow> check_rows(const std::string& suite,
                                  const std::vector<CheckResult>& checks, std::uint64_t seed,
                                  bool& all_passed) {
    std::vector<ResultRow> rows;
    for (const auto& c : checks) {
        rows.push_back({suite, c.name, seed, 0, "pass", c.passed ? 1.0 : 0.0});
        rows.push_back({suite, c.name, seed, 0, "max_error", c.observed});
        if (!c.passed) all_passed = false;
    }
    return rows;
}

SuiteResult run_verify_suite(const ExperimentConfig& cfg, bool neural) {
    SuiteResult out;
    std::vector<std::vector<ResultRow>> slots(cfg.seeds.size());
    std::vector<std::uint8_t> passed(cfg.seeds.size(), 1);
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        tasks.emplace_back([&, i] {
            bool ok = true;
            const auto checks = neural ? verify_neural(cfg.seeds[i]) : verify_core(cfg.seeds[i]);
            slots[i] = check_rows(cfg.suite, checks, cfg.seeds[i], ok);
            passed[i] = ok ? 1 : 0;
        });
    run_parallel(tasks, cfg.jobs);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        out.rows.insert(out.rows.end(), slots[i].begin(), slots[i].end());
        if (!passed[i]) out.all_passed = false;
    }
    return out;
}

SuiteResult run_tabular_suite(const ExperimentConfig& cfg) {
    BenchmarkSpec spec;
    spec.kind = parse_benchmark_kind(cfg.tabular_env_kind);
    spec.size = cfg.tabular_env_size;
    spec.noise = cfg.tabular_env_noise;
    spec.gamma = cfg.tabular_env_gamma;
    const TabularMdp mdp = make_benchmark_mdp(spec);
    const TabularPolicy behavior = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
    const TabularPolicy eval_policy = greedy_mixture_policy(mdp, 0.1);

    struct Cell {
        std::string method;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& method : cfg.tabular_methods)
        for (const auto seed : cfg.seeds) cells.push_back({method, seed});

    std::vector<std::vector<ResultRow>> slots(cells.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < cells.size(); ++i)
        tasks.emplace_back([&, i] {
            const Cell& cell = cells[i];
            const Dataset data = generate_dataset(mdp, behavior, cfg.tabular_episodes,
                                                  cfg.tabular_max_len, cell.seed);
            LearningConfig lc;
            lc.method = parse_method(cell.method);
            lc.nstep = cfg.tabular_nstep;
            lc.lambda_f = cfg.tabular_lambda_f;
            lc.q_quantile = cfg.tabular_q;
            lc.step_size = cfg.tabular_step_size;
            lc.decay_tau = cfg.tabular_step_decay;
            lc.updates = cfg.tabular_updates;
            lc.eval_every = cfg.tabular_eval_every;
            lc.seed = cell.seed;
            lc.model_source =
                cfg.tabular_model == "exact" ? ModelSource::Exact : ModelSource::Empirical;
            const auto curve = run_tabular_learning(mdp, data, eval_policy, lc);
            for (const auto& pt : curve)
                slots[i].push_back(
                    {cfg.suite, cell.method, cell.seed, pt.step, "sup_error", pt.sup_error});
        });
    run_parallel(tasks, cfg.jobs);

    SuiteResult out;
    for (const auto& slot : slots) out.rows.insert(out.rows.end(), slot.begin(), slot.end());
    return out;
}

SuiteResult run_neural_toy_suite(const ExperimentConfig& cfg) {
    ToyEnvSpec spec;
    spec.noise_scale = cfg.neural_env_noise;
    spec.gamma = cfg.neural_gamma;
    const ToyEnv env(spec);

    AgentConfig ac;
    ac.hidden = cfg.neural_hidden;
    ac.lr = cfg.neural_lr;
    ac.batch = cfg.neural_batch;
    ac.gamma = cfg.neural_gamma;
    ac.lambda_f = cfg.neural_lambda_f;
    ac.q_quantile = cfg.neural_q;
    ac.beta = cfg.neural_beta;
    ac.sigma = cfg.neural_sigma;
    ac.alpha = cfg.neural_alpha;
    ac.train_steps = cfg.neural_train_steps;
    ac.eval_every = cfg.neural_eval_every;
    ac.eval_episodes = cfg.neural_eval_episodes;

    std::vector<std::vector<ResultRow>> slots(cfg.seeds.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        tasks.emplace_back([&, i] {
            const std::uint64_t seed = cfg.seeds[i];
            const ToyDataset data = generate_toy_dataset(env, cfg.neural_scripted_episodes,
                                                         cfg.neural_random_episodes, seed);
            const ToyRunResult result = train_toy_agent(env, data, ac, seed);
            for (const auto& row : result.metrics)
                slots[i].push_back({cfg.suite, "uhm_flow", seed, row.step, row.metric, row.value});
            slots[i].push_back({cfg.suite, "uhm_flow", seed, ac.train_steps, "final_success",
                                result.final_success});
            slots[i].push_back({cfg.suite, "uhm_flow", seed, ac.train_steps, "flow_n1_error",
                                result.flow_n1_error});
            if (!cfg.neural_checkpoint.empty()) {
                std::string path = cfg.neural_checkpoint;
                if (cfg.seeds.size() > 1) path += "." + std::to_string(seed);
                std::ofstream out(path, std::ios::binary);
                if (!out) throw std::runtime_error("cannot open checkpoint file: " + path);
                save_checkpoint(out, {&result.nets.flow.shadow, &result.nets.actor.shadow,
                                      &result.nets.critic.shadow, &result.nets.reward.shadow});
            }
        });
    run_parallel(tasks, cfg.jobs);

    SuiteResult out;
    for (const auto& slot : slots) out.rows.insert(out.rows.end(), slot.begin(), slot.end());
    return out;
}

}  // namespace

SuiteResult run_suite(const ExperimentConfig& cfg) {
    if (cfg.suite == "verify-core") return run_verify_suite(cfg, false);
    if (cfg.suite == "verify-neural") return run_verify_suite(cfg, true);
    if (cfg.suite == "tabular") return run_tabular_suite(cfg);
    if (cfg.suite == "neural-toy") return run_neural_toy_suite(cfg);
    throw std::invalid_argument("unknown suite: " + cfg.suite);
}

}  // namespace uhm
