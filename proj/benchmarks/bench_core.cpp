#include <benchmark/benchmark.h>

#include "uhm/agent.hpp"
#include "uhm/measures.hpp"
#include "uhm/value.hpp"
#include "uhm/verify.hpp"

using namespace uhm;

namespace {

struct Fixture {
    TabularMdp mdp;
    TabularPolicy policy;
    QTable q;
    HorizonMeasure nu;

    explicit Fixture(int states) : nu(winsorized_geometric_measure(0.8, 0.95, 8)) {
        Rng rng(1);
        mdp = random_mdp(states, 4, 0.95, rng);
        policy = random_policy(states, 4, rng);
        q = QTable::zeros(states, 4);
        for (int s = 0; s < states; ++s)
            for (int a = 0; a < 4; ++a) q.values(s, a) = rng.uniform(-1.0, 1.0);
    }
};

void BM_NuBellmanBackup(benchmark::State& state) {
    const Fixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        QTable out = apply_nu_bellman(f.mdp, f.policy, f.q, f.nu);
        benchmark::DoNotOptimize(out.values.data());
    }
}
BENCHMARK(BM_NuBellmanBackup)->Arg(25)->Arg(100);

void BM_NStepMeasureTables(benchmark::State& state) {
    const Fixture f(25);
    const int depth = static_cast<int>(state.range(0));
    for (auto _ : state) {
        NStepMeasureTable table = nstep_measures_bootstrap(f.mdp, f.policy, depth);
        benchmark::DoNotOptimize(table.table(depth).data());
    }
}
BENCHMARK(BM_NStepMeasureTables)->Arg(8)->Arg(32);

void BM_ExactQSolve(benchmark::State& state) {
    const Fixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        QTable out = exact_q(f.mdp, f.policy);
        benchmark::DoNotOptimize(out.values.data());
    }
}
BENCHMARK(BM_ExactQSolve)->Arg(25)->Arg(100);

void BM_MlpForward(benchmark::State& state) {
    Rng rng(2);
    const Mlp net = Mlp::create({10, 64, 64, 3}, rng);
    Eigen::MatrixXd x(10, 64);
    for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        Eigen::MatrixXd y = net.apply(x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_MlpForward);

void BM_MlpBackward(benchmark::State& state) {
    Rng rng(3);
    const Mlp net = Mlp::create({10, 64, 64, 3}, rng);
    Eigen::MatrixXd x(10, 64);
    Eigen::MatrixXd t(3, 64);
    for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < t.size(); ++i) t(i) = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        MlpGrads grads = MlpGrads::zeros_like(net);
        const double loss = squared_error_gradient(net, x, t, grads);
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(BM_MlpBackward);

void BM_AgentTrainStep(benchmark::State& state) {
    const ToyEnv env(ToyEnvSpec{});
    const ToyDataset data = generate_toy_dataset(env, 20, 20, 4);
    AgentConfig cfg;
    Rng rng(5);
    AgentNets nets = AgentNets::create(cfg, rng);
    Rng step_rng = rng.split("bench");
    for (auto _ : state) {
        const ToyBatch batch = sample_toy_batch(data, cfg.batch, step_rng);
        const StepDiagnostics diag = train_step(nets, batch, 0.5, cfg, env.spec(), step_rng);
        benchmark::DoNotOptimize(diag.loss_q);
    }
}
BENCHMARK(BM_AgentTrainStep);

}  // namespace

BENCHMARK_MAIN();
