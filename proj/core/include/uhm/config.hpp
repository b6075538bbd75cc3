#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uhm {

/// Flat key-value experiment configuration with dotted section prefixes.
/// Unknown keys, type errors, and range violations are rejected with the
/// offending key named in the exception message.
struct ExperimentConfig {
    std::string suite = "verify-core";  // verify-core | verify-neural | tabular | neural-toy
    std::vector<std::uint64_t> seeds{1};
    std::string out_path;
    int jobs = 1;

    // tabular suite
    std::string tabular_env_kind = "gridworld";
    int tabular_env_size = 5;
    double tabular_env_noise = 0.2;
    double tabular_env_gamma = 0.95;
    std::vector<std::string> tabular_methods{"one_step",    "nstep",   "dtd_lambda",
                                             "mbtd_lambda", "ghm_mve", "uhm_nu"};
    int tabular_nstep = 3;
    double tabular_lambda_f = 0.8;
    double tabular_q = 0.2;
    double tabular_step_size = 0.1;
    double tabular_step_decay = 5000.0;  // decay time constant in updates; 0 = constant step
    int tabular_updates = 200000;
    int tabular_eval_every = 1000;
    int tabular_episodes = 2000;
    int tabular_max_len = 100;
    std::string tabular_model = "empirical";  // empirical | exact

    // neural-toy suite
    double neural_lambda_f = 0.8;
    double neural_q = 0.2;
    double neural_beta = 0.3;
    double neural_sigma = 0.1;
    double neural_alpha = 100.0;
    double neural_lr = 3e-4;
    int neural_batch = 64;
    double neural_gamma = 0.99;
    int neural_train_steps = 50000;
    int neural_eval_every = 5000;
    int neural_eval_episodes = 50;
    double neural_env_noise = 0.0;
    int neural_scripted_episodes = 200;
    int neural_random_episodes = 200;
    std::vector<int> neural_hidden{64, 64};
    std::string neural_checkpoint;  // optional output path

    /// Canonical text form; parse(serialize()) is the identity.
    [[nodiscard]] std::string serialize() const;
};

/// Parses the key-value document; throws std::invalid_argument on any
/// malformed line, unknown key, type error, or out-of-range value.
ExperimentConfig parse_config(const std::string& document);

/// Reads and parses a config file.
ExperimentConfig load_config(const std::string& path);

}  // namespace uhm
