#include "uhm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace uhm {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected a number, got '" +
                                    value + "'");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected an integer, got '" +
                                    value + "'");
    }
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw std::invalid_argument("config key '" + key + "': " + what);
}

}  // namespace

ExperimentConfig parse_config(const std::string& document) {
    ExperimentConfig cfg;

    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"suite",
         [&](const std::string& k, const std::string& v) {
             require(v == "verify-core" || v == "verify-neural" || v == "tabular" ||
                         v == "neural-toy",
                     k, "unknown suite '" + v + "'");
             cfg.suite = v;
         }},
        {"seeds",
         [&](const std::string& k, const std::string& v) {
             cfg.seeds.clear();
             for (const auto& item : split_list(v)) {
                 const long long s = parse_int(k, item);
                 require(s >= 0, k, "seeds must be non-negative");
                 cfg.seeds.push_back(static_cast<std::uint64_t>(s));
             }
             require(!cfg.seeds.empty(), k, "at least one seed required");
         }},
        {"out", [&](const std::string&, const std::string& v) { cfg.out_path = v; }},
        {"jobs",
         [&](const std::string& k, const std::string& v) {
             cfg.jobs = static_cast<int>(parse_int(k, v));
             require(cfg.jobs >= 1, k, "jobs must be >= 1");
         }},
        {"tabular.env.kind",
         [&](const std::string& k, const std::string& v) {
             require(v == "chain" || v == "gridworld" || v == "four_rooms", k,
                     "unknown environment kind '" + v + "'");
             cfg.tabular_env_kind = v;
         }},
        {"tabular.env.size",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_env_size = static_cast<int>(parse_int(k, v));
             require(cfg.tabular_env_size >= 2, k, "size must be >= 2");
         }},
        {"tabular.env.noise",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_env_noise = parse_double(k, v);
             require(cfg.tabular_env_noise >= 0.0 && cfg.tabular_env_noise < 1.0, k,
                     "noise must lie in [0,1)");
         }},
        {"tabular.env.gamma",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_env_gamma = parse_double(k, v);
             require(cfg.tabular_env_gamma > 0.0 && cfg.tabular_env_gamma < 1.0, k,
                     "gamma must lie in (0,1)");
         }},
        {"tabular.methods",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_methods = split_list(v);
             require(!cfg.tabular_methods.empty(), k, "at least one method required");
             for (const auto& m : cfg.tabular_methods)
                 require(m == "one_step" || m == "nstep" || m == "dtd_lambda" ||
                             m == "mbtd_lambda" || m == "ghm_mve" || m == "uhm_nu",
                         k, "unknown method '" + m + "'");
         }},
        {"tabular.nstep",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_nstep = static_cast<int>(parse_int(k, v));
             require(cfg.tabular_nstep >= 1, k, "nstep must be >= 1");
         }},
        {"tabular.lambda_f",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_lambda_f = parse_double(k, v);
             require(cfg.tabular_lambda_f >= 0.0 && cfg.tabular_lambda_f < 1.0, k,
                     "lambda_f must lie in [0,1)");
         }},
        {"tabular.q",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_q = parse_double(k, v);
             require(cfg.tabular_q > 0.0 && cfg.tabular_q < 1.0, k, "q must lie in (0,1)");
         }},
        {"tabular.step_size",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_step_size = parse_double(k, v);
             require(cfg.tabular_step_size > 0.0 && cfg.tabular_step_size <= 1.0, k,
                     "step_size must lie in (0,1]");
         }},
        {"tabular.step_decay",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_step_decay = parse_double(k, v);
             require(cfg.tabular_step_decay >= 0.0, k, "step_decay must be non-negative");
         }},
        {"tabular.updates",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_updates = static_cast<int>(parse_int(k, v));
             require(cfg.tabular_updates >= 1, k, "updates must be >= 1");
         }},
        {"tabular.eval_every",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_eval_every = static_cast<int>(parse_int(k, v));
             require(cfg.tabular_eval_every >= 1, k, "eval_every must be >= 1");
         }},
        {"tabular.episodes",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_episodes = static_cast<int>(parse_int(k, v));
             require(cfg.tabular_episodes >= 1, k, "episodes must be >= 1");
         }},
        {"tabular.max_len",
         [&](const std::string& k, const std::string& v) {
             cfg.tabular_max_len = static_cast<int>(parse_int(k, v));
             require(cfg.tabular_max_len >= 1, k, "max_len must be >= 1");
         }},
        {"tabular.model",
         [&](const std::string& k, const std::string& v) {
             require(v == "empirical" || v == "exact", k, "model must be empirical or exact");
             cfg.tabular_model = v;
         }},
        {"neural.lambda_f",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_lambda_f = parse_double(k, v);
             require(cfg.neural_lambda_f >= 0.0 && cfg.neural_lambda_f < 1.0, k,
                     "lambda_f must lie in [0,1)");
         }},
        {"neural.q",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_q = parse_double(k, v);
             require(cfg.neural_q > 0.0 && cfg.neural_q < 1.0, k, "q must lie in (0,1)");
         }},
        {"neural.beta",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_beta = parse_double(k, v);
             require(cfg.neural_beta >= 0.0 && cfg.neural_beta <= 1.0, k,
                     "beta must lie in [0,1]");
         }},
        {"neural.sigma",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_sigma = parse_double(k, v);
             require(cfg.neural_sigma >= 0.0, k, "sigma must be non-negative");
         }},
        {"neural.alpha",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_alpha = parse_double(k, v);
             require(cfg.neural_alpha >= 0.0, k, "alpha must be non-negative");
         }},
        {"neural.lr",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_lr = parse_double(k, v);
             require(cfg.neural_lr > 0.0, k, "lr must be positive");
         }},
        {"neural.batch",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_batch = static_cast<int>(parse_int(k, v));
             require(cfg.neural_batch >= 1, k, "batch must be >= 1");
         }},
        {"neural.gamma",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_gamma = parse_double(k, v);
             require(cfg.neural_gamma > 0.0 && cfg.neural_gamma < 1.0, k,
                     "gamma must lie in (0,1)");
         }},
        {"neural.train_steps",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_train_steps = static_cast<int>(parse_int(k, v));
             require(cfg.neural_train_steps >= 1, k, "train_steps must be >= 1");
         }},
        {"neural.eval_every",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_eval_every = static_cast<int>(parse_int(k, v));
             require(cfg.neural_eval_every >= 1, k, "eval_every must be >= 1");
         }},
        {"neural.eval_episodes",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_eval_episodes = static_cast<int>(parse_int(k, v));
             require(cfg.neural_eval_episodes >= 1, k, "eval_episodes must be >= 1");
         }},
        {"neural.env.noise",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_env_noise = parse_double(k, v);
             require(cfg.neural_env_noise >= 0.0, k, "noise must be non-negative");
         }},
        {"neural.scripted_episodes",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_scripted_episodes = static_cast<int>(parse_int(k, v));
             require(cfg.neural_scripted_episodes >= 0, k, "must be non-negative");
         }},
        {"neural.random_episodes",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_random_episodes = static_cast<int>(parse_int(k, v));
             require(cfg.neural_random_episodes >= 0, k, "must be non-negative");
         }},
        {"neural.hidden",
         [&](const std::string& k, const std::string& v) {
             cfg.neural_hidden.clear();
             for (const auto& item : split_list(v)) {
                 const long long h = parse_int(k, item);
                 require(h >= 1, k, "hidden widths must be >= 1");
                 cfg.neural_hidden.push_back(static_cast<int>(h));
             }
             require(!cfg.neural_hidden.empty(), k, "at least one hidden width required");
         }},
        {"neural.checkpoint",
         [&](const std::string&, const std::string& v) { cfg.neural_checkpoint = v; }},
    };

    std::stringstream ss(document);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": unknown key '" + key + "'");
        it->second(key, value);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

namespace {

std::string fmt(double d) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", d);
    return buf;
}

}  // namespace

std::string ExperimentConfig::serialize() const {
    std::ostringstream out;
    out << "suite = " << suite << "\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
    out << "\n";
    if (!out_path.empty()) out << "out = " << out_path << "\n";
    out << "jobs = " << jobs << "\n";
    out << "tabular.env.kind = " << tabular_env_kind << "\n";
    out << "tabular.env.size = " << tabular_env_size << "\n";
    out << "tabular.env.noise = " << fmt(tabular_env_noise) << "\n";
    out << "tabular.env.gamma = " << fmt(tabular_env_gamma) << "\n";
    out << "tabular.methods = ";
    for (std::size_t i = 0; i < tabular_methods.size(); ++i)
        out << (i ? "," : "") << tabular_methods[i];
    out << "\n";
    out << "tabular.nstep = " << tabular_nstep << "\n";
    out << "tabular.lambda_f = " << fmt(tabular_lambda_f) << "\n";
    out << "tabular.q = " << fmt(tabular_q) << "\n";
    out << "tabular.step_size = " << fmt(tabular_step_size) << "\n";
    out << "tabular.step_decay = " << fmt(tabular_step_decay) << "\n";
    out << "tabular.updates = " << tabular_updates << "\n";
    out << "tabular.eval_every = " << tabular_eval_every << "\n";
    out << "tabular.episodes = " << tabular_episodes << "\n";
    out << "tabular.max_len = " << tabular_max_len << "\n";
    out << "tabular.model = " << tabular_model << "\n";
    out << "neural.lambda_f = " << fmt(neural_lambda_f) << "\n";
    out << "neural.q = " << fmt(neural_q) << "\n";
    out << "neural.beta = " << fmt(neural_beta) << "\n";
    out << "neural.sigma = " << fmt(neural_sigma) << "\n";
    out << "neural.alpha = " << fmt(neural_alpha) << "\n";
    out << "neural.lr = " << fmt(neural_lr) << "\n";
    out << "neural.batch = " << neural_batch << "\n";
    out << "neural.gamma = " << fmt(neural_gamma) << "\n";
    out << "neural.train_steps = " << neural_train_steps << "\n";
    out << "neural.eval_every = " << neural_eval_every << "\n";
    out << "neural.eval_episodes = " << neural_eval_episodes << "\n";
    out << "neural.env.noise = " << fmt(neural_env_noise) << "\n";
    out << "neural.scripted_episodes = " << neural_scripted_episodes << "\n";
    out << "neural.random_episodes = " << neural_random_episodes << "\n";
    out << "neural.hidden = ";
    for (std::size_t i = 0; i < neural_hidden.size(); ++i)
        out << (i ? "," : "") << neural_hidden[i];
    out << "\n";
    if (!neural_checkpoint.empty()) out << "neural.checkpoint = " << neural_checkpoint << "\n";
    return out.str();
}

}  // namespace uhm
