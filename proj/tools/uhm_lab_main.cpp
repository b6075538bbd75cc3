#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "uhm/config.hpp"
#include "uhm/csv.hpp"
#include "uhm/suites.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Horizon-model verification and experiment harness"};
    app.require_subcommand(0, 0);

    std::string suite;
    std::string config_path;
    std::string out_path;
    std::string seeds;
    int jobs = 0;

    app.add_option("suite", suite, "Suite to run: verify-core | verify-neural | tabular | neural-toy")
        ->required();
    app.add_option("--config", config_path, "Key-value configuration file")->required();
    app.add_option("--out", out_path, "Output CSV path")->required();
    app.add_option("--seeds", seeds, "Comma-separated seed list (overrides the config)");
    app.add_option("--jobs", jobs, "Worker thread count (overrides the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        uhm::ExperimentConfig cfg = uhm::load_config(config_path);
        cfg.suite = suite;  // the positional argument selects the suite
        cfg.out_path = out_path;
        if (!seeds.empty()) {
            // Reuse the config parser so the override obeys the same rules.
            cfg = uhm::parse_config(cfg.serialize() + "seeds = " + seeds + "\n");
        }
        if (jobs > 0) cfg.jobs = jobs;

        const uhm::SuiteResult result = uhm::run_suite(cfg);
        uhm::write_results_csv(cfg.out_path, result.rows);
        if (!result.all_passed) {
            std::cerr << "one or more verification checks failed\n";
            return 1;
        }
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
