#include <doctest.h>

#include <sstream>
#include <stdexcept>
#include <string>

#include "uhm/config.hpp"
#include "uhm/csv.hpp"

using namespace uhm;

namespace {

bool mentions(const std::exception& e, const std::string& needle) {
    return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("parse(serialize()) is the identity on the defaults") {
    const ExperimentConfig def;
    const ExperimentConfig round = parse_config(def.serialize());
    CHECK(round.serialize() == def.serialize());
}

TEST_CASE("parse(serialize()) is the identity on a modified config") {
    ExperimentConfig cfg;
    cfg.suite = "tabular";
    cfg.seeds = {3, 1, 4, 1, 5};
    cfg.jobs = 4;
    cfg.tabular_methods = {"uhm_nu", "dtd_lambda"};
    cfg.tabular_lambda_f = 0.9;
    cfg.tabular_step_decay = 0.0;
    cfg.neural_hidden = {32, 32, 32};
    cfg.neural_checkpoint = "/tmp/ckpt.bin";
    const ExperimentConfig round = parse_config(cfg.serialize());
    CHECK(round.serialize() == cfg.serialize());
    CHECK(round.seeds == cfg.seeds);
    CHECK(round.tabular_methods == cfg.tabular_methods);
    CHECK(round.neural_hidden == cfg.neural_hidden);
}

TEST_CASE("comments and blank lines are ignored") {
    const ExperimentConfig cfg = parse_config(
        "# a comment\n"
        "\n"
        "suite = tabular\n"
        "   # indented comment\n"
        "tabular.lambda_f = 0.5\n");
    CHECK(cfg.suite == "tabular");
    CHECK(cfg.tabular_lambda_f == doctest::Approx(0.5));
}

TEST_CASE("unknown keys are rejected and named") {
    try {
        parse_config("suite = tabular\nbogus.key = 1\n");
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(mentions(e, "bogus.key"));
    }
}

TEST_CASE("type errors are rejected and name the key") {
    try {
        parse_config("tabular.updates = soon\n");
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(mentions(e, "tabular.updates"));
    }
    try {
        parse_config("neural.lr = fast\n");
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(mentions(e, "neural.lr"));
    }
}

TEST_CASE("range violations are rejected and name the key") {
    CHECK_THROWS_AS(parse_config("tabular.lambda_f = 1.5\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("tabular.lambda_f = -0.1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("tabular.env.gamma = 1.2\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("jobs = 0\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("neural.batch = -3\n"), std::invalid_argument);
    try {
        parse_config("tabular.q = 0.0\n");
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(mentions(e, "tabular.q"));
    }
}

TEST_CASE("malformed lines are rejected with their line number") {
    try {
        parse_config("suite = tabular\nthis line has no equals sign\n");
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(mentions(e, "2"));
    }
}

TEST_CASE("unknown suite and method names are rejected") {
    CHECK_THROWS_AS(parse_config("suite = nonsense\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("tabular.methods = uhm_nu,bogus\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("tabular.env.kind = mystery\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("tabular.model = oracle\n"), std::invalid_argument);
}

TEST_CASE("empty seed lists are rejected") {
    CHECK_THROWS_AS(parse_config("seeds = \n"), std::invalid_argument);
}

TEST_CASE("format_value round-trips doubles exactly") {
    for (const double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, -0.0, 2.0}) {
        const std::string s = format_value(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("csv output has the exact header, LF endings, and full precision") {
    std::vector<ResultRow> rows;
    rows.push_back({"tabular", "uhm_nu", 1, 1000, "sup_error", 1.0 / 3.0});
    rows.push_back({"tabular", "dtd_lambda", 2, 0, "sup_error", 0.5});
    std::ostringstream out(std::ios::binary);
    write_results_csv(out, rows);
    const std::string text = out.str();
    CHECK(text.rfind("suite,method,seed,step,metric,value\n", 0) == 0);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.find("tabular,uhm_nu,1,1000,sup_error,0.33333333333333331\n") !=
          std::string::npos);
    CHECK(text.find("tabular,dtd_lambda,2,0,sup_error,0.5\n") != std::string::npos);
    CHECK(text.back() == '\n');
}

TEST_CASE("csv bytes are a pure function of the rows") {
    std::vector<ResultRow> rows;
    for (int i = 0; i < 10; ++i)
        rows.push_back({"verify-core", "check", 0, i, "max_error", 1e-15 * i});
    std::ostringstream a(std::ios::binary);
    std::ostringstream b(std::ios::binary);
    write_results_csv(a, rows);
    write_results_csv(b, rows);
    CHECK(a.str() == b.str());
}
