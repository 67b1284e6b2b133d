#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "sckd/config.hpp"

using namespace sckd;

namespace {

Json full_config_json() {
    return Json{
        {"dataset",
         Json{{"synthetic", Json{{"num_known", 3},
                                 {"num_novel", 4},
                                 {"samples_per_known", 20},
                                 {"samples_per_novel", 25},
                                 {"feature_dim", 6},
                                 {"separation", 4.5},
                                 {"cluster_std", 0.8},
                                 {"seed", 11}}}}},
        {"model", Json{{"hidden_dim", 32},
                       {"feature_dim", 12},
                       {"novel_hidden_dim", 10},
                       {"temperature", 0.2},
                       {"activation", "relu"}}},
        {"train", Json{{"stage1_epochs", 7},
                       {"stage2_epochs", 9},
                       {"warmup_epochs", 2},
                       {"lr_floor", 0.002},
                       {"lr_peak", 0.05},
                       {"momentum", 0.8},
                       {"weight_decay", 1e-4},
                       {"batch_size", 16},
                       {"sinkhorn_epsilon", 0.1},
                       {"sinkhorn_iters", 4},
                       {"unlabeled_targets_full_concat", true},
                       {"sckd", Json{{"alpha", 0.2},
                                     {"beta", 0.7},
                                     {"lambda", 0.4},
                                     {"distill_temperature", 2.0},
                                     {"score_mode", "average"},
                                     {"signed_max_norm", true},
                                     {"grad_through_score", true},
                                     {"use_replica", false},
                                     {"use_k_to_n", true},
                                     {"use_n_to_k", false}}}}},
        {"eval_every", 3},
        {"seeds", Json::array({4, 5, 6})},
        {"output_dir", "runs/full"}};
}

}  // namespace

TEST_CASE("experiment config defaults and full round trip", "[config]") {
    SECTION("empty object yields defaults") {
        const ExperimentConfig c = parse_experiment_config(Json::object());
        REQUIRE_FALSE(c.use_csv);
        REQUIRE(c.synthetic.num_known == 5);
        REQUIRE(c.synthetic.num_novel == 5);
        REQUIRE(c.model.hidden_dim == 64);
        REQUIRE(c.train.stage1_epochs == 50);
        REQUIRE(c.train.sckd.beta == 0.5);
        REQUIRE(c.eval_every == 0);
        REQUIRE(c.seeds == std::vector<std::uint64_t>{1});
        REQUIRE(c.output_dir == "runs/exp");
    }

    SECTION("every field parses and survives serialization") {
        const ExperimentConfig c = parse_experiment_config(full_config_json());
        REQUIRE(c.synthetic.num_novel == 4);
        REQUIRE(c.synthetic.separation == 4.5);
        REQUIRE(c.synthetic.seed == 11);
        REQUIRE(c.model.activation == Activation::Relu);
        REQUIRE(c.model.temperature == 0.2);
        REQUIRE(c.train.warmup_epochs == 2);
        REQUIRE(c.train.unlabeled_targets_full_concat);
        REQUIRE(c.train.sckd.score_mode == ScoreMode::Average);
        REQUIRE(c.train.sckd.lambda == 0.4);
        REQUIRE_FALSE(c.train.sckd.use_replica);
        REQUIRE_FALSE(c.train.sckd.use_n_to_k);
        REQUIRE(c.eval_every == 3);
        REQUIRE(c.seeds == std::vector<std::uint64_t>{4, 5, 6});

        const Json dumped = experiment_config_to_json(c);
        const ExperimentConfig again = parse_experiment_config(dumped);
        REQUIRE(experiment_config_to_json(again).dump() == dumped.dump());
    }

    SECTION("csv dataset source") {
        const Json j{{"dataset", Json{{"csv", Json{{"path", "data/iris.csv"},
                                                   {"feature_columns", Json::array({"a", "b"})},
                                                   {"label_column", "species"},
                                                   {"known_classes",
                                                    Json::array({"setosa", "virginica"})}}}}}};
        const ExperimentConfig c = parse_experiment_config(j);
        REQUIRE(c.use_csv);
        REQUIRE(c.csv.path == "data/iris.csv");
        REQUIRE(c.csv.schema.feature_columns == std::vector<std::string>{"a", "b"});
        REQUIRE(c.csv.schema.label_column == "species");
        REQUIRE(c.csv.schema.known_classes == std::vector<std::string>{"setosa", "virginica"});
        const Json dumped = experiment_config_to_json(c);
        const ExperimentConfig again = parse_experiment_config(dumped);
        REQUIRE(experiment_config_to_json(again).dump() == dumped.dump());
    }
}

TEST_CASE("unknown keys are rejected with their field path", "[config]") {
    const auto message_of = [](const Json& j) {
        try {
            parse_experiment_config(j);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };

    SECTION("top level") {
        const std::string msg = message_of(Json{{"trian", Json::object()}});
        REQUIRE(msg.find("trian") != std::string::npos);
        REQUIRE(msg.find("$") != std::string::npos);
    }

    SECTION("nested sckd typo names the full path") {
        const std::string msg =
            message_of(Json{{"train", Json{{"sckd", Json{{"alhpa", 0.1}}}}}});
        REQUIRE(msg.find("alhpa") != std::string::npos);
        REQUIRE(msg.find("$.train.sckd") != std::string::npos);
    }

    SECTION("model section") {
        const std::string msg = message_of(Json{{"model", Json{{"depth", 3}}}});
        REQUIRE(msg.find("depth") != std::string::npos);
        REQUIRE(msg.find("$.model") != std::string::npos);
    }

    SECTION("dataset must pick exactly one source") {
        REQUIRE_THROWS_AS(parse_experiment_config(Json{{"dataset", Json::object()}}),
                          ConfigError);
        const Json both{{"dataset", Json{{"synthetic", Json::object()},
                                         {"csv", Json{{"path", "x.csv"}}}}}};
        REQUIRE_THROWS_AS(parse_experiment_config(both), ConfigError);
    }
}

TEST_CASE("config type and invariant errors", "[config]") {
    SECTION("wrong types carry the field path") {
        try {
            parse_experiment_config(Json{{"train", Json{{"lr_peak", "fast"}}}});
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find("$.train.lr_peak") != std::string::npos);
        }
        REQUIRE_THROWS_AS(parse_experiment_config(Json{{"eval_every", 1.5}}), ConfigError);
        REQUIRE_THROWS_AS(parse_experiment_config(Json{{"train", Json{{"batch_size", -4}}}}),
                          ConfigError);
        REQUIRE_THROWS_AS(parse_experiment_config(Json{{"seeds", 7}}), ConfigError);
        REQUIRE_THROWS_AS(parse_experiment_config(Json{{"seeds", Json::array({1, -2})}}),
                          ConfigError);
        REQUIRE_THROWS_AS(
            parse_experiment_config(Json{{"train", Json{{"sckd", Json{{"score_mode", "dot"}}}}}}),
            ConfigError);
    }

    SECTION("domain invariants still apply") {
        REQUIRE_THROWS_AS(parse_experiment_config(Json{{"seeds", Json::array()}}), ConfigError);
        REQUIRE_THROWS_AS(parse_experiment_config(Json{{"train", Json{{"momentum", 1.0}}}}),
                          ConfigError);
        REQUIRE_THROWS_AS(parse_experiment_config(Json{{"output_dir", ""}}), ConfigError);
        REQUIRE_THROWS_AS(
            parse_experiment_config(Json{{"dataset",
                                          Json{{"synthetic", Json{{"cluster_std", 0.0}}}}}}),
            ConfigError);
    }
}

TEST_CASE("dotted path overrides", "[config]") {
    SECTION("values parse as JSON with string fallback") {
        Json j = Json::object();
        apply_override(j, "train.lr_peak=0.05");
        apply_override(j, "train.sckd.score_mode=average");
        apply_override(j, "train.sckd.use_replica=false");
        apply_override(j, "seeds=[3,4]");
        apply_override(j, "output_dir=runs/override");
        const ExperimentConfig c = parse_experiment_config(j);
        REQUIRE(c.train.lr_peak == 0.05);
        REQUIRE(c.train.sckd.score_mode == ScoreMode::Average);
        REQUIRE_FALSE(c.train.sckd.use_replica);
        REQUIRE(c.seeds == std::vector<std::uint64_t>{3, 4});
        REQUIRE(c.output_dir == "runs/override");
    }

    SECTION("overrides land on top of existing values") {
        Json j = full_config_json();
        apply_override(j, "train.sckd.beta=0");
        apply_override(j, "model.activation=tanh");
        const ExperimentConfig c = parse_experiment_config(j);
        REQUIRE(c.train.sckd.beta == 0.0);
        REQUIRE(c.model.activation == Activation::Tanh);
        REQUIRE(c.train.sckd.alpha == 0.2);
    }

    SECTION("malformed overrides") {
        Json j = Json::object();
        REQUIRE_THROWS_AS(apply_override(j, "noequals"), ConfigError);
        REQUIRE_THROWS_AS(apply_override(j, "=5"), ConfigError);
        REQUIRE_THROWS_AS(apply_override(j, "a..b=1"), ConfigError);
        apply_override(j, "train.lr_peak=0.1");
        REQUIRE_THROWS_AS(apply_override(j, "train.lr_peak.x=1"), ConfigError);
    }

    SECTION("an override with a typo fails schema validation") {
        Json j = Json::object();
        apply_override(j, "train.lr_peek=0.1");
        try {
            parse_experiment_config(j);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(std::string(e.what()).find("lr_peek") != std::string::npos);
        }
    }
}

TEST_CASE("config files load with overrides", "[config]") {
    const std::string path = "/tmp/sckd_config_test.json";
    {
        std::ofstream out(path);
        out << full_config_json().dump(2);
    }
    SECTION("load and override") {
        const ExperimentConfig c = load_experiment_config(path, {"train.stage2_epochs=3"});
        REQUIRE(c.train.stage2_epochs == 3);
        REQUIRE(c.train.stage1_epochs == 7);
    }
    SECTION("missing file") {
        REQUIRE_THROWS_AS(load_experiment_config("/tmp/sckd_no_such_config.json"), IoError);
    }
    SECTION("malformed json") {
        const std::string bad = "/tmp/sckd_config_bad.json";
        {
            std::ofstream out(bad);
            out << "{not json";
        }
        REQUIRE_THROWS_AS(load_experiment_config(bad), ParseError);
        std::remove(bad.c_str());
    }
    std::remove(path.c_str());
}

TEST_CASE("sweep spec parsing", "[config]") {
    SECTION("points parse in input order") {
        const Json j{{"base", Json{{"seeds", Json::array({1, 2})}}},
                     {"points", Json::array({Json{{"num_known", 8}, {"num_novel", 2}},
                                             Json{{"num_known", 2}, {"num_novel", 8}}})}};
        const SweepSpec s = parse_sweep_spec(j);
        REQUIRE(s.points.size() == 2);
        REQUIRE(s.points[0].num_known == 8);
        REQUIRE(s.points[1].num_novel == 8);
        REQUIRE(s.base.seeds == std::vector<std::uint64_t>{1, 2});
    }

    SECTION("invalid specs") {
        REQUIRE_THROWS_AS(parse_sweep_spec(Json::object()), ConfigError);
        REQUIRE_THROWS_AS(parse_sweep_spec(Json{{"points", Json::array()}}), ConfigError);
        REQUIRE_THROWS_AS(
            parse_sweep_spec(Json{{"points", Json::array({Json{{"num_known", 0}}})}}),
            ConfigError);
        REQUIRE_THROWS_AS(
            parse_sweep_spec(Json{{"points", Json::array({Json{{"classes", 3}}})}}),
            ConfigError);
        const Json csv_base{{"base", Json{{"dataset", Json{{"csv", Json{{"path", "x.csv"}}}}}}},
                            {"points", Json::array({Json{{"num_known", 2}}})}};
        REQUIRE_THROWS_AS(parse_sweep_spec(csv_base), ConfigError);
    }
}
