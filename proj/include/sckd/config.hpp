#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sckd/data.hpp"
#include "sckd/distill.hpp"
#include "sckd/error.hpp"
#include "sckd/model.hpp"
#include "sckd/objective.hpp"

namespace sckd {

using Json = nlohmann::json;

namespace detail {

// Silent typos in hyperparameter names are the dominant way experiments rot,
// so every object is checked against its full key list and errors carry the
// dotted field path.
inline void require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("expected an object at " + path);
}

inline void reject_unknown_keys(const Json& obj, const std::string& path,
                                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (item.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown key '" + item.key() + "' at " + path);
    }
}

inline void read_number(const Json& obj, const std::string& path, const char* key, double& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError("expected a number at " + path + "." + key);
    out = v.get<double>();
}

inline bool is_nonneg_integer(const Json& v) {
    return v.is_number_unsigned() ||
           (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline void read_size(const Json& obj, const std::string& path, const char* key,
                      std::size_t& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!is_nonneg_integer(v)) {
        throw ConfigError("expected a non-negative integer at " + path + "." + key);
    }
    out = v.get<std::size_t>();
}

inline void read_int(const Json& obj, const std::string& path, const char* key, int& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ConfigError("expected an integer at " + path + "." + key);
    }
    out = v.get<int>();
}

inline void read_u64(const Json& obj, const std::string& path, const char* key,
                     std::uint64_t& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!is_nonneg_integer(v)) {
        throw ConfigError("expected a non-negative integer at " + path + "." + key);
    }
    out = v.get<std::uint64_t>();
}

inline void read_bool(const Json& obj, const std::string& path, const char* key, bool& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError("expected a boolean at " + path + "." + key);
    out = v.get<bool>();
}

inline void read_string(const Json& obj, const std::string& path, const char* key,
                        std::string& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError("expected a string at " + path + "." + key);
    out = v.get<std::string>();
}

inline void read_string_list(const Json& obj, const std::string& path, const char* key,
                             std::vector<std::string>& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_array()) throw ConfigError("expected an array at " + path + "." + key);
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) {
            throw ConfigError("expected a string at " + path + "." + key + "[" +
                              std::to_string(i) + "]");
        }
        out.push_back(v[i].get<std::string>());
    }
}

}  // namespace detail

inline SckdConfig parse_sckd_config(const Json& j, const std::string& path) {
    detail::require_object(j, path);
    detail::reject_unknown_keys(j, path,
                                {"alpha", "beta", "lambda", "distill_temperature", "score_mode",
                                 "signed_max_norm", "grad_through_score", "use_replica",
                                 "use_k_to_n", "use_n_to_k"});
    SckdConfig c;
    detail::read_number(j, path, "alpha", c.alpha);
    detail::read_number(j, path, "beta", c.beta);
    detail::read_number(j, path, "lambda", c.lambda);
    detail::read_number(j, path, "distill_temperature", c.distill_temperature);
    std::string mode = score_mode_name(c.score_mode);
    detail::read_string(j, path, "score_mode", mode);
    c.score_mode = score_mode_from_name(mode);
    detail::read_bool(j, path, "signed_max_norm", c.signed_max_norm);
    detail::read_bool(j, path, "grad_through_score", c.grad_through_score);
    detail::read_bool(j, path, "use_replica", c.use_replica);
    detail::read_bool(j, path, "use_k_to_n", c.use_k_to_n);
    detail::read_bool(j, path, "use_n_to_k", c.use_n_to_k);
    return c;
}

// The per-run seed comes from the experiment's seed list, so TrainConfig.seed
// is not part of the schema.
inline TrainConfig parse_train_config(const Json& j, const std::string& path) {
    detail::require_object(j, path);
    detail::reject_unknown_keys(
        j, path,
        {"stage1_epochs", "stage2_epochs", "warmup_epochs", "lr_floor", "lr_peak", "momentum",
         "weight_decay", "batch_size", "sinkhorn_epsilon", "sinkhorn_iters",
         "unlabeled_targets_full_concat", "sckd"});
    TrainConfig c;
    detail::read_size(j, path, "stage1_epochs", c.stage1_epochs);
    detail::read_size(j, path, "stage2_epochs", c.stage2_epochs);
    detail::read_size(j, path, "warmup_epochs", c.warmup_epochs);
    detail::read_number(j, path, "lr_floor", c.lr_floor);
    detail::read_number(j, path, "lr_peak", c.lr_peak);
    detail::read_number(j, path, "momentum", c.momentum);
    detail::read_number(j, path, "weight_decay", c.weight_decay);
    detail::read_size(j, path, "batch_size", c.batch_size);
    detail::read_number(j, path, "sinkhorn_epsilon", c.sinkhorn_epsilon);
    detail::read_int(j, path, "sinkhorn_iters", c.sinkhorn_iters);
    detail::read_bool(j, path, "unlabeled_targets_full_concat", c.unlabeled_targets_full_concat);
    if (j.contains("sckd")) c.sckd = parse_sckd_config(j.at("sckd"), path + ".sckd");
    return c;
}

inline SyntheticConfig parse_synthetic_config(const Json& j, const std::string& path) {
    detail::require_object(j, path);
    detail::reject_unknown_keys(j, path,
                                {"num_known", "num_novel", "samples_per_known",
                                 "samples_per_novel", "feature_dim", "separation", "cluster_std",
                                 "seed"});
    SyntheticConfig c;
    detail::read_size(j, path, "num_known", c.num_known);
    detail::read_size(j, path, "num_novel", c.num_novel);
    detail::read_size(j, path, "samples_per_known", c.samples_per_known);
    detail::read_size(j, path, "samples_per_novel", c.samples_per_novel);
    detail::read_size(j, path, "feature_dim", c.feature_dim);
    detail::read_number(j, path, "separation", c.separation);
    detail::read_number(j, path, "cluster_std", c.cluster_std);
    detail::read_u64(j, path, "seed", c.seed);
    return c;
}

// input_dim, num_known and num_novel are derived from the dataset when the
// experiment resolves, so the schema does not accept them.
inline ModelConfig parse_model_config(const Json& j, const std::string& path) {
    detail::require_object(j, path);
    detail::reject_unknown_keys(
        j, path, {"hidden_dim", "feature_dim", "novel_hidden_dim", "temperature", "activation"});
    ModelConfig c;
    detail::read_size(j, path, "hidden_dim", c.hidden_dim);
    detail::read_size(j, path, "feature_dim", c.feature_dim);
    detail::read_size(j, path, "novel_hidden_dim", c.novel_hidden_dim);
    detail::read_number(j, path, "temperature", c.temperature);
    std::string act = activation_name(c.activation);
    detail::read_string(j, path, "activation", act);
    c.activation = activation_from_name(act);
    return c;
}

struct CsvSource {
    std::string path;
    CsvSchema schema;
};

inline CsvSource parse_csv_source(const Json& j, const std::string& path) {
    detail::require_object(j, path);
    detail::reject_unknown_keys(j, path,
                                {"path", "feature_columns", "label_column", "known_classes"});
    CsvSource c;
    detail::read_string(j, path, "path", c.path);
    if (c.path.empty()) throw ConfigError("missing or empty " + path + ".path");
    detail::read_string_list(j, path, "feature_columns", c.schema.feature_columns);
    detail::read_string(j, path, "label_column", c.schema.label_column);
    detail::read_string_list(j, path, "known_classes", c.schema.known_classes);
    return c;
}

struct ExperimentConfig {
    bool use_csv = false;
    SyntheticConfig synthetic;
    CsvSource csv;
    ModelConfig model;
    TrainConfig train;
    std::size_t eval_every = 0;  // epochs between stage-2 evals; 0 = final only
    std::vector<std::uint64_t> seeds{1};
    std::string output_dir = "runs/exp";

    void validate() const {
        if (seeds.empty()) throw ConfigError("seeds must not be empty");
        if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
        if (!use_csv) synthetic.validate();
        if (model.hidden_dim < 1 || model.feature_dim < 1 || model.novel_hidden_dim < 1) {
            throw ConfigError("model dimensions must be >= 1");
        }
        if (model.temperature <= 0.0) throw ConfigError("model temperature must be > 0");
        train.validate();
    }
};

inline ExperimentConfig parse_experiment_config(const Json& j) {
    detail::require_object(j, "$");
    detail::reject_unknown_keys(
        j, "$", {"dataset", "model", "train", "eval_every", "seeds", "output_dir"});
    ExperimentConfig c;
    if (j.contains("dataset")) {
        const Json& d = j.at("dataset");
        detail::require_object(d, "$.dataset");
        detail::reject_unknown_keys(d, "$.dataset", {"synthetic", "csv"});
        const bool has_synth = d.contains("synthetic");
        const bool has_csv = d.contains("csv");
        if (has_synth == has_csv) {
            throw ConfigError("expected exactly one of 'synthetic', 'csv' at $.dataset");
        }
        if (has_synth) {
            c.synthetic = parse_synthetic_config(d.at("synthetic"), "$.dataset.synthetic");
        } else {
            c.use_csv = true;
            c.csv = parse_csv_source(d.at("csv"), "$.dataset.csv");
        }
    }
    if (j.contains("model")) c.model = parse_model_config(j.at("model"), "$.model");
    if (j.contains("train")) c.train = parse_train_config(j.at("train"), "$.train");
    detail::read_size(j, "$", "eval_every", c.eval_every);
    if (j.contains("seeds")) {
        const Json& s = j.at("seeds");
        if (!s.is_array() || s.empty()) {
            throw ConfigError("expected a non-empty array at $.seeds");
        }
        c.seeds.clear();
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!detail::is_nonneg_integer(s[i])) {
                throw ConfigError("expected a non-negative integer at $.seeds[" +
                                  std::to_string(i) + "]");
            }
            c.seeds.push_back(s[i].get<std::uint64_t>());
        }
    }
    detail::read_string(j, "$", "output_dir", c.output_dir);
    c.validate();
    return c;
}

inline Json sckd_config_to_json(const SckdConfig& c) {
    return Json{{"alpha", c.alpha},
                {"beta", c.beta},
                {"lambda", c.lambda},
                {"distill_temperature", c.distill_temperature},
                {"score_mode", score_mode_name(c.score_mode)},
                {"signed_max_norm", c.signed_max_norm},
                {"grad_through_score", c.grad_through_score},
                {"use_replica", c.use_replica},
                {"use_k_to_n", c.use_k_to_n},
                {"use_n_to_k", c.use_n_to_k}};
}

inline Json train_config_to_json(const TrainConfig& c) {
    return Json{{"stage1_epochs", c.stage1_epochs},
                {"stage2_epochs", c.stage2_epochs},
                {"warmup_epochs", c.warmup_epochs},
                {"lr_floor", c.lr_floor},
                {"lr_peak", c.lr_peak},
                {"momentum", c.momentum},
                {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size},
                {"sinkhorn_epsilon", c.sinkhorn_epsilon},
                {"sinkhorn_iters", c.sinkhorn_iters},
                {"unlabeled_targets_full_concat", c.unlabeled_targets_full_concat},
                {"sckd", sckd_config_to_json(c.sckd)}};
}

inline Json experiment_config_to_json(const ExperimentConfig& c) {
    Json dataset;
    if (c.use_csv) {
        dataset["csv"] = Json{{"path", c.csv.path},
                              {"feature_columns", c.csv.schema.feature_columns},
                              {"label_column", c.csv.schema.label_column},
                              {"known_classes", c.csv.schema.known_classes}};
    } else {
        dataset["synthetic"] = Json{{"num_known", c.synthetic.num_known},
                                    {"num_novel", c.synthetic.num_novel},
                                    {"samples_per_known", c.synthetic.samples_per_known},
                                    {"samples_per_novel", c.synthetic.samples_per_novel},
                                    {"feature_dim", c.synthetic.feature_dim},
                                    {"separation", c.synthetic.separation},
                                    {"cluster_std", c.synthetic.cluster_std},
                                    {"seed", c.synthetic.seed}};
    }
    return Json{{"dataset", dataset},
                {"model", Json{{"hidden_dim", c.model.hidden_dim},
                               {"feature_dim", c.model.feature_dim},
                               {"novel_hidden_dim", c.model.novel_hidden_dim},
                               {"temperature", c.model.temperature},
                               {"activation", activation_name(c.model.activation)}}},
                {"train", train_config_to_json(c.train)},
                {"eval_every", c.eval_every},
                {"seeds", c.seeds},
                {"output_dir", c.output_dir}};
}

// "a.b.c=value" sets root["a"]["b"]["c"], creating objects along the way. The
// value parses as JSON when it can, otherwise it is taken as a string.
inline void apply_override(Json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not key=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        parts.push_back(path.substr(start, dot == std::string::npos ? std::string::npos
                                                                    : dot - start));
        if (parts.back().empty()) {
            throw ConfigError("override path '" + path + "' has an empty segment");
        }
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    Json* node = &root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i])) (*node)[parts[i]] = Json::object();
        node = &(*node)[parts[i]];
        if (!node->is_object()) {
            throw ConfigError("override path '" + path + "' descends into a non-object");
        }
    }
    const Json parsed = Json::parse(value, nullptr, false);
    (*node)[parts.back()] = parsed.is_discarded() ? Json(value) : parsed;
}

inline Json load_config_json(const std::string& file,
                             const std::vector<std::string>& overrides = {}) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open config file '" + file + "'");
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw ParseError("config file '" + file + "': " + e.what());
    }
    for (const auto& o : overrides) apply_override(j, o);
    return j;
}

inline ExperimentConfig load_experiment_config(const std::string& file,
                                               const std::vector<std::string>& overrides = {}) {
    return parse_experiment_config(load_config_json(file, overrides));
}

struct SweepPoint {
    std::size_t num_known = 1;
    std::size_t num_novel = 1;
};

// The sweep varies class counts over a fixed total sample budget, so only
// synthetic sources make sense.
struct SweepSpec {
    ExperimentConfig base;
    std::vector<SweepPoint> points;
};

inline SweepSpec parse_sweep_spec(const Json& j) {
    detail::require_object(j, "$");
    detail::reject_unknown_keys(j, "$", {"base", "points"});
    SweepSpec s;
    if (j.contains("base")) s.base = parse_experiment_config(j.at("base"));
    if (!j.contains("points")) throw ConfigError("missing $.points");
    const Json& pts = j.at("points");
    if (!pts.is_array() || pts.empty()) throw ConfigError("expected a non-empty array at $.points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::string path = "$.points[" + std::to_string(i) + "]";
        detail::require_object(pts[i], path);
        detail::reject_unknown_keys(pts[i], path, {"num_known", "num_novel"});
        SweepPoint p;
        detail::read_size(pts[i], path, "num_known", p.num_known);
        detail::read_size(pts[i], path, "num_novel", p.num_novel);
        if (p.num_known < 1 || p.num_novel < 1) {
            throw ConfigError("class counts must be >= 1 at " + path);
        }
        s.points.push_back(p);
    }
    if (s.base.use_csv) throw ConfigError("sweep requires a synthetic dataset source");
    return s;
}

inline SweepSpec load_sweep_spec(const std::string& file,
                                 const std::vector<std::string>& overrides = {}) {
    return parse_sweep_spec(load_config_json(file, overrides));
}

}  // namespace sckd
