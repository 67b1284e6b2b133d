#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sckd/config.hpp"
#include "sckd/data.hpp"
#include "sckd/eval.hpp"
#include "sckd/model.hpp"
#include "sckd/train.hpp"

namespace sckd {

namespace detail {

inline constexpr std::uint64_t kModelInitSalt = 0x494E49;

inline const char* const kMetricKeys[] = {"known_acc", "novel_cluster_acc", "all_acc", "nmi",
                                          "ari"};

// 9 significant digits round-trip for every double this project emits.
inline std::string g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << body;
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace detail

inline Json eval_report_to_json(const EvalReport& r) {
    Json j;
    j["protocol"] = r.protocol;
    if (r.known_acc) j["known_acc"] = *r.known_acc;
    if (r.novel_cluster_acc) j["novel_cluster_acc"] = *r.novel_cluster_acc;
    if (r.all_acc) j["all_acc"] = *r.all_acc;
    if (r.nmi) j["nmi"] = *r.nmi;
    if (r.ari) j["ari"] = *r.ari;
    j["permutation"] = r.permutation;
    return j;
}

// Each run re-seeds data generation so seeds act as full experiment replicas,
// not just weight re-initializations.
inline TrainTestSplit build_dataset(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    if (cfg.use_csv) {
        TrainTestSplit split;
        split.train = load_csv(cfg.csv.path, cfg.csv.schema);
        split.test = split.train;
        return split;
    }
    SyntheticConfig sc = cfg.synthetic;
    sc.seed += run_seed;
    return generate_synthetic(sc);
}

inline ModelConfig resolve_model_config(const ExperimentConfig& cfg,
                                        const DiscoveryDataset& data) {
    ModelConfig mc = cfg.model;
    mc.input_dim = data.feature_dim();
    mc.num_known = data.num_known();
    mc.num_novel = data.num_novel();
    mc.validate();
    return mc;
}

struct SeedRun {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::vector<double> stage1_ce;
    std::vector<Stage2Record> stage2;
    EvalReport task_aware;
    EvalReport task_agnostic;
};

inline Json seed_run_to_json(const SeedRun& r) {
    Json j;
    j["seed"] = r.seed;
    j["failed"] = r.failed;
    if (r.failed) j["error"] = r.error;
    j["stage1_ce"] = r.stage1_ce;
    if (!r.failed) {
        j["final"] = Json{{"task_aware", eval_report_to_json(r.task_aware)},
                          {"task_agnostic", eval_report_to_json(r.task_agnostic)}};
    }
    return j;
}

// Mean and sample standard deviation (n-1 denominator, 0 for a single run)
// over the successful seeds, keyed exactly like the per-seed files so the
// aggregate can be recomputed from them.
inline Json aggregate_from_seed_jsons(const std::vector<Json>& seed_jsons) {
    Json agg;
    agg["num_seeds"] = seed_jsons.size();
    std::size_t failed = 0;
    for (const auto& s : seed_jsons) {
        if (s.at("failed").get<bool>()) ++failed;
    }
    agg["num_failed"] = failed;
    for (const char* protocol : {"task_aware", "task_agnostic"}) {
        Json proto = Json::object();
        for (const char* key : detail::kMetricKeys) {
            std::vector<double> values;
            for (const auto& s : seed_jsons) {
                if (s.at("failed").get<bool>()) continue;
                const Json& rep = s.at("final").at(protocol);
                if (rep.contains(key)) values.push_back(rep.at(key).get<double>());
            }
            if (values.empty()) continue;
            double sum = 0.0;
            for (double v : values) sum += v;
            const double mean = sum / static_cast<double>(values.size());
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            const double std_dev =
                values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
            proto[key] = Json{{"mean", mean}, {"std", std_dev}};
        }
        agg[protocol] = proto;
    }
    return agg;
}

struct ExperimentResult {
    std::string bundle_dir;
    std::vector<SeedRun> runs;
    Json aggregate;

    bool any_failed() const {
        for (const auto& r : runs) {
            if (r.failed) return true;
        }
        return false;
    }
};

// One full experiment: per seed, stage 1 on labeled data, replica snapshot,
// stage 2 with the discovery objective, then both eval protocols on the test
// split. Writes into cfg.output_dir:
//   config.json                resolved config (verbatim provenance)
//   train_log_seed_<s>.jsonl   one record per stage-2 epoch, evals on schedule
//   seed_<s>.json              stage-1 curve and final metrics
//   model_seed_<s>.ckpt        trained weights
//   aggregate.json             mean/std over successful seeds
// A NumericError mid-run marks that seed failed and keeps whatever was already
// flushed; other errors propagate.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    const std::string config_dump = experiment_config_to_json(cfg).dump(2) + "\n";
    detail::write_text(cfg.output_dir + "/config.json", config_dump);

    ExperimentResult result;
    result.bundle_dir = cfg.output_dir;
    std::vector<Json> seed_jsons;
    for (const std::uint64_t seed : cfg.seeds) {
        SeedRun run;
        run.seed = seed;
        const std::string tag = std::to_string(seed);
        std::ofstream log(cfg.output_dir + "/train_log_seed_" + tag + ".jsonl",
                          std::ios::binary);
        if (!log) throw IoError("cannot open training log for seed " + tag);
        try {
            const TrainTestSplit split = build_dataset(cfg, seed);
            const ModelConfig mc = resolve_model_config(cfg, split.train);
            TrainConfig tc = cfg.train;
            tc.seed = seed;
            Rng init_rng(mix_seed(seed, detail::kModelInitSalt));
            ModelState model = init_model(mc, init_rng);

            run.stage1_ce = train_stage1(model, split.train, tc);
            const ReplicaEncoder replica = snapshot_replica(model);

            const auto after_epoch = [&](const Stage2Record& rec, const ModelState& m) {
                Json line{{"epoch", rec.epoch},
                          {"lr", rec.lr},
                          {"ce", rec.losses.ce},
                          {"l_k_to_n", rec.losses.l_k_to_n},
                          {"l_n_to_k", rec.losses.l_n_to_k},
                          {"total", rec.losses.total}};
                if (cfg.eval_every > 0 && (rec.epoch + 1) % cfg.eval_every == 0) {
                    line["eval"] =
                        Json{{"task_aware", eval_report_to_json(evaluate_task_aware(m, split.test))},
                             {"task_agnostic",
                              eval_report_to_json(evaluate_task_agnostic(m, split.test))}};
                }
                log << line.dump() << "\n";
                log.flush();
                run.stage2.push_back(rec);
            };
            train_stage2(model, replica, split.train, tc, after_epoch);

            run.task_aware = evaluate_task_aware(model, split.test);
            run.task_agnostic = evaluate_task_agnostic(model, split.test);
            save_checkpoint(model, cfg.output_dir + "/model_seed_" + tag + ".ckpt", config_dump);
        } catch (const NumericError& e) {
            run.failed = true;
            run.error = e.what();
        }
        const Json seed_json = seed_run_to_json(run);
        detail::write_text(cfg.output_dir + "/seed_" + tag + ".json", seed_json.dump(2) + "\n");
        seed_jsons.push_back(seed_json);
        result.runs.push_back(std::move(run));
    }
    result.aggregate = aggregate_from_seed_jsons(seed_jsons);
    detail::write_text(cfg.output_dir + "/aggregate.json", result.aggregate.dump(2) + "\n");
    return result;
}

struct SweepRow {
    std::size_t num_known = 0;
    std::size_t num_novel = 0;
    double novel_fraction = 0.0;
    std::string variant;
    Json metrics;  // task-agnostic {metric: {mean, std}} from the point's aggregate
};

inline Json sweep_row_to_json(const SweepRow& r) {
    return Json{{"num_known", r.num_known},
                {"num_novel", r.num_novel},
                {"novel_fraction", r.novel_fraction},
                {"variant", r.variant},
                {"metrics", r.metrics}};
}

struct SweepResult {
    std::string bundle_dir;
    std::vector<SweepRow> rows;
};

// Table analog over class-count points: every point runs the configured method
// and a beta=0 baseline on the same seeds, with the total sample budget held
// fixed by rescaling per-class counts. Rows are ordered by novel fraction.
// Writes sweep_spec.json, per-point bundles under point_k<k>_n<n>/{sckd,baseline},
// and the table as sweep.csv + sweep.json.
inline SweepResult run_sweep(const SweepSpec& spec) {
    spec.base.validate();
    if (spec.points.empty()) throw ConfigError("sweep needs at least one point");
    if (spec.base.use_csv) throw ConfigError("sweep requires a synthetic dataset source");

    const std::string out_dir = spec.base.output_dir;
    std::filesystem::create_directories(out_dir);
    Json spec_json{{"base", experiment_config_to_json(spec.base)}, {"points", Json::array()}};
    for (const auto& p : spec.points) {
        spec_json["points"].push_back(Json{{"num_known", p.num_known}, {"num_novel", p.num_novel}});
    }
    detail::write_text(out_dir + "/sweep_spec.json", spec_json.dump(2) + "\n");

    const SyntheticConfig& base_sc = spec.base.synthetic;
    const std::size_t budget = base_sc.num_known * base_sc.samples_per_known +
                               base_sc.num_novel * base_sc.samples_per_novel;

    std::vector<SweepPoint> points = spec.points;
    std::stable_sort(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
        const double fa = static_cast<double>(a.num_novel) /
                          static_cast<double>(a.num_known + a.num_novel);
        const double fb = static_cast<double>(b.num_novel) /
                          static_cast<double>(b.num_known + b.num_novel);
        return fa < fb;
    });

    SweepResult result;
    result.bundle_dir = out_dir;
    for (const auto& p : points) {
        const std::size_t total_classes = p.num_known + p.num_novel;
        const std::size_t per_class = std::max<std::size_t>(1, budget / total_classes);
        for (const char* variant : {"sckd", "baseline"}) {
            ExperimentConfig cfg = spec.base;
            cfg.synthetic.num_known = p.num_known;
            cfg.synthetic.num_novel = p.num_novel;
            cfg.synthetic.samples_per_known = per_class;
            cfg.synthetic.samples_per_novel = per_class;
            cfg.output_dir = out_dir + "/point_k" + std::to_string(p.num_known) + "_n" +
                             std::to_string(p.num_novel) + "/" + variant;
            if (std::string(variant) == "baseline") cfg.train.sckd.beta = 0.0;
            const ExperimentResult er = run_experiment(cfg);

            SweepRow row;
            row.num_known = p.num_known;
            row.num_novel = p.num_novel;
            row.novel_fraction = static_cast<double>(p.num_novel) /
                                 static_cast<double>(total_classes);
            row.variant = variant;
            row.metrics = er.aggregate.at("task_agnostic");
            result.rows.push_back(std::move(row));
        }
    }

    std::string csv =
        "num_known,num_novel,novel_fraction,variant,known_acc_mean,known_acc_std,"
        "novel_cluster_acc_mean,novel_cluster_acc_std,all_acc_mean,all_acc_std\n";
    Json rows_json = Json::array();
    for (const auto& row : result.rows) {
        csv += std::to_string(row.num_known) + "," + std::to_string(row.num_novel) + "," +
               detail::g9(row.novel_fraction) + "," + row.variant;
        for (const char* key : {"known_acc", "novel_cluster_acc", "all_acc"}) {
            if (row.metrics.contains(key)) {
                csv += "," + detail::g9(row.metrics.at(key).at("mean").get<double>());
                csv += "," + detail::g9(row.metrics.at(key).at("std").get<double>());
            } else {
                csv += ",,";
            }
        }
        csv += "\n";
        rows_json.push_back(sweep_row_to_json(row));
    }
    detail::write_text(out_dir + "/sweep.csv", csv);
    detail::write_text(out_dir + "/sweep.json", rows_json.dump(2) + "\n");
    return result;
}

// Feature dump for external projection tools: one row per test sample, known
// subset first, with the task-agnostic concat-argmax prediction as a global
// class id. Values print with 9 significant digits, enough for a lossless
// double round trip at that precision.
inline void emit_embeddings(const ModelState& model, const DiscoveryDataset& test,
                            const std::string& path) {
    const std::size_t k = model.config.feature_dim;
    std::string csv = "id,true_label,predicted_id";
    for (std::size_t j = 0; j < k; ++j) csv += ",f" + std::to_string(j);
    csv += "\n";

    std::size_t next_id = 0;
    const auto append_rows = [&](const Matrix& x, const std::vector<int>& true_labels) {
        if (x.rows() == 0) return;
        const ForwardTrace t = forward(model, x);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < t.concat_probs.cols(); ++c) {
                if (t.concat_probs(i, c) > t.concat_probs(i, best)) best = c;
            }
            csv += std::to_string(next_id++) + "," + std::to_string(true_labels[i]) + "," +
                   std::to_string(best);
            for (std::size_t j = 0; j < k; ++j) {
                csv += "," + detail::g9(t.encoder.features(i, j));
            }
            csv += "\n";
        }
    };

    std::vector<int> known_true(test.labeled_size());
    for (std::size_t i = 0; i < known_true.size(); ++i) known_true[i] = test.labeled_label(i);
    std::vector<int> novel_true(test.unlabeled_size());
    for (std::size_t i = 0; i < novel_true.size(); ++i) {
        novel_true[i] = test.hidden_label_for_eval(i);
    }
    if (test.labeled_size() > 0) append_rows(test.labeled_matrix(), known_true);
    if (test.unlabeled_size() > 0) append_rows(test.unlabeled_matrix(), novel_true);
    detail::write_text(path, csv);
}

}  // namespace sckd
