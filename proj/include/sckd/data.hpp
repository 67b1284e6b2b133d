#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sckd/error.hpp"
#include "sckd/matrix.hpp"

namespace sckd {

using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent sub-seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Mixed labeled/unlabeled dataset with disjoint class-index ranges:
// labeled samples carry labels in [0, C^l), unlabeled samples carry hidden
// labels in [C^l, C^l + C^u) that only the evaluation side may read.
class DiscoveryDataset {
public:
    static DiscoveryDataset create(std::size_t feature_dim, std::size_t num_known,
                                   std::size_t num_novel,
                                   std::vector<std::vector<double>> labeled_features,
                                   std::vector<int> labeled_labels,
                                   std::vector<std::vector<double>> unlabeled_features,
                                   std::vector<int> unlabeled_hidden_labels) {
        DiscoveryDataset ds;
        ds.feature_dim_ = feature_dim;
        ds.num_known_ = num_known;
        ds.num_novel_ = num_novel;
        ds.labeled_features_ = std::move(labeled_features);
        ds.labeled_labels_ = std::move(labeled_labels);
        ds.unlabeled_features_ = std::move(unlabeled_features);
        ds.unlabeled_hidden_labels_ = std::move(unlabeled_hidden_labels);
        ds.validate();
        return ds;
    }

    std::size_t feature_dim() const { return feature_dim_; }
    std::size_t num_known() const { return num_known_; }
    std::size_t num_novel() const { return num_novel_; }
    std::size_t labeled_size() const { return labeled_features_.size(); }
    std::size_t unlabeled_size() const { return unlabeled_features_.size(); }

    const std::vector<double>& labeled_feature(std::size_t i) const { return labeled_features_[i]; }
    int labeled_label(std::size_t i) const { return labeled_labels_[i]; }
    const std::vector<double>& unlabeled_feature(std::size_t i) const { return unlabeled_features_[i]; }

    // Evaluation-only accessor. The training path receives Batch objects,
    // which never carry hidden labels.
    int hidden_label_for_eval(std::size_t i) const { return unlabeled_hidden_labels_[i]; }

    Matrix labeled_matrix() const { return rows_to_matrix(labeled_features_); }
    Matrix unlabeled_matrix() const { return rows_to_matrix(unlabeled_features_); }

    bool operator==(const DiscoveryDataset& o) const {
        return feature_dim_ == o.feature_dim_ && num_known_ == o.num_known_ &&
               num_novel_ == o.num_novel_ && labeled_features_ == o.labeled_features_ &&
               labeled_labels_ == o.labeled_labels_ &&
               unlabeled_features_ == o.unlabeled_features_ &&
               unlabeled_hidden_labels_ == o.unlabeled_hidden_labels_;
    }

private:
    void validate() const {
        if (num_known_ < 1 || num_novel_ < 1) {
            throw ConfigError("dataset needs at least one known and one novel class");
        }
        if (feature_dim_ < 1) throw ConfigError("feature_dim must be >= 1");
        if (labeled_features_.size() != labeled_labels_.size()) {
            throw ContractError("labeled features/labels length mismatch");
        }
        if (unlabeled_features_.size() != unlabeled_hidden_labels_.size()) {
            throw ContractError("unlabeled features/hidden labels length mismatch");
        }
        const int cl = static_cast<int>(num_known_);
        const int total = cl + static_cast<int>(num_novel_);
        for (int y : labeled_labels_) {
            if (y < 0 || y >= cl) {
                throw ContractError("labeled label " + std::to_string(y) +
                                    " outside known range [0, " + std::to_string(cl) + ")");
            }
        }
        for (int y : unlabeled_hidden_labels_) {
            if (y < cl || y >= total) {
                throw ContractError("hidden label " + std::to_string(y) +
                                    " outside novel range [" + std::to_string(cl) + ", " +
                                    std::to_string(total) + ")");
            }
        }
        for (const auto& f : labeled_features_) check_row(f);
        for (const auto& f : unlabeled_features_) check_row(f);
    }

    void check_row(const std::vector<double>& f) const {
        if (f.size() != feature_dim_) {
            throw ContractError("feature row has dimension " + std::to_string(f.size()) +
                                ", expected " + std::to_string(feature_dim_));
        }
        for (double v : f) {
            if (!std::isfinite(v)) throw NumericError("dataset contains non-finite feature");
        }
    }

    Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) const {
        if (rows.empty()) throw ContractError("cannot build matrix from empty subset");
        Matrix m(rows.size(), feature_dim_);
        for (std::size_t i = 0; i < rows.size(); ++i) m.set_row(i, rows[i]);
        return m;
    }

    std::size_t feature_dim_ = 0;
    std::size_t num_known_ = 0;
    std::size_t num_novel_ = 0;
    std::vector<std::vector<double>> labeled_features_;
    std::vector<int> labeled_labels_;
    std::vector<std::vector<double>> unlabeled_features_;
    std::vector<int> unlabeled_hidden_labels_;
};

// Gaussian-cluster generator standing in for image datasets. Class means sit
// on jittered signed coordinate axes (a scaled orthant layout) so any two
// classes stay separated by ~separation * sqrt(2) when C <= 2d; extra classes
// fall back to random unit directions.
struct SyntheticConfig {
    std::size_t num_known = 5;
    std::size_t num_novel = 5;
    std::size_t samples_per_known = 50;
    std::size_t samples_per_novel = 50;
    std::size_t feature_dim = 8;
    double separation = 5.0;
    double cluster_std = 1.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_known < 1 || num_novel < 1) throw ConfigError("class counts must be >= 1");
        if (samples_per_known < 1 || samples_per_novel < 1) {
            throw ConfigError("samples per class must be >= 1");
        }
        if (feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
        if (cluster_std <= 0.0) throw ConfigError("cluster_std must be > 0");
        if (separation <= 0.0) throw ConfigError("separation must be > 0");
    }
};

struct TrainTestSplit {
    DiscoveryDataset train;
    DiscoveryDataset test;
};

inline TrainTestSplit generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.feature_dim;
    const std::size_t total_classes = cfg.num_known + cfg.num_novel;
    Rng rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Class means, drawn in class order so the layout is seed-deterministic.
    std::vector<std::vector<double>> means(total_classes, std::vector<double>(d, 0.0));
    for (std::size_t c = 0; c < total_classes; ++c) {
        std::vector<double> dir(d, 0.0);
        if (c < 2 * d) {
            const double sign = (c < d) ? 1.0 : -1.0;
            dir[c % d] = sign;
            for (std::size_t j = 0; j < d; ++j) dir[j] += 0.15 * gauss(rng);
        } else {
            for (std::size_t j = 0; j < d; ++j) dir[j] = gauss(rng);
        }
        double norm = 0.0;
        for (double v : dir) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) norm = 1.0;
        for (std::size_t j = 0; j < d; ++j) means[c][j] = cfg.separation * dir[j] / norm;
    }

    std::vector<std::vector<double>> train_lf, train_uf, test_lf, test_uf;
    std::vector<int> train_ll, train_ul, test_ll, test_ul;
    for (std::size_t c = 0; c < total_classes; ++c) {
        const bool known = c < cfg.num_known;
        const std::size_t n = known ? cfg.samples_per_known : cfg.samples_per_novel;
        const std::size_t n_test = n / 5;  // 80/20 split per class
        for (std::size_t s = 0; s < n; ++s) {
            std::vector<double> x(d);
            for (std::size_t j = 0; j < d; ++j) x[j] = means[c][j] + cfg.cluster_std * gauss(rng);
            const bool is_test = s >= n - n_test;
            auto& feats = known ? (is_test ? test_lf : train_lf) : (is_test ? test_uf : train_uf);
            auto& labs = known ? (is_test ? test_ll : train_ll) : (is_test ? test_ul : train_ul);
            feats.push_back(std::move(x));
            labs.push_back(static_cast<int>(c));
        }
    }

    TrainTestSplit split{
        DiscoveryDataset::create(d, cfg.num_known, cfg.num_novel, std::move(train_lf),
                                 std::move(train_ll), std::move(train_uf), std::move(train_ul)),
        DiscoveryDataset::create(d, cfg.num_known, cfg.num_novel, std::move(test_lf),
                                 std::move(test_ll), std::move(test_uf), std::move(test_ul))};
    return split;
}

// CSV ingestion: header row required, feature columns numeric, label column
// string or integer. Rows whose label appears in known_classes become the
// labeled subset (indices follow list order); every other label becomes a
// novel class, indexed in sorted order after the known range.
struct CsvSchema {
    std::vector<std::string> feature_columns;
    std::string label_column;
    std::vector<std::string> known_classes;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline double parse_numeric_cell(const std::string& cell, std::size_t row, const std::string& col) {
    try {
        std::size_t consumed = 0;
        const double v = std::stod(cell, &consumed);
        if (consumed != cell.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(row) + ": non-numeric value '" + cell +
                         "' in column '" + col + "'");
    }
}

}  // namespace detail

inline DiscoveryDataset load_csv(const std::string& path, const CsvSchema& schema) {
    if (schema.known_classes.empty()) {
        throw ConfigError("known-class list must not be empty");
    }
    if (schema.feature_columns.empty()) throw ConfigError("feature column list must not be empty");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty, header row required");
    const auto header = detail::split_csv_line(line);

    auto column_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw SchemaError("column '" + name + "' not found in header of '" + path + "'");
    };

    std::vector<std::size_t> feature_idx;
    for (const auto& name : schema.feature_columns) feature_idx.push_back(column_index(name));
    const std::size_t label_idx = column_index(schema.label_column);

    std::vector<std::vector<double>> features;
    std::vector<std::string> labels;
    std::size_t row = 1;  // header was row 1
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("row " + std::to_string(row) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        }
        std::vector<double> f;
        f.reserve(feature_idx.size());
        for (std::size_t k = 0; k < feature_idx.size(); ++k) {
            f.push_back(detail::parse_numeric_cell(cells[feature_idx[k]], row,
                                                   schema.feature_columns[k]));
        }
        features.push_back(std::move(f));
        labels.push_back(cells[label_idx]);
    }
    if (features.empty()) throw ParseError("'" + path + "' has no data rows");

    // Known labels map to [0, C^l) in list order.
    std::vector<std::string> known = schema.known_classes;
    auto known_index = [&](const std::string& lab) -> int {
        for (std::size_t i = 0; i < known.size(); ++i) {
            if (known[i] == lab) return static_cast<int>(i);
        }
        return -1;
    };

    // Remaining labels become novel classes, sorted for determinism.
    std::vector<std::string> novel;
    for (const auto& lab : labels) {
        if (known_index(lab) < 0 &&
            std::find(novel.begin(), novel.end(), lab) == novel.end()) {
            novel.push_back(lab);
        }
    }
    std::sort(novel.begin(), novel.end());
    if (novel.empty()) {
        throw ConfigError("'" + path + "' has no rows outside the known-class list; "
                          "need at least one novel class");
    }

    const int cl = static_cast<int>(known.size());
    std::vector<std::vector<double>> lf, uf;
    std::vector<int> ll, ul;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const int ki = known_index(labels[i]);
        if (ki >= 0) {
            lf.push_back(std::move(features[i]));
            ll.push_back(ki);
        } else {
            const auto it = std::find(novel.begin(), novel.end(), labels[i]);
            uf.push_back(std::move(features[i]));
            ul.push_back(cl + static_cast<int>(it - novel.begin()));
        }
    }
    return DiscoveryDataset::create(schema.feature_columns.size(), known.size(), novel.size(),
                                    std::move(lf), std::move(ll), std::move(uf), std::move(ul));
}

// One mini-batch. Deliberately has no hidden labels: the trainer only ever
// sees unlabeled samples as bare feature rows.
struct Batch {
    Matrix labeled_features;
    std::vector<int> labeled_labels;
    Matrix unlabeled_features;

    std::size_t labeled_count() const { return labeled_features.rows(); }
    std::size_t unlabeled_count() const { return unlabeled_features.rows(); }
};

// Without-replacement epoch sampler with batch composition proportional to
// subset sizes. Proportional exposure is what produces the known/novel
// imbalance behaviour in the first place, so the sampler must not rebalance.
class BatchSampler {
public:
    BatchSampler(const DiscoveryDataset& dataset, std::size_t batch_size, std::uint64_t seed)
        : dataset_(&dataset), rng_(seed) {
        if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
        const std::size_t nl = dataset.labeled_size();
        const std::size_t nu = dataset.unlabeled_size();
        if (nl < 1 || nu < 1) {
            throw ConfigError("batch sampling needs at least one labeled and one unlabeled sample");
        }
        const double frac = static_cast<double>(nl) / static_cast<double>(nl + nu);
        std::size_t n = static_cast<std::size_t>(std::llround(frac * static_cast<double>(batch_size)));
        n = std::clamp<std::size_t>(n, 1, batch_size - 1);
        n = std::min(n, nl);
        labeled_per_batch_ = n;
        unlabeled_per_batch_ = std::min(batch_size - n, nu);
        labeled_order_.resize(nl);
        unlabeled_order_.resize(nu);
        std::iota(labeled_order_.begin(), labeled_order_.end(), std::size_t{0});
        std::iota(unlabeled_order_.begin(), unlabeled_order_.end(), std::size_t{0});
    }

    std::size_t labeled_per_batch() const { return labeled_per_batch_; }
    std::size_t unlabeled_per_batch() const { return unlabeled_per_batch_; }

    std::size_t batches_per_epoch() const {
        return std::min(labeled_order_.size() / labeled_per_batch_,
                        unlabeled_order_.size() / unlabeled_per_batch_);
    }

    void start_epoch() {
        std::shuffle(labeled_order_.begin(), labeled_order_.end(), rng_);
        std::shuffle(unlabeled_order_.begin(), unlabeled_order_.end(), rng_);
        labeled_cursor_ = 0;
        unlabeled_cursor_ = 0;
        batches_served_ = 0;
    }

    Batch next_batch() {
        if (batches_served_ >= batches_per_epoch()) {
            throw ContractError("epoch exhausted; call start_epoch()");
        }
        Batch b;
        b.labeled_features = Matrix(labeled_per_batch_, dataset_->feature_dim());
        b.labeled_labels.resize(labeled_per_batch_);
        for (std::size_t i = 0; i < labeled_per_batch_; ++i) {
            const std::size_t idx = labeled_order_[labeled_cursor_++];
            b.labeled_features.set_row(i, dataset_->labeled_feature(idx));
            b.labeled_labels[i] = dataset_->labeled_label(idx);
        }
        b.unlabeled_features = Matrix(unlabeled_per_batch_, dataset_->feature_dim());
        for (std::size_t i = 0; i < unlabeled_per_batch_; ++i) {
            const std::size_t idx = unlabeled_order_[unlabeled_cursor_++];
            b.unlabeled_features.set_row(i, dataset_->unlabeled_feature(idx));
        }
        ++batches_served_;
        return b;
    }

private:
    const DiscoveryDataset* dataset_;
    Rng rng_;
    std::size_t labeled_per_batch_ = 0;
    std::size_t unlabeled_per_batch_ = 0;
    std::vector<std::size_t> labeled_order_;
    std::vector<std::size_t> unlabeled_order_;
    std::size_t labeled_cursor_ = 0;
    std::size_t unlabeled_cursor_ = 0;
    std::size_t batches_served_ = 0;
};

// Gaussian-jitter view: the vector-data stand-in for crop/flip augmentation.
// noise_std = 0 returns the input unchanged and consumes no randomness.
inline Matrix augment_view(const Matrix& features, double noise_std, Rng& rng) {
    if (noise_std < 0.0) throw ConfigError("augment noise_std must be >= 0");
    if (noise_std == 0.0) return features;
    std::normal_distribution<double> gauss(0.0, noise_std);
    Matrix out = features;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += gauss(rng);
    return out;
}

}  // namespace sckd
