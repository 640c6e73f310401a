// SPDX-License-Identifier: Apache-2.0
#include "dot/datasets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dot/csv.hpp"

namespace dot {

void LabeledDataset::validate() const {
    if (labels.empty()) throw std::invalid_argument("LabeledDataset: empty dataset");
    if (inputs.rank() != 2 || inputs.dim(0) != labels.size()) {
        throw std::invalid_argument("LabeledDataset: inputs " + shape_str(inputs.shape()) + " do not match " +
                                    std::to_string(labels.size()) + " labels");
    }
    if (num_classes < 2) throw std::invalid_argument("LabeledDataset: num_classes must be at least 2");
    for (std::size_t label : labels) {
        if (label >= num_classes) {
            throw std::invalid_argument("LabeledDataset: label " + std::to_string(label) + " out of range");
        }
    }
}

LabeledDataset gen_spirals(std::size_t num_classes, std::size_t points_per_class, double noise_std,
                           std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("gen_spirals: num_classes must be at least 2");
    if (points_per_class == 0) throw std::invalid_argument("gen_spirals: points_per_class must be positive");
    if (noise_std < 0.0) throw std::invalid_argument("gen_spirals: noise_std must be nonnegative");

    Rng rng(seed);
    const std::size_t n = num_classes * points_per_class;
    Tensor inputs({n, 2});
    std::vector<std::size_t> labels(n);
    std::size_t row = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        const double arm_offset = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(num_classes);
        for (std::size_t i = 0; i < points_per_class; ++i, ++row) {
            const double u = static_cast<double>(i + 1) / static_cast<double>(points_per_class);
            const double radius = 2.0 * u;
            const double angle = arm_offset + 2.0 * std::numbers::pi * u;
            inputs.at(row, 0) = radius * std::cos(angle) + noise_std * rng.gaussian();
            inputs.at(row, 1) = radius * std::sin(angle) + noise_std * rng.gaussian();
            labels[row] = k;
        }
    }
    return LabeledDataset{std::move(inputs), std::move(labels), num_classes};
}

LabeledDataset gen_gaussian_blobs(std::size_t num_classes, std::size_t points_per_class, double center_spread,
                                  double cluster_std, std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("gen_gaussian_blobs: num_classes must be at least 2");
    if (points_per_class == 0) throw std::invalid_argument("gen_gaussian_blobs: points_per_class must be positive");
    if (!(center_spread > 0.0)) throw std::invalid_argument("gen_gaussian_blobs: center_spread must be positive");
    if (cluster_std < 0.0) throw std::invalid_argument("gen_gaussian_blobs: cluster_std must be nonnegative");

    Rng rng(seed);
    std::vector<std::pair<double, double>> centers(num_classes);
    for (auto& center : centers) {
        center.first = rng.uniform(-center_spread, center_spread);
        center.second = rng.uniform(-center_spread, center_spread);
    }
    const std::size_t n = num_classes * points_per_class;
    Tensor inputs({n, 2});
    std::vector<std::size_t> labels(n);
    std::size_t row = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        for (std::size_t i = 0; i < points_per_class; ++i, ++row) {
            inputs.at(row, 0) = centers[k].first + cluster_std * rng.gaussian();
            inputs.at(row, 1) = centers[k].second + cluster_std * rng.gaussian();
            labels[row] = k;
        }
    }
    return LabeledDataset{std::move(inputs), std::move(labels), num_classes};
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, double train_fraction,
                                                std::uint64_t seed) {
    dataset.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split: train_fraction must lie strictly between 0 and 1");
    }
    Rng rng(seed);
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t k = 0; k < dataset.num_classes; ++k) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (dataset.labels[i] == k) members.push_back(i);
        }
        rng.shuffle(members);
        const auto take = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(members.size())));
        for (std::size_t i = 0; i < members.size(); ++i) {
            (i < take ? train_idx : test_idx).push_back(members[i]);
        }
    }
    if (train_idx.empty() || test_idx.empty()) {
        throw std::invalid_argument("split: both splits must be nonempty");
    }
    auto subset = [&](const std::vector<std::size_t>& idx) {
        return LabeledDataset{gather_rows(dataset.inputs, idx), gather_labels(dataset.labels, idx),
                              dataset.num_classes};
    };
    return {subset(train_idx), subset(test_idx)};
}

std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, std::size_t batch_size,
                                              std::uint64_t run_seed, std::size_t epoch) {
    if (batch_size == 0) throw std::invalid_argument("batches: batch_size must be positive");
    std::vector<std::size_t> order(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) order[i] = i;
    Rng rng(mix_seed(run_seed, epoch));
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> slices;
    for (std::size_t start = 0; start < dataset_size; start += batch_size) {
        const std::size_t stop = std::min(dataset_size, start + batch_size);
        slices.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return slices;
}

LabeledDataset load_csv_dataset(const std::string& path) {
    CsvTable table = read_csv(path);
    if (table.header.size() < 2 || table.header.back() != "label") {
        throw std::invalid_argument("load_csv_dataset: expected header f0,...,label in '" + path + "'");
    }
    const std::size_t dims = table.header.size() - 1;
    const std::size_t n = table.rows.size();
    if (n == 0) throw std::invalid_argument("load_csv_dataset: no data rows in '" + path + "'");
    Tensor inputs({n, dims});
    std::vector<std::size_t> labels(n);
    std::size_t max_label = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = table.rows[r];
        if (row.size() != dims + 1) {
            throw std::invalid_argument("load_csv_dataset: row " + std::to_string(r + 1) + " has " +
                                        std::to_string(row.size()) + " fields, expected " + std::to_string(dims + 1));
        }
        for (std::size_t d = 0; d < dims; ++d) inputs.at(r, d) = parse_double(row[d]);
        labels[r] = static_cast<std::size_t>(std::stoull(row[dims]));
        max_label = std::max(max_label, labels[r]);
    }
    LabeledDataset dataset{std::move(inputs), std::move(labels), std::max<std::size_t>(max_label + 1, 2)};
    dataset.validate();
    return dataset;
}

void save_csv_dataset(const LabeledDataset& dataset, const std::string& path) {
    dataset.validate();
    const std::size_t dims = dataset.inputs.dim(1);
    std::string header;
    for (std::size_t d = 0; d < dims; ++d) header += "f" + std::to_string(d) + ",";
    header += "label";
    std::vector<std::string> rows;
    rows.reserve(dataset.size());
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        std::string row;
        for (std::size_t d = 0; d < dims; ++d) row += format_double(dataset.inputs.at(r, d)) + ",";
        row += std::to_string(dataset.labels[r]);
        rows.push_back(std::move(row));
    }
    emit_csv(header, rows, path);
}

Tensor gather_rows(const Tensor& inputs, const std::vector<std::size_t>& indices) {
    if (inputs.rank() != 2) throw std::invalid_argument("gather_rows: inputs must be rank-2");
    const std::size_t dims = inputs.dim(1);
    Tensor out({indices.size(), dims});
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= inputs.dim(0)) throw std::out_of_range("gather_rows: index out of range");
        for (std::size_t d = 0; d < dims; ++d) out.at(r, d) = inputs.at(indices[r], d);
    }
    return out;
}

std::vector<std::size_t> gather_labels(const std::vector<std::size_t>& labels,
                                       const std::vector<std::size_t>& indices) {
    std::vector<std::size_t> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= labels.size()) throw std::out_of_range("gather_labels: index out of range");
        out.push_back(labels[i]);
    }
    return out;
}

}  // namespace dot
