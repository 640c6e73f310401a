// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dot/tensor.hpp"

namespace dot {

struct LabeledDataset {
    Tensor inputs;  // N x D
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

/// Interleaved 2-D spiral arms, one per class, points in class-major order.
/// The noiseless arm for class k is
///   radius(u) = 2 u,  angle(k, u) = 2 pi k / num_classes + 2 pi u,
///   point(k, u) = radius(u) * (cos(angle), sin(angle)),  u = (i + 1) / points_per_class,
/// with N(0, noise_std^2) added to each coordinate.
LabeledDataset gen_spirals(std::size_t num_classes, std::size_t points_per_class, double noise_std,
                           std::uint64_t seed);

/// One isotropic Gaussian cluster per class; centers drawn uniformly from
/// [-center_spread, center_spread]^2.
LabeledDataset gen_gaussian_blobs(std::size_t num_classes, std::size_t points_per_class, double center_spread,
                                  double cluster_std, std::uint64_t seed);

/// Deterministic stratified split; per-class proportions are exact when
/// divisible, within one sample otherwise.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, double train_fraction,
                                                std::uint64_t seed);

/// Mini-batch index slices for one epoch: a fresh shuffle derived from
/// (run_seed, epoch), chunked; the final partial batch is kept.
std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, std::size_t batch_size,
                                              std::uint64_t run_seed, std::size_t epoch);

/// CSV with header `f0,f1,...,label`; features are doubles, label an integer.
LabeledDataset load_csv_dataset(const std::string& path);
void save_csv_dataset(const LabeledDataset& dataset, const std::string& path);

Tensor gather_rows(const Tensor& inputs, const std::vector<std::size_t>& indices);
std::vector<std::size_t> gather_labels(const std::vector<std::size_t>& labels,
                                       const std::vector<std::size_t>& indices);

}  // namespace dot
