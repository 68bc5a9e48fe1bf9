// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tlearn/errors.hpp"
#include "tlearn/rng.hpp"

namespace tlearn {

namespace {

Dataset subset(const Dataset& d, std::span<const std::uint32_t> ids) {
  Dataset out;
  out.features = gather_rows(d.features, ids);
  out.labels.reserve(ids.size());
  for (std::uint32_t id : ids) out.labels.push_back(d.labels[id]);
  out.class_count = d.class_count;
  return out;
}

std::vector<NodeShard> shards_from_assignment(const Dataset& d,
                                              std::vector<std::vector<std::uint32_t>> by_node) {
  // No node may end up empty; move samples off the largest nodes if needed.
  const std::size_t node_count = by_node.size();
  if (d.size() < node_count) {
    throw ConfigError("cannot give every node a sample: " + std::to_string(d.size()) +
                      " samples for " + std::to_string(node_count) + " nodes");
  }
  for (std::size_t target = 0; target < node_count; ++target) {
    while (by_node[target].empty()) {
      std::size_t donor = 0;
      for (std::size_t i = 1; i < node_count; ++i) {
        if (by_node[i].size() > by_node[donor].size()) donor = i;
      }
      if (by_node[donor].size() <= 1) {
        throw ConfigError("rebalance impossible: not enough samples for every node");
      }
      by_node[target].push_back(by_node[donor].back());
      by_node[donor].pop_back();
    }
  }
  std::vector<NodeShard> shards;
  shards.reserve(node_count);
  for (std::size_t n = 0; n < node_count; ++n) {
    shards.push_back({static_cast<std::uint32_t>(n), subset(d, by_node[n])});
  }
  return shards;
}

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated IDX file " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void Dataset::validate() const {
  if (labels.size() != features.rows) {
    throw ValidationError("label count " + std::to_string(labels.size()) +
                          " does not match feature rows " + std::to_string(features.rows));
  }
  for (std::uint32_t label : labels) {
    if (label >= class_count) {
      throw ValidationError("label " + std::to_string(label) + " out of range " +
                            std::to_string(class_count));
    }
  }
}

Dataset gen_synthetic(std::size_t n_samples, std::size_t n_features, std::size_t n_classes,
                      double cluster_spread, std::uint64_t seed) {
  if (n_samples == 0 || n_features == 0 || n_classes == 0) {
    throw ValidationError("sample, feature, and class counts must be positive");
  }
  if (n_classes > n_samples) {
    throw ValidationError("n_classes " + std::to_string(n_classes) + " exceeds n_samples " +
                          std::to_string(n_samples));
  }
  if (cluster_spread < 0.0) throw ValidationError("cluster_spread must be non-negative");

  Rng rng(seed);
  Matrix centroids(n_classes, n_features);
  for (std::size_t c = 0; c < n_classes; ++c) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t f = 0; f < n_features; ++f) {
        double v = rng.next_gaussian();
        centroids(c, f) = v;
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (std::size_t f = 0; f < n_features; ++f) centroids(c, f) *= 4.0 / norm;
  }

  Dataset d;
  d.class_count = n_classes;
  d.features = Matrix(n_samples, n_features);
  d.labels.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t c = i % n_classes;  // balanced within +-1
    d.labels[i] = static_cast<std::uint32_t>(c);
    for (std::size_t f = 0; f < n_features; ++f) {
      d.features(i, f) = centroids(c, f) + cluster_spread * rng.next_gaussian();
    }
  }
  return d;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open " + images_path);
  if (read_be_u32(img, images_path) != 0x00000803u) {
    throw FormatError("bad IDX image magic in " + images_path);
  }
  const std::uint32_t n_images = read_be_u32(img, images_path);
  const std::uint32_t rows = read_be_u32(img, images_path);
  const std::uint32_t cols = read_be_u32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open " + labels_path);
  if (read_be_u32(lab, labels_path) != 0x00000801u) {
    throw FormatError("bad IDX label magic in " + labels_path);
  }
  const std::uint32_t n_labels = read_be_u32(lab, labels_path);
  if (n_labels != n_images) {
    throw FormatError("image/label count mismatch: " + std::to_string(n_images) + " vs " +
                      std::to_string(n_labels));
  }
  if (n_images == 0) throw FormatError("empty IDX pair");

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  Dataset d;
  d.features = Matrix(n_images, pixels);
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
      throw FormatError("truncated IDX file " + images_path);
    }
    for (std::size_t p = 0; p < pixels; ++p) d.features(i, p) = buf[p] / 255.0;
  }
  d.labels.resize(n_images);
  std::uint32_t max_label = 0;
  for (std::uint32_t i = 0; i < n_images; ++i) {
    unsigned char b = 0;
    if (!lab.read(reinterpret_cast<char*>(&b), 1)) {
      throw FormatError("truncated IDX file " + labels_path);
    }
    d.labels[i] = b;
    max_label = std::max<std::uint32_t>(max_label, b);
  }
  d.class_count = max_label + 1;
  return d;
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);

  std::size_t label_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) label_col = i;
  }
  if (label_col == header.size()) {
    std::string available;
    for (const auto& h : header) available += (available.empty() ? "" : ", ") + h;
    throw FormatError("label column \"" + label_column + "\" not found; available: " + available);
  }

  Dataset d;
  std::vector<std::string> class_names;
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError(path + " row " + std::to_string(row) + ": expected " +
                        std::to_string(header.size()) + " cells, got " +
                        std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_col) {
        auto it = std::find(class_names.begin(), class_names.end(), cells[c]);
        if (it == class_names.end()) {
          class_names.push_back(cells[c]);
          it = std::prev(class_names.end());
        }
        d.labels.push_back(static_cast<std::uint32_t>(it - class_names.begin()));
      } else {
        std::size_t consumed = 0;
        double v = 0.0;
        try {
          v = std::stod(cells[c], &consumed);
        } catch (const std::exception&) {
          consumed = 0;
        }
        if (consumed != cells[c].size() || cells[c].empty()) {
          throw FormatError(path + " row " + std::to_string(row) + " column \"" + header[c] +
                            "\": cannot parse \"" + cells[c] + "\" as a number");
        }
        values.push_back(v);
      }
    }
  }
  if (row == 0) throw FormatError(path + " has no data rows");

  d.features.rows = row;
  d.features.cols = header.size() - 1;
  d.features.data = std::move(values);
  d.class_count = class_names.size();
  return d;
}

std::vector<std::uint32_t> kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                                  std::size_t max_iters, std::vector<double>* objective_trace) {
  if (k == 0) throw ValidationError("k must be positive");
  if (k > points.rows) {
    throw ValidationError("k " + std::to_string(k) + " exceeds point count " +
                          std::to_string(points.rows));
  }

  Rng rng(seed);
  const auto perm = rng.permutation(points.rows);
  Matrix centroids(k, points.cols);
  for (std::size_t c = 0; c < k; ++c) {
    auto src = points.row(perm[c]);
    std::copy(src.begin(), src.end(), centroids.row(c).begin());
  }

  std::vector<std::uint32_t> assignments(points.rows, 0);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iters, 1); ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t p = 0; p < points.rows; ++p) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double dist = 0.0;
        for (std::size_t f = 0; f < points.cols; ++f) {
          double diff = points(p, f) - centroids(c, f);
          dist += diff * diff;
        }
        if (dist < best_d) {  // ties keep the lowest centroid index
          best_d = dist;
          best = c;
        }
      }
      objective += best_d;
      if (assignments[p] != best) {
        assignments[p] = static_cast<std::uint32_t>(best);
        changed = true;
      }
    }
    if (objective_trace) objective_trace->push_back(objective);
    if (!changed && iter > 0) break;

    Matrix sums(k, points.cols);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t p = 0; p < points.rows; ++p) {
      ++counts[assignments[p]];
      for (std::size_t f = 0; f < points.cols; ++f) sums(assignments[p], f) += points(p, f);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t f = 0; f < points.cols; ++f) {
        centroids(c, f) = sums(c, f) / static_cast<double>(counts[c]);
      }
    }
  }
  return assignments;
}

double kmeans_objective(const Matrix& points, std::span<const std::uint32_t> assignments,
                        std::size_t k) {
  Matrix sums(k, points.cols);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t p = 0; p < points.rows; ++p) {
    ++counts[assignments[p]];
    for (std::size_t f = 0; f < points.cols; ++f) sums(assignments[p], f) += points(p, f);
  }
  double total = 0.0;
  for (std::size_t p = 0; p < points.rows; ++p) {
    const std::size_t c = assignments[p];
    for (std::size_t f = 0; f < points.cols; ++f) {
      double mean = sums(c, f) / static_cast<double>(counts[c]);
      double diff = points(p, f) - mean;
      total += diff * diff;
    }
  }
  return total;
}

std::vector<NodeShard> partition(const Dataset& dataset, const PartitionSpec& spec) {
  dataset.validate();
  if (spec.node_count == 0) throw ConfigError("node_count must be at least 1");
  const std::size_t n = dataset.size();
  std::vector<std::vector<std::uint32_t>> by_node(spec.node_count);

  switch (spec.strategy) {
    case PartitionStrategy::iid: {
      Rng rng(spec.seed);
      const auto perm = rng.permutation(n);
      for (std::size_t i = 0; i < n; ++i) by_node[i % spec.node_count].push_back(perm[i]);
      break;
    }
    case PartitionStrategy::label_skew: {
      if (spec.shards_per_node == 0) throw ConfigError("shards_per_node must be at least 1");
      std::vector<std::uint32_t> order(n);
      std::iota(order.begin(), order.end(), 0u);
      std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return dataset.labels[a] < dataset.labels[b];
      });
      const std::size_t shard_count = spec.node_count * spec.shards_per_node;
      std::vector<std::uint32_t> shard_ids(shard_count);
      std::iota(shard_ids.begin(), shard_ids.end(), 0u);
      Rng rng(spec.seed);
      rng.shuffle(shard_ids);
      const std::size_t base = n / shard_count;
      const std::size_t extra = n % shard_count;
      std::vector<std::size_t> starts(shard_count + 1, 0);
      for (std::size_t s = 0; s < shard_count; ++s) {
        starts[s + 1] = starts[s] + base + (s < extra ? 1 : 0);
      }
      for (std::size_t j = 0; j < shard_count; ++j) {
        const std::uint32_t s = shard_ids[j];
        auto& dest = by_node[j % spec.node_count];
        for (std::size_t i = starts[s]; i < starts[s + 1]; ++i) dest.push_back(order[i]);
      }
      break;
    }
    case PartitionStrategy::kmeans: {
      const std::size_t k = spec.kmeans_k == 0 ? spec.node_count : spec.kmeans_k;
      const auto assignments = kmeans(dataset.features, std::min(k, n), spec.seed,
                                      spec.kmeans_max_iters);
      std::vector<std::vector<std::uint32_t>> clusters(std::min(k, n));
      for (std::size_t i = 0; i < n; ++i) clusters[assignments[i]].push_back(static_cast<std::uint32_t>(i));
      std::vector<std::size_t> cluster_order(clusters.size());
      std::iota(cluster_order.begin(), cluster_order.end(), 0u);
      std::stable_sort(cluster_order.begin(), cluster_order.end(), [&](std::size_t a, std::size_t b) {
        return clusters[a].size() > clusters[b].size();  // largest first, ties by id
      });
      for (std::size_t j = 0; j < cluster_order.size(); ++j) {
        auto& dest = by_node[j % spec.node_count];
        for (std::uint32_t id : clusters[cluster_order[j]]) dest.push_back(id);
      }
      break;
    }
  }
  return shards_from_assignment(dataset, std::move(by_node));
}

std::vector<NodeShard> partition_by_sizes(const Dataset& dataset,
                                          std::span<const std::size_t> sizes) {
  dataset.validate();
  std::size_t total = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw ConfigError("every node needs at least one sample");
    total += s;
  }
  if (total != dataset.size()) {
    throw ConfigError("shard sizes sum to " + std::to_string(total) + " but dataset has " +
                      std::to_string(dataset.size()) + " samples");
  }
  std::vector<NodeShard> shards;
  std::uint32_t next = 0;
  for (std::size_t n = 0; n < sizes.size(); ++n) {
    std::vector<std::uint32_t> ids(sizes[n]);
    std::iota(ids.begin(), ids.end(), next);
    next += static_cast<std::uint32_t>(sizes[n]);
    shards.push_back({static_cast<std::uint32_t>(n), subset(dataset, ids)});
  }
  return shards;
}

Dataset concat_shards(std::span<const NodeShard> shards) {
  if (shards.empty()) throw ValidationError("no shards to concatenate");
  Dataset out;
  out.class_count = shards.front().dataset.class_count;
  out.features = Matrix(0, shards.front().dataset.features.cols);
  for (const NodeShard& shard : shards) {
    out.features.rows += shard.dataset.features.rows;
    out.features.data.insert(out.features.data.end(), shard.dataset.features.data.begin(),
                             shard.dataset.features.data.end());
    out.labels.insert(out.labels.end(), shard.dataset.labels.begin(), shard.dataset.labels.end());
  }
  return out;
}

TrainTestSplit split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  dataset.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test_fraction must be in (0, 1)");
  }
  const std::size_t n = dataset.size();
  if (n < 2) throw ValidationError("need at least 2 samples to split");
  std::size_t n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<std::uint32_t> train_ids(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::uint32_t> test_ids(perm.end() - static_cast<std::ptrdiff_t>(n_test), perm.end());
  return {subset(dataset, train_ids), subset(dataset, test_ids)};
}

Standardizer Standardizer::fit(const Matrix& features) {
  if (features.rows == 0) throw ValidationError("cannot fit standardizer on empty data");
  Standardizer s;
  s.mean.assign(features.cols, 0.0);
  s.scale.assign(features.cols, 1.0);
  for (std::size_t i = 0; i < features.rows; ++i)
    for (std::size_t j = 0; j < features.cols; ++j) s.mean[j] += features(i, j);
  for (double& m : s.mean) m /= static_cast<double>(features.rows);
  std::vector<double> var(features.cols, 0.0);
  for (std::size_t i = 0; i < features.rows; ++i) {
    for (std::size_t j = 0; j < features.cols; ++j) {
      double d = features(i, j) - s.mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < features.cols; ++j) {
    double sd = std::sqrt(var[j] / static_cast<double>(features.rows));
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(Matrix& features) const {
  if (features.cols != mean.size()) {
    throw DimensionError("standardizer fitted on " + std::to_string(mean.size()) +
                         " columns, got " + std::to_string(features.cols));
  }
  for (std::size_t i = 0; i < features.rows; ++i)
    for (std::size_t j = 0; j < features.cols; ++j) {
      features(i, j) = (features(i, j) - mean[j]) / scale[j];
    }
}

}  // namespace tlearn
