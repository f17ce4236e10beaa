#pragma once

#include "raw/nnet.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace raw {

inline constexpr double kFeatureMin = -1.0;
inline constexpr double kFeatureMax = 1.0;

/// Labelled feature matrix. Features live in [kFeatureMin, kFeatureMax].
struct Dataset {
  Matrix features;          // N x D
  std::vector<int> labels;  // N entries in [0, class_count)
  int class_count = 0;
  std::string name;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dims() const { return features.cols(); }
  void check() const;
  Dataset subset(const std::vector<std::size_t>& rows, std::string new_name) const;
};

enum class GenKind { gaussian_blobs, ring_classes };

// Default overlap for gaussian_blobs. At this spread, independently seeded
// family-A models disagree on a sizeable share of held-out points while
// each still reaches well above chance accuracy.
inline constexpr double kDefaultSpread = 0.6;

struct GenSpec {
  GenKind kind = GenKind::gaussian_blobs;
  int classes = 4;
  int dims = 8;
  int samples_per_class = 250;
  double spread = kDefaultSpread;

  void validate() const;
};

std::string_view to_string(GenKind k);
GenKind parse_gen_kind(std::string_view s);

/// gaussian_blobs: class centres uniform in [-0.5, 0.5]^D, samples are
/// centre + spread * N(0, I), clamped to the feature range.
/// ring_classes: class k sits on the sphere of radius 0.8 (k+1)/K around the
/// origin (uniform direction), radial jitter spread * N(0,1), clamped.
/// Rows are grouped by class, exactly samples_per_class each.
Dataset generate(const GenSpec& spec, std::uint64_t seed);

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);

/// round(budget_fraction * N) rows sampled uniformly without replacement,
/// in shuffled order.
Matrix sample_queries(const Matrix& inputs, double budget_fraction, std::uint64_t seed);
std::size_t query_count(Eigen::Index rows, double budget_fraction);

Matrix random_probe_inputs(Eigen::Index count, Eigen::Index dims, double lo, double hi,
                           std::uint64_t seed);

inline constexpr int kDatasetFormatVersion = 1;

/// Header line `# raw-dataset v1 rows=N dims=D classes=K seed=S name=...`,
/// then one comma-separated row per sample with the integer label last.
std::string save_dataset(const Dataset& data);
Dataset load_dataset(std::string_view text);

}  // namespace raw
