#include "raw/data.hpp"

#include "raw/error.hpp"
#include "raw/io.hpp"
#include "raw/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

namespace raw {

void Dataset::check() const {
  if (features.rows() == 0) throw InputError("dataset '" + name + "' is empty");
  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    throw InputError("dataset '" + name + "': label count does not match row count");
  if (class_count < 2) throw InputError("dataset '" + name + "': class_count must be >= 2");
  for (int l : labels)
    if (l < 0 || l >= class_count)
      throw InputError("dataset '" + name + "': label " + std::to_string(l) + " out of range");
  if (!features.allFinite()) throw InputError("dataset '" + name + "' has non-finite features");
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows, std::string new_name) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  out.class_count = class_count;
  out.name = std::move(new_name);
  out.seed = seed;
  return out;
}

void GenSpec::validate() const {
  if (classes < 2) throw ConfigError("classes must be >= 2");
  if (dims < 2) throw ConfigError("dims must be >= 2");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  if (!(spread > 0.0) || !std::isfinite(spread)) throw ConfigError("spread must be > 0");
}

std::string_view to_string(GenKind k) {
  return k == GenKind::gaussian_blobs ? "gaussian_blobs" : "ring_classes";
}

GenKind parse_gen_kind(std::string_view s) {
  if (s == "gaussian_blobs") return GenKind::gaussian_blobs;
  if (s == "ring_classes") return GenKind::ring_classes;
  throw ConfigError("unknown generator kind '" + std::string(s) + "'");
}

namespace {

double clamp_feature(double v) { return std::clamp(v, kFeatureMin, kFeatureMax); }

}  // namespace

Dataset generate(const GenSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(spec.classes) * spec.samples_per_class;
  Dataset d;
  d.features.resize(n, spec.dims);
  d.labels.resize(static_cast<std::size_t>(n));
  d.class_count = spec.classes;
  d.name = std::string(to_string(spec.kind));
  d.seed = seed;

  Rng centres(seed, "centres");
  Rng noise(seed, "samples");
  Eigen::Index row = 0;
  if (spec.kind == GenKind::gaussian_blobs) {
    Matrix mu(spec.classes, spec.dims);
    for (Eigen::Index k = 0; k < mu.rows(); ++k)
      for (Eigen::Index j = 0; j < mu.cols(); ++j) mu(k, j) = centres.uniform(-0.5, 0.5);
    for (int k = 0; k < spec.classes; ++k)
      for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
        for (Eigen::Index j = 0; j < spec.dims; ++j)
          d.features(row, j) = clamp_feature(mu(k, j) + spec.spread * noise.normal());
        d.labels[static_cast<std::size_t>(row)] = k;
      }
  } else {
    for (int k = 0; k < spec.classes; ++k) {
      const double radius = 0.8 * (k + 1) / spec.classes;
      for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
        Vector dir(spec.dims);
        for (Eigen::Index j = 0; j < spec.dims; ++j) dir(j) = noise.normal();
        dir /= std::max(dir.norm(), 1e-12);
        const double r = radius + spec.spread * noise.normal();
        for (Eigen::Index j = 0; j < spec.dims; ++j) d.features(row, j) = clamp_feature(r * dir(j));
        d.labels[static_cast<std::size_t>(row)] = k;
      }
    }
  }
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  data.check();
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test_fraction must lie strictly between 0 and 1");
  const auto n = static_cast<std::size_t>(data.size());
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test == n)
    throw ConfigError("test_fraction " + io::decimal(test_fraction) + " leaves an empty split of " +
                      std::to_string(n) + " rows");
  Rng rng(seed, "split");
  const auto perm = rng.permutation(n);
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  return {data.subset(train, data.name + "/train"), data.subset(test, data.name + "/test")};
}

std::size_t query_count(Eigen::Index rows, double budget_fraction) {
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0))
    throw ConfigError("query budget fraction must lie in (0, 1]");
  return static_cast<std::size_t>(std::llround(budget_fraction * static_cast<double>(rows)));
}

Matrix sample_queries(const Matrix& inputs, double budget_fraction, std::uint64_t seed) {
  const std::size_t k = query_count(inputs.rows(), budget_fraction);
  Rng rng(seed, "queries");
  const auto perm = rng.permutation(static_cast<std::size_t>(inputs.rows()));
  Matrix out(static_cast<Eigen::Index>(k), inputs.cols());
  for (std::size_t i = 0; i < k; ++i)
    out.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(perm[i]));
  return out;
}

Matrix random_probe_inputs(Eigen::Index count, Eigen::Index dims, double lo, double hi,
                           std::uint64_t seed) {
  if (count <= 0) throw InputError("probe count must be positive");
  if (dims <= 0) throw InputError("probe dims must be positive");
  if (!(lo < hi)) throw InputError("probe range is empty");
  Rng rng(seed, "probes");
  Matrix out(count, dims);
  for (Eigen::Index r = 0; r < count; ++r)
    for (Eigen::Index c = 0; c < dims; ++c) out(r, c) = rng.uniform(lo, hi);
  return out;
}

// ---------------------------------------------------------------- persistence

std::string save_dataset(const Dataset& data) {
  data.check();
  std::ostringstream out;
  out << "# raw-dataset v" << kDatasetFormatVersion << " rows=" << data.size()
      << " dims=" << data.dims() << " classes=" << data.class_count << " seed=" << data.seed
      << " name=" << data.name << "\n";
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.dims(); ++c) out << io::decimal(data.features(r, c)) << ',';
    out << data.labels[static_cast<std::size_t>(r)] << "\n";
  }
  return out.str();
}

namespace {

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

std::string_view header_field(std::string_view header, std::string_view key) {
  const std::string needle = " " + std::string(key) + "=";
  const auto pos = header.find(needle);
  if (pos == std::string_view::npos)
    throw FormatError("dataset header lacks '" + std::string(key) + "'");
  auto rest = header.substr(pos + needle.size());
  if (key == "name") return rest;
  return rest.substr(0, rest.find(' '));
}

}  // namespace

Dataset load_dataset(std::string_view text) {
  auto next_line = [&text]() -> std::optional<std::string_view> {
    if (text.empty()) return std::nullopt;
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  const auto header = next_line();
  if (!header || !header->starts_with("# raw-dataset v"))
    throw FormatError("missing raw-dataset header");
  const auto version_end = header->find(' ', 15);
  const int version = parse_number<int>(header->substr(15, version_end - 15), "dataset version");
  if (version < 1 || version > kDatasetFormatVersion)
    throw FormatError("unsupported raw-dataset version " + std::to_string(version));

  Dataset d;
  const auto rows = parse_number<Eigen::Index>(header_field(*header, "rows"), "row count");
  const auto dims = parse_number<Eigen::Index>(header_field(*header, "dims"), "dims");
  d.class_count = parse_number<int>(header_field(*header, "classes"), "class count");
  d.seed = parse_number<std::uint64_t>(header_field(*header, "seed"), "seed");
  d.name = std::string(header_field(*header, "name"));
  if (rows <= 0 || dims <= 0 || d.class_count < 2) throw FormatError("degenerate dataset header");

  d.features.resize(rows, dims);
  d.labels.reserve(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto line = next_line();
    if (!line || line->empty())
      throw FormatError("dataset truncated: expected " + std::to_string(rows) + " rows, got " +
                        std::to_string(r));
    std::string_view rest = *line;
    for (Eigen::Index c = 0; c < dims; ++c) {
      const auto comma = rest.find(',');
      if (comma == std::string_view::npos)
        throw FormatError("row " + std::to_string(r) + " has fewer than " + std::to_string(dims) +
                          " features");
      d.features(r, c) = parse_number<double>(rest.substr(0, comma), "feature");
      rest = rest.substr(comma + 1);
    }
    const int label = parse_number<int>(rest, "label");
    if (label < 0 || label >= d.class_count)
      throw FormatError("row " + std::to_string(r) + ": label " + std::to_string(label) +
                        " inconsistent with classes=" + std::to_string(d.class_count));
    d.labels.push_back(label);
  }
  while (const auto extra = next_line())
    if (!extra->empty()) throw FormatError("dataset has more rows than its header declares");
  return d;
}

}  // namespace raw
