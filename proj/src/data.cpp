#include "pnp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "pnp/errors.hpp"
#include "pnp/random.hpp"

namespace pnp {

std::string to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

std::vector<int> LabeledDataset::classes() const {
  std::vector<int> out = labels;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> LabeledDataset::indices_by_class() const {
  const std::vector<int> ids = classes();
  std::vector<std::vector<std::size_t>> out(ids.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::lower_bound(ids.begin(), ids.end(), labels[i]);
    out[static_cast<std::size_t>(it - ids.begin())].push_back(i);
  }
  return out;
}

void LabeledDataset::validate() const {
  if (points.rows() != labels.size()) {
    throw ConfigError("dataset has " + std::to_string(points.rows()) +
                      " points but " + std::to_string(labels.size()) + " labels");
  }
  const std::vector<int> ids = classes();
  if (ids.empty()) throw ConfigError("dataset is empty");
  if (ids.back() - ids.front() + 1 != static_cast<int>(ids.size())) {
    throw ConfigError("dataset labels are not a contiguous range");
  }
  const auto groups = indices_by_class();
  for (std::size_t c = 0; c < ids.size(); ++c) {
    if (groups[c].size() < 2) {
      throw ConfigError("class " + std::to_string(ids[c]) +
                        " has fewer than 2 samples");
    }
  }
}

std::vector<double> toy_center(const ToyConfig& config, std::size_t slot) {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(slot) /
                       static_cast<double>(2 * config.n_classes);
  return {config.ring_radius * std::cos(angle),
          config.ring_radius * std::sin(angle)};
}

ToySplits make_toy_2d(const ToyConfig& config, std::uint64_t seed) {
  if (config.n_per_class < 2) throw ConfigError("n_per_class must be >= 2");
  if (config.n_classes < 2) throw ConfigError("toy data needs >= 2 classes");
  if (!(config.ring_radius > 0.0) || !(config.sigma_fraction > 0.0)) {
    throw ConfigError("ring radius and sigma fraction must be positive");
  }
  const double sigma = config.sigma_fraction * config.ring_radius;
  Rng rng(seed);
  auto build = [&](Split split) {
    LabeledDataset ds;
    ds.split = split;
    const std::size_t n = config.n_classes * config.n_per_class;
    ds.points = Matrix(n, 2);
    ds.labels.resize(n);
    const std::size_t parity = split == Split::kTrain ? 0 : 1;
    const int label_base = split == Split::kTrain ? 0 : static_cast<int>(config.n_classes);
    std::size_t row = 0;
    for (std::size_t c = 0; c < config.n_classes; ++c) {
      const auto center = toy_center(config, 2 * c + parity);
      for (std::size_t s = 0; s < config.n_per_class; ++s, ++row) {
        ds.points(row, 0) = center[0] + sigma * rng.normal();
        ds.points(row, 1) = center[1] + sigma * rng.normal();
        ds.labels[row] = label_base + static_cast<int>(c);
      }
    }
    return ds;
  };
  ToySplits splits;
  splits.train = build(Split::kTrain);
  splits.test = build(Split::kTest);
  return splits;
}

BatchSampler::BatchSampler(const LabeledDataset& dataset, BatchPlan plan)
    : by_class_(dataset.indices_by_class()),
      class_ids_(dataset.classes()),
      plan_(plan) {
  if (plan.per_class < 2) throw ConfigError("per_class must be >= 2");
  if (plan.k_classes < 1 || plan.k_classes > class_ids_.size()) {
    throw ConfigError("k_classes=" + std::to_string(plan.k_classes) +
                      " but dataset has " + std::to_string(class_ids_.size()) +
                      " classes");
  }
  if (plan.k_classes * plan.per_class > dataset.size()) {
    throw ConfigError("batch plan larger than dataset");
  }
  for (std::size_t c = 0; c < by_class_.size(); ++c) {
    if (by_class_[c].size() < plan.per_class) {
      throw ConfigError("class " + std::to_string(class_ids_[c]) + " has " +
                        std::to_string(by_class_[c].size()) +
                        " samples, fewer than per_class=" +
                        std::to_string(plan.per_class));
    }
  }
}

std::vector<std::size_t> BatchSampler::sample(std::uint64_t draw_index) const {
  Rng rng(derive_seed(plan_.seed, draw_index));
  // Partial Fisher-Yates for the classes, then for each class's rows.
  std::vector<std::size_t> cls(by_class_.size());
  std::iota(cls.begin(), cls.end(), 0);
  for (std::size_t i = 0; i < plan_.k_classes; ++i) {
    std::swap(cls[i], cls[i + rng.below(cls.size() - i)]);
  }
  std::vector<std::size_t> out;
  out.reserve(plan_.k_classes * plan_.per_class);
  for (std::size_t i = 0; i < plan_.k_classes; ++i) {
    std::vector<std::size_t> rows = by_class_[cls[i]];
    for (std::size_t j = 0; j < plan_.per_class; ++j) {
      std::swap(rows[j], rows[j + rng.below(rows.size() - j)]);
      out.push_back(rows[j]);
    }
  }
  return out;
}

LabeledDataset merge_classes(const LabeledDataset& dataset,
                             std::size_t group_size, std::uint64_t seed) {
  if (group_size < 1) throw ConfigError("group_size must be >= 1");
  const std::vector<int> ids = dataset.classes();
  if (ids.size() < group_size) {
    throw ConfigError("cannot merge " + std::to_string(ids.size()) +
                      " classes in groups of " + std::to_string(group_size));
  }
  std::vector<int> order = ids;
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::map<int, int> mapping;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    mapping[order[pos]] = static_cast<int>(pos / group_size);
  }
  LabeledDataset out = dataset;
  for (int& label : out.labels) label = mapping.at(label);
  return out;
}

LabeledDataset subset(const LabeledDataset& dataset,
                      const std::vector<std::size_t>& rows) {
  LabeledDataset out;
  out.split = dataset.split;
  out.points = permute_rows(dataset.points, rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(dataset.labels[r]);
  return out;
}

std::string embeddings_csv(const LabeledDataset& dataset) {
  std::string out = "label";
  for (std::size_t c = 0; c < dataset.points.cols(); ++c) {
    out += ",x" + std::to_string(c);
  }
  out += '\n';
  char buf[64];
  for (std::size_t r = 0; r < dataset.points.rows(); ++r) {
    out += std::to_string(dataset.labels[r]);
    for (double v : dataset.points.row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out += ',';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void save_embeddings_csv(const LabeledDataset& dataset,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << embeddings_csv(dataset);
  if (!out) throw ConfigError("failed writing " + path.string());
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  T v{};
  const char* first = field.data();
  const char* last = first + field.size();
  const auto res = std::from_chars(first, last, v);
  if (field.empty() || res.ec != std::errc() || res.ptr != last) {
    throw ParseError(std::string("non-numeric ") + what + " field '" +
                         std::string(field) + "'",
                     line);
  }
  return v;
}

}  // namespace

LabeledDataset parse_embeddings_csv(const std::string& text, Split split) {
  std::vector<std::string_view> lines;
  std::string_view rest(text);
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  if (lines.empty()) throw ParseError("missing header", 1);

  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "label") {
    throw ParseError("missing header: expected 'label,x0,...'", 1);
  }
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] != "x" + std::to_string(c - 1)) {
      throw ParseError("bad header column '" + std::string(header[c]) + "'", 1);
    }
  }
  const std::size_t dim = header.size() - 1;

  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) break;
      throw ParseError("empty line", line_no);
    }
    const auto fields = split_fields(lines[i]);
    if (fields.size() != dim + 1) {
      throw ParseError("expected " + std::to_string(dim + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    labels.push_back(parse_number<int>(fields[0], line_no, "label"));
    for (std::size_t c = 1; c <= dim; ++c) {
      const double v = parse_number<double>(fields[c], line_no, "value");
      if (!std::isfinite(v)) throw ParseError("non-finite value", line_no);
      values.push_back(v);
    }
  }
  if (labels.empty()) throw ParseError("no data rows", 0);

  LabeledDataset ds;
  ds.split = split;
  ds.points = Matrix(labels.size(), dim, std::move(values));
  ds.labels = std::move(labels);
  return ds;
}

LabeledDataset load_embeddings_csv(const std::filesystem::path& path,
                                   Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_embeddings_csv(buf.str(), split);
}

}  // namespace pnp
