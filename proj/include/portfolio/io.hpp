#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "portfolio/core.hpp"
#include "portfolio/error.hpp"
#include "portfolio/metrics.hpp"

namespace portfolio {

// Shortest decimal representation that round-trips the exact double; keeps
// emitted CSVs byte-stable across runs.
inline std::string format_double(double v) {
  std::array<char, 40> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view field, const std::string& file,
                           std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw InputError(file + ":" + std::to_string(line) + ": cannot parse number '" +
                     std::string(field) + "'");
  return v;
}

inline long parse_int(std::string_view field, const std::string& file,
                      std::size_t line) {
  long v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw InputError(file + ":" + std::to_string(line) + ": cannot parse integer '" +
                     std::string(field) + "'");
  return v;
}

namespace detail_io {

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

// Reads a CSV into header + rows; strips \r, skips a trailing blank line.
struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;     // data rows
  std::vector<std::size_t> line_numbers;          // 1-based, aligned with rows
};

inline CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path.string());
  CsvFile csv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (lineno == 1) {
      csv.header = std::move(fields);
    } else {
      csv.rows.push_back(std::move(fields));
      csv.line_numbers.push_back(lineno);
    }
  }
  if (csv.header.empty())
    throw InputError(path.string() + ":1: missing header row");
  return csv;
}

}  // namespace detail_io

// embeddings.csv: header `id,e0,e1,...`, one row per point.
inline std::vector<LabeledPoint> read_embeddings(const std::filesystem::path& path) {
  auto csv = detail_io::read_csv(path);
  const std::string file = path.string();
  if (csv.header.size() < 2 || csv.header[0] != "id")
    throw InputError(file + ":1: expected header 'id,e0,e1,...'");
  std::size_t dim = csv.header.size() - 1;
  std::vector<LabeledPoint> points;
  points.reserve(csv.rows.size());
  std::vector<std::string> seen_sorted;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    std::size_t line = csv.line_numbers[r];
    if (row.size() != dim + 1)
      throw InputError(file + ":" + std::to_string(line) + ": expected " +
                       std::to_string(dim + 1) + " fields, found " +
                       std::to_string(row.size()));
    LabeledPoint p;
    p.id = row[0];
    if (p.id.empty())
      throw InputError(file + ":" + std::to_string(line) + ": empty id");
    p.label = -1;
    p.embedding.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      p.embedding[k] = parse_double(row[k + 1], file, line);
      if (!std::isfinite(p.embedding[k]))
        throw InputError(file + ":" + std::to_string(line) + ": non-finite coordinate");
    }
    points.push_back(std::move(p));
  }
  if (points.empty()) throw InputError(file + ": no data rows");
  // duplicate-id check
  std::vector<std::string> ids;
  ids.reserve(points.size());
  for (const auto& p : points) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (ids[i] == ids[i - 1])
      throw InputError(file + ": duplicate id '" + ids[i] + "'");
  return points;
}

// labels.csv: header `id,label`, 0-based integer labels.
inline std::unordered_map<std::string, int> read_labels(
    const std::filesystem::path& path) {
  auto csv = detail_io::read_csv(path);
  const std::string file = path.string();
  if (csv.header.size() != 2 || csv.header[0] != "id" || csv.header[1] != "label")
    throw InputError(file + ":1: expected header 'id,label'");
  std::unordered_map<std::string, int> labels;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    std::size_t line = csv.line_numbers[r];
    if (row.size() != 2)
      throw InputError(file + ":" + std::to_string(line) + ": expected 2 fields");
    long v = parse_int(row[1], file, line);
    if (v < 0)
      throw InputError(file + ":" + std::to_string(line) + ": negative label");
    if (!labels.emplace(row[0], static_cast<int>(v)).second)
      throw InputError(file + ":" + std::to_string(line) + ": duplicate id '" +
                       row[0] + "'");
  }
  if (labels.empty()) throw InputError(file + ": no data rows");
  return labels;
}

// outputs_<classifier>.csv: header `id,p0,...,p{C-1}`; probability rows.
// A file whose name starts with `logits_` carries raw logits instead and is
// converted through the tempered softmax by the caller.
struct OutputRows {
  std::vector<std::string> ids;
  Mat values;  // |ids| x C
  bool is_logits = false;
};

inline OutputRows read_outputs(const std::filesystem::path& path,
                               double sum_tolerance = 1e-6) {
  auto csv = detail_io::read_csv(path);
  const std::string file = path.string();
  if (csv.header.size() < 2 || csv.header[0] != "id")
    throw InputError(file + ":1: expected header 'id,p0,p1,...'");
  std::size_t classes = csv.header.size() - 1;
  OutputRows out;
  out.is_logits = path.filename().string().rfind("logits_", 0) == 0;
  out.values = Mat(csv.rows.size(), classes);
  out.ids.reserve(csv.rows.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    std::size_t line = csv.line_numbers[r];
    if (row.size() != classes + 1)
      throw InputError(file + ":" + std::to_string(line) + ": expected " +
                       std::to_string(classes + 1) + " fields, found " +
                       std::to_string(row.size()));
    out.ids.push_back(row[0]);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      double v = parse_double(row[c + 1], file, line);
      if (!std::isfinite(v))
        throw InputError(file + ":" + std::to_string(line) + ": non-finite value");
      if (!out.is_logits && (v < 0.0 || v > 1.0))
        throw InputError(file + ":" + std::to_string(line) +
                         ": probability outside [0,1]");
      out.values.at(r, c) = v;
      sum += v;
    }
    if (!out.is_logits && std::abs(sum - 1.0) > sum_tolerance)
      throw InputError(file + ":" + std::to_string(line) + ": probability row sums to " +
                       format_double(sum) + " (row " + std::to_string(r) + ")");
  }
  if (out.ids.empty()) throw InputError(file + ": no data rows");
  return out;
}

inline void write_embeddings(const std::filesystem::path& path,
                             std::span<const LabeledPoint> points) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  if (points.empty()) throw InputError("write_embeddings: no points");
  out << "id";
  for (std::size_t k = 0; k < points.front().embedding.size(); ++k) out << ",e" << k;
  out << "\n";
  for (const auto& p : points) {
    out << p.id;
    for (double v : p.embedding) out << ',' << format_double(v);
    out << "\n";
  }
}

inline void write_labels(const std::filesystem::path& path,
                         std::span<const LabeledPoint> points) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << "id,label\n";
  for (const auto& p : points) out << p.id << ',' << p.label << "\n";
}

inline void write_outputs(const std::filesystem::path& path,
                          std::span<const std::string> ids, const Mat& values) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << "id";
  for (std::size_t c = 0; c < values.cols; ++c) out << ",p" << c;
  out << "\n";
  for (std::size_t r = 0; r < ids.size(); ++r) {
    out << ids[r];
    for (std::size_t c = 0; c < values.cols; ++c)
      out << ',' << format_double(values.at(r, c));
    out << "\n";
  }
}

// -------- run configuration (config.json) --------

struct ClassifierSpec {
  std::string name;
  double cost = 0.0;
  std::filesystem::path outputs_path;        // pool outputs
  std::filesystem::path query_outputs_path;  // query outputs
};

struct RunConfig {
  Metric metric = Metric::LINF;
  std::size_t num_samples = 10;   // K
  std::size_t sample_size = 100;  // s
  double tau = 1.0;
  std::vector<double> lambda_grid;  // single entry when a scalar was given
  bool lambda_is_grid = false;
  std::uint64_t seed = 0;
  std::vector<double> budgets;
  double feature_extraction_cost = 0.0;
  std::filesystem::path pool_embeddings, pool_labels;
  std::filesystem::path query_embeddings, query_labels;  // labels optional
  std::vector<ClassifierSpec> classifiers;
  bool baseline_single_best = true;
  bool baseline_random = true;
  std::uint64_t config_hash = 0;
};

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }

  auto dir = path.parent_path();
  auto resolve = [&](const std::string& p) { return dir / p; };

  RunConfig cfg;
  cfg.config_hash = fnv1a(text);
  try {
    cfg.metric = parse_metric(j.at("metric").get<std::string>());
    cfg.num_samples = j.at("K").get<std::size_t>();
    cfg.sample_size = j.at("s").get<std::size_t>();
    cfg.tau = j.at("tau").get<double>();
    if (j.contains("lambda")) {
      if (j["lambda"].is_array()) {
        cfg.lambda_grid = j["lambda"].get<std::vector<double>>();
        cfg.lambda_is_grid = true;
      } else {
        cfg.lambda_grid = {j["lambda"].get<double>()};
      }
    } else {
      cfg.lambda_grid = {0.0, 1.0, 5.0, 20.0, 100.0};
      cfg.lambda_is_grid = true;
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.budgets = j.at("budgets").get<std::vector<double>>();
    cfg.feature_extraction_cost = j.value("feature_extraction_cost", 0.0);
    cfg.pool_embeddings = resolve(j.at("pool").at("embeddings").get<std::string>());
    cfg.pool_labels = resolve(j.at("pool").at("labels").get<std::string>());
    cfg.query_embeddings = resolve(j.at("queries").at("embeddings").get<std::string>());
    if (j.at("queries").contains("labels"))
      cfg.query_labels = resolve(j["queries"]["labels"].get<std::string>());
    for (const auto& c : j.at("classifiers")) {
      ClassifierSpec spec;
      spec.name = c.at("name").get<std::string>();
      spec.cost = c.at("cost").get<double>();
      spec.outputs_path = resolve(c.at("outputs_path").get<std::string>());
      if (c.contains("query_outputs_path"))
        spec.query_outputs_path = resolve(c["query_outputs_path"].get<std::string>());
      cfg.classifiers.push_back(std::move(spec));
    }
    if (j.contains("baselines")) {
      cfg.baseline_single_best = j["baselines"].value("single_best", true);
      cfg.baseline_random = j["baselines"].value("random", true);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }

  if (cfg.classifiers.empty())
    throw InputError(path.string() + ": 'classifiers' must be non-empty");
  for (const auto& c : cfg.classifiers)
    if (!(c.cost > 0.0))
      throw InputError(path.string() + ": classifier '" + c.name +
                       "' must have positive cost");
  if (cfg.budgets.empty())
    throw InputError(path.string() + ": 'budgets' must be non-empty");
  if (!std::is_sorted(cfg.budgets.begin(), cfg.budgets.end()))
    throw InputError(path.string() + ": 'budgets' must be sorted ascending");
  if (!(cfg.tau > 0.0))
    throw InputError(path.string() + ": 'tau' must be positive");
  for (double l : cfg.lambda_grid)
    if (l < 0.0) throw InputError(path.string() + ": lambda values must be nonnegative");
  if (cfg.feature_extraction_cost < 0.0)
    throw InputError(path.string() + ": 'feature_extraction_cost' must be nonnegative");
  return cfg;
}

}  // namespace portfolio
