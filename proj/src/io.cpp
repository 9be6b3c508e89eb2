#include "hbcm/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace hbcm {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError("ragged matrix in JSON");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
  }
  return m;
}

nlohmann::json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void write_csv(const std::string& path, const Matrix& x) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  char buf[32];
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) out.put(',');
      const int n = std::snprintf(buf, sizeof buf, "%.17g", x(i, j));
      out.write(buf, n);
    }
    out.put('\n');
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

Matrix read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> values;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Eigen::Index count = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      std::string field(p, comma);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0) {
        throw ValidationError(path + ": bad number '" + field + "' on row " +
                              std::to_string(rows + 1));
      }
      values.push_back(v);
      ++count;
      p = comma + 1;
    }
    if (cols == -1) cols = count;
    if (count != cols) {
      throw ValidationError(path + ": row " + std::to_string(rows + 1) + " has " +
                            std::to_string(count) + " fields, expected " +
                            std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw ValidationError(path + ": no data");
  Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      x(i, j) = values[static_cast<std::size_t>(i * cols + j)];
    }
  }
  return x;
}

void write_labels_json(const std::string& path, const Labels& labels) {
  Labels one_based = labels;
  for (int& c : one_based) ++c;
  write_json(path, nlohmann::json{{"labels", one_based}});
}

Labels read_labels_json(const std::string& path) {
  Labels labels = read_json(path).at("labels").get<Labels>();
  for (int& c : labels) {
    if (c < 1) throw ValidationError(path + ": labels must be 1-based");
    --c;
  }
  return labels;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

}  // namespace hbcm
