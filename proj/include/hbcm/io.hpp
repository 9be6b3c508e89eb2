#pragma once

// CSV data matrices and JSON helpers shared by the library and the CLI.

#include "hbcm/common.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace hbcm {

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

// Headerless comma-separated decimals, one sample per row. Values are written
// with 17 significant digits so a round trip is exact.
void write_csv(const std::string& path, const Matrix& x);
Matrix read_csv(const std::string& path);

// {"labels": [...]} with 1-based community indices.
void write_labels_json(const std::string& path, const Labels& labels);
Labels read_labels_json(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

}  // namespace hbcm
