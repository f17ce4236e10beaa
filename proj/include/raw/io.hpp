#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace raw::io {

using json = nlohmann::json;

/// IEEE-754 bit pattern as 16 lowercase hex digits.
std::string hex_double(double v);
double parse_hex_double(std::string_view s);

/// Lossless shortest decimal form (round-trips through strtod).
std::string decimal(double v);

json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

/// Parses text as JSON, converting parse failures into FormatError.
json parse_json(std::string_view text, std::string_view what);

/// Checks the `format` and `version` fields of a persisted artifact.
void check_header(const json& j, std::string_view format, int max_version);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// 16-hex-digit FNV-1a digest.
std::string digest(std::string_view text);

}  // namespace raw::io
