#include "raw/io.hpp"

#include "raw/error.hpp"
#include "raw/rng.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace raw::io {

std::string hex_double(double v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

double parse_hex_double(std::string_view s) {
  std::uint64_t bits = 0;
  if (s.size() != 16) throw FormatError("bad hex double '" + std::string(s) + "'");
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), bits, 16);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("bad hex double '" + std::string(s) + "'");
  return std::bit_cast<double>(bits);
}

std::string decimal(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(hex_double(m(r, c)));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols))
      throw FormatError("matrix payload does not match its shape");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        m(r, c) = parse_hex_double(data[k++].get<std::string>());
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed matrix: ") + e.what());
  }
}

json vector_to_json(const Eigen::VectorXd& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(hex_double(v(i)));
  return data;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("expected an array of hex doubles");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw FormatError("expected an array of hex doubles");
    v(static_cast<Eigen::Index>(i)) = parse_hex_double(j[i].get<std::string>());
  }
  return v;
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

void check_header(const json& j, std::string_view format, int max_version) {
  if (!j.is_object() || !j.contains("format") || !j.contains("version"))
    throw FormatError("missing format/version header");
  if (!j["format"].is_string() || j["format"].get<std::string>() != format)
    throw FormatError("expected format '" + std::string(format) + "'");
  if (!j["version"].is_number_integer()) throw FormatError("version is not an integer");
  const int v = j["version"].get<int>();
  if (v < 1 || v > max_version)
    throw FormatError("unsupported " + std::string(format) + " version " + std::to_string(v) +
                      " (this build reads up to " + std::to_string(max_version) + ")");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string digest(std::string_view text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

}  // namespace raw::io
