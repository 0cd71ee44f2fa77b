#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace casm::io {

// Full-precision scientific notation, locale-independent ('.' decimal point,
// no grouping). All CSV output goes through this so reruns are byte-stable.
std::string format_sci(double v);

std::string matrix_csv(const Eigen::MatrixXd& m);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

std::vector<double> to_vector(const Eigen::VectorXd& v);
Eigen::VectorXd from_vector(const std::vector<double>& v);

// Row-major flattening used by every matrix field in JSON output.
std::vector<double> to_row_major(const Eigen::MatrixXd& m);
Eigen::MatrixXd from_row_major(const std::vector<double>& data, int rows,
                               int cols);

}  // namespace casm::io
