#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ncvine {

struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd data;
};

/// Comma-separated, one header row, 17 significant digits.
std::string format_csv(const Eigen::MatrixXd& data, const std::vector<std::string>& header);
CsvTable parse_csv(const std::string& text, const std::string& source = "<string>");

/// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

void write_csv(const std::string& path, const Eigen::MatrixXd& data,
               const std::vector<std::string>& header = {});
CsvTable read_csv(const std::string& path);

/// Default column names u1..up.
std::vector<std::string> default_header(int p);

/// Column-wise standardized ranks.
Eigen::MatrixXd rank_transform(const Eigen::MatrixXd& raw);

}  // namespace ncvine
