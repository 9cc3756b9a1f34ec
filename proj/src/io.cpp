#include "ncvine/io.hpp"

#include "ncvine/condreduce.hpp"

#include <cmath>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ncvine {

namespace fs = std::filesystem;

std::vector<std::string> default_header(int p) {
    std::vector<std::string> h;
    for (int j = 1; j <= p; ++j)
        h.push_back("u" + std::to_string(j));
    return h;
}

std::string format_csv(const Eigen::MatrixXd& data, const std::vector<std::string>& header) {
    const std::vector<std::string> h =
        header.empty() ? default_header(static_cast<int>(data.cols())) : header;
    if (static_cast<Eigen::Index>(h.size()) != data.cols())
        throw std::invalid_argument("CSV: header has " + std::to_string(h.size()) + " names for " +
                                    std::to_string(data.cols()) + " columns");
    std::string out;
    for (std::size_t j = 0; j < h.size(); ++j) {
        if (h[j].find_first_of(",\n\"") != std::string::npos)
            throw std::invalid_argument("CSV: column name '" + h[j] + "' needs quoting");
        out += (j ? "," : "") + h[j];
    }
    out += '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", data(i, j));
            if (j)
                out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    CsvTable t;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(s);
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        if (!s.empty() && s.back() == ',')
            cells.emplace_back();
        return cells;
    };
    auto strip = [](std::string s) {
        if (!s.empty() && s.back() == '\r')
            s.pop_back();
        return s;
    };
    if (!std::getline(in, line))
        throw std::invalid_argument(source + ": empty CSV");
    t.header = split(strip(line));
    const std::size_t p = t.header.size();
    std::vector<double> values;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        line = strip(line);
        if (line.empty())
            continue;
        const auto cells = split(line);
        if (cells.size() != p)
            throw std::invalid_argument(source + ":" + std::to_string(row) + ": expected " +
                                        std::to_string(p) + " fields, got " +
                                        std::to_string(cells.size()) + ": '" + line + "'");
        for (const auto& c : cells) {
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(c.c_str(), &end);
            if (c.empty() || end != c.c_str() + c.size() || (errno == ERANGE && std::isinf(v)))
                throw std::invalid_argument(source + ":" + std::to_string(row) + ": bad number '" +
                                            c + "' in '" + line + "'");
            values.push_back(v);
        }
    }
    const Eigen::Index n = static_cast<Eigen::Index>(values.size() / std::max<std::size_t>(p, 1));
    t.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), n, static_cast<Eigen::Index>(p));
    return t;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    if (target.has_parent_path())
        fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string() + ": " + std::strerror(errno));
        out << content;
        out.flush();
        if (!out)
            throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_csv(const std::string& path, const Eigen::MatrixXd& data, const std::vector<std::string>& header) {
    write_file_atomic(path, format_csv(data, header));
}

CsvTable read_csv(const std::string& path) {
    return parse_csv(read_file(path), path);
}

Eigen::MatrixXd rank_transform(const Eigen::MatrixXd& raw) {
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index j = 0; j < raw.cols(); ++j)
        out.col(j) = standardized_ranks(raw.col(j));
    return out;
}

}  // namespace ncvine
