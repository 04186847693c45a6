#include "ksyn/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ksyn/errors.hpp"

namespace ksyn {

std::string format_double(double value) {
    char buf[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
        double parsed = 0.0;
        std::sscanf(buf, "%lf", &parsed);
        if (parsed == value) break;
    }
    return buf;
}

Csv read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path.string());
    Csv csv;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) csv.header.push_back(field);
    }
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(field, &used));
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": non-numeric field '" + field + "'");
            }
        }
        if (row.size() != csv.header.size()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(csv.header.size()) + " fields, got " +
                            std::to_string(row.size()));
        }
        csv.rows.push_back(std::move(row));
    }
    return csv;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV file: " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw InvalidInput("CSV row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_double(row[i]);
        out << "\n";
    }
}

nlohmann::json load_model_file(const std::filesystem::path& path, const std::string& expected_version) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (!j.contains("version") || !j["version"].is_string())
        throw DataError(path.string() + ": missing version field");
    if (j["version"].get<std::string>() != expected_version)
        throw DataError(path.string() + ": expected version '" + expected_version + "', found '" +
                        j["version"].get<std::string>() + "'");
    return j;
}

void save_model_file(const std::filesystem::path& path, const std::string& version, nlohmann::json body) {
    body["version"] = version;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out << body.dump(2) << "\n";
}

nlohmann::json to_json(const Vec& v) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

nlohmann::json to_json(const Mat& m) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(std::move(row));
    }
    return j;
}

Vec vec_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw DataError("expected JSON array for vector");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

Mat mat_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw DataError("expected non-empty JSON array for matrix");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols)
            throw DataError("ragged JSON matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace ksyn
