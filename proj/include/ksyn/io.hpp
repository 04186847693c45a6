#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ksyn/types.hpp"

namespace ksyn {

// Shortest decimal form that round-trips the exact double.
std::string format_double(double value);

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int columns() const { return static_cast<int>(header.size()); }
};

// Strict numeric CSV: one header line, comma-separated doubles below.
Csv read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Versioned structured-text model files. Every document carries a top-level
// "version" string; loading checks it against the expected schema name.
nlohmann::json load_model_file(const std::filesystem::path& path, const std::string& expected_version);
void save_model_file(const std::filesystem::path& path, const std::string& version, nlohmann::json body);

// JSON <-> Eigen helpers used by the model-file schemas.
nlohmann::json to_json(const Vec& v);
nlohmann::json to_json(const Mat& m); // row-major nested arrays
Vec vec_from_json(const nlohmann::json& j);
Mat mat_from_json(const nlohmann::json& j);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

} // namespace ksyn
