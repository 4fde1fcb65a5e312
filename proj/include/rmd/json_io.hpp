#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace rmd {

using json = nlohmann::ordered_json;

// Round to 9 significant decimal digits. Persisted floats pass through this so
// that save -> load -> save reproduces files byte for byte.
double quantize9(double v);

json quantized_array(const std::vector<double>& values);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j, int indent = 1);

}  // namespace rmd
