#include "rmd/json_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rmd/errors.hpp"

namespace rmd {

double quantize9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::strtod(buf, nullptr);
}

json quantized_array(const std::vector<double>& values) {
    json arr = json::array();
    for (double v : values) arr.push_back(quantize9(v));
    return arr;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + path);
    out << content;
    if (!out) throw InputError("write failed: " + path);
}

json read_json_file(const std::string& path) {
    std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const json& j, int indent) {
    write_text_file(path, j.dump(indent) + "\n");
}

}  // namespace rmd
