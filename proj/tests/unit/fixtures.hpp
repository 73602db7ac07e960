#pragma once

#include <fstream>
#include <sstream>
#include <string>

inline std::string fixture_path(const std::string& rel) { return std::string(CRYSFLOW_FIXTURES) + "/" + rel; }

inline std::string read_fixture(const std::string& rel) {
    std::ifstream in(fixture_path(rel));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
