#pragma once
// File helpers shared by the CLI and the tests: JSON and CSV with file/line
// diagnostics, tenor names, caplet surfaces and curve configurations.
#include <filesystem>
#include <string>
#include <vector>

#include "alm/calibration.hpp"

namespace alm {

// "3m" -> 0.25, "6m" -> 0.5, "1y" -> 1.0.
double parse_tenor(const std::string& name);

nlohmann::json read_json(const std::filesystem::path& p);
void write_json(const std::filesystem::path& p, const nlohmann::json& j);
void write_text(const std::filesystem::path& p, const std::string& s);

struct CsvTable {
    std::string file;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> lines;  // source line of each row
    int column(const std::string& name) const;
    double number(std::size_t row, int col) const;
};

CsvTable read_csv(const std::filesystem::path& p);

// Header tenor,maturity,strike,vol.
CapletSurface read_surface_csv(const std::filesystem::path& p);
std::string surface_csv(const CapletSurface& s);

// Curve configuration: Nelson-Siegel parameters or CSV tables, resolved
// relative to base_dir.
CurveSet curves_from_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace alm
