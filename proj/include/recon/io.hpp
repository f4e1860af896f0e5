#pragma once

#include "recon/attack.hpp"
#include "recon/divergence.hpp"
#include "recon/measures.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace recon::io {

/// Header plus a dense numeric body, as read from an ASCII CSV file.
struct CsvTable {
  std::vector<std::string> header;
  Matrix<double> rows;
};

/// Shortest round-trip-safe text for a double (17 significant digits).
std::string format_double(double v);

CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::string& path);
void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix<double>& rows);
void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix<double>& rows);

PosteriorDraws<double> load_draws(const std::string& path);
void save_draws(const std::string& path, const PosteriorDraws<double>& draws);

/// Dataset CSV: one row per point, every coordinate a column.
CsvTable load_dataset(const std::string& path);

/// Measure CSV: `weight` followed by the free coordinates. Frozen
/// coordinates are restored from the layout on load.
void save_measure(const std::string& path, const Measure& measure, const DataLayout& layout);
Measure load_measure(const std::string& path, const DataLayout& layout);

nlohmann::json layout_to_json(const DataLayout& layout);
DataLayout layout_from_json(const nlohmann::json& j);
DataLayout load_layout(const std::string& path);

/// Column names of the trace CSV for a layout; `with_errors` appends the
/// relative-error columns.
std::vector<std::string> trace_header(const DataLayout& layout, bool with_errors);
void write_trace_csv(std::ostream& out, const AttackTrace<double>& trace, const DataLayout& layout);
void write_trace_csv(const std::string& path, const AttackTrace<double>& trace, const DataLayout& layout);

nlohmann::json stats_to_json(const ReconStats<double>& stats, const DataLayout& layout);
nlohmann::json errors_to_json(const StatErrorReport<double>& report);

}  // namespace recon::io
