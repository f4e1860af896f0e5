#include "recon/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace recon::io {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoError(source + ": empty file, expected a header row");
  for (auto& h : split(line)) table.header.push_back(trim(h));
  if (table.header.empty() || table.header.front().empty()) throw IoError(source + ": missing header row");
  const Index cols = static_cast<Index>(table.header.size());
  std::vector<double> values;
  Index nrows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (static_cast<Index>(cells.size()) != cols)
      throw IoError(source + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                    " columns, header has " + std::to_string(cols));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v))
        throw IoError(source + ": row " + std::to_string(line_no) + " column '" + table.header[c] +
                      "' is not a number: '" + cells[c] + "'");
      values.push_back(v);
    }
    ++nrows;
  }
  table.rows.resize(nrows, cols);
  for (Index r = 0; r < nrows; ++r)
    for (Index c = 0; c < cols; ++c) table.rows(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return parse_csv(in, path);
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix<double>& rows) {
  if (static_cast<Index>(header.size()) != rows.cols()) throw ShapeError("write_csv: header/column mismatch");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Index r = 0; r < rows.rows(); ++r) {
    for (Index c = 0; c < rows.cols(); ++c) out << (c ? "," : "") << format_double(rows(r, c));
    out << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix<double>& rows) {
  auto out = open_out(path);
  write_csv(out, header, rows);
  if (!out) throw IoError("failed writing " + path);
}

PosteriorDraws<double> load_draws(const std::string& path) {
  CsvTable t = read_csv(path);
  if (t.rows.rows() < 1) throw IoError(path + ": no draws");
  return PosteriorDraws<double>(std::move(t.rows), DrawSource::File, std::move(t.header));
}

void save_draws(const std::string& path, const PosteriorDraws<double>& draws) {
  std::vector<std::string> names = draws.names;
  if (names.empty())
    for (Index i = 0; i < draws.dim(); ++i) names.push_back("theta." + std::to_string(i + 1));
  write_csv(path, names, draws.draws);
}

CsvTable load_dataset(const std::string& path) {
  CsvTable t = read_csv(path);
  if (t.rows.rows() < 1) throw IoError(path + ": dataset has no rows");
  return t;
}

void save_measure(const std::string& path, const Measure& measure, const DataLayout& layout) {
  if (measure.dim() != layout.dim()) throw ShapeError("save_measure: layout does not match measure");
  std::vector<std::string> header{"weight"};
  for (Index c : layout.free_coords()) header.push_back(layout.name(c));
  Matrix<double> body(measure.size(), 1 + layout.free_dim());
  body.col(0) = measure.weights();
  for (Index k = 0; k < layout.free_dim(); ++k)
    body.col(1 + k) = measure.points().col(layout.free_coords()[static_cast<std::size_t>(k)]);
  write_csv(path, header, body);
}

Measure load_measure(const std::string& path, const DataLayout& layout) {
  CsvTable t = read_csv(path);
  if (t.rows.cols() != 1 + layout.free_dim() || t.header.front() != "weight")
    throw IoError(path + ": expected columns weight + " + std::to_string(layout.free_dim()) + " free coordinates");
  const Index M = t.rows.rows();
  if (M < 1) throw IoError(path + ": measure has no rows");
  Matrix<double> pts = Matrix<double>::Zero(M, layout.dim());
  for (const auto& f : layout.frozen()) pts.col(f.index).setConstant(f.value);
  for (Index k = 0; k < layout.free_dim(); ++k)
    pts.col(layout.free_coords()[static_cast<std::size_t>(k)]) = t.rows.col(1 + k);
  return Measure(t.rows.col(0), std::move(pts));
}

nlohmann::json layout_to_json(const DataLayout& layout) {
  nlohmann::json j;
  j["dim"] = layout.dim();
  j["names"] = layout.names();
  j["x"] = layout.x_coords();
  j["y"] = layout.has_y() ? nlohmann::json(*layout.y_coord()) : nlohmann::json(nullptr);
  j["frozen"] = nlohmann::json::array();
  for (const auto& f : layout.frozen()) j["frozen"].push_back({{"index", f.index}, {"value", f.value}});
  return j;
}

DataLayout layout_from_json(const nlohmann::json& j) {
  try {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "dim" && it.key() != "names" && it.key() != "x" && it.key() != "y" && it.key() != "frozen")
        throw ConfigError("layout: unknown key '" + it.key() + "'");
    std::optional<Index> y;
    if (j.contains("y") && !j.at("y").is_null()) y = j.at("y").get<Index>();
    std::vector<FrozenCoord> frozen;
    if (j.contains("frozen"))
      for (const auto& f : j.at("frozen")) frozen.push_back({f.at("index").get<Index>(), f.at("value").get<double>()});
    std::vector<std::string> names;
    if (j.contains("names")) names = j.at("names").get<std::vector<std::string>>();
    return DataLayout(j.at("dim").get<Index>(), j.at("x").get<std::vector<Index>>(), y, std::move(frozen),
                      std::move(names));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("layout: ") + e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
}

DataLayout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return layout_from_json(j);
}

namespace {

std::vector<double> trace_stat_values(const ReconStats<double>& s, const DataLayout& layout) {
  std::vector<double> v{s.total_mass};
  const auto& xs = layout.x_coords();
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (layout.is_frozen(xs[j])) continue;
    const auto m = x_moments(s, static_cast<Index>(j));
    v.push_back(m.mean);
    v.push_back(m.variance);
  }
  if (layout.has_y()) {
    const auto m = y_moments(s);
    v.push_back(m.mean);
    v.push_back(m.variance);
  }
  for (Index i = 0; i < layout.x_dim(); ++i)
    for (Index j = i; j < layout.x_dim(); ++j) v.push_back(s.weighted_gram(i, j));
  if (layout.has_y()) {
    for (Index j = 0; j < layout.x_dim(); ++j) v.push_back(s.weighted_xy(j));
    v.push_back(s.weighted_yy);
  }
  return v;
}

}  // namespace

std::vector<std::string> trace_header(const DataLayout& layout, bool with_errors) {
  std::vector<std::string> h{"iteration", "objective", "total_mass"};
  const auto& xs = layout.x_coords();
  for (Index c : xs) {
    if (layout.is_frozen(c)) continue;
    h.push_back("mean_" + layout.name(c));
    h.push_back("var_" + layout.name(c));
  }
  if (layout.has_y()) {
    h.push_back("mean_" + layout.name(*layout.y_coord()));
    h.push_back("var_" + layout.name(*layout.y_coord()));
  }
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i; j < xs.size(); ++j) h.push_back("gram_" + layout.name(xs[i]) + "_" + layout.name(xs[j]));
  if (layout.has_y()) {
    for (Index c : xs) h.push_back("xy_" + layout.name(c));
    h.push_back("yy");
  }
  if (with_errors) {
    // error columns follow the entry order of stat_errors
    ReconStats<double> probe;
    probe.has_y = layout.has_y();
    probe.weighted_sum = Vector<double>::Zero(layout.x_dim());
    probe.weighted_gram = Matrix<double>::Zero(layout.x_dim(), layout.x_dim());
    probe.weighted_xy = Vector<double>::Zero(layout.has_y() ? layout.x_dim() : 0);
    probe.total_mass = 1.0;
    for (const auto& e : stat_errors(probe, probe, layout).entries) h.push_back("err_" + e.name);
  }
  return h;
}

void write_trace_csv(std::ostream& out, const AttackTrace<double>& trace, const DataLayout& layout) {
  const bool with_errors = !trace.checkpoints.empty() && trace.checkpoints.front().errors.has_value();
  const auto header = trace_header(layout, with_errors);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (const auto& cp : trace.checkpoints) {
    out << cp.iteration << ',' << format_double(cp.objective);
    for (double v : trace_stat_values(cp.stats, layout)) out << ',' << format_double(v);
    if (with_errors)
      for (const auto& e : cp.errors->entries) out << ',' << format_double(e.rel_error);
    out << '\n';
  }
}

void write_trace_csv(const std::string& path, const AttackTrace<double>& trace, const DataLayout& layout) {
  auto out = open_out(path);
  write_trace_csv(out, trace, layout);
  if (!out) throw IoError("failed writing " + path);
}

nlohmann::json stats_to_json(const ReconStats<double>& s, const DataLayout& layout) {
  nlohmann::json j;
  j["total_mass"] = s.total_mass;
  j["weighted_sum"] = std::vector<double>(s.weighted_sum.data(), s.weighted_sum.data() + s.weighted_sum.size());
  nlohmann::json gram = nlohmann::json::array();
  for (Index i = 0; i < s.weighted_gram.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index k = 0; k < s.weighted_gram.cols(); ++k) row.push_back(s.weighted_gram(i, k));
    gram.push_back(row);
  }
  j["weighted_gram"] = gram;
  if (s.has_y) {
    j["weighted_y_sum"] = s.weighted_y_sum;
    j["weighted_xy"] = std::vector<double>(s.weighted_xy.data(), s.weighted_xy.data() + s.weighted_xy.size());
    j["weighted_yy"] = s.weighted_yy;
  }
  nlohmann::json moments;
  const auto& xs = layout.x_coords();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (layout.is_frozen(xs[k])) continue;
    const auto m = x_moments(s, static_cast<Index>(k));
    moments[layout.name(xs[k])] = {{"mean", m.mean}, {"variance", m.variance}};
  }
  if (s.has_y) {
    const auto m = y_moments(s);
    moments[layout.name(*layout.y_coord())] = {{"mean", m.mean}, {"variance", m.variance}};
  }
  j["moments"] = moments;
  return j;
}

nlohmann::json errors_to_json(const StatErrorReport<double>& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& e : report.entries)
    j[e.name] = {{"target", e.target}, {"recon", e.recon}, {"rel_error", e.rel_error}};
  return j;
}

}  // namespace recon::io
