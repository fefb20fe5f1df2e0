#include "riskdep/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "riskdep/errors.hpp"

namespace riskdep::io {
namespace fs = std::filesystem;

std::string format_number(double x, int digits) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string file_digest(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const std::string& where) {
  if (s.empty()) throw ValidationError(where + ": empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) throw ValidationError(where + ": '" + s + "' is not a number");
  return v;
}

std::int64_t parse_count(const std::string& s, const std::string& where) {
  const double v = parse_real(s, where);
  if (!(v >= 0.0) || v != std::floor(v) || v > 9e15) {
    throw ValidationError(where + ": count '" + s + "' is not a non-negative integer");
  }
  return static_cast<std::int64_t>(v);
}

std::string where(const std::string& source, std::size_t row, std::size_t col) {
  return source + " row " + std::to_string(row + 1) + " column " + std::to_string(col + 1);
}

std::string cell_header(const std::string& first, std::size_t cells) {
  std::string h = first;
  for (std::size_t j = 0; j < cells; ++j) h += ",cell_" + std::to_string(j + 1);
  return h + "\n";
}

// Rows of a cell matrix (first column is an index and is ignored).
std::size_t matrix_cells(const CsvTable& t, const std::string& source) {
  if (t.header.size() < 2) throw ValidationError(source + ": expected an index column and at least one cell column");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != t.header.size()) {
      throw ValidationError(source + " row " + std::to_string(r + 1) + ": expected " +
                            std::to_string(t.header.size()) + " columns, found " + std::to_string(t.rows[r].size()));
    }
  }
  return t.header.size() - 1;
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (first) {
      t.header = split_line(line);
      first = false;
    } else {
      t.rows.push_back(split_line(line));
    }
  }
  if (first) throw ValidationError(source + ": missing header row");
  return t;
}

std::string counts_csv(const bayes::Dataset& data) {
  std::string out = cell_header("year", data.cells);
  for (std::size_t t = 0; t < data.years; ++t) {
    out += std::to_string(t + 1);
    for (std::size_t j = 0; j < data.cells; ++j) out += "," + std::to_string(data.count(t, j));
    out += "\n";
  }
  return out;
}

bayes::Dataset parse_counts_csv(const std::string& text, const std::string& source) {
  const CsvTable t = parse_csv(text, source);
  bayes::Dataset d;
  d.cells = matrix_cells(t, source);
  d.years = t.rows.size();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 1; c < t.rows[r].size(); ++c) d.counts.push_back(parse_count(t.rows[r][c], where(source, r, c)));
  }
  return d;
}

std::string experts_csv(const bayes::Dataset& data) {
  std::string out = cell_header("expert", data.cells);
  for (std::size_t k = 0; k < data.experts_count; ++k) {
    out += std::to_string(k + 1);
    for (std::size_t j = 0; j < data.cells; ++j) out += "," + format_number(data.expert(k, j), kSampleDigits);
    out += "\n";
  }
  return out;
}

void parse_experts_csv(const std::string& text, const std::string& source, bayes::Dataset& data) {
  data.experts.clear();
  data.experts_count = 0;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return;
  const CsvTable t = parse_csv(text, source);
  const std::size_t cells = matrix_cells(t, source);
  if (cells != data.cells) {
    throw ValidationError(source + ": " + std::to_string(cells) + " cell columns but the counts have " +
                          std::to_string(data.cells));
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 1; c < t.rows[r].size(); ++c) {
      const double v = parse_real(t.rows[r][c], where(source, r, c));
      if (!(v > 0.0)) throw ValidationError(where(source, r, c) + ": expert opinion must be positive");
      data.experts.push_back(v);
    }
  }
  data.experts_count = t.rows.size();
}

std::string lambda_csv(const std::vector<double>& lambda, std::size_t years, std::size_t cells) {
  std::string out = cell_header("year", cells);
  for (std::size_t t = 0; t < years; ++t) {
    out += std::to_string(t + 1);
    for (std::size_t j = 0; j < cells; ++j) out += "," + format_number(lambda[t * cells + j], kSampleDigits);
    out += "\n";
  }
  return out;
}

std::vector<double> parse_lambda_csv(const std::string& text, const std::string& source, std::size_t years,
                                     std::size_t cells) {
  const CsvTable t = parse_csv(text, source);
  if (matrix_cells(t, source) != cells || t.rows.size() != years) {
    throw ValidationError(source + ": lambda matrix must be " + std::to_string(years) + " x " + std::to_string(cells));
  }
  std::vector<double> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 1; c < t.rows[r].size(); ++c) {
      const double v = parse_real(t.rows[r][c], where(source, r, c));
      if (!(v > 0.0)) throw ValidationError(where(source, r, c) + ": lambda must be positive");
      out.push_back(v);
    }
  }
  return out;
}

std::string samples_csv(const mcmc::PosteriorSamples& samples) {
  std::string out = "draw";
  for (std::size_t j = 0; j < samples.cells; ++j) out += ",theta[" + std::to_string(j + 1) + "]";
  out += ",rho\n";
  for (std::size_t i = 0; i < samples.states.size(); ++i) {
    const auto& s = samples.states[i];
    out += std::to_string(i + 1);
    for (double th : s.theta) out += "," + format_number(th, kSampleDigits);
    out += "," + format_number(s.rho, kSampleDigits) + "\n";
  }
  return out;
}

mcmc::PosteriorSamples parse_samples_csv(const std::string& text, const std::string& source) {
  const CsvTable t = parse_csv(text, source);
  if (t.header.size() < 3 || t.header.back() != "rho") {
    throw ValidationError(source + ": expected columns draw,theta[1..J],rho");
  }
  mcmc::PosteriorSamples s;
  s.cells = t.header.size() - 2;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != t.header.size()) throw ValidationError(source + " row " + std::to_string(r + 1) + ": wrong column count");
    bayes::ChainState st;
    for (std::size_t c = 1; c + 1 < t.rows[r].size(); ++c) st.theta.push_back(parse_real(t.rows[r][c], where(source, r, c)));
    st.rho = parse_real(t.rows[r].back(), where(source, r, t.rows[r].size() - 1));
    s.states.push_back(std::move(st));
  }
  return s;
}

std::string annual_loss_csv(const loss::AnnualLossTable& table) {
  std::string out = "year,cell,lambda,psi,count,loss,total\n";
  for (std::size_t t = 0; t < table.years; ++t) {
    std::int64_t count = 0;
    for (std::size_t j = 0; j < table.cells; ++j) {
      const auto& e = table.at(t, j);
      count += e.count;
      out += std::to_string(t + 1) + "," + std::to_string(j + 1) + "," + format_number(e.lambda, kSampleDigits) + "," +
             format_number(e.psi, kSampleDigits) + "," + std::to_string(e.count) + "," +
             format_number(e.loss, kSampleDigits) + ",\n";
    }
    out += std::to_string(t + 1) + ",total,,," + std::to_string(count) + ",," +
           format_number(table.totals[t], kSampleDigits) + "\n";
  }
  return out;
}

std::string sweep_csv(copula::Family family, const std::vector<loss::SweepPoint>& points) {
  std::string out = "family,rho,scenario,spearman\n";
  for (const auto& p : points) {
    out += std::string(copula::to_string(family)) + "," + format_number(p.rho, kSampleDigits) + "," +
           loss::to_string(p.scenario) + "," + format_number(p.spearman, kSampleDigits) + "\n";
  }
  return out;
}

namespace {

using RowKey = std::tuple<std::string, std::string, std::string>;

}  // namespace

std::string report_csv(const experiments::ExperimentReport& report) {
  std::string out = "family,mode,parameter";
  for (std::size_t y : report.year_subsets) out += "," + std::to_string(y);
  out += "\n";
  // Keep first-seen row order.
  std::vector<RowKey> order;
  std::map<RowKey, std::map<std::size_t, const experiments::ReportCell*>> rows;
  for (const auto& c : report.cells) {
    RowKey key{std::string(copula::to_string(c.family)), experiments::to_string(c.mode), c.parameter};
    if (!rows.count(key)) order.push_back(key);
    rows[key][c.years] = &c;
  }
  for (const auto& key : order) {
    out += std::get<0>(key) + "," + std::get<1>(key) + "," + std::get<2>(key);
    for (std::size_t y : report.year_subsets) {
      out += ",";
      const auto it = rows[key].find(y);
      if (it != rows[key].end()) {
        out += format_number(it->second->mean, kSummaryDigits) + " (" + format_number(it->second->sd, kSummaryDigits) + ")";
      }
    }
    out += "\n";
  }
  return out;
}

std::string report_json(const experiments::ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["name"] = report.name;
  j["year_subsets"] = report.year_subsets;
  j["slice_exhausted"] = report.total_exhausted();
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"family", copula::to_string(c.family)},
                     {"mode", experiments::to_string(c.mode)},
                     {"years", c.years},
                     {"parameter", c.parameter},
                     {"mean", c.mean},
                     {"sd", c.sd},
                     {"replicates", c.replicates},
                     {"slice_exhausted", c.slice_exhausted}});
  }
  return j.dump(2) + "\n";
}

std::string summary_json(const std::vector<mcmc::CoordinateSummary>& summary, const mcmc::PosteriorSamples& samples,
                         std::size_t experts_count) {
  nlohmann::ordered_json j;
  j["retained"] = samples.states.size();
  j["iterations"] = samples.iterations_run;
  j["experts"] = experts_count;
  j["slice_steps"] = samples.total_steps();
  j["slice_exhausted"] = samples.total_exhausted();
  auto& params = j["parameters"] = nlohmann::ordered_json::array();
  for (const auto& s : summary) {
    params.push_back({{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}, {"q05", s.q05}, {"q50", s.q50}, {"q95", s.q95}});
  }
  return j.dump(2) + "\n";
}

std::string predictive_csv(const experiments::Predictive& p) {
  const bool losses = !p.total_losses.empty();
  std::string out = "draw";
  for (std::size_t j = 0; j < p.cells; ++j) out += ",count_" + std::to_string(j + 1);
  out += ",total_count";
  if (losses) {
    for (std::size_t j = 0; j < p.cells; ++j) out += ",loss_" + std::to_string(j + 1);
    out += ",total_loss";
  }
  out += "\n";
  for (std::size_t l = 0; l < p.draws; ++l) {
    out += std::to_string(l + 1);
    for (std::size_t j = 0; j < p.cells; ++j) out += "," + std::to_string(p.counts[l * p.cells + j]);
    out += "," + format_number(p.total_counts[l], kSampleDigits);
    if (losses) {
      for (std::size_t j = 0; j < p.cells; ++j) out += "," + format_number(p.losses[l * p.cells + j], kSampleDigits);
      out += "," + format_number(p.total_losses[l], kSampleDigits);
    }
    out += "\n";
  }
  return out;
}

std::string var_csv(const experiments::Predictive& p, const std::vector<double>& quantiles) {
  const bool losses = !p.total_losses.empty();
  std::string out = losses ? "quantile,total_count,total_loss\n" : "quantile,total_count\n";
  for (double q : quantiles) {
    out += format_number(q, kSampleDigits) + "," + format_number(loss::empirical_quantile(p.total_counts, q), kSampleDigits);
    if (losses) out += "," + format_number(loss::empirical_quantile(p.total_losses, q), kSampleDigits);
    out += "\n";
  }
  return out;
}

}  // namespace riskdep::io
