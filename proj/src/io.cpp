#include "fairdg/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fairdg/errors.hpp"

namespace fairdg::io {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double round12(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format_double(v).c_str(), nullptr);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json envelope(const std::string& config_text) {
  Json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["config_hash"] = hex64(fnv1a64(config_text));
  return j;
}

Json to_json(const bounds::BoundReport& r) {
  Json j;
  j["name"] = r.name;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  Json terms = Json::object();
  for (const auto& [k, v] : r.terms) terms[k] = v;
  j["terms"] = terms;
  j["slack"] = r.slack;
  if (r.seed) j["seed"] = *r.seed;
  else j["seed"] = nullptr;
  if (!r.extras.empty()) {
    Json ex = Json::object();
    for (const auto& [k, v] : r.extras) ex[k] = v;
    j["extras"] = ex;
  }
  if (!r.meta.empty()) j["meta"] = r.meta;
  return j;
}

Json joint_to_json(const prob::FiniteJoint& f) {
  Json j;
  j["sizes"] = f.probs.shape();
  j["probs"] = std::vector<double>(f.probs.values().begin(), f.probs.values().end());
  j["source_domains"] = f.source_domains;
  j["target_domain"] = f.target_domain;
  return j;
}

prob::FiniteJoint joint_from_json(const Json& j) {
  try {
    prob::FiniteJoint f;
    auto sizes = j.at("sizes").get<std::vector<std::size_t>>();
    if (sizes.size() != 4) throw ValidationError("joint sizes must have four entries");
    f.probs = prob::ProbTable(sizes, j.at("probs").get<std::vector<double>>());
    f.source_domains = j.at("source_domains").get<std::vector<std::size_t>>();
    f.target_domain = j.at("target_domain").get<std::size_t>();
    f.validate();
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed joint: ") + e.what());
  }
}

Json channel_to_json(const prob::Channel& c) {
  Json j;
  j["nx"] = c.nx;
  j["ny"] = c.ny;
  j["cond"] = c.cond;
  j["deterministic"] = c.deterministic;
  return j;
}

prob::Channel channel_from_json(const Json& j) {
  try {
    prob::Channel c;
    c.nx = j.at("nx").get<std::size_t>();
    c.ny = j.at("ny").get<std::size_t>();
    c.cond = j.at("cond").get<std::vector<double>>();
    c.deterministic = j.value("deterministic", false);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed channel: ") + e.what());
  }
}

namespace {

void round_numbers(Json& j) {
  if (j.is_number_float()) {
    j = round12(j.get<double>());
  } else if (j.is_structured()) {
    for (auto& v : j) round_numbers(v);
  }
}

}  // namespace

std::string dump(const Json& j) {
  Json copy = j;
  round_numbers(copy);
  return copy.dump(2) + "\n";
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ValidationError("CSV is missing column '" + name + "'");
}

bool CsvTable::has(const std::string& name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& s = rows.at(row).at(col);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE)
    throw ValidationError("CSV row " + std::to_string(row + 1) + ": '" + s + "' is not a number");
  return v;
}

std::size_t CsvTable::index(std::size_t row, std::size_t col) const {
  const std::string& s = rows.at(row).at(col);
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || v < 0)
    throw ValidationError("CSV row " + std::to_string(row + 1) + ": '" + s +
                          "' is not a non-negative integer");
  return static_cast<std::size_t>(v);
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!l.empty() && l.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ValidationError("CSV row " + std::to_string(t.rows.size() + 1) + " has " +
                            std::to_string(cells.size()) + " fields, header has " +
                            std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw ValidationError("CSV has no header");
  return t;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path)); }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path);
  f << content;
  if (!f) throw ValidationError("failed writing " + path);
}

std::string csv_comment(const std::string& config_text) {
  return std::string("# tool=") + kToolName + " version=" + kToolVersion +
         " config_hash=" + hex64(fnv1a64(config_text)) + "\n";
}

}  // namespace fairdg::io
