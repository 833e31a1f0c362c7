#pragma once

// Serialization helpers: JSON report documents, CSV tables, number
// formatting and the config hash.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairdg/bounds.hpp"
#include "fairdg/prob_core.hpp"
#include "json.hpp"

namespace fairdg::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "fairdg";
inline constexpr const char* kToolVersion = "0.1.0";

// 12 significant digits.
std::string format_double(double v);
// Value rounded to 12 significant digits, for JSON output.
double round12(double v);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

// {tool, version, config_hash, ...} header followed by the payload fields.
Json envelope(const std::string& config_text);

Json to_json(const bounds::BoundReport& r);
Json joint_to_json(const prob::FiniteJoint& j);
prob::FiniteJoint joint_from_json(const Json& j);
Json channel_to_json(const prob::Channel& c);
prob::Channel channel_from_json(const Json& j);

// Dumps with numbers rounded to 12 significant digits.
std::string dump(const Json& j);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws ValidationError if absent.
  std::size_t column(const std::string& name) const;
  bool has(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
  std::size_t index(std::size_t row, std::size_t col) const;
};

// Comma separated, '.' decimals, header required. Lines starting with '#'
// are comments.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// "# tool=... version=... config_hash=..." comment line for CSV outputs.
std::string csv_comment(const std::string& config_text);

}  // namespace fairdg::io
