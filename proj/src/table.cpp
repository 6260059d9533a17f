#include "phasehit/table.hpp"

#include "phasehit/core.hpp"

#include <json.hpp>

#include <charconv>
#include <sstream>

namespace phasehit {

std::string format_number(double v) {
  char buf[48];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
  (void)ec;
  return std::string(buf, p);
}

void ResultTable::add_row(std::vector<Cell> cells) {
  if (cells.size() != columns.size())
    throw ValueError("result table: row width does not match the columns");
  rows.push_back(std::move(cells));
}

namespace {

std::string cell_text(const Cell& c) {
  if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
  if (std::holds_alternative<double>(c)) return format_number(std::get<double>(c));
  return std::to_string(std::get<std::int64_t>(c));
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string ResultTable::csv() const {
  std::ostringstream os;
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) os << ',';
    os << csv_escape(columns[i]);
  }
  os << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << csv_escape(cell_text(row[i]));
    }
    os << '\n';
  }
  return os.str();
}

std::string ResultTable::json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json obj;
    for (size_t i = 0; i < row.size(); ++i) {
      const Cell& c = row[i];
      if (std::holds_alternative<std::string>(c))
        obj[columns[i]] = std::get<std::string>(c);
      else if (std::holds_alternative<double>(c))
        obj[columns[i]] = std::get<double>(c);
      else
        obj[columns[i]] = std::get<std::int64_t>(c);
    }
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

}  // namespace phasehit
