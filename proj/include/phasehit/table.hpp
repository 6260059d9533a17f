#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace phasehit {

/// One output cell: text, a value printed with 12 significant digits, or an
/// integer count.
using Cell = std::variant<std::string, double, std::int64_t>;

/// 12 significant digits, locale-independent.
std::string format_number(double v);

/// Deterministic row-ordered table; CSV is newline-terminated with a fixed
/// column order so outputs are stable golden files.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> cells);
  std::string csv() const;
  std::string json() const;
};

}  // namespace phasehit
