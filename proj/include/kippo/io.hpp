#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kippo/common.hpp"

namespace kippo {

// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);
// Exact inverse of format_double (and of any decimal double literal).
double parse_double(const std::string& s);

uint64_t fnv1a64(const std::string& s);
std::string to_hex(uint64_t v);

void ensure_dir(const std::filesystem::path& p);
// Writes via a temp file and renames, so readers never observe partial files.
void atomic_write(const std::filesystem::path& p, const std::string& content);
std::string slurp(const std::filesystem::path& p);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;  // -1 when absent
  std::string to_string() const;
};

CsvTable read_csv(const std::filesystem::path& p);
std::string csv_escape(const std::string& field);

// Fixed-width text rendering of a CSV-like table.
std::string render_text_table(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows);

// --- minimal SVG plotting ----------------------------------------------------

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_lo;  // optional band
  std::vector<double> y_hi;
};

// Learning-curve style plot: one polyline per series plus optional shaded
// mean+/-SD bands, axes, ticks, and a legend.
std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<SvgSeries>& series);

// Structural well-formedness check for the SVG files this repo emits:
// XML tag balance, an <svg> root, at least one polyline/path, finite numbers.
bool validate_svg(const std::string& content, std::string* why = nullptr);

}  // namespace kippo
