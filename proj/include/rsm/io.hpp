#pragma once

#include "rsm/mlp.hpp"
#include "rsm/verifier.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace rsm {

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);
/// Strict full-string parse. Throws InvalidInput on trailing characters.
double parse_double(const std::string& s);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Weights text format: a header line with the layer sizes ("2 128 1"),
/// then for each layer one line per weight row followed by one bias line.
std::string weights_to_string(const Mlp& net);
/// Throws ParseError carrying the offending line number.
Mlp weights_from_string(const std::string& text);
void save_weights(const std::filesystem::path& path, const Mlp& net);
Mlp load_weights(const std::filesystem::path& path);

/// JSON document with all certificate fields and the network weights.
std::string certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const std::string& text);
void save_certificate(const std::filesystem::path& path, const Certificate& cert);
Certificate load_certificate(const std::filesystem::path& path);

/// Comma-separated table with a header row and LF line endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(const std::vector<std::string>& cells);
  std::size_t rows() const { return rows_; }
  const std::string& str() const { return text_; }

 private:
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

}  // namespace rsm
