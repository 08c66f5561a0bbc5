#pragma once

#include <json.hpp>
#include <iosfwd>
#include <string>
#include <vector>

#include "tubelab/discretize.hpp"
#include "tubelab/fiber.hpp"

namespace tubelab {

// Shortest text that reads back to the same double; "nan"/"inf" otherwise.
std::string format_double(double v);

// JSON description of an operator: dimensions, eps, provenance, weights and,
// when given, its eigenvalues.
nlohmann::json operator_json(const DiscreteOperator& A, const Vec* eigenvalues = nullptr);
nlohmann::json spectrum_json(const FiberSpectrum& spec, bool with_vectors = true);

// Coordinate text format: a header line "%tubelab coordinate <rows> <cols>
// <nnz>", then one "i j value" line per stored entry, 1-based.
void write_coordinate(std::ostream& os, const SpMat& M);

// Small CSV writer with a leading comment line carrying provenance.
class CsvTable {
 public:
  CsvTable(std::vector<std::string> columns, std::string header_comment);
  void add(const std::vector<std::string>& row);
  std::string str() const;

 private:
  std::vector<std::string> columns_;
  std::string comment_;
  std::vector<std::vector<std::string>> rows_;
};

void write_file(const std::string& path, const std::string& content);

}  // namespace tubelab
