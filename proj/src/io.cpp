#include "tubelab/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "tubelab/errors.hpp"

namespace tubelab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json operator_json(const DiscreteOperator& A, const Vec* eigenvalues) {
  nlohmann::json j;
  j["rows"] = A.K.rows();
  j["cols"] = A.K.cols();
  j["nonzeros"] = A.K.nonZeros();
  j["provenance"] = A.provenance;
  j["eps"] = A.eps ? nlohmann::json(*A.eps) : nlohmann::json(nullptr);
  j["weights"] = std::vector<double>(A.w.data(), A.w.data() + A.w.size());
  if (eigenvalues)
    j["eigenvalues"] = std::vector<double>(eigenvalues->data(), eigenvalues->data() + eigenvalues->size());
  return j;
}

nlohmann::json spectrum_json(const FiberSpectrum& spec, bool with_vectors) {
  nlohmann::json j;
  j["codim"] = spec.codim;
  j["n"] = spec.grid.n;
  j["n_angular"] = spec.codim == 2 ? spec.grid.n_angular : 1;
  j["h"] = spec.grid.h;
  j["eigenvalues"] = std::vector<double>(spec.eigenvalues.data(), spec.eigenvalues.data() + spec.eigenvalues.size());
  j["analytic"] = std::vector<double>(spec.analytic_values.data(),
                                      spec.analytic_values.data() + spec.analytic_values.size());
  j["angular_order"] = spec.angular_order;
  j["radial_order"] = spec.radial_order;
  nlohmann::json mult = nlohmann::json::array();
  for (auto [a, b] : spec.multiplets) mult.push_back({a, b});
  j["multiplets"] = mult;
  if (with_vectors) {
    nlohmann::json pts = nlohmann::json::array();
    for (const Vec& p : spec.grid.points) pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    j["points"] = pts;
    j["weights"] = std::vector<double>(spec.grid.weights.data(), spec.grid.weights.data() + spec.grid.weights.size());
    nlohmann::json vecs = nlohmann::json::array();
    for (int k = 0; k < spec.mode_count(); ++k) {
      const Vec c = spec.eigenvectors.col(k);
      vecs.push_back(std::vector<double>(c.data(), c.data() + c.size()));
    }
    j["eigenvectors"] = vecs;
  }
  return j;
}

void write_coordinate(std::ostream& os, const SpMat& M) {
  os << "%tubelab coordinate " << M.rows() << ' ' << M.cols() << ' ' << M.nonZeros() << '\n';
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << format_double(it.value()) << '\n';
}

CsvTable::CsvTable(std::vector<std::string> columns, std::string header_comment)
    : columns_(std::move(columns)), comment_(std::move(header_comment)) {}

void CsvTable::add(const std::vector<std::string>& row) {
  if (row.size() != columns_.size()) throw InvalidArgument("CSV row width mismatch");
  rows_.push_back(row);
}

std::string CsvTable::str() const {
  std::ostringstream os;
  if (!comment_.empty()) os << "# " << comment_ << '\n';
  for (size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
  os << '\n';
  for (const auto& r : rows_) {
    for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << content;
  if (!out) throw NumericalError("write failed for " + path);
}

}  // namespace tubelab
