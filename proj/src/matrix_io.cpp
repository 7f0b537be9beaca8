#include "qtopo/matrix_io.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace qtopo {

using nlohmann::json;

json matrix_to_json(const ComplexMatrix& m) {
  json re = json::array();
  json im = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json re_row = json::array();
    json im_row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      re_row.push_back(m(i, j).real());
      im_row.push_back(m(i, j).imag());
    }
    re.push_back(std::move(re_row));
    im.push_back(std::move(im_row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

namespace {

void read_part(const json& part, Eigen::Index rows, Eigen::Index cols, const char* name,
               ComplexMatrix& m, bool imaginary) {
  if (!part.is_array() || static_cast<Eigen::Index>(part.size()) != rows) {
    throw std::invalid_argument(std::string("matrix JSON: '") + name + "' must have " +
                                std::to_string(rows) + " rows");
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = part[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::invalid_argument(std::string("matrix JSON: row ") + std::to_string(i) + " of '" +
                                  name + "' must have " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      const json& x = row[static_cast<std::size_t>(j)];
      if (!x.is_number()) {
        throw std::invalid_argument(std::string("matrix JSON: non-numeric entry in '") + name + "'");
      }
      const double v = x.get<double>();
      if (imaginary) {
        m(i, j).imag(v);
      } else {
        m(i, j).real(v);
      }
    }
  }
}

}  // namespace

ComplexMatrix matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("re")) {
    throw std::invalid_argument("matrix JSON: expected object with rows, cols, re[, im]");
  }
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows < 1 || cols < 1) throw std::invalid_argument("matrix JSON: rows and cols must be >= 1");
  ComplexMatrix m = ComplexMatrix::Zero(rows, cols);
  read_part(j.at("re"), rows, cols, "re", m, false);
  if (j.contains("im")) read_part(j.at("im"), rows, cols, "im", m, true);
  if (!all_finite(m)) throw std::invalid_argument("matrix JSON: non-finite entry");
  return m;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_matrix_file(const std::filesystem::path& path, const ComplexMatrix& m) {
  write_json_file(path, matrix_to_json(m));
}

ComplexMatrix read_matrix_file(const std::filesystem::path& path) {
  return matrix_from_json(read_json_file(path));
}

}  // namespace qtopo
