#pragma once

// Matrix exchange format: {"dim": d, "re": [[...]], "im": [[...]]}, row-major.

#include "json.hpp"

#include "qim/errors.hpp"
#include "qim/speccalc.hpp"

namespace qim {

inline nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json re = nlohmann::ordered_json::array();
  nlohmann::ordered_json im = nlohmann::ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json rr = nlohmann::ordered_json::array();
    nlohmann::ordered_json ri = nlohmann::ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      rr.push_back(m(i, j).real());
      ri.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  nlohmann::ordered_json out;
  out["dim"] = m.rows();
  out["re"] = std::move(re);
  out["im"] = std::move(im);
  return out;
}

inline nlohmann::ordered_json to_json(const HermitianOperator& a) { return matrix_to_json(a.matrix()); }

// "im" may be omitted for real matrices.
template <class Json>
Matrix matrix_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("re"))
    throw InputError("matrix json: expected object with \"dim\" and \"re\"");
  const auto dim = j.at("dim").template get<long long>();
  if (dim < 1) throw InputError("matrix json: dim must be >= 1");
  const auto& re = j.at("re");
  const bool has_im = j.contains("im");
  Matrix m(dim, dim);
  auto check_rows = [dim](const Json& rows, const char* name) {
    if (!rows.is_array() || static_cast<long long>(rows.size()) != dim)
      throw InputError(std::string("matrix json: \"") + name + "\" must have dim rows");
    for (const auto& r : rows)
      if (!r.is_array() || static_cast<long long>(r.size()) != dim)
        throw InputError(std::string("matrix json: \"") + name + "\" rows must have dim entries");
  };
  check_rows(re, "re");
  if (has_im) check_rows(j.at("im"), "im");
  for (long long r = 0; r < dim; ++r)
    for (long long c = 0; c < dim; ++c) {
      const double x = re[r][c].template get<double>();
      const double y = has_im ? j.at("im")[r][c].template get<double>() : 0.0;
      m(r, c) = Complex(x, y);
    }
  return m;
}

template <class Json>
HermitianOperator hermitian_from_json(const Json& j) {
  return HermitianOperator(matrix_from_json(j));
}

}  // namespace qim
