// JSON matrix format shared by every file the library reads or writes:
//   {"rows": n, "cols": m, "re": [[...], ...], "im": [[...], ...]}
// with row-major nested arrays. Doubles round-trip exactly.

#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "qtopo/linalg.hpp"

namespace qtopo {

nlohmann::json matrix_to_json(const ComplexMatrix& m);

/// Throws std::invalid_argument on a malformed object. A missing "im" means a
/// real matrix.
ComplexMatrix matrix_from_json(const nlohmann::json& j);

void write_matrix_file(const std::filesystem::path& path, const ComplexMatrix& m);
ComplexMatrix read_matrix_file(const std::filesystem::path& path);

/// Reads and parses a whole JSON document, naming the file on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace qtopo
