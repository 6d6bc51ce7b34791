#pragma once

// JSON encodings shared by the file format, the CLI and the HTTP service.

#include "strata/model.hpp"

#include <json.hpp>

namespace strata {

/// Numbers become JSON numbers (integers when exact, otherwise the
/// shortest double), Empty becomes null and errors become {"error": code}.
nlohmann::json value_to_json(const Value& v);

/// Inverse of value_to_json for scalars; throws std::invalid_argument on
/// arrays and malformed error objects.
Value value_from_json(const nlohmann::json& j);

nlohmann::json field_ref_to_json(const FieldRef& r);

/// The saved document as a JSON tree.
nlohmann::json document_to_json(const Workbook& wb);

}  // namespace strata
