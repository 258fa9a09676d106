#pragma once

#include <json.hpp>

#include "cgrelax/poly.hpp"

namespace cgrelax {

/// Array of {"exponents": [...], "coeff": c} objects in graded-lex order.
nlohmann::json polynomial_to_json(const Poly& p);
Poly polynomial_from_json(const nlohmann::json& j, VariableSpace space);

}  // namespace cgrelax
