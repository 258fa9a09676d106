#include "cgrelax/poly_json.hpp"

namespace cgrelax {

nlohmann::json polynomial_to_json(const Poly& p) {
  auto arr = nlohmann::json::array();
  for (const auto& [m, c] : p.terms()) {
    arr.push_back({{"exponents", m.exponents()}, {"coeff", c}});
  }
  return arr;
}

Poly polynomial_from_json(const nlohmann::json& j, VariableSpace space) {
  if (!j.is_array()) throw ValidationError("polynomial must be a JSON array of terms");
  Poly p(space);
  for (const auto& term : j) {
    if (!term.is_object() || !term.contains("exponents") || !term.contains("coeff")) {
      throw ValidationError("polynomial term needs 'exponents' and 'coeff'");
    }
    const auto exps = term.at("exponents").get<std::vector<int>>();
    if (exps.size() != space.arity()) {
      throw ValidationError("term has " + std::to_string(exps.size()) + " exponents, space arity is " +
                            std::to_string(space.arity()));
    }
    p.add_term(MultiIndex(exps), term.at("coeff").get<double>());
  }
  return p;
}

}  // namespace cgrelax
