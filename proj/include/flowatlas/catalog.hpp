#pragma once

// Built-in systems with analytic flows.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowatlas/core.hpp"

namespace flowatlas {

struct CatalogEntry
{
    std::string name;
    std::size_t n;
    std::vector<std::string> field;        // t, x1..xn
    std::vector<std::string> family;       // tau, sigma, a1..an
    std::optional<std::string> family_domain;
    bool autonomous;
    bool affine;
};

// riccati, zero, exp_scalar, affine_scalar, rotation, shear
const std::vector<CatalogEntry>& catalog();
const CatalogEntry* find_catalog(std::string_view name);

VectorField catalog_field(const CatalogEntry& entry);
FlowFamily catalog_family(const CatalogEntry& entry);

} // namespace flowatlas
