#include "flowatlas/catalog.hpp"

#include <stdexcept>

namespace flowatlas {

namespace {

expr::Expression must_parse(const std::string& src, expr::Dialect d)
{
    auto e = expr::parse(src, d);
    if (!e)
        throw std::logic_error("catalog expression '" + src + "' does not parse: " + e.error().message);
    return std::move(e).value();
}

} // namespace

const std::vector<CatalogEntry>& catalog()
{
    // Closed forms are written so that tau == sigma reproduces a1 exactly.
    static const std::vector<CatalogEntry> entries{
        {"riccati", 1, {"x1^2"}, {"a1 / (1 + (sigma - tau) * a1)"}, "1 - (tau - sigma) * a1", true, false},
        {"zero", 1, {"0"}, {"a1"}, std::nullopt, true, true},
        {"exp_scalar", 1, {"x1"}, {"exp(tau - sigma) * a1"}, std::nullopt, true, true},
        {"affine_scalar", 1, {"x1 + 1"}, {"exp(tau - sigma) * a1 + (exp(tau - sigma) - 1)"}, std::nullopt, true, true},
        {"rotation",
         2,
         {"-x2", "x1"},
         {"cos(tau - sigma) * a1 - sin(tau - sigma) * a2", "sin(tau - sigma) * a1 + cos(tau - sigma) * a2"},
         std::nullopt,
         true,
         true},
        {"shear", 1, {"t * x1"}, {"exp((tau^2 - sigma^2) / 2) * a1"}, std::nullopt, false, true},
    };
    return entries;
}

const CatalogEntry* find_catalog(std::string_view name)
{
    for (const auto& e : catalog())
        if (e.name == name)
            return &e;
    return nullptr;
}

VectorField catalog_field(const CatalogEntry& entry)
{
    DomainSpec dom;
    dom.n = entry.n;
    std::vector<expr::Expression> rhs;
    for (const auto& s : entry.field)
        rhs.push_back(must_parse(s, expr::Dialect::field));
    return VectorField::from_expressions(std::move(dom), std::move(rhs));
}

FlowFamily catalog_family(const CatalogEntry& entry)
{
    std::vector<expr::Expression> comps;
    for (const auto& s : entry.family)
        comps.push_back(must_parse(s, expr::Dialect::family));
    std::optional<expr::Expression> pred;
    if (entry.family_domain)
        pred = must_parse(*entry.family_domain, expr::Dialect::family);
    return closed_form_family(entry.n, std::move(comps), std::move(pred));
}

} // namespace flowatlas
