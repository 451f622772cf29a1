#pragma once

// Arithmetic expression language used by configuration files to describe
// vector fields, domain predicates and closed-form flow families.
//
// Grammar (see docs/grammar.md):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | variable | func '(' expr ')' | '(' expr ')'
//
// Two dialects share the grammar and differ only in variable names:
//   field  : t, x1..xn
//   family : tau, sigma, a1..an

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "flowatlas/expected.hpp"

namespace flowatlas::expr {

enum class Dialect { field, family };

enum class BinaryOp { add, sub, mul, div, pow };

enum class Function { sin, cos, exp, log, sqrt, abs, tanh };

enum class VarKind
{
    time,        // t / tau
    source_time, // sigma (family dialect only)
    state        // xk / ak, 1-based index
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Literal
{
    double value;
};

struct Variable
{
    VarKind kind;
    std::size_t index = 0;
};

struct Negate
{
    NodePtr operand;
};

struct Binary
{
    BinaryOp op;
    NodePtr lhs;
    NodePtr rhs;
};

struct Call
{
    Function fn;
    NodePtr arg;
};

struct Node
{
    std::variant<Literal, Variable, Negate, Binary, Call> data;
};

bool structurally_equal(const Node& lhs, const Node& rhs);

// Immutable expression tree. Copies share nodes.
class Expression
{
public:
    Expression(NodePtr root, Dialect dialect);

    const Node& root() const { return *root_; }
    Dialect dialect() const { return dialect_; }

    // Largest state index referenced, 0 when the expression has none.
    std::size_t max_state_index() const;

    friend bool operator==(const Expression& a, const Expression& b)
    {
        return a.dialect_ == b.dialect_ && structurally_equal(*a.root_, *b.root_);
    }

private:
    NodePtr root_;
    Dialect dialect_;
};

struct ParseError
{
    std::size_t offset;
    std::string message;
};

enum class EvalErrorKind { division_by_zero, domain, nonfinite };

struct EvalError
{
    EvalErrorKind kind;
};

struct ValidationError
{
    std::string variable;
};

// Evaluation environment. `s` is only read by the family dialect.
struct Env
{
    double t = 0.0;
    double s = 0.0;
    std::span<const double> x;
};

Expected<Expression, ParseError> parse(std::string_view source, Dialect dialect = Dialect::field);

Expected<double, EvalError> evaluate(const Expression& e, const Env& env);
Expected<double, EvalError> evaluate(const Expression& e, double t, std::span<const double> x);

// nullopt when every variable is admissible for dimension n.
std::optional<ValidationError> validate(const Expression& e, std::size_t n);

// Canonical fully parenthesized rendering; parse(pretty_print(e)) == e.
std::string pretty_print(const Expression& e);

const char* to_string(EvalErrorKind kind);
const char* to_string(Function fn);

// Convenience builders, mostly for tests and the catalog.
Expression literal(double v, Dialect d = Dialect::field);

} // namespace flowatlas::expr
