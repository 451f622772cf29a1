#include "flowatlas/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <system_error>

namespace flowatlas::expr {

namespace {

struct FunctionName
{
    std::string_view name;
    Function fn;
};

constexpr std::array<FunctionName, 7> kFunctions{{
    {"sin", Function::sin},
    {"cos", Function::cos},
    {"exp", Function::exp},
    {"log", Function::log},
    {"sqrt", Function::sqrt},
    {"abs", Function::abs},
    {"tanh", Function::tanh},
}};

enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, end };

struct Token
{
    Tok kind;
    std::size_t offset;
    std::string_view text;
    double number = 0.0;
};

class Parser
{
public:
    Parser(std::string_view src, Dialect dialect) : src_(src), dialect_(dialect) {}

    Expected<Expression, ParseError> run()
    {
        if (!advance())
            return *error_;
        NodePtr root = parse_expr();
        if (error_)
            return *error_;
        if (cur_.kind != Tok::end) {
            if (cur_.kind == Tok::rparen)
                return ParseError{cur_.offset, "unbalanced parenthesis"};
            return ParseError{cur_.offset, "unexpected token '" + std::string(cur_.text) + "'"};
        }
        return Expression(std::move(root), dialect_);
    }

private:
    bool fail(std::size_t offset, std::string msg)
    {
        if (!error_)
            error_ = ParseError{offset, std::move(msg)};
        return false;
    }

    bool advance()
    {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
        const std::size_t start = pos_;
        if (pos_ >= src_.size()) {
            cur_ = {Tok::end, start, {}};
            return true;
        }
        const char c = src_[pos_];
        auto single = [&](Tok k) {
            cur_ = {k, start, src_.substr(start, 1)};
            ++pos_;
            return true;
        };
        switch (c) {
        case '+': return single(Tok::plus);
        case '-': return single(Tok::minus);
        case '*': return single(Tok::star);
        case '/': return single(Tok::slash);
        case '^': return single(Tok::caret);
        case '(': return single(Tok::lparen);
        case ')': return single(Tok::rparen);
        default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return lex_number(start);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < src_.size()
                   && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            cur_ = {Tok::ident, start, src_.substr(start, pos_ - start)};
            return true;
        }
        return fail(start, std::string("unexpected character '") + c + "'");
    }

    bool lex_number(std::size_t start)
    {
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
                ++n;
            }
            return n;
        };
        std::size_t mantissa = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            mantissa += digits();
        }
        if (mantissa == 0)
            return fail(start, "malformed number");
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
                ++pos_;
            if (digits() == 0)
                return fail(start, "malformed number");
        }
        const std::string_view text = src_.substr(start, pos_ - start);
        double value = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
        if (res.ec != std::errc() || !std::isfinite(value))
            return fail(start, "malformed number");
        cur_ = {Tok::number, start, text, value};
        return true;
    }

    NodePtr make(auto&& alt) { return std::make_shared<const Node>(Node{std::forward<decltype(alt)>(alt)}); }

    NodePtr parse_expr()
    {
        NodePtr lhs = parse_term();
        while (!error_ && (cur_.kind == Tok::plus || cur_.kind == Tok::minus)) {
            const BinaryOp op = cur_.kind == Tok::plus ? BinaryOp::add : BinaryOp::sub;
            if (!advance())
                return nullptr;
            NodePtr rhs = parse_term();
            lhs = make(Binary{op, std::move(lhs), std::move(rhs)});
        }
        return lhs;
    }

    NodePtr parse_term()
    {
        NodePtr lhs = parse_unary();
        while (!error_ && (cur_.kind == Tok::star || cur_.kind == Tok::slash)) {
            const BinaryOp op = cur_.kind == Tok::star ? BinaryOp::mul : BinaryOp::div;
            if (!advance())
                return nullptr;
            NodePtr rhs = parse_unary();
            lhs = make(Binary{op, std::move(lhs), std::move(rhs)});
        }
        return lhs;
    }

    NodePtr parse_unary()
    {
        if (error_)
            return nullptr;
        if (cur_.kind == Tok::minus) {
            if (!advance())
                return nullptr;
            NodePtr operand = parse_unary();
            return make(Negate{std::move(operand)});
        }
        return parse_power();
    }

    NodePtr parse_power()
    {
        NodePtr base = parse_primary();
        if (!error_ && cur_.kind == Tok::caret) {
            if (!advance())
                return nullptr;
            NodePtr exponent = parse_unary();
            return make(Binary{BinaryOp::pow, std::move(base), std::move(exponent)});
        }
        return base;
    }

    NodePtr parse_primary()
    {
        if (error_)
            return nullptr;
        const Token tok = cur_;
        switch (tok.kind) {
        case Tok::number:
            if (!advance())
                return nullptr;
            return make(Literal{tok.number});
        case Tok::lparen: {
            if (!advance())
                return nullptr;
            NodePtr inner = parse_expr();
            if (error_)
                return nullptr;
            if (cur_.kind != Tok::rparen) {
                fail(cur_.offset, cur_.kind == Tok::end ? "unbalanced parenthesis: unexpected end of input"
                                                        : "unbalanced parenthesis: expected ')'");
                return nullptr;
            }
            if (!advance())
                return nullptr;
            return inner;
        }
        case Tok::ident: return parse_identifier(tok);
        case Tok::end: fail(tok.offset, "unexpected end of input"); return nullptr;
        case Tok::rparen: fail(tok.offset, "unbalanced parenthesis"); return nullptr;
        default: fail(tok.offset, "unexpected token '" + std::string(tok.text) + "'"); return nullptr;
        }
    }

    NodePtr parse_identifier(const Token& tok)
    {
        if (!advance())
            return nullptr;
        if (cur_.kind == Tok::lparen) {
            const FunctionName* found = nullptr;
            for (const auto& f : kFunctions)
                if (f.name == tok.text)
                    found = &f;
            if (!found) {
                fail(tok.offset, "unknown function '" + std::string(tok.text) + "'");
                return nullptr;
            }
            if (!advance())
                return nullptr;
            NodePtr arg = parse_expr();
            if (error_)
                return nullptr;
            if (cur_.kind != Tok::rparen) {
                fail(cur_.offset, cur_.kind == Tok::end ? "unbalanced parenthesis: unexpected end of input"
                                                        : "unbalanced parenthesis: expected ')'");
                return nullptr;
            }
            if (!advance())
                return nullptr;
            return make(Call{found->fn, std::move(arg)});
        }
        auto var = resolve_variable(tok.text);
        if (!var) {
            for (const auto& f : kFunctions)
                if (f.name == tok.text) {
                    fail(cur_.offset, "expected '(' after " + std::string(tok.text));
                    return nullptr;
                }
            fail(tok.offset, "bad variable name '" + std::string(tok.text) + "'");
            return nullptr;
        }
        return make(*var);
    }

    std::optional<Variable> resolve_variable(std::string_view name) const
    {
        const std::string_view time_name = dialect_ == Dialect::field ? "t" : "tau";
        const std::string_view state_prefix = dialect_ == Dialect::field ? "x" : "a";
        if (name == time_name)
            return Variable{VarKind::time, 0};
        if (dialect_ == Dialect::family && name == "sigma")
            return Variable{VarKind::source_time, 0};
        if (name.size() < 2 || name.substr(0, 1) != state_prefix)
            return std::nullopt;
        const std::string_view digits = name.substr(1);
        if (digits.front() == '0')
            return std::nullopt;
        std::size_t index = 0;
        const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), index);
        if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || index == 0)
            return std::nullopt;
        return Variable{VarKind::state, index};
    }

    std::string_view src_;
    Dialect dialect_;
    std::size_t pos_ = 0;
    Token cur_{Tok::end, 0, {}};
    std::optional<ParseError> error_;
};

struct Evaluator
{
    const Env& env;

    Expected<double, EvalError> operator()(const Node& node) const
    {
        return std::visit([&](const auto& alt) { return eval(alt); }, node.data);
    }

    static Expected<double, EvalError> checked(double v)
    {
        if (!std::isfinite(v))
            return EvalError{EvalErrorKind::nonfinite};
        return v;
    }

    Expected<double, EvalError> eval(const Literal& lit) const { return lit.value; }

    Expected<double, EvalError> eval(const Variable& var) const
    {
        switch (var.kind) {
        case VarKind::time: return env.t;
        case VarKind::source_time: return env.s;
        case VarKind::state:
            if (var.index == 0 || var.index > env.x.size())
                return EvalError{EvalErrorKind::domain};
            return env.x[var.index - 1];
        }
        return EvalError{EvalErrorKind::domain};
    }

    Expected<double, EvalError> eval(const Negate& neg) const
    {
        auto v = (*this)(*neg.operand);
        if (!v)
            return v;
        return -*v;
    }

    Expected<double, EvalError> eval(const Binary& bin) const
    {
        auto l = (*this)(*bin.lhs);
        if (!l)
            return l;
        auto r = (*this)(*bin.rhs);
        if (!r)
            return r;
        const double a = *l;
        const double b = *r;
        switch (bin.op) {
        case BinaryOp::add: return checked(a + b);
        case BinaryOp::sub: return checked(a - b);
        case BinaryOp::mul: return checked(a * b);
        case BinaryOp::div:
            if (b == 0.0)
                return EvalError{EvalErrorKind::division_by_zero};
            return checked(a / b);
        case BinaryOp::pow:
            if (a < 0.0 && std::trunc(b) != b)
                return EvalError{EvalErrorKind::domain};
            if (a == 0.0 && b < 0.0)
                return EvalError{EvalErrorKind::division_by_zero};
            return checked(std::pow(a, b));
        }
        return EvalError{EvalErrorKind::domain};
    }

    Expected<double, EvalError> eval(const Call& call) const
    {
        auto v = (*this)(*call.arg);
        if (!v)
            return v;
        const double x = *v;
        switch (call.fn) {
        case Function::sin: return checked(std::sin(x));
        case Function::cos: return checked(std::cos(x));
        case Function::exp: return checked(std::exp(x));
        case Function::log:
            if (x <= 0.0)
                return EvalError{EvalErrorKind::domain};
            return checked(std::log(x));
        case Function::sqrt:
            if (x < 0.0)
                return EvalError{EvalErrorKind::domain};
            return checked(std::sqrt(x));
        case Function::abs: return checked(std::fabs(x));
        case Function::tanh: return checked(std::tanh(x));
        }
        return EvalError{EvalErrorKind::domain};
    }
};

std::size_t max_index(const Node& node)
{
    return std::visit(
        [](const auto& alt) -> std::size_t {
            using T = std::decay_t<decltype(alt)>;
            if constexpr (std::is_same_v<T, Literal>)
                return 0;
            else if constexpr (std::is_same_v<T, Variable>)
                return alt.kind == VarKind::state ? alt.index : 0;
            else if constexpr (std::is_same_v<T, Negate>)
                return max_index(*alt.operand);
            else if constexpr (std::is_same_v<T, Binary>)
                return std::max(max_index(*alt.lhs), max_index(*alt.rhs));
            else
                return max_index(*alt.arg);
        },
        node.data);
}

void render(const Node& node, Dialect d, std::string& out)
{
    std::visit(
        [&](const auto& alt) {
            using T = std::decay_t<decltype(alt)>;
            if constexpr (std::is_same_v<T, Literal>) {
                std::array<char, 64> buf{};
                const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), alt.value);
                out.append(buf.data(), res.ptr);
            } else if constexpr (std::is_same_v<T, Variable>) {
                switch (alt.kind) {
                case VarKind::time: out += d == Dialect::field ? "t" : "tau"; break;
                case VarKind::source_time: out += "sigma"; break;
                case VarKind::state:
                    out += d == Dialect::field ? "x" : "a";
                    out += std::to_string(alt.index);
                    break;
                }
            } else if constexpr (std::is_same_v<T, Negate>) {
                out += "(-";
                render(*alt.operand, d, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, Binary>) {
                static constexpr std::array<const char*, 5> ops{" + ", " - ", " * ", " / ", " ^ "};
                out += '(';
                render(*alt.lhs, d, out);
                out += ops[static_cast<std::size_t>(alt.op)];
                render(*alt.rhs, d, out);
                out += ')';
            } else {
                out += to_string(alt.fn);
                out += '(';
                render(*alt.arg, d, out);
                out += ')';
            }
        },
        node.data);
}

} // namespace

bool structurally_equal(const Node& lhs, const Node& rhs)
{
    if (lhs.data.index() != rhs.data.index())
        return false;
    return std::visit(
        [&](const auto& a) -> bool {
            using T = std::decay_t<decltype(a)>;
            const auto& b = std::get<T>(rhs.data);
            if constexpr (std::is_same_v<T, Literal>)
                return a.value == b.value;
            else if constexpr (std::is_same_v<T, Variable>)
                return a.kind == b.kind && a.index == b.index;
            else if constexpr (std::is_same_v<T, Negate>)
                return structurally_equal(*a.operand, *b.operand);
            else if constexpr (std::is_same_v<T, Binary>)
                return a.op == b.op && structurally_equal(*a.lhs, *b.lhs) && structurally_equal(*a.rhs, *b.rhs);
            else
                return a.fn == b.fn && structurally_equal(*a.arg, *b.arg);
        },
        lhs.data);
}

Expression::Expression(NodePtr root, Dialect dialect) : root_(std::move(root)), dialect_(dialect)
{
    if (!root_)
        throw std::invalid_argument("Expression: null root");
}

std::size_t Expression::max_state_index() const { return max_index(*root_); }

Expected<Expression, ParseError> parse(std::string_view source, Dialect dialect)
{
    return Parser(source, dialect).run();
}

Expected<double, EvalError> evaluate(const Expression& e, const Env& env)
{
    auto v = Evaluator{env}(e.root());
    if (v && !std::isfinite(*v))
        return EvalError{EvalErrorKind::nonfinite};
    return v;
}

Expected<double, EvalError> evaluate(const Expression& e, double t, std::span<const double> x)
{
    return evaluate(e, Env{t, 0.0, x});
}

std::optional<ValidationError> validate(const Expression& e, std::size_t n)
{
    const std::size_t k = e.max_state_index();
    if (k > n)
        return ValidationError{(e.dialect() == Dialect::field ? "x" : "a") + std::to_string(k)};
    return std::nullopt;
}

std::string pretty_print(const Expression& e)
{
    std::string out;
    render(e.root(), e.dialect(), out);
    return out;
}

const char* to_string(EvalErrorKind kind)
{
    switch (kind) {
    case EvalErrorKind::division_by_zero: return "division_by_zero";
    case EvalErrorKind::domain: return "domain";
    case EvalErrorKind::nonfinite: return "nonfinite";
    }
    return "unknown";
}

const char* to_string(Function fn)
{
    for (const auto& f : kFunctions)
        if (f.fn == fn)
            return f.name.data();
    return "?";
}

Expression literal(double v, Dialect d)
{
    return Expression(std::make_shared<const Node>(Node{Literal{v}}), d);
}

} // namespace flowatlas::expr
