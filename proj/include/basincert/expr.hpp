#pragma once

// Expression DSL for vector-field components. Variables are t, x1..xn and
// eps (u1..un is accepted as an alias for x1..xn so original-form systems
// can be written naturally); constants pi and e; binary ops + - * / ^ with
// ^ right-associative; unary minus binds tighter than ^; functions
// sin cos tan exp log sqrt abs sign min max.
//
// Trees are immutable after parse and evaluation is pure, so one Expr can
// be evaluated from many threads concurrently.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "basincert/errors.hpp"

namespace basincert {

enum class ExprOp {
    Literal, Time, State, Eps,
    Neg, Add, Sub, Mul, Div, Pow,
    Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Sign, Min, Max,
};

struct ExprNode {
    ExprOp op;
    double value = 0.0; // Literal payload
    int index = 0;      // State payload (0-based)
    int a = -1, b = -1; // children
};

class Expr {
public:
    Expr() = default;

    static Expr parse(const std::string& source, int n);

    double eval(double t, std::span<const double> x, double eps) const {
        if (static_cast<int>(x.size()) != n_)
            throw EvalError("state vector has dimension " + std::to_string(x.size()) +
                            ", expression expects " + std::to_string(n_));
        return eval_node(root_, t, x, eps);
    }

    // Prints so that parse(str()) rebuilds a structurally identical tree.
    std::string str() const { return print_node(root_, 0); }

    // One switching expression per nonsmooth node: the argument of each
    // abs/sign, the difference of arguments for each min/max.
    std::vector<Expr> switching_functions() const;

    int dimension() const { return n_; }
    int nonsmooth_node_count() const;
    bool references_time() const { return references(ExprOp::Time); }
    bool references_state() const { return references(ExprOp::State); }
    bool references_eps() const { return references(ExprOp::Eps); }

private:
    std::vector<ExprNode> nodes_;
    int root_ = -1;
    int n_ = 0;

    friend class ExprParser;
    friend class ExprBuilder;

    double eval_node(int id, double t, std::span<const double> x, double eps) const;
    std::string print_node(int id, int parent_prec) const;
    bool references(ExprOp what) const {
        for (const auto& nd : nodes_)
            if (nd.op == what) return true;
        return false;
    }
    int copy_subtree(int id, Expr& dst) const;
};

namespace detail {

inline bool is_unary_fn(ExprOp op) {
    switch (op) {
        case ExprOp::Sin: case ExprOp::Cos: case ExprOp::Tan: case ExprOp::Exp:
        case ExprOp::Log: case ExprOp::Sqrt: case ExprOp::Abs: case ExprOp::Sign:
            return true;
        default:
            return false;
    }
}

inline const char* fn_name(ExprOp op) {
    switch (op) {
        case ExprOp::Sin: return "sin";
        case ExprOp::Cos: return "cos";
        case ExprOp::Tan: return "tan";
        case ExprOp::Exp: return "exp";
        case ExprOp::Log: return "log";
        case ExprOp::Sqrt: return "sqrt";
        case ExprOp::Abs: return "abs";
        case ExprOp::Sign: return "sign";
        case ExprOp::Min: return "min";
        case ExprOp::Max: return "max";
        default: return "?";
    }
}

inline std::string format_literal(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline double Expr::eval_node(int id, double t, std::span<const double> x, double eps) const {
    const ExprNode& nd = nodes_[id];
    switch (nd.op) {
        case ExprOp::Literal: return nd.value;
        case ExprOp::Time: return t;
        case ExprOp::State: return x[nd.index];
        case ExprOp::Eps: return eps;
        case ExprOp::Neg: return -eval_node(nd.a, t, x, eps);
        case ExprOp::Add: return eval_node(nd.a, t, x, eps) + eval_node(nd.b, t, x, eps);
        case ExprOp::Sub: return eval_node(nd.a, t, x, eps) - eval_node(nd.b, t, x, eps);
        case ExprOp::Mul: {
            double r = eval_node(nd.a, t, x, eps) * eval_node(nd.b, t, x, eps);
            if (!std::isfinite(r)) throw EvalError("non-finite result in '*'");
            return r;
        }
        case ExprOp::Div: {
            double den = eval_node(nd.b, t, x, eps);
            if (den == 0.0) throw EvalError("division by zero");
            double r = eval_node(nd.a, t, x, eps) / den;
            if (!std::isfinite(r)) throw EvalError("non-finite result in '/'");
            return r;
        }
        case ExprOp::Pow: {
            double base = eval_node(nd.a, t, x, eps);
            double expo = eval_node(nd.b, t, x, eps);
            double r = std::pow(base, expo);
            if (!std::isfinite(r))
                throw EvalError("domain error in '^' (base " + detail::format_literal(base) +
                                ", exponent " + detail::format_literal(expo) + ")");
            return r;
        }
        case ExprOp::Sin: return std::sin(eval_node(nd.a, t, x, eps));
        case ExprOp::Cos: return std::cos(eval_node(nd.a, t, x, eps));
        case ExprOp::Tan: {
            double r = std::tan(eval_node(nd.a, t, x, eps));
            if (!std::isfinite(r)) throw EvalError("non-finite result in tan");
            return r;
        }
        case ExprOp::Exp: {
            double r = std::exp(eval_node(nd.a, t, x, eps));
            if (!std::isfinite(r)) throw EvalError("overflow in exp");
            return r;
        }
        case ExprOp::Log: {
            double arg = eval_node(nd.a, t, x, eps);
            if (arg <= 0.0) throw EvalError("log of nonpositive value");
            return std::log(arg);
        }
        case ExprOp::Sqrt: {
            double arg = eval_node(nd.a, t, x, eps);
            if (arg < 0.0) throw EvalError("sqrt of negative value");
            return std::sqrt(arg);
        }
        case ExprOp::Abs: return std::abs(eval_node(nd.a, t, x, eps));
        case ExprOp::Sign: {
            double arg = eval_node(nd.a, t, x, eps);
            return arg > 0.0 ? 1.0 : (arg < 0.0 ? -1.0 : 0.0); // sign(0) = 0
        }
        case ExprOp::Min: {
            double l = eval_node(nd.a, t, x, eps), r = eval_node(nd.b, t, x, eps);
            return l < r ? l : r;
        }
        case ExprOp::Max: {
            double l = eval_node(nd.a, t, x, eps), r = eval_node(nd.b, t, x, eps);
            return l > r ? l : r;
        }
    }
    throw EvalError("corrupt expression node");
}

// Printing precedence levels: Add/Sub 10, Mul/Div 20, Pow 30, Neg 40.
inline std::string Expr::print_node(int id, int parent_prec) const {
    const ExprNode& nd = nodes_[id];
    auto wrap = [&](int prec, const std::string& s) {
        return prec < parent_prec ? "(" + s + ")" : s;
    };
    switch (nd.op) {
        case ExprOp::Literal: return detail::format_literal(nd.value);
        case ExprOp::Time: return "t";
        case ExprOp::State: return "x" + std::to_string(nd.index + 1);
        case ExprOp::Eps: return "eps";
        case ExprOp::Neg: return wrap(40, "-" + print_node(nd.a, 41));
        case ExprOp::Add: return wrap(10, print_node(nd.a, 10) + " + " + print_node(nd.b, 11));
        case ExprOp::Sub: return wrap(10, print_node(nd.a, 10) + " - " + print_node(nd.b, 11));
        case ExprOp::Mul: return wrap(20, print_node(nd.a, 20) + "*" + print_node(nd.b, 21));
        case ExprOp::Div: return wrap(20, print_node(nd.a, 20) + "/" + print_node(nd.b, 21));
        case ExprOp::Pow: return wrap(30, print_node(nd.a, 31) + "^" + print_node(nd.b, 30));
        case ExprOp::Min:
        case ExprOp::Max:
            return std::string(detail::fn_name(nd.op)) + "(" + print_node(nd.a, 0) + ", " +
                   print_node(nd.b, 0) + ")";
        default:
            return std::string(detail::fn_name(nd.op)) + "(" + print_node(nd.a, 0) + ")";
    }
}

inline int Expr::copy_subtree(int id, Expr& dst) const {
    const ExprNode& nd = nodes_[id];
    ExprNode out = nd;
    if (nd.a >= 0) out.a = copy_subtree(nd.a, dst);
    if (nd.b >= 0) out.b = copy_subtree(nd.b, dst);
    dst.nodes_.push_back(out);
    return static_cast<int>(dst.nodes_.size()) - 1;
}

inline int Expr::nonsmooth_node_count() const {
    int c = 0;
    for (const auto& nd : nodes_)
        if (nd.op == ExprOp::Abs || nd.op == ExprOp::Sign || nd.op == ExprOp::Min ||
            nd.op == ExprOp::Max)
            ++c;
    return c;
}

inline std::vector<Expr> Expr::switching_functions() const {
    std::vector<Expr> out;
    for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
        const ExprNode& nd = nodes_[id];
        if (nd.op == ExprOp::Abs || nd.op == ExprOp::Sign) {
            Expr e;
            e.n_ = n_;
            e.root_ = copy_subtree(nd.a, e);
            out.push_back(std::move(e));
        } else if (nd.op == ExprOp::Min || nd.op == ExprOp::Max) {
            Expr e;
            e.n_ = n_;
            int a = copy_subtree(nd.a, e);
            int b = copy_subtree(nd.b, e);
            e.nodes_.push_back(ExprNode{ExprOp::Sub, 0.0, 0, a, b});
            e.root_ = static_cast<int>(e.nodes_.size()) - 1;
            out.push_back(std::move(e));
        }
    }
    return out;
}

// Recursive-descent/Pratt parser. Positions in errors are 1-based.
class ExprParser {
public:
    ExprParser(const std::string& src, int n) : src_(src), n_(n) {}

    Expr run() {
        if (src_.find_first_not_of(" \t\r\n") == std::string::npos)
            throw ParseError("empty expression", 1);
        expr_.n_ = n_;
        expr_.root_ = parse_binary(0);
        skip_ws();
        if (pos_ < src_.size())
            throw ParseError(std::string("unexpected '") + src_[pos_] + "'", int(pos_) + 1);
        return std::move(expr_);
    }

private:
    const std::string& src_;
    std::size_t pos_ = 0;
    int n_;
    Expr expr_;

    void skip_ws() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' ||
                                      src_[pos_] == '\r' || src_[pos_] == '\n'))
            ++pos_;
    }

    int make(ExprOp op, int a = -1, int b = -1, double value = 0.0, int index = 0) {
        expr_.nodes_.push_back(ExprNode{op, value, index, a, b});
        return static_cast<int>(expr_.nodes_.size()) - 1;
    }

    // left binding powers; ^ handled right-associative, unary minus tighter
    static int lbp(char c) {
        switch (c) {
            case '+': case '-': return 10;
            case '*': case '/': return 20;
            case '^': return 30;
            default: return -1;
        }
    }

    int parse_binary(int min_bp) {
        int lhs = parse_unary();
        for (;;) {
            skip_ws();
            if (pos_ >= src_.size()) break;
            char c = src_[pos_];
            int bp = lbp(c);
            if (bp < min_bp || bp < 0) break;
            ++pos_;
            // right operand binding: left-assoc parses rhs at bp+1, the
            // right-assoc '^' re-enters at its own level
            int rhs = parse_binary(c == '^' ? 30 : bp + 1);
            switch (c) {
                case '+': lhs = make(ExprOp::Add, lhs, rhs); break;
                case '-': lhs = make(ExprOp::Sub, lhs, rhs); break;
                case '*': lhs = make(ExprOp::Mul, lhs, rhs); break;
                case '/': lhs = make(ExprOp::Div, lhs, rhs); break;
                case '^': lhs = make(ExprOp::Pow, lhs, rhs); break;
            }
        }
        return lhs;
    }

    int parse_unary() {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '-') {
            ++pos_;
            // unary minus binds tighter than ^, so grab a primary only
            return make(ExprOp::Neg, parse_primary());
        }
        return parse_primary();
    }

    int parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", int(pos_) + 1);
        char c = src_[pos_];

        if (c == '(') {
            ++pos_;
            int e = parse_binary(0);
            skip_ws();
            if (pos_ >= src_.size() || src_[pos_] != ')')
                throw ParseError("expected ')'", int(pos_) + 1);
            ++pos_;
            return e;
        }

        if (c == '-') { // nested unary, e.g. "--x1" or "2^--1"
            ++pos_;
            return make(ExprOp::Neg, parse_primary());
        }

        if ((c >= '0' && c <= '9') ||
            (c == '.' && pos_ + 1 < src_.size() && src_[pos_ + 1] >= '0' && src_[pos_ + 1] <= '9')) {
            const char* begin = src_.c_str() + pos_;
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            if (end == begin) throw ParseError("malformed number", int(pos_) + 1);
            pos_ += static_cast<std::size_t>(end - begin);
            return make(ExprOp::Literal, -1, -1, v);
        }

        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   ((src_[pos_] >= 'a' && src_[pos_] <= 'z') ||
                    (src_[pos_] >= 'A' && src_[pos_] <= 'Z') ||
                    (src_[pos_] >= '0' && src_[pos_] <= '9') || src_[pos_] == '_'))
                ++pos_;
            std::string name = src_.substr(start, pos_ - start);
            return parse_ident(name, int(start) + 1);
        }

        throw ParseError(std::string("unexpected '") + c + "'", int(pos_) + 1);
    }

    int parse_ident(const std::string& name, int at) {
        if (name == "t") return make(ExprOp::Time);
        if (name == "eps") return make(ExprOp::Eps);
        if (name == "pi") return make(ExprOp::Literal, -1, -1, 3.14159265358979323846);
        if (name == "e") return make(ExprOp::Literal, -1, -1, 2.71828182845904523536);

        static const struct { const char* name; ExprOp op; int arity; } fns[] = {
            {"sin", ExprOp::Sin, 1},  {"cos", ExprOp::Cos, 1},   {"tan", ExprOp::Tan, 1},
            {"exp", ExprOp::Exp, 1},  {"log", ExprOp::Log, 1},   {"sqrt", ExprOp::Sqrt, 1},
            {"abs", ExprOp::Abs, 1},  {"sign", ExprOp::Sign, 1}, {"min", ExprOp::Min, 2},
            {"max", ExprOp::Max, 2},
        };
        for (const auto& f : fns) {
            if (name == f.name) return parse_call(f.op, f.arity, name, at);
        }

        if ((name[0] == 'x' || name[0] == 'u') && name.size() > 1) {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                if (name[i] < '0' || name[i] > '9') { digits = false; break; }
            if (digits) {
                long k = std::strtol(name.c_str() + 1, nullptr, 10);
                if (k < 1 || k > n_)
                    throw ParseError("variable " + name + " out of range for dimension " +
                                         std::to_string(n_),
                                     at);
                return make(ExprOp::State, -1, -1, 0.0, static_cast<int>(k - 1));
            }
        }

        throw ParseError("unknown identifier '" + name + "'", at);
    }

    int parse_call(ExprOp op, int arity, const std::string& name, int at) {
        skip_ws();
        if (pos_ >= src_.size() || src_[pos_] != '(')
            throw ParseError("function " + name + " requires arguments", at);
        ++pos_;
        int a = parse_binary(0);
        int b = -1;
        skip_ws();
        if (arity == 2) {
            if (pos_ >= src_.size() || src_[pos_] != ',')
                throw ParseError(name + " takes 2 arguments", int(pos_) + 1);
            ++pos_;
            b = parse_binary(0);
            skip_ws();
        } else if (pos_ < src_.size() && src_[pos_] == ',') {
            throw ParseError(name + " takes 1 argument", int(pos_) + 1);
        }
        if (pos_ >= src_.size() || src_[pos_] != ')')
            throw ParseError("expected ')'", int(pos_) + 1);
        ++pos_;
        return make(op, a, b);
    }
};

inline Expr Expr::parse(const std::string& source, int n) {
    if (source.empty()) throw ParseError("empty expression", 1);
    return ExprParser(source, n).run();
}

} // namespace basincert
