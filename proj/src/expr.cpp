#include "cbo/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace cbo {

double eval_expr(const Expr& e, const EvalContext& ctx) {
    switch (e.kind) {
        case Expr::Kind::Constant: return e.value;
        case Expr::Kind::NodeVar: {
            auto it = ctx.node_values ? ctx.node_values->find(e.name) : std::map<std::string, double>::const_iterator{};
            if (!ctx.node_values || it == ctx.node_values->end()) {
                raise(ErrorKind::UnknownNode, "no value bound for node '" + e.name + "'");
            }
            return it->second;
        }
        case Expr::Kind::LatentVar: {
            auto it = ctx.latent_values ? ctx.latent_values->find(e.name) : std::map<std::string, double>::const_iterator{};
            if (!ctx.latent_values || it == ctx.latent_values->end()) {
                raise(ErrorKind::UnknownNode, "no value bound for latent '" + e.name + "'");
            }
            return it->second;
        }
        case Expr::Kind::NoiseRef: return ctx.noise;
        case Expr::Kind::Negate: return -eval_expr(*e.lhs, ctx);
        case Expr::Kind::Add: return eval_expr(*e.lhs, ctx) + eval_expr(*e.rhs, ctx);
        case Expr::Kind::Subtract: return eval_expr(*e.lhs, ctx) - eval_expr(*e.rhs, ctx);
        case Expr::Kind::Multiply: return eval_expr(*e.lhs, ctx) * eval_expr(*e.rhs, ctx);
        case Expr::Kind::Divide: return eval_expr(*e.lhs, ctx) / eval_expr(*e.rhs, ctx);
        case Expr::Kind::Exp: return std::exp(eval_expr(*e.lhs, ctx));
        case Expr::Kind::Cos: return std::cos(eval_expr(*e.lhs, ctx));
        case Expr::Kind::Sin: return std::sin(eval_expr(*e.lhs, ctx));
        case Expr::Kind::Sigmoid: return 1.0 / (1.0 + std::exp(-eval_expr(*e.lhs, ctx)));
        case Expr::Kind::Power: return std::pow(eval_expr(*e.lhs, ctx), eval_expr(*e.rhs, ctx));
    }
    raise(ErrorKind::SyntaxError, "corrupt expression node");
}

namespace {

void collect(const Expr& e, std::set<std::string>& nodes, std::set<std::string>& latents) {
    switch (e.kind) {
        case Expr::Kind::NodeVar: nodes.insert(e.name); break;
        case Expr::Kind::LatentVar: latents.insert(e.name); break;
        default: break;
    }
    if (e.lhs) collect(*e.lhs, nodes, latents);
    if (e.rhs) collect(*e.rhs, nodes, latents);
}

}  // namespace

std::set<std::string> node_references(const Expr& expr) {
    std::set<std::string> nodes, latents;
    collect(expr, nodes, latents);
    return nodes;
}

std::set<std::string> latent_references(const Expr& expr) {
    std::set<std::string> nodes, latents;
    collect(expr, nodes, latents);
    return latents;
}

namespace {

ExprPtr make(Expr::Kind kind, ExprPtr lhs = nullptr, ExprPtr rhs = nullptr) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
}

// Recursive-descent parser:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := number | ident | func '(' args ')' | '(' expr ')' | '-' factor
class Parser {
  public:
    Parser(const std::string& text, const std::set<std::string>& latents)
        : text_(text), latents_(latents) {}

    ExprPtr parse() {
        ExprPtr e = expression();
        skip_ws();
        if (pos_ != text_.size()) {
            raise(ErrorKind::SyntaxError, "trailing input at '" + text_.substr(pos_) + "'");
        }
        return e;
    }

  private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    bool consume(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    ExprPtr expression() {
        ExprPtr lhs = term();
        while (true) {
            if (consume('+')) {
                lhs = make(Expr::Kind::Add, lhs, term());
            } else if (consume('-')) {
                lhs = make(Expr::Kind::Subtract, lhs, term());
            } else {
                return lhs;
            }
        }
    }

    ExprPtr term() {
        ExprPtr lhs = factor();
        while (true) {
            if (consume('*')) {
                lhs = make(Expr::Kind::Multiply, lhs, factor());
            } else if (consume('/')) {
                lhs = make(Expr::Kind::Divide, lhs, factor());
            } else {
                return lhs;
            }
        }
    }

    ExprPtr factor() {
        char c = peek();
        if (c == '-') {
            ++pos_;
            return make(Expr::Kind::Negate, factor());
        }
        if (c == '(') {
            ++pos_;
            ExprPtr e = expression();
            if (!consume(')')) raise(ErrorKind::SyntaxError, "expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return number();
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            return identifier();
        }
        raise(ErrorKind::SyntaxError, "unexpected character '" + std::string(1, c) + "'");
    }

    ExprPtr number() {
        skip_ws();
        const char* start = text_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(start, &end);
        if (end == start) raise(ErrorKind::SyntaxError, "bad number");
        pos_ += static_cast<std::size_t>(end - start);
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::Constant;
        e->value = v;
        return e;
    }

    ExprPtr identifier() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        std::string name = text_.substr(start, pos_ - start);
        if (peek() == '(') {
            ++pos_;
            Expr::Kind kind;
            bool binary = false;
            if (name == "exp") kind = Expr::Kind::Exp;
            else if (name == "cos") kind = Expr::Kind::Cos;
            else if (name == "sin") kind = Expr::Kind::Sin;
            else if (name == "sigmoid") kind = Expr::Kind::Sigmoid;
            else if (name == "pow") { kind = Expr::Kind::Power; binary = true; }
            else raise(ErrorKind::UnknownFunction, "unknown function '" + name + "'");
            ExprPtr first = expression();
            ExprPtr second;
            if (binary) {
                if (!consume(',')) raise(ErrorKind::SyntaxError, "pow expects two arguments");
                second = expression();
            }
            if (!consume(')')) raise(ErrorKind::SyntaxError, "expected ')' after arguments");
            return make(kind, first, second);
        }
        auto e = std::make_shared<Expr>();
        e->kind = latents_.count(name) ? Expr::Kind::LatentVar : Expr::Kind::NodeVar;
        e->name = name;
        return e;
    }

    const std::string& text_;
    const std::set<std::string>& latents_;
    std::size_t pos_ = 0;
};

}  // namespace

ExprPtr parse_expression(const std::string& text, const std::set<std::string>& latents) {
    return Parser(text, latents).parse();
}

}  // namespace cbo
