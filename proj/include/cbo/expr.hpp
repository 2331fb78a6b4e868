#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "cbo/errors.hpp"

namespace cbo {

// Arithmetic AST for structural equations. Leaves are constants, node
// variables, named latents or the owning node's additive noise draw.
struct Expr {
    enum class Kind {
        Constant,
        NodeVar,
        LatentVar,
        NoiseRef,
        Negate,
        Add,
        Subtract,
        Multiply,
        Divide,
        Exp,
        Cos,
        Sin,
        Sigmoid,
        Power,
    };

    Kind kind = Kind::Constant;
    double value = 0.0;     // Constant
    std::string name;       // NodeVar / LatentVar
    std::shared_ptr<Expr> lhs;
    std::shared_ptr<Expr> rhs;
};

using ExprPtr = std::shared_ptr<Expr>;

struct EvalContext {
    const std::map<std::string, double>* node_values = nullptr;
    const std::map<std::string, double>* latent_values = nullptr;
    double noise = 0.0;
};

double eval_expr(const Expr& expr, const EvalContext& ctx);

// Node variables referenced by the tree (latents excluded).
std::set<std::string> node_references(const Expr& expr);
std::set<std::string> latent_references(const Expr& expr);

// Infix grammar with +,-,*,/ precedence, unary minus, parentheses and the
// functions exp, cos, sin, sigmoid, pow(a,b). `latents` decides whether an
// identifier parses as LatentVar or NodeVar.
ExprPtr parse_expression(const std::string& text, const std::set<std::string>& latents);

}  // namespace cbo
