#include "powergp/expression.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>

namespace powergp {

std::string_view token(Var v) {
    switch (v) {
    case Var::Fs: return "fs";
    case Var::Vin: return "vin";
    case Var::D: return "d";
    case Var::Rt: return "rt";
    }
    return "?";
}

std::string_view token(UnaryOp op) {
    switch (op) {
    case UnaryOp::Neg: return "neg";
    case UnaryOp::Log: return "log";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Atan: return "atan";
    case UnaryOp::Tanh: return "tanh";
    case UnaryOp::Sqrt: return "sqrt";
    }
    return "?";
}

std::string_view token(BinaryOp op) {
    switch (op) {
    case BinaryOp::Add: return "add";
    case BinaryOp::Sub: return "sub";
    case BinaryOp::Mul: return "mul";
    case BinaryOp::Div: return "div";
    case BinaryOp::Pow: return "pow";
    }
    return "?";
}

NodePtr make_var(Var v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Variable;
    n->var = v;
    return n;
}

NodePtr make_coeff(int k) {
    if (k < 0) {
        throw InvariantViolation("coefficient index must be >= 0");
    }
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Coefficient;
    n->coeff = k;
    return n;
}

NodePtr make_unary(UnaryOp op, NodePtr child) {
    if (!child) {
        throw InvariantViolation("unary node requires a child");
    }
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Unary;
    n->uop = op;
    n->a = std::move(child);
    return n;
}

NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs) {
    if (!lhs || !rhs) {
        throw InvariantViolation("binary node requires two children");
    }
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Binary;
    n->bop = op;
    n->a = std::move(lhs);
    n->b = std::move(rhs);
    return n;
}

namespace {

struct TreeStats {
    int max_coeff = -1;
    int depth = 0;
    int nodes = 0;
};

void collect_stats(const Node* n, int depth, TreeStats& s) {
    s.nodes += 1;
    s.depth = std::max(s.depth, depth);
    switch (n->kind) {
    case Node::Kind::Variable:
        break;
    case Node::Kind::Coefficient:
        s.max_coeff = std::max(s.max_coeff, n->coeff);
        break;
    case Node::Kind::Unary:
        collect_stats(n->a.get(), depth + 1, s);
        break;
    case Node::Kind::Binary:
        collect_stats(n->a.get(), depth + 1, s);
        collect_stats(n->b.get(), depth + 1, s);
        break;
    }
}

} // namespace

Expr::Expr(NodePtr root) : root_(std::move(root)) {
    if (!root_) {
        throw InvariantViolation("expression root must not be null");
    }
    TreeStats s;
    collect_stats(root_.get(), 1, s);
    coeff_count_ = s.max_coeff + 1;
    depth_ = s.depth;
    node_count_ = s.nodes;
}

namespace {

double apply_unary(UnaryOp op, double x) {
    switch (op) {
    case UnaryOp::Neg: return -x;
    case UnaryOp::Log: return std::log(x);
    case UnaryOp::Exp: return std::exp(x);
    case UnaryOp::Atan: return std::atan(x);
    case UnaryOp::Tanh: return std::tanh(x);
    case UnaryOp::Sqrt: return std::sqrt(x);
    }
    return 0.0;
}

double apply_binary(BinaryOp op, double x, double y) {
    switch (op) {
    case BinaryOp::Add: return x + y;
    case BinaryOp::Sub: return x - y;
    case BinaryOp::Mul: return x * y;
    case BinaryOp::Div: return x / y;
    case BinaryOp::Pow: return std::pow(x, y);
    }
    return 0.0;
}

std::string serialize_node(const Node* n) {
    switch (n->kind) {
    case Node::Kind::Variable:
        return std::string(token(n->var));
    case Node::Kind::Coefficient:
        return "p" + std::to_string(n->coeff);
    case Node::Kind::Unary:
        return "(" + std::string(token(n->uop)) + " " + serialize_node(n->a.get()) + ")";
    case Node::Kind::Binary:
        return "(" + std::string(token(n->bop)) + " " + serialize_node(n->a.get()) + " " +
               serialize_node(n->b.get()) + ")";
    }
    return "?";
}

double eval_scalar(const Node* n, const VarValues& vars, std::span<const double> coeffs) {
    double value = 0.0;
    switch (n->kind) {
    case Node::Kind::Variable:
        switch (n->var) {
        case Var::Fs: value = vars.fs; break;
        case Var::Vin: value = vars.vin; break;
        case Var::D: value = vars.d; break;
        case Var::Rt: value = vars.rt; break;
        }
        return value;
    case Node::Kind::Coefficient:
        if (static_cast<std::size_t>(n->coeff) >= coeffs.size()) {
            throw MissingCoefficient("coefficient p" + std::to_string(n->coeff) +
                                     " has no value (vector holds " +
                                     std::to_string(coeffs.size()) + ")");
        }
        return coeffs[static_cast<std::size_t>(n->coeff)];
    case Node::Kind::Unary:
        value = apply_unary(n->uop, eval_scalar(n->a.get(), vars, coeffs));
        break;
    case Node::Kind::Binary:
        value = apply_binary(n->bop, eval_scalar(n->a.get(), vars, coeffs),
                             eval_scalar(n->b.get(), vars, coeffs));
        break;
    }
    if (!std::isfinite(value)) {
        throw EvalDomainError("non-finite value in subtree " + serialize_node(n));
    }
    return value;
}

} // namespace

double evaluate(const Expr& e, const VarValues& vars, std::span<const double> coeffs) {
    if (e.empty()) {
        throw InvariantViolation("cannot evaluate an empty expression");
    }
    return eval_scalar(e.root().get(), vars, coeffs);
}

BatchEvaluator::BatchEvaluator(std::size_t n_points) : n_(n_points) {}

double* BatchEvaluator::buffer(std::size_t level) {
    if (level >= pool_.size()) {
        pool_.resize(level + 1);
    }
    if (pool_[level].size() != n_) {
        pool_[level].assign(n_, 0.0);
    }
    return pool_[level].data();
}

const double* BatchEvaluator::eval_node(const Node* node, const EvalColumns& cols,
                                        std::span<const double> coeffs, std::size_t level) {
    switch (node->kind) {
    case Node::Kind::Variable:
        switch (node->var) {
        case Var::Fs: return cols.fs.data();
        case Var::Vin: return cols.vin.data();
        case Var::D: return cols.d.data();
        case Var::Rt: return cols.rt.data();
        }
        return nullptr;
    case Node::Kind::Coefficient: {
        if (static_cast<std::size_t>(node->coeff) >= coeffs.size()) {
            throw MissingCoefficient("coefficient p" + std::to_string(node->coeff) +
                                     " has no value");
        }
        double* out = buffer(level);
        std::fill(out, out + n_, coeffs[static_cast<std::size_t>(node->coeff)]);
        return out;
    }
    case Node::Kind::Unary: {
        const double* src = eval_node(node->a.get(), cols, coeffs, level + 1);
        double* out = buffer(level);
        switch (node->uop) {
        case UnaryOp::Neg:
            for (std::size_t i = 0; i < n_; ++i) out[i] = -src[i];
            break;
        case UnaryOp::Log:
            for (std::size_t i = 0; i < n_; ++i) out[i] = std::log(src[i]);
            break;
        case UnaryOp::Exp:
            for (std::size_t i = 0; i < n_; ++i) out[i] = std::exp(src[i]);
            break;
        case UnaryOp::Atan:
            for (std::size_t i = 0; i < n_; ++i) out[i] = std::atan(src[i]);
            break;
        case UnaryOp::Tanh:
            for (std::size_t i = 0; i < n_; ++i) out[i] = std::tanh(src[i]);
            break;
        case UnaryOp::Sqrt:
            for (std::size_t i = 0; i < n_; ++i) out[i] = std::sqrt(src[i]);
            break;
        }
        return out;
    }
    case Node::Kind::Binary: {
        const double* lhs = eval_node(node->a.get(), cols, coeffs, level + 1);
        const double* rhs = eval_node(node->b.get(), cols, coeffs, level + 2);
        double* out = buffer(level);
        switch (node->bop) {
        case BinaryOp::Add:
            for (std::size_t i = 0; i < n_; ++i) out[i] = lhs[i] + rhs[i];
            break;
        case BinaryOp::Sub:
            for (std::size_t i = 0; i < n_; ++i) out[i] = lhs[i] - rhs[i];
            break;
        case BinaryOp::Mul:
            for (std::size_t i = 0; i < n_; ++i) out[i] = lhs[i] * rhs[i];
            break;
        case BinaryOp::Div:
            for (std::size_t i = 0; i < n_; ++i) out[i] = lhs[i] / rhs[i];
            break;
        case BinaryOp::Pow:
            for (std::size_t i = 0; i < n_; ++i) out[i] = std::pow(lhs[i], rhs[i]);
            break;
        }
        return out;
    }
    }
    return nullptr;
}

std::size_t BatchEvaluator::evaluate(const Expr& e, const EvalColumns& cols,
                                     std::span<const double> coeffs, std::span<double> out) {
    if (e.empty()) {
        throw InvariantViolation("cannot evaluate an empty expression");
    }
    if (cols.size() != n_ || out.size() != n_) {
        throw InvariantViolation("batch evaluator size mismatch");
    }
    const double* result = eval_node(e.root().get(), cols, coeffs, 0);
    std::size_t non_finite = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        out[i] = result[i];
        if (!std::isfinite(out[i])) ++non_finite;
    }
    return non_finite;
}

namespace {

double factor(UnaryOp op, const ComplexityTable& t) {
    switch (op) {
    case UnaryOp::Neg: return t.neg;
    case UnaryOp::Log: return t.log;
    case UnaryOp::Exp: return t.exp;
    case UnaryOp::Atan: return t.atan;
    case UnaryOp::Tanh: return t.tanh;
    case UnaryOp::Sqrt: return t.sqrt;
    }
    return 1.0;
}

double factor(BinaryOp op, const ComplexityTable& t) {
    switch (op) {
    case BinaryOp::Add: return t.add;
    case BinaryOp::Sub: return t.sub;
    case BinaryOp::Mul: return t.mul;
    case BinaryOp::Div: return t.div;
    case BinaryOp::Pow: return t.pow;
    }
    return 1.0;
}

struct ComplexityResult {
    double score = 0.0;
    bool variable_product = false; // subtree is only Mul nodes over Variables
};

ComplexityResult complexity_node(const Node* n, const ComplexityTable& t) {
    switch (n->kind) {
    case Node::Kind::Variable:
        return {t.variable, true};
    case Node::Kind::Coefficient:
        return {t.coefficient, false};
    case Node::Kind::Unary: {
        const auto child = complexity_node(n->a.get(), t);
        return {factor(n->uop, t) * child.score, false};
    }
    case Node::Kind::Binary: {
        const auto lhs = complexity_node(n->a.get(), t);
        const auto rhs = complexity_node(n->b.get(), t);
        const double summed = lhs.score + rhs.score;
        if (n->bop == BinaryOp::Mul && lhs.variable_product && rhs.variable_product) {
            return {summed * t.variable_product, true};
        }
        return {summed * factor(n->bop, t), false};
    }
    }
    return {};
}

} // namespace

double complexity(const Expr& e, const ComplexityTable& table) {
    if (e.empty()) {
        throw InvariantViolation("cannot score an empty expression");
    }
    return complexity_node(e.root().get(), table).score;
}

namespace {

// Canonical pass: children first, Neg(Neg(x)) collapsed, commutative operands
// ordered by their coefficient-blind serialization (so renumbering cannot
// influence the ordering).
std::pair<NodePtr, std::string> canon_node(const NodePtr& n) {
    switch (n->kind) {
    case Node::Kind::Variable:
        return {n, std::string(token(n->var))};
    case Node::Kind::Coefficient:
        return {n, "p"};
    case Node::Kind::Unary: {
        auto [child, child_key] = canon_node(n->a);
        if (n->uop == UnaryOp::Neg && child->kind == Node::Kind::Unary &&
            child->uop == UnaryOp::Neg) {
            // "(neg X)" -> X
            return {child->a, child_key.substr(5, child_key.size() - 6)};
        }
        NodePtr out = (child == n->a) ? n : make_unary(n->uop, child);
        return {out, "(" + std::string(token(n->uop)) + " " + child_key + ")"};
    }
    case Node::Kind::Binary: {
        auto [lhs, lhs_key] = canon_node(n->a);
        auto [rhs, rhs_key] = canon_node(n->b);
        const bool commutative = n->bop == BinaryOp::Add || n->bop == BinaryOp::Mul;
        if (commutative && rhs_key < lhs_key) {
            std::swap(lhs, rhs);
            std::swap(lhs_key, rhs_key);
        }
        NodePtr out = (lhs == n->a && rhs == n->b) ? n : make_binary(n->bop, lhs, rhs);
        return {out, "(" + std::string(token(n->bop)) + " " + lhs_key + " " + rhs_key + ")"};
    }
    }
    return {n, "?"};
}

NodePtr renumber_node(const NodePtr& n, std::vector<int>& old_to_new, int& next) {
    switch (n->kind) {
    case Node::Kind::Variable:
        return n;
    case Node::Kind::Coefficient: {
        const auto old_index = static_cast<std::size_t>(n->coeff);
        if (old_index >= old_to_new.size()) {
            old_to_new.resize(old_index + 1, -1);
        }
        if (old_to_new[old_index] < 0) {
            old_to_new[old_index] = next++;
        }
        const int renumbered = old_to_new[old_index];
        return renumbered == n->coeff ? n : make_coeff(renumbered);
    }
    case Node::Kind::Unary: {
        NodePtr child = renumber_node(n->a, old_to_new, next);
        return child == n->a ? n : make_unary(n->uop, child);
    }
    case Node::Kind::Binary: {
        NodePtr lhs = renumber_node(n->a, old_to_new, next);
        NodePtr rhs = renumber_node(n->b, old_to_new, next);
        return (lhs == n->a && rhs == n->b) ? n : make_binary(n->bop, lhs, rhs);
    }
    }
    return n;
}

} // namespace

Expr canonicalize(const Expr& e) {
    std::vector<int> unused;
    return canonicalize(e, unused);
}

Expr canonicalize(const Expr& e, std::vector<int>& old_to_new) {
    if (e.empty()) {
        throw InvariantViolation("cannot canonicalize an empty expression");
    }
    auto [sorted, key] = canon_node(e.root());
    (void)key;
    old_to_new.clear();
    int next = 0;
    NodePtr renumbered = renumber_node(sorted, old_to_new, next);
    return Expr(renumbered);
}

std::string serialize(const Expr& e) {
    if (e.empty()) {
        throw InvariantViolation("cannot serialize an empty expression");
    }
    return serialize_node(e.root().get());
}

std::string canonical_string(const Expr& e) {
    return serialize(canonicalize(e));
}

namespace {

struct Parser {
    std::string_view text;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("expression parse error at position " + std::to_string(pos) +
                         ": " + what);
    }

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' ||
                                     text[pos] == '\n' || text[pos] == '\r')) {
            ++pos;
        }
    }

    std::string_view read_token() {
        skip_ws();
        const std::size_t start = pos;
        while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t' &&
               text[pos] != '\n' && text[pos] != '\r' && text[pos] != '(' &&
               text[pos] != ')') {
            ++pos;
        }
        if (pos == start) fail("expected a token");
        return text.substr(start, pos - start);
    }

    NodePtr parse_leaf(std::string_view tok) {
        for (Var v : kAllVars) {
            if (tok == token(v)) return make_var(v);
        }
        if (tok.size() >= 2 && tok[0] == 'p') {
            int index = 0;
            for (std::size_t c = 1; c < tok.size(); ++c) {
                if (tok[c] < '0' || tok[c] > '9') {
                    fail("bad coefficient token '" + std::string(tok) + "'");
                }
                index = index * 10 + (tok[c] - '0');
                if (index > 1'000'000) fail("coefficient index too large");
            }
            return make_coeff(index);
        }
        fail("unknown leaf token '" + std::string(tok) + "'");
    }

    NodePtr parse_node() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of input");
        if (text[pos] != '(') {
            return parse_leaf(read_token());
        }
        ++pos; // consume '('
        const std::string_view op = read_token();

        static constexpr std::array<UnaryOp, 6> unary_ops = {
            UnaryOp::Neg, UnaryOp::Log, UnaryOp::Exp,
            UnaryOp::Atan, UnaryOp::Tanh, UnaryOp::Sqrt};
        for (UnaryOp u : unary_ops) {
            if (op == token(u)) {
                NodePtr child = parse_node();
                expect_close();
                return make_unary(u, child);
            }
        }
        static constexpr std::array<BinaryOp, 5> binary_ops = {
            BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Pow};
        for (BinaryOp b : binary_ops) {
            if (op == token(b)) {
                NodePtr lhs = parse_node();
                NodePtr rhs = parse_node();
                expect_close();
                return make_binary(b, lhs, rhs);
            }
        }
        fail("unknown operator '" + std::string(op) + "'");
    }

    void expect_close() {
        skip_ws();
        if (pos >= text.size() || text[pos] != ')') {
            fail("expected ')'");
        }
        ++pos;
    }
};

} // namespace

Expr parse_expr(std::string_view text) {
    Parser p{text};
    NodePtr root = p.parse_node();
    p.skip_ws();
    if (p.pos != p.text.size()) {
        p.fail("trailing characters after expression");
    }
    return Expr(root);
}

namespace {

bool exponent_subtree_has_variable(const Node* n) {
    switch (n->kind) {
    case Node::Kind::Variable:
        return true;
    case Node::Kind::Coefficient:
        return false;
    case Node::Kind::Unary:
        return exponent_subtree_has_variable(n->a.get());
    case Node::Kind::Binary:
        return exponent_subtree_has_variable(n->a.get()) ||
               exponent_subtree_has_variable(n->b.get());
    }
    return false;
}

bool pow_ok(const Node* n) {
    switch (n->kind) {
    case Node::Kind::Variable:
    case Node::Kind::Coefficient:
        return true;
    case Node::Kind::Unary:
        return pow_ok(n->a.get());
    case Node::Kind::Binary:
        if (n->bop == BinaryOp::Pow && exponent_subtree_has_variable(n->b.get())) {
            return false;
        }
        return pow_ok(n->a.get()) && pow_ok(n->b.get());
    }
    return true;
}

} // namespace

bool pow_exponents_constant(const Expr& e) {
    return e.empty() || pow_ok(e.root().get());
}

bool ExprLimits::admits(const Expr& e) const {
    if (e.empty()) return false;
    if (e.depth() > max_depth) return false;
    if (e.coefficient_count() > max_coefficients) return false;
    if (!allow_variable_exponent && !pow_exponents_constant(e)) return false;
    return true;
}

Expr reference_model() {
    // p0 * fs * (vin*vin * (d - p1*(d*d))) / rt  +  (p2 * fs) * vin
    NodePtr d_sq = make_binary(BinaryOp::Mul, make_var(Var::D), make_var(Var::D));
    NodePtr parabola = make_binary(BinaryOp::Sub, make_var(Var::D),
                                   make_binary(BinaryOp::Mul, make_coeff(1), d_sq));
    NodePtr vin_sq = make_binary(BinaryOp::Mul, make_var(Var::Vin), make_var(Var::Vin));
    NodePtr shape = make_binary(BinaryOp::Mul, vin_sq, parabola);
    NodePtr scaled = make_binary(BinaryOp::Mul,
                                 make_binary(BinaryOp::Mul, make_coeff(0), make_var(Var::Fs)),
                                 shape);
    NodePtr first = make_binary(BinaryOp::Div, scaled, make_var(Var::Rt));
    NodePtr second = make_binary(BinaryOp::Mul,
                                 make_binary(BinaryOp::Mul, make_coeff(2), make_var(Var::Fs)),
                                 make_var(Var::Vin));
    return Expr(make_binary(BinaryOp::Add, first, second));
}

} // namespace powergp
