#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "powergp/errors.hpp"

namespace powergp {

enum class Var : std::uint8_t { Fs, Vin, D, Rt };
enum class UnaryOp : std::uint8_t { Neg, Log, Exp, Atan, Tanh, Sqrt };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Pow };

constexpr std::array<Var, 4> kAllVars = {Var::Fs, Var::Vin, Var::D, Var::Rt};

std::string_view token(Var v);
std::string_view token(UnaryOp op);
std::string_view token(BinaryOp op);

struct Node;
using NodePtr = std::shared_ptr<const Node>;

// Immutable expression node. Subtrees are shared freely between expressions
// (crossover offspring alias their parents' structure).
struct Node {
    enum class Kind : std::uint8_t { Variable, Coefficient, Unary, Binary };
    Kind kind = Kind::Variable;
    Var var = Var::Fs;
    int coeff = 0; // placeholder index k of p_k
    UnaryOp uop = UnaryOp::Neg;
    BinaryOp bop = BinaryOp::Add;
    NodePtr a; // unary child / binary lhs
    NodePtr b; // binary rhs
};

NodePtr make_var(Var v);
NodePtr make_coeff(int k);
NodePtr make_unary(UnaryOp op, NodePtr child);
NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs);

class Expr {
public:
    Expr() = default;
    explicit Expr(NodePtr root);

    [[nodiscard]] const NodePtr& root() const { return root_; }
    [[nodiscard]] bool empty() const { return root_ == nullptr; }
    // 1 + highest coefficient index (0 when the tree holds no coefficients).
    [[nodiscard]] int coefficient_count() const { return coeff_count_; }
    [[nodiscard]] int depth() const { return depth_; } // single node = 1
    [[nodiscard]] int node_count() const { return node_count_; }

private:
    NodePtr root_;
    int coeff_count_ = 0;
    int depth_ = 0;
    int node_count_ = 0;
};

struct VarValues {
    double fs = 0.0;
    double vin = 0.0;
    double d = 0.0;
    double rt = 0.0;
};

// Recursive scalar evaluation; any non-finite intermediate raises
// EvalDomainError naming the offending subtree.
double evaluate(const Expr& e, const VarValues& vars, std::span<const double> coeffs);

// Column view over a set of evaluation points. All spans share one length.
struct EvalColumns {
    std::span<const double> fs, vin, d, rt;
    [[nodiscard]] std::size_t size() const { return fs.size(); }
};

// Bulk evaluation over a column set with reusable scratch buffers; this is the
// hot path of NLLS fitting and GP scoring. Returns the number of non-finite
// outputs instead of throwing (callers decide whether that is fatal).
class BatchEvaluator {
public:
    explicit BatchEvaluator(std::size_t n_points);
    std::size_t evaluate(const Expr& e, const EvalColumns& cols,
                         std::span<const double> coeffs, std::span<double> out);

private:
    const double* eval_node(const Node* node, const EvalColumns& cols,
                            std::span<const double> coeffs, std::size_t level);
    double* buffer(std::size_t level);

    std::size_t n_;
    std::vector<std::vector<double>> pool_;
};

// Per-operation complexity factors. The variable_product discount applies to
// a Mul node whose whole subtree consists of Mul nodes and Variable leaves.
struct ComplexityTable {
    double add = 1.0;
    double sub = 1.0;
    double mul = 1.0;
    double div = 1.5;
    double pow = 1.5;
    double log = 1.5;
    double exp = 1.5;
    double atan = 1.5;
    double tanh = 1.5;
    double sqrt = 1.5;
    double neg = 1.0;
    double variable = 1.0;
    double coefficient = 1.0;
    double variable_product = 0.6;
};

// Nested functions multiply their factors; summed or multiplied subtrees add
// theirs and the result is scaled by the combining operator's factor.
double complexity(const Expr& e, const ComplexityTable& table = {});

// Sorts commutative operands under a fixed ordering, collapses double
// negation, and renumbers coefficients left-to-right into a contiguous
// 0..K-1 range. The serialized canonical form is the model identity key.
// The second overload reports the renumbering (old index -> new index,
// -1 for indices absent from the tree) so coefficient vectors can follow.
Expr canonicalize(const Expr& e);
Expr canonicalize(const Expr& e, std::vector<int>& old_to_new);

std::string serialize(const Expr& e);
std::string canonical_string(const Expr& e);

// Lowercase prefix notation: "(add (mul p0 fs) p1)". Inverse of serialize.
Expr parse_expr(std::string_view text);

// Structural constraints on well-formed trees (see ExprLimits::check).
struct ExprLimits {
    int max_depth = 8;
    int max_coefficients = 6;
    bool allow_variable_exponent = false;

    [[nodiscard]] bool admits(const Expr& e) const;
};

// True when no Pow exponent subtree contains a Variable.
bool pow_exponents_constant(const Expr& e);

// Built-in reference behavioral model, written with coefficients only:
// p0 * fs * vin^2 * (d - p1 * d^2) / rt + p2 * fs * vin.
Expr reference_model();

} // namespace powergp
