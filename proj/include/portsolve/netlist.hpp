#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "portsolve/circuit.hpp"
#include "portsolve/mixed.hpp"
#include "portsolve/splitting.hpp"

namespace portsolve::netlist {

/// Parse/validation diagnostic with a 1-based position in the input text.
struct NetlistError : Error {
    enum class Kind { kSyntax, kUndefinedName, kDuplicateName, kArity };

    NetlistError(Kind k, int line_, int col_, const std::string& message)
        : Error("line " + std::to_string(line_) + ", col " + std::to_string(col_) + ": " +
                message),
          kind(k),
          line(line_),
          col(col_) {}

    Kind kind;
    int line;
    int col;
};

// --- document model (surface syntax preserved for round-tripping) ---

struct GainDecl {
    double g = 0.0;
    friend bool operator==(const GainDecl&, const GainDecl&) = default;
};
struct CubicDecl {
    double mu = 0.0;  // v -> mu * v^3 / 3
    friend bool operator==(const CubicDecl&, const CubicDecl&) = default;
};
struct TfDecl {
    std::vector<double> num;
    std::vector<double> den;
    friend bool operator==(const TfDecl&, const TfDecl&) = default;
};
struct NegDecl {
    std::string target;  // must name a previously declared element
    friend bool operator==(const NegDecl&, const NegDecl&) = default;
};
using ElementKind = std::variant<GainDecl, CubicDecl, TfDecl, NegDecl>;

struct ElementDecl {
    std::string name;
    ElementKind kind;
    friend bool operator==(const ElementDecl&, const ElementDecl&) = default;
};

struct TreeExpr;
using TreeExprPtr = std::shared_ptr<const TreeExpr>;

struct TreeExpr {
    enum class Op { kName, kSeries, kParallel };
    Op op = Op::kName;
    std::string name;                   // kName
    std::vector<TreeExprPtr> children;  // kSeries / kParallel, size >= 2
};

struct MixedTopology {
    std::string a1, a2, b;
    friend bool operator==(const MixedTopology&, const MixedTopology&) = default;
};
using Topology = std::variant<TreeExprPtr, MixedTopology>;

struct DriveZero {
    friend bool operator==(const DriveZero&, const DriveZero&) = default;
};
struct DriveConst {
    double value = 0.0;
    friend bool operator==(const DriveConst&, const DriveConst&) = default;
};
struct DriveSin {
    double amplitude = 0.0;
    double frequency = 0.0;  // Hz
    friend bool operator==(const DriveSin&, const DriveSin&) = default;
};
struct DriveCsv {
    std::string path;
    friend bool operator==(const DriveCsv&, const DriveCsv&) = default;
};
using DriveSpec = std::variant<DriveZero, DriveConst, DriveSin, DriveCsv>;

struct NetlistDocument {
    long n_samples = 0;
    double period_T = 0.0;
    std::vector<double> alphas;  // one per nesting level, innermost first
    double eps = 0.0;
    long max_iter = 0;
    std::vector<ElementDecl> elements;
    Topology topology;
    DriveSpec drive;
};

bool operator==(const TreeExpr& a, const TreeExpr& b);
bool operator==(const NetlistDocument& a, const NetlistDocument& b);

/// Parses the netlist DSL; throws NetlistError with a position on failure.
NetlistDocument parse(const std::string& text);

/// Canonical text form; parse(print(doc)) structurally equals doc.
std::string print(const NetlistDocument& doc);

// --- lowering to solvable problems ---

struct LoweredTree {
    CircuitTree tree;
    Signal drive;
    SolverConfig config;
};

struct LoweredMixed {
    MixedProblem problem;
    SolverConfig config;
};

using Lowered = std::variant<LoweredTree, LoweredMixed>;

/// Builds operators, tree/problem, drive signal and solver config from a
/// document. `base_dir` resolves relative csv drive paths. Semantic
/// failures (anti-monotone leaf, csv length mismatch) throw ValidationError
/// or the relevant signal error.
Lowered lower(const NetlistDocument& doc, const std::string& base_dir = ".");

/// The element table alone (for monotonicity audits).
std::vector<std::pair<std::string, OperatorSpec>> lower_elements(const NetlistDocument& doc);

}  // namespace portsolve::netlist
