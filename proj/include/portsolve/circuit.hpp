#pragma once

#include <algorithm>
#include <memory>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "portsolve/operators.hpp"
#include "portsolve/splitting.hpp"

namespace portsolve {

/// Expression tree of sums and inverses over element leaves, encoding the
/// series/parallel port composition M = M1 + (M2 + M3)^{-1} and friends.
///
/// Trees are canonicalized on construction: Inverse(Inverse(t)) collapses
/// to t and nested sums are flattened (both exact relation identities), so
/// after construction every sum's children are leaves or inverses and
/// every inverse wraps a leaf or a sum.
class CircuitTree {
   public:
    struct Leaf {
        OperatorSpec element;
    };
    struct Sum {
        std::vector<CircuitTree> children;
        /// Index of the child supplying the resolvent (backward) step;
        /// -1 selects the default (first cheap-resolvent leaf).
        int backward_child = -1;
    };
    struct Inverse {
        std::shared_ptr<const CircuitTree> child;
    };
    using Node = std::variant<Leaf, Sum, Inverse>;

    static CircuitTree leaf(OperatorSpec element) {
        if (!element.declared_monotone())
            throw ValidationError(
                "circuit leaves must be declared monotone; anti-monotone paths "
                "belong to mixed problems");
        return CircuitTree(Leaf{std::move(element)});
    }

    static CircuitTree sum(std::vector<CircuitTree> children, int backward_child = -1) {
        std::vector<CircuitTree> flat;
        int mapped = -1;
        for (std::size_t i = 0; i < children.size(); ++i) {
            const bool designated = static_cast<int>(i) == backward_child;
            if (auto* s = std::get_if<Sum>(&children[i].node_)) {
                if (designated)
                    throw ValidationError("backward designation must point at a leaf child");
                for (auto& grandchild : s->children) flat.push_back(std::move(grandchild));
            } else {
                if (designated) mapped = static_cast<int>(flat.size());
                flat.push_back(std::move(children[i]));
            }
        }
        if (flat.size() < 2) throw ValidationError("sum nodes need at least two children");
        if (backward_child >= 0) {
            if (backward_child >= static_cast<int>(children.size()) || mapped < 0)
                throw ValidationError("backward designation out of range");
            const auto* l = std::get_if<Leaf>(&flat[mapped].node_);
            if (!l || !l->element.resolvent_capable())
                throw ValidationError(
                    "designated backward child has no computable resolvent");
        }
        return CircuitTree(Sum{std::move(flat), mapped});
    }

    static CircuitTree inverse(CircuitTree child) {
        if (const auto* inv = std::get_if<Inverse>(&child.node_)) return *inv->child;
        // the inverse of a (nonzero) gain is itself a gain leaf
        if (const auto* l = std::get_if<Leaf>(&child.node_))
            if (const auto* g = std::get_if<GainOp>(&l->element.kind()); g && g->g > 0.0)
                return CircuitTree(Leaf{OperatorSpec::gain(1.0 / g->g)});
        return CircuitTree(
            Inverse{std::make_shared<const CircuitTree>(std::move(child))});
    }

    const Node& node() const { return node_; }
    bool is_leaf() const { return std::holds_alternative<Leaf>(node_); }
    bool is_sum() const { return std::holds_alternative<Sum>(node_); }
    bool is_inverse() const { return std::holds_alternative<Inverse>(node_); }

   private:
    explicit CircuitTree(Node n) : node_(std::move(n)) {}
    Node node_;
};

/// Effective scalar gain of an all-Gain tree: sums add, inverses
/// reciprocate. The analytic oracle for linear trees.
inline double effective_relation_linear(const CircuitTree& tree) {
    return std::visit(
        [](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, CircuitTree::Leaf>) {
                const auto* g = std::get_if<GainOp>(&n.element.kind());
                if (!g) throw ValidationError("effective gain is defined for all-Gain trees");
                return g->g;
            } else if constexpr (std::is_same_v<T, CircuitTree::Sum>) {
                double acc = 0.0;
                for (const auto& c : n.children) acc += effective_relation_linear(c);
                return acc;
            } else {
                const double inner_gain = effective_relation_linear(*n.child);
                if (std::fabs(inner_gain) < 1e-300)
                    throw ZeroDivision("inverse of a zero-gain subtree");
                return 1.0 / inner_gain;
            }
        },
        tree.node());
}

namespace detail {

inline bool resolvent_cheap(const OperatorSpec& op) {
    return std::visit(
        [](const auto& k) -> bool {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GainOp> ||
                          std::is_same_v<T, StaticNonlinearityOp>)
                return true;
            else if constexpr (std::is_same_v<T, OffsetOutputOp>)
                return resolvent_cheap(*k.inner);
            else
                return false;
        },
        op.kind());
}

/// Solve-time plan: auxiliary slots for inverse nodes (innermost first),
/// resolved backward designations, and the deepest site level.
struct CircuitPlan {
    std::unordered_map<const void*, int> aux_slot;
    std::unordered_map<const void*, int> backward;
    int n_aux = 0;
    int max_site_depth = 0;

    int slot(const CircuitTree::Inverse& inv) const { return aux_slot.at(&inv); }
    int backward_of(const CircuitTree::Sum& s) const { return backward.at(&s); }
};

inline int pick_backward(const CircuitTree::Sum& s) {
    if (s.backward_child >= 0) return s.backward_child;
    for (std::size_t i = 0; i < s.children.size(); ++i)
        if (const auto* l = std::get_if<CircuitTree::Leaf>(&s.children[i].node()))
            if (l->element.resolvent_capable() && resolvent_cheap(l->element))
                return static_cast<int>(i);
    for (std::size_t i = 0; i < s.children.size(); ++i)
        if (const auto* l = std::get_if<CircuitTree::Leaf>(&s.children[i].node()))
            if (l->element.resolvent_capable()) return static_cast<int>(i);
    return -1;
}

void plan_equation(const CircuitTree& rel, int site_depth, CircuitPlan& plan);

/// Forward-position walk: sums here are plain summations and need no
/// backward designation; every inverse node underneath is an equation site.
inline void plan_value(const CircuitTree& t, int inv_depth, CircuitPlan& plan) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, CircuitTree::Sum>) {
                for (const auto& c : n.children) plan_value(c, inv_depth, plan);
            } else if constexpr (std::is_same_v<T, CircuitTree::Inverse>) {
                plan.max_site_depth = std::max(plan.max_site_depth, inv_depth + 1);
                plan_equation(*n.child, inv_depth + 1, plan);
                plan.aux_slot[&n] = plan.n_aux++;  // children first: innermost-first slots
            }
        },
        t.node());
}

/// Equation-position walk: this relation receives a forward/backward step,
/// so a sum here must designate a resolvent-capable leaf.
inline void plan_equation(const CircuitTree& rel, int site_depth, CircuitPlan& plan) {
    if (const auto* l = std::get_if<CircuitTree::Leaf>(&rel.node())) {
        if (!l->element.resolvent_capable())
            throw NoBackwardChild("equation element has no computable resolvent");
        return;
    }
    if (const auto* s = std::get_if<CircuitTree::Sum>(&rel.node())) {
        const int b = pick_backward(*s);
        if (b < 0)
            throw NoBackwardChild("sum node has no child with a computable resolvent");
        plan.backward[s] = b;
        for (std::size_t i = 0; i < s->children.size(); ++i)
            if (static_cast<int>(i) != b) plan_value(s->children[i], site_depth, plan);
        return;
    }
    // canonicalization leaves no inverse directly under an inverse
    throw ValidationError("inverse node wraps an inverse node");
}

inline CircuitPlan make_plan(const CircuitTree& tree) {
    CircuitPlan plan;
    if (const auto* inv = std::get_if<CircuitTree::Inverse>(&tree.node())) {
        // The root inverse has no equation of its own: the solution is the
        // forward value of its child at the drive.
        plan.max_site_depth = 1;
        plan_value(*inv->child, 1, plan);
    } else {
        plan_equation(tree, 0, plan);
    }
    return plan;
}

struct SweepContext {
    const SolverConfig* cfg;
    const CircuitPlan* plan;
    std::vector<Signal> aux;
    long resolvent_evals = 0;

    double alpha_at(int site_depth) const {
        return cfg->alpha_for_level(
            static_cast<std::size_t>(plan->max_site_depth - site_depth));
    }
};

Signal nested_site_step(const CircuitTree& rel, const Signal& v, const Signal& target,
                        SweepContext& ctx, int site_depth);

/// Forward contribution of `node` at `input`, advancing the auxiliary
/// variable of every inverse node underneath by one interleaved step
/// (innermost first).
inline Signal nested_contrib(const CircuitTree& node, const Signal& input, SweepContext& ctx,
                             int depth) {
    return std::visit(
        [&](const auto& n) -> Signal {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, CircuitTree::Leaf>) {
                return apply(n.element, input);
            } else if constexpr (std::is_same_v<T, CircuitTree::Sum>) {
                Signal acc = Signal::zero(input.size(), input.period_T);
                for (const auto& c : n.children) acc = acc + nested_contrib(c, input, ctx, depth);
                return acc;
            } else {
                Signal& v = ctx.aux[static_cast<std::size_t>(ctx.plan->slot(n))];
                v = nested_site_step(*n.child, v, input, ctx, depth + 1);
                return v;
            }
        },
        node.node());
}

/// One forward/backward step for the site equation 0 in rel(v) - target.
inline Signal nested_site_step(const CircuitTree& rel, const Signal& v, const Signal& target,
                               SweepContext& ctx, int site_depth) {
    const double a = ctx.alpha_at(site_depth);
    if (const auto* l = std::get_if<CircuitTree::Leaf>(&rel.node())) {
        ++ctx.resolvent_evals;
        return resolvent(l->element, a, v + a * target);
    }
    const auto& s = std::get<CircuitTree::Sum>(rel.node());
    const int b = ctx.plan->backward_of(s);
    Signal forward = Signal::zero(v.size(), v.period_T);
    for (std::size_t i = 0; i < s.children.size(); ++i) {
        if (static_cast<int>(i) == b) continue;
        forward = forward + nested_contrib(s.children[i], v, ctx, site_depth);
    }
    const auto& backward = std::get<CircuitTree::Leaf>(s.children[size_t(b)].node()).element;
    ++ctx.resolvent_evals;
    return resolvent(backward, a, v - a * forward + a * target);
}

/// Certification: value of `node` at `input` using converged auxiliaries,
/// accumulating the squared residual of every inverse node's claim.
inline Signal certify_value(const CircuitTree& node, const Signal& input,
                            const CircuitPlan& plan, const std::vector<Signal>& aux,
                            double& r2) {
    return std::visit(
        [&](const auto& n) -> Signal {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, CircuitTree::Leaf>) {
                return guarded_apply(n.element, input);
            } else if constexpr (std::is_same_v<T, CircuitTree::Sum>) {
                Signal acc = Signal::zero(input.size(), input.period_T);
                for (const auto& c : n.children)
                    acc = acc + certify_value(c, input, plan, aux, r2);
                return acc;
            } else {
                const Signal& v = aux[static_cast<std::size_t>(plan.slot(n))];
                const Signal child_value = certify_value(*n.child, v, plan, aux, r2);
                const double r = norm(input - child_value);
                r2 += r * r;
                return v;
            }
        },
        node.node());
}

inline double certify(const CircuitTree& tree, const Signal& drive, const Signal& solution,
                      const CircuitPlan& plan, const std::vector<Signal>& aux) {
    try {
        double r2 = 0.0;
        if (const auto* inv = std::get_if<CircuitTree::Inverse>(&tree.node())) {
            const Signal value = certify_value(*inv->child, drive, plan, aux, r2);
            const double r = norm(solution - value);
            r2 += r * r;
        } else {
            const Signal value = certify_value(tree, solution, plan, aux, r2);
            const double r = norm(drive - value);
            r2 += r * r;
        }
        return std::sqrt(r2);
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace detail

/// Solves drive in tree(x) by the interleaved nested splitting: one
/// depth-first forward/backward step per inverse node (innermost first) and
/// one for the root per outer iteration. On the three-element tree
/// Sum[M1, Inverse(Sum[M2, M3])] this is exactly the two-line sweep
///   v <- res_{a1 M2}(v - a1 M3 v + a1 i),  i <- res_{a2 M1}(i - a2 v + a2 v*).
inline SolveResult solve_nested(const CircuitTree& tree, const Signal& drive,
                                const SolverConfig& cfg) {
    cfg.validate();
    const detail::CircuitPlan plan = detail::make_plan(tree);
    detail::SweepContext ctx{&cfg, &plan, {}, 0};
    const Signal init = cfg.make_initial(drive.size(), drive.period_T);
    ctx.aux.assign(static_cast<std::size_t>(plan.n_aux), init);

    const auto* root_inverse = std::get_if<CircuitTree::Inverse>(&tree.node());
    Signal x = init;
    SolveResult result;
    for (long j = 0; j < cfg.max_iter; ++j) {
        const std::vector<Signal> aux_before = ctx.aux;
        Signal next = root_inverse
                          ? detail::nested_contrib(*root_inverse->child, drive, ctx, 1)
                          : detail::nested_site_step(tree, x, drive, ctx, 0);
        detail::require_finite_iterate(next);
        for (const Signal& a : ctx.aux) detail::require_finite_iterate(a);

        double r2 = 0.0;
        for (std::size_t i = 0; i < ctx.aux.size(); ++i) {
            const double r = norm(ctx.aux[i] - aux_before[i]);
            r2 += r * r;
        }
        const double rx = norm(next - x);
        const double step = std::sqrt(r2 + rx * rx);
        result.residuals.push_back(step);
        x = std::move(next);
        ++result.iterations;
        if (step <= cfg.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.solution = std::move(x);
    result.auxiliaries = ctx.aux;
    result.resolvent_evals = ctx.resolvent_evals;
    result.fixed_point_residual =
        detail::certify(tree, drive, result.solution, plan, ctx.aux);
    return result;
}

namespace detail {

Signal naive_site_step(const CircuitTree& rel, const Signal& v, const Signal& target,
                       SweepContext& ctx, int site_depth, double inner_tol);

/// Forward value of `node` at `input`, running an entire fixed-point
/// iteration (to `tol`) for every inverse node encountered.
inline Signal naive_value(const CircuitTree& node, const Signal& input, SweepContext& ctx,
                          int depth, double tol) {
    return std::visit(
        [&](const auto& n) -> Signal {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, CircuitTree::Leaf>) {
                return apply(n.element, input);
            } else if constexpr (std::is_same_v<T, CircuitTree::Sum>) {
                Signal acc = Signal::zero(input.size(), input.period_T);
                for (const auto& c : n.children)
                    acc = acc + naive_value(c, input, ctx, depth, tol);
                return acc;
            } else {
                Signal& v = ctx.aux[static_cast<std::size_t>(ctx.plan->slot(n))];
                bool settled = false;
                for (long it = 0; it < ctx.cfg->max_iter; ++it) {
                    Signal next =
                        naive_site_step(*n.child, v, input, ctx, depth + 1, tol / 10.0);
                    require_finite_iterate(next);
                    const double step = norm(next - v);
                    v = std::move(next);
                    if (step <= tol) {
                        settled = true;
                        break;
                    }
                }
                if (!settled)
                    throw InnerSolveFailed(
                        "inner fixed-point iteration for an inverse node did not converge");
                return v;
            }
        },
        node.node());
}

inline Signal naive_site_step(const CircuitTree& rel, const Signal& v, const Signal& target,
                              SweepContext& ctx, int site_depth, double inner_tol) {
    const double a = ctx.alpha_at(site_depth);
    if (const auto* l = std::get_if<CircuitTree::Leaf>(&rel.node())) {
        ++ctx.resolvent_evals;
        return resolvent(l->element, a, v + a * target);
    }
    const auto& s = std::get<CircuitTree::Sum>(rel.node());
    const int b = ctx.plan->backward_of(s);
    Signal forward = Signal::zero(v.size(), v.period_T);
    for (std::size_t i = 0; i < s.children.size(); ++i) {
        if (static_cast<int>(i) == b) continue;
        forward = forward + naive_value(s.children[i], v, ctx, site_depth, inner_tol);
    }
    const auto& backward = std::get<CircuitTree::Leaf>(s.children[size_t(b)].node()).element;
    ++ctx.resolvent_evals;
    return resolvent(backward, a, v - a * forward + a * target);
}

}  // namespace detail

/// The naive double-loop method: an outer forward/backward step whose
/// forward evaluation of every inverse node runs an entire inner
/// fixed-point solve (tolerance epsilon/10 per nesting level). Same
/// solution contract as solve_nested; kept as the correctness and
/// complexity baseline. Reports total resolvent evaluations.
inline SolveResult solve_naive(const CircuitTree& tree, const Signal& drive,
                               const SolverConfig& cfg) {
    cfg.validate();
    const detail::CircuitPlan plan = detail::make_plan(tree);
    detail::SweepContext ctx{&cfg, &plan, {}, 0};
    const Signal init = cfg.make_initial(drive.size(), drive.period_T);
    ctx.aux.assign(static_cast<std::size_t>(plan.n_aux), init);

    const auto* root_inverse = std::get_if<CircuitTree::Inverse>(&tree.node());
    Signal x = init;
    SolveResult result;
    for (long j = 0; j < cfg.max_iter; ++j) {
        Signal next = root_inverse
                          ? detail::naive_value(*root_inverse->child, drive, ctx, 1,
                                                cfg.epsilon / 10.0)
                          : detail::naive_site_step(tree, x, drive, ctx, 0,
                                                    cfg.epsilon / 10.0);
        detail::require_finite_iterate(next);
        const double step = norm(next - x);
        result.residuals.push_back(step);
        x = std::move(next);
        ++result.iterations;
        if (step <= cfg.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.solution = std::move(x);
    result.auxiliaries = ctx.aux;
    result.resolvent_evals = ctx.resolvent_evals;
    result.fixed_point_residual =
        detail::certify(tree, drive, result.solution, plan, ctx.aux);
    return result;
}

}  // namespace portsolve
