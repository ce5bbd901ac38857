#include "emompc/mocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <spdlog/spdlog.h>

#include "emompc/errors.hpp"

namespace emompc {

Trajectory integrate_rk4(const Dynamics& f, std::span<const double> x0, std::span<const double> u,
                         const Horizon& horizon, std::size_t control_dim) {
    const std::size_t n = x0.size();
    const std::size_t p = horizon.steps;
    if (u.size() != p * control_dim) throw DimensionError("integrate_rk4: control length != steps * n_u");
    const double h = horizon.h();

    Trajectory traj;
    traj.state_dim = n;
    traj.states.resize((p + 1) * n);
    std::copy(x0.begin(), x0.end(), traj.states.begin());
    for (double v : x0) {
        if (!std::isfinite(v)) throw DivergenceError("integrate_rk4: non-finite initial state", 0);
    }

    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (std::size_t k = 0; k < p; ++k) {
        const std::span<const double> uk = u.subspan(k * control_dim, control_dim);
        const double* x = traj.states.data() + k * n;
        double* next = traj.states.data() + (k + 1) * n;
        f({x, n}, uk, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
        f(tmp, uk, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        f(tmp, uk, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
        f(tmp, uk, k4);
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if (!std::isfinite(next[i])) {
                throw DivergenceError("integrate_rk4: non-finite state at step " + std::to_string(k + 1), k + 1);
            }
        }
    }
    return traj;
}

ObjectiveVector evaluate_objectives(const MocpDefinition& def, std::span<const double> u, const Trajectory& traj) {
    const std::size_t k = def.objective_count();
    const std::size_t p = def.horizon.steps;
    const std::size_t nu = def.control_dim;
    const double h = def.horizon.h();
    ObjectiveVector J(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        if (i < def.running_costs.size() && def.running_costs[i]) {
            const auto& C = def.running_costs[i];
            double acc = 0.0;
            for (std::size_t s = 0; s < p; ++s) {
                const auto us = u.subspan(s * nu, nu);
                acc += 0.5 * h * (C(traj.at(s), us) + C(traj.at(s + 1), us));
            }
            J[i] += acc;
        }
        if (i < def.mayer_costs.size() && def.mayer_costs[i]) J[i] += def.mayer_costs[i](traj.at(p));
    }
    return J;
}

ObjectiveVector evaluate_objectives(const MocpDefinition& def, std::span<const double> u) {
    return evaluate_objectives(def, u, integrate_rk4(def.dynamics, def.x0, u, def.horizon, def.control_dim));
}

std::vector<double> knot_constraints(const MocpDefinition& def, std::span<const double> u, const Trajectory& traj) {
    const std::size_t m = def.path_constraint_count;
    const std::size_t p = def.horizon.steps;
    const std::size_t nu = def.control_dim;
    std::vector<double> g(m * p, 0.0);
    if (m == 0 || !def.path_constraints) return {};
    for (std::size_t s = 1; s <= p; ++s) {
        def.path_constraints(traj.at(s), u.subspan((s - 1) * nu, nu), std::span<double>(g.data() + (s - 1) * m, m));
    }
    return g;
}

const Trajectory& MocpEvaluator::rollout(std::span<const double> u) {
    if (!valid_ || !std::equal(u.begin(), u.end(), last_u_.begin(), last_u_.end())) {
        last_ = integrate_rk4(def_.dynamics, def_.x0, u, def_.horizon, def_.control_dim);
        last_u_.assign(u.begin(), u.end());
        valid_ = true;
    }
    return last_;
}

ObjectiveVector MocpEvaluator::objectives(std::span<const double> u) {
    return evaluate_objectives(def_, u, rollout(u));
}

std::vector<double> MocpEvaluator::constraints(std::span<const double> u) {
    return knot_constraints(def_, u, rollout(u));
}

namespace {

SubproblemResult solve_with(const MocpDefinition& def, std::function<double(const ObjectiveVector&)> scalarize,
                            std::span<const double> start, const SolverOptions& opts) {
    const std::size_t n = def.decision_dim();
    if (start.size() != n) throw DimensionError("solve: start has wrong length");
    auto eval = std::make_shared<MocpEvaluator>(def);

    NlpProblem nlp;
    nlp.dimension = n;
    nlp.lower.assign(n, def.u_min);
    nlp.upper.assign(n, def.u_max);
    nlp.objective = [eval, scalarize](std::span<const double> u) { return scalarize(eval->objectives(u)); };
    if (def.path_constraint_count > 0) {
        nlp.inequality = [eval](std::span<const double> u) { return eval->constraints(u); };
    }
    const SolverResult r = minimize(nlp, start, opts);

    SubproblemResult out;
    out.entry.control = r.minimizer;
    out.entry.objectives = eval->objectives(r.minimizer);
    out.converged = r.converged;
    out.max_violation = r.max_violation;
    out.iterations = r.iterations;
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace

SubproblemResult solve_scalar(const MocpDefinition& def, int which, std::span<const double> start,
                              const SolverOptions& opts) {
    if (which < 1 || static_cast<std::size_t>(which) > def.objective_count()) {
        throw ParameterError("solve_scalar: objective index out of range");
    }
    const auto idx = static_cast<std::size_t>(which - 1);
    return solve_with(def, [idx](const ObjectiveVector& J) { return J[idx]; }, start, opts);
}

SubproblemResult solve_reference_point(const MocpDefinition& def, std::span<const double> target,
                                       std::span<const double> start, const SolverOptions& opts) {
    if (target.size() != def.objective_count()) throw DimensionError("solve_reference_point: target dimension");
    std::vector<double> T(target.begin(), target.end());
    return solve_with(def, [T](const ObjectiveVector& J) { return squared_distance(J, T); }, start, opts);
}

std::vector<ObjectiveVector> distribute_targets(std::span<const double> a_img, std::span<const double> b_img,
                                                std::array<double, 2> offsets, std::size_t n_targets) {
    if (a_img.size() != 2 || b_img.size() != 2) throw DimensionError("distribute_targets: two objectives required");
    if (!(offsets[0] > 0.0 && offsets[1] > 0.0)) throw ParameterError("distribute_targets: d_e must be positive");
    if (n_targets < 1) throw ParameterError("distribute_targets: need at least one target");
    if (dominates(a_img, b_img) || dominates(b_img, a_img)) {
        throw DegenerateFrontError("distribute_targets: one scalar solution dominates the other");
    }
    const double ax = a_img[0] - offsets[0];
    const double ay = a_img[1];
    const double bx = b_img[0];
    const double by = b_img[1] - offsets[1];
    const double cx = bx;
    const double cy = ay;
    const double semi_a = cx - ax;
    const double semi_b = cy - by;

    std::vector<ObjectiveVector> targets;
    targets.reserve(n_targets);
    for (std::size_t j = 1; j <= n_targets; ++j) {
        const double theta =
            std::numbers::pi + 0.5 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_targets + 1);
        targets.push_back({cx + semi_a * std::cos(theta), cy + semi_b * std::sin(theta)});
    }
    return targets;
}

std::vector<double> warm_start_predictor(std::span<const double> u_prev, std::span<const double> u_curr,
                                         double lower, double upper) {
    if (u_prev.size() != u_curr.size()) throw DimensionError("warm_start_predictor: shape mismatch");
    std::vector<double> out(u_curr.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(2.0 * u_curr[i] - u_prev[i], lower, upper);
    return out;
}

TraceResult trace_front(const MocpDefinition& def, const TraceOptions& opts) {
    if (def.objective_count() != 2) throw DimensionError("trace_front: two objectives required");
    const std::size_t n = def.decision_dim();
    std::vector<double> start = opts.initial_control.empty() ? std::vector<double>(n, 0.0) : opts.initial_control;
    if (start.size() != n) throw DimensionError("trace_front: initial control has wrong length");
    const double feas_tol = opts.solver.c_tol;

    TraceResult out;
    auto note = [&](const SubproblemResult& r) {
        if (!r.converged) ++out.nonconverged;
    };

    const SubproblemResult s1 = solve_scalar(def, 1, start, opts.solver);
    const SubproblemResult s2 = solve_scalar(def, 2, start, opts.solver);
    for (const auto* s : {&s1, &s2}) {
        if (s->max_violation > feas_tol) {
            throw FrontTraceError("trace_front: scalar problem ended infeasible (violation " +
                                  std::to_string(s->max_violation) + ")");
        }
        note(*s);
    }
    out.raw.push_back(s1.entry);
    out.raw.push_back(s2.entry);

    const auto& a = s1.entry.objectives;
    const auto& b = s2.entry.objectives;
    const bool degenerate = !(b[0] > a[0] && a[1] > b[1]);
    if (!degenerate && opts.n_targets > 0) {
        std::array<double, 2> offsets{};
        if (opts.d_e) {
            offsets = {*opts.d_e, *opts.d_e};
        } else {
            offsets = {opts.d_e_fraction * (b[0] - a[0]), opts.d_e_fraction * (a[1] - b[1])};
        }
        const auto targets = distribute_targets(a, b, offsets, opts.n_targets);

        // solved anchors: scalar solutions sit at the ellipse end points
        std::vector<ObjectiveVector> anchor_points{{a[0] - offsets[0], a[1]}, {b[0], b[1] - offsets[1]}};
        std::vector<std::vector<double>> anchor_controls{s1.entry.control, s2.entry.control};

        for (const auto& T : targets) {
            std::size_t nearest = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < anchor_points.size(); ++i) {
                const double d = squared_distance(anchor_points[i], T);
                if (d < best) {
                    best = d;
                    nearest = i;
                }
            }
            const SubproblemResult r = solve_reference_point(def, T, anchor_controls[nearest], opts.solver);
            if (r.max_violation > feas_tol) {
                ++out.dropped;
                spdlog::warn("trace_front: dropped infeasible reference-point solve (violation {:.3g})",
                             r.max_violation);
                continue;
            }
            note(r);
            out.raw.push_back(r.entry);
            anchor_points.push_back(T);
            anchor_controls.push_back(r.entry.control);
        }
    }

    out.front = nondominated_filter(out.raw);
    if (opts.proper_eps) out.front = proper_filter(out.front, *opts.proper_eps);
    return out;
}

}  // namespace emompc
