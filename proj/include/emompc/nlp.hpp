#pragma once

/**
 * @file nlp.hpp
 * @brief Box-constrained nonlinear minimizer with pointwise inequality constraints.
 *
 * Augmented-Lagrangian outer loop (PHR multipliers for g(x) <= 0) around a
 * projected BFGS inner loop on the box. Gradients are central differences, so
 * problems only need to supply function values.
 */

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace emompc {

struct NlpProblem {
    std::size_t dimension = 0;
    std::function<double(std::span<const double>)> objective;
    /// Feasible iff every component is <= 0. May be empty (no constraints).
    std::function<std::vector<double>(std::span<const double>)> inequality;
    std::vector<double> lower;
    std::vector<double> upper;
};

struct SolverOptions {
    double g_tol = 1e-6;            ///< projected-gradient tolerance
    double c_tol = 1e-6;            ///< constraint violation tolerance
    int max_outer = 30;
    int max_inner = 200;
    double penalty_growth = 10.0;
    double initial_penalty = 10.0;
    double fd_rel = 1e-5;
    double fd_abs = 1e-5;
};

struct SolverResult {
    std::vector<double> minimizer;
    double objective_value = 0.0;
    double max_violation = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Central-difference gradient with per-coordinate step max(h_rel*|x_i|, h_abs).
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double h_rel = 1e-5, double h_abs = 1e-5);

/// Largest positive component of g, or 0 when all constraints hold.
double max_violation(std::span<const double> g) noexcept;

/**
 * @brief Minimizes p.objective over the box subject to p.inequality <= 0.
 *
 * The start is projected onto the box. Exhausting the iteration budget yields
 * converged = false rather than an exception. Non-finite callback values throw
 * EvaluationError carrying the offending point. Deterministic for fixed input.
 */
SolverResult minimize(const NlpProblem& p, std::span<const double> start, const SolverOptions& opts = {});

}  // namespace emompc
