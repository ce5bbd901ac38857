#include "emompc/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "emompc/errors.hpp"

namespace emompc {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

std::span<const double> view(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double check_finite(double v, const Vec& x, const char* what) {
    if (!std::isfinite(v)) throw EvaluationError(std::string("non-finite ") + what, to_std(x));
    return v;
}

/// One evaluation of objective + constraints at a point.
struct Sample {
    double f = 0.0;
    std::vector<double> g;
    double violation = 0.0;
};

class AugmentedLagrangian {
public:
    AugmentedLagrangian(const NlpProblem& p, const SolverOptions& opts)
        : p_(p), opts_(opts), lower_(Eigen::Map<const Vec>(p.lower.data(), p.lower.size())),
          upper_(Eigen::Map<const Vec>(p.upper.data(), p.upper.size())) {}

    Sample sample(const Vec& x) const {
        Sample s;
        s.f = check_finite(p_.objective(view(x)), x, "objective");
        if (p_.inequality) {
            s.g = p_.inequality(view(x));
            for (double gi : s.g) check_finite(gi, x, "constraint");
        }
        s.violation = max_violation(s.g);
        return s;
    }

    double merit(const Sample& s) const {
        double v = s.f;
        for (std::size_t i = 0; i < s.g.size(); ++i) {
            const double lam = i < lambda_.size() ? lambda_[i] : 0.0;
            const double shifted = std::max(0.0, lam + mu_ * s.g[i]);
            v += (shifted * shifted - lam * lam) / (2.0 * mu_);
        }
        return v;
    }

    /// Merit value at x, recording x as incumbent when it is a feasible improvement.
    double merit_at(const Vec& x, bool track) {
        const Sample s = sample(x);
        if (track) consider(x, s);
        return merit(s);
    }

    Vec gradient(const Vec& x) const {
        const std::size_t n = static_cast<std::size_t>(x.size());
        Vec g(n);
        Vec xp = x;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = std::max(opts_.fd_rel * std::abs(x[i]), opts_.fd_abs);
            xp[i] = x[i] + h;
            const double fp = merit(sample(xp));
            xp[i] = x[i] - h;
            const double fm = merit(sample(xp));
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        return g;
    }

    Vec project(Vec x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

    double projected_gradient_norm(const Vec& x, const Vec& g) const {
        return (x - project(x - g)).lpNorm<Eigen::Infinity>();
    }

    void consider(const Vec& x, const Sample& s) {
        if (s.violation <= opts_.c_tol && (!has_best_ || s.f < best_f_)) {
            has_best_ = true;
            best_f_ = s.f;
            best_x_ = x;
        }
    }

    struct InnerResult {
        Vec x;
        double pg = 0.0;
        int iterations = 0;
    };

    InnerResult inner(Vec x) {
        const auto n = x.size();
        Mat H = Mat::Identity(n, n);
        bool fresh = true;
        double L = merit_at(x, true);
        Vec g = gradient(x);
        InnerResult out;
        out.pg = projected_gradient_norm(x, g);
        const double width = std::max(1e-12, (upper_ - lower_).lpNorm<Eigen::Infinity>());

        for (int it = 0; it < opts_.max_inner && out.pg > opts_.g_tol; ++it) {
            ++out.iterations;
            Eigen::Array<bool, Eigen::Dynamic, 1> active(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                active[i] = (x[i] <= lower_[i] && g[i] > 0.0) || (x[i] >= upper_[i] && g[i] < 0.0);
            }
            auto direction = [&](const Mat& Hm) {
                Vec gf = g;
                for (Eigen::Index i = 0; i < n; ++i) if (active[i]) gf[i] = 0.0;
                Vec d = -(Hm * gf);
                for (Eigen::Index i = 0; i < n; ++i) if (active[i]) d[i] = 0.0;
                return d;
            };
            Vec d = direction(H);
            if (g.dot(d) >= 0.0) {
                H.setIdentity();
                fresh = true;
                d = direction(H);
            }

            bool accepted = false;
            Vec x_new;
            double L_new = L;
            for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
                double alpha = std::min(1.0, width / std::max(d.lpNorm<Eigen::Infinity>(), 1e-300));
                for (int ls = 0; ls < 40; ++ls) {
                    x_new = project(x + alpha * d);
                    const double decrease = g.dot(x_new - x);
                    if (decrease < 0.0) {
                        L_new = merit_at(x_new, true);
                        if (L_new <= L + 1e-4 * decrease) {
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if (!accepted && !fresh) {
                    H.setIdentity();
                    fresh = true;
                    d = direction(H);
                } else {
                    break;
                }
            }
            if (!accepted) break;  // stalled: no descent possible at this resolution

            const Vec g_new = gradient(x_new);
            const Vec s = x_new - x;
            const Vec y = g_new - g;
            const double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm()) {
                const double rho = 1.0 / sy;
                if (fresh) H *= sy / y.squaredNorm();
                const Mat V = Mat::Identity(n, n) - rho * y * s.transpose();
                H = V.transpose() * H * V + rho * s * s.transpose();
                fresh = false;
            }
            const bool tiny = std::abs(L - L_new) <= 1e-16 * (1.0 + std::abs(L));
            x = x_new;
            g = g_new;
            L = L_new;
            out.pg = projected_gradient_norm(x, g);
            if (tiny && s.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + x.lpNorm<Eigen::Infinity>())) break;
        }
        out.x = x;
        return out;
    }

    SolverResult run(const Vec& start) {
        Vec x = project(start);
        const std::size_t m = p_.inequality ? p_.inequality(view(x)).size() : 0;
        lambda_.assign(m, 0.0);
        mu_ = opts_.initial_penalty;

        SolverResult res;
        double prev_violation = std::numeric_limits<double>::infinity();
        double pg = std::numeric_limits<double>::infinity();
        Sample last;
        const int outer_budget = m == 0 ? 1 : opts_.max_outer;
        for (int outer = 0; outer < outer_budget; ++outer) {
            const InnerResult in = inner(x);
            x = in.x;
            pg = in.pg;
            res.iterations += in.iterations;
            last = sample(x);
            consider(x, last);
            if (pg <= opts_.g_tol && last.violation <= opts_.c_tol) break;
            if (m == 0) break;
            for (std::size_t i = 0; i < m; ++i) lambda_[i] = std::max(0.0, lambda_[i] + mu_ * last.g[i]);
            if (last.violation > 0.25 * prev_violation) mu_ *= opts_.penalty_growth;
            prev_violation = last.violation;
        }

        res.converged = pg <= opts_.g_tol && last.violation <= opts_.c_tol;
        res.minimizer = to_std(x);
        res.objective_value = last.f;
        res.max_violation = last.violation;
        // never hand back something worse than the best feasible point seen
        const double slack = 1e-12 * (1.0 + std::abs(best_f_));
        if (has_best_ && (last.violation > opts_.c_tol || best_f_ < last.f - slack)) {
            const Sample b = sample(best_x_);
            res.minimizer = to_std(best_x_);
            res.objective_value = b.f;
            res.max_violation = b.violation;
            res.converged = false;
        }
        return res;
    }

private:
    const NlpProblem& p_;
    const SolverOptions& opts_;
    Vec lower_;
    Vec upper_;
    std::vector<double> lambda_;
    double mu_ = 10.0;
    bool has_best_ = false;
    double best_f_ = 0.0;
    Vec best_x_;
};

}  // namespace

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                                double h_rel, double h_abs) {
    std::vector<double> xp(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = std::max(h_rel * std::abs(x[i]), h_abs);
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw EvaluationError("fd_gradient: non-finite sample", std::vector<double>(x.begin(), x.end()));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

double max_violation(std::span<const double> g) noexcept {
    double v = 0.0;
    for (double gi : g) v = std::max(v, gi);
    return v;
}

SolverResult minimize(const NlpProblem& p, std::span<const double> start, const SolverOptions& opts) {
    if (p.dimension == 0 || p.lower.size() != p.dimension || p.upper.size() != p.dimension ||
        start.size() != p.dimension) {
        throw DimensionError("minimize: inconsistent problem dimensions");
    }
    if (!p.objective) throw ParameterError("minimize: missing objective");
    for (std::size_t i = 0; i < p.dimension; ++i) {
        if (!(p.lower[i] <= p.upper[i])) throw ParameterError("minimize: lower bound exceeds upper bound");
    }
    AugmentedLagrangian al(p, opts);
    return al.run(Eigen::Map<const Vec>(start.data(), static_cast<Eigen::Index>(start.size())));
}

}  // namespace emompc
