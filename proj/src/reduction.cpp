#include "emompc/reduction.hpp"

#include <cmath>

#include "emompc/errors.hpp"

namespace emompc {

Reduction reduce_state(const Track& track, const VehicleState& x) {
    const Projection proj = project_to_track(track, {x.p1, x.p2});
    Reduction out;
    out.projection = proj;
    out.frame = Se2Action{proj.alpha, proj.point};
    out.param = {x.v_y, x.r, wrap_angle(x.theta - proj.alpha), proj.d, proj.kappa};

    const auto& p = out.param;
    const bool other_side = p.d < 0.0 || (p.d == 0.0 && (p.xi < 0.0 || (p.xi == 0.0 && p.v_y < 0.0)));
    if (other_side) {
        out.param = p.mirrored();
        // keep xi in (-pi, pi] after negation
        out.param.xi = wrap_angle(out.param.xi);
        out.mirrored = true;
    }
    return out;
}

VehicleState reduced_initial_state(const ReducedParameter& param) { return {0.0, param.d, param.xi, param.v_y, param.r}; }

VehicleState lift(const ReducedParameter& param, bool mirrored, const Se2Action& frame) {
    VehicleState local = reduced_initial_state(param);
    if (mirrored) local = mirror_state(local);
    return frame.apply(local);
}

MocpDefinition build_track_mocp(std::shared_ptr<const Track> track, const VehicleState& x0,
                                const VehicleProblemConfig& cfg) {
    if (!track) throw ParameterError("build_track_mocp: null track");
    double s0 = 0.0;
    try {
        s0 = project_to_track(*track, {x0.p1, x0.p2}).s;
    } catch (const SingularProjectionError&) {
        // every centre-line point is equidistant; use the arc origin
        s0 = 0.0;
    }

    MocpDefinition def;
    def.state_dim = 5;
    def.control_dim = 1;
    def.dynamics = bicycle_dynamics(cfg.vehicle);
    def.horizon = cfg.horizon;
    const auto x0a = x0.to_array();
    def.x0.assign(x0a.begin(), x0a.end());
    def.u_min = cfg.u_min;
    def.u_max = cfg.u_max;

    def.running_costs.push_back([track](std::span<const double> x, std::span<const double>) {
        const double d = distance_to_track(*track, {x[0], x[1]});
        return d * d;
    });
    def.running_costs.push_back(nullptr);
    def.mayer_costs.push_back(nullptr);
    def.mayer_costs.push_back([track, s0](std::span<const double> x) {
        double s1 = 0.0;
        try {
            s1 = project_to_track(*track, {x[0], x[1]}).s;
        } catch (const SingularProjectionError&) {
            s1 = 0.0;
        }
        return -arc_length_between(*track, s0, s1);
    });

    const double d_max = cfg.d_max;
    def.path_constraint_count = 1;
    def.path_constraints = [track, d_max](std::span<const double> x, std::span<const double>, std::span<double> out) {
        out[0] = distance_to_track(*track, {x[0], x[1]}) - d_max;
    };
    return def;
}

MocpDefinition build_reduced_mocp(const ReducedParameter& param, const VehicleProblemConfig& cfg) {
    auto track = std::make_shared<const Track>(ArcTrack{param.kappa, {}});
    return build_track_mocp(std::move(track), reduced_initial_state(param), cfg);
}

}  // namespace emompc
