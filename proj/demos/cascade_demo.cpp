// Walks the period-doubling cascade of q -> q exp(a (1 - q)) and of the
// Algorithm-2 closed-loop map, printing flips, chaos onset and bounds.

#include "levelctl/bifurcation.hpp"

#include <cstdio>

int main() {
    using namespace levelctl;

    const MapFamily reduced = MapFamily::reduced();
    ScanOptions opt;
    opt.keep_samples = 0;
    const ScanResult r = scan_cascade(reduced, {1.5, 2.85}, 271, opt);
    std::printf("reduced map, a in [1.5, 2.85]\n");
    for (double f : r.flip_points) std::printf("  flip at a = %.5f\n", f);
    if (r.chaos_onset) std::printf("  chaos from a = %.4f\n", *r.chaos_onset);

    const ReducedBounds b = reduced_bounds(2.7);
    const OrbitSummary o = iterate_orbit(reduced, 2.7, {0.5, 0.0});
    std::printf("  a = 2.7: bounds [%.6f, %.6f], orbit [%.6f, %.6f], L = %.4f\n", b.q_min, b.q_max, o.Q_bounds.lo,
                o.Q_bounds.hi, o.lyapunov);

    const Map2Params p{};  // lambda~ = 4, Q~ = 1, delta_t = 0.25, delta_N = 0.2, delta_N~ = 0.5
    const MapFamily second = MapFamily::second(p);
    std::printf("Algorithm-2 map, critical step %.5f\n", *critical_dt_map2(p));
    const double brackets[][2] = {{1.6, 1.7}, {1.8, 1.86}, {1.86, 1.877}, {1.877, 1.8797}};
    for (const auto& br : brackets) {
        std::printf("  flip at dt = %.5f\n", refine_flip(second, br[0], br[1], 1e-7));
    }
    const OrbitSummary z = iterate_orbit(second, 1.89, second.default_start(1.89));
    std::printf("  dt = 1.89: %zu underflow event(s), lambda -> %.6f (zero-ray fixed point %.6f)\n",
                z.underflow_events, z.samples.back().lambda, fixed_point_map2_zero(second.map2_at(1.89)).point.lambda);
    return 0;
}
