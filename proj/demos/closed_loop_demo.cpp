// Runs both controllers on the idealized plant and prints how they settle,
// then shows the sampled-data error shrinking with the control step.

#include "levelctl/closedloop.hpp"

#include <cstdio>

int main() {
    using namespace levelctl;

    LoopConfig c;
    c.plant = {0.2, 0.25};
    c.controller.lambda_tilde = 4.0;
    c.controller.Q_setpoint = 1.0;
    c.controller.delta_N_init = 0.5;
    c.controller.dt_schedule = {1.0};
    c.initial = make_state(c.plant, 0.0, 2.0, 1.0);
    c.steps = 40;

    c.algorithm = Algorithm::alg2;
    const Trajectory t2 = run_loop(c);
    std::printf("Algorithm 2: Q -> %.9f (map fixed point %.9f)\n", t2.records.back().Q, idealized_fixed_Q(c));

    c.algorithm = Algorithm::alg1;
    c.controller.lambda_tilde = 1.0;
    c.controller.dt_schedule = {0.4};
    const Trajectory t1 = run_loop(c);
    std::printf("Algorithm 1: Q at control instants -> %.9f, estimates delta_t %.6f, delta_N %.6f\n",
                control_instant_Q(t1).back(), t1.records.back().delta_t_est, t1.records.back().delta_N_est);

    LoopConfig real;
    real.algorithm = Algorithm::modified2;
    real.plant_mode = PlantMode::ramped;
    real.measurement_mode = MeasurementMode::finite_difference;
    real.plant = {0.2, 0.02};
    real.controller.lambda_tilde = 1.0;
    real.controller.Q_setpoint = 1.0;
    real.controller.delta_N_init = 0.16;
    real.initial = make_state(real.plant, 0.0, 2.0, 1.0);
    real.steps = 0;
    const ConvergenceTable table = convergence_study(real, {0.4, 0.2, 0.1, 0.05});
    std::printf("modified Algorithm 2, ramped plant:\n");
    for (const ConvergenceRow& r : table.rows) {
        if (r.steady_error) {
            std::printf("  dt = %.2f  steady error %.3e\n", r.dt, *r.steady_error);
        } else {
            std::printf("  dt = %.2f  %s\n", r.dt, r.note.c_str());
        }
    }
    return 0;
}
