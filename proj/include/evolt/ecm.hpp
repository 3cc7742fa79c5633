#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace evolt::ecm {

// Open-circuit voltage as a piecewise-linear function of state of charge.
// Knots must span [0,1] with strictly increasing soc and ocv.
struct OcvCurve {
    std::vector<std::pair<double, double>> knots;  // (soc, volts)

    void validate() const;           // throws ConfigError
    double lookup(double soc) const; // clamps soc outside [0,1]
};

struct RcBranch {
    double r_ohm = 0.0;
    double tau_s = 0.0;
};

// Second-order RC equivalent circuit: series resistance plus two RC branches.
struct EcmParams {
    double r0_ohm = 0.0;
    std::array<RcBranch, 2> branches{};
    double capacity_ah = 0.0;
    OcvCurve ocv;

    void validate() const;  // throws ConfigError
};

struct EcmState {
    std::array<double, 2> v_rc{0.0, 0.0};  // polarization voltages (V)
    double soc = 1.0;                      // fraction in [0,1]
};

// Exact zero-order-hold update of one RC branch over dt_s with the current
// held constant: exp(-dt/tau)*prev + r*(1-exp(-dt/tau))*i.
double step_rc(double prev_v, double current_a, double dt_s, double r_ohm, double tau_s);

// ocv - i*r0 - v_rc1 - v_rc2. Positive current discharges.
double terminal_voltage(double ocv_v, double current_a, double r0_ohm,
                        double v_rc1, double v_rc2);

// Coulomb counting, clamped to [0,1]. When clamped is non-null it is set to
// whether the clamp fired.
double update_soc(double soc, double current_a, double dt_s, double capacity_ah,
                  bool* clamped = nullptr);

struct ProfileStep {
    double dt_s = 0.0;
    double current_a = 0.0;
};

struct SimStep {
    EcmState state;    // after the step
    double ocv_v = 0.0;
    double v_phy = 0.0;
};

struct SimResult {
    std::vector<SimStep> steps;
    std::size_t clamp_events = 0;
};

SimResult simulate(const EcmParams& params, const EcmState& init,
                   std::span<const ProfileStep> profile);

// Terminal-voltage samples recorded after a constant-current hold was cut to
// zero. hold_current_a is the current before the cut (discharge positive) and
// must have lasted long enough to polarize both branches.
struct RelaxationTrace {
    double hold_current_a = 0.0;
    std::vector<std::pair<double, double>> samples;  // (seconds since cut, volts)
};

// Samples around a current step; r0 comes from the instantaneous voltage jump.
struct PulseTrace {
    std::vector<std::array<double, 3>> samples;  // (t_s, current_a, volts)
};

struct FitResult {
    EcmParams params;
    double residual_norm = 0.0;
};

// Identifies r0 from pulse onsets and (r_j, tau_j) from a two-exponential fit
// of the relaxation voltage (taus by Nelder-Mead over log-space, amplitudes by
// linear least squares, shared across traces). capacity/ocv pass through.
FitResult fit_params(std::span<const RelaxationTrace> relaxations,
                     std::span<const PulseTrace> pulses,
                     double capacity_ah, OcvCurve ocv);

}  // namespace evolt::ecm
