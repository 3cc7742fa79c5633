#include "evolt/ecm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "evolt/errors.hpp"

namespace evolt::ecm {

void OcvCurve::validate() const {
    if (knots.size() < 2) throw ConfigError("ocv curve needs at least 2 knots");
    if (knots.front().first != 0.0) throw ConfigError("ocv curve must start at soc = 0");
    if (knots.back().first != 1.0) throw ConfigError("ocv curve must end at soc = 1");
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (!std::isfinite(knots[i].first) || !std::isfinite(knots[i].second))
            throw ConfigError("ocv curve has a non-finite knot");
        if (i > 0) {
            if (knots[i].first <= knots[i - 1].first)
                throw ConfigError("ocv curve soc knots must be strictly increasing");
            if (knots[i].second <= knots[i - 1].second)
                throw ConfigError("ocv curve voltages must be strictly increasing");
        }
    }
}

double OcvCurve::lookup(double soc) const {
    if (soc <= knots.front().first) return knots.front().second;
    if (soc >= knots.back().first) return knots.back().second;
    auto it = std::upper_bound(knots.begin(), knots.end(), soc,
                               [](double v, const auto& k) { return v < k.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double t = (soc - lo.first) / (hi.first - lo.first);
    return lo.second + t * (hi.second - lo.second);
}

void EcmParams::validate() const {
    if (!(r0_ohm > 0.0) || !std::isfinite(r0_ohm))
        throw ConfigError("ecm r0 must be a positive finite resistance");
    for (const auto& b : branches) {
        if (!(b.r_ohm > 0.0) || !std::isfinite(b.r_ohm))
            throw ConfigError("ecm branch resistance must be positive and finite");
        if (!(b.tau_s > 0.0) || !std::isfinite(b.tau_s))
            throw ConfigError("ecm branch time constant must be positive and finite");
    }
    if (!(capacity_ah > 0.0) || !std::isfinite(capacity_ah))
        throw ConfigError("ecm capacity_ah must be positive and finite");
    ocv.validate();
}

double step_rc(double prev_v, double current_a, double dt_s, double r_ohm, double tau_s) {
    if (!std::isfinite(prev_v) || !std::isfinite(current_a) || !std::isfinite(dt_s) ||
        !std::isfinite(r_ohm) || !std::isfinite(tau_s))
        throw InvalidInput("step_rc: non-finite input");
    if (!(dt_s > 0.0)) throw InvalidInput("step_rc: dt_s must be > 0");
    if (!(tau_s > 0.0)) throw InvalidInput("step_rc: tau_s must be > 0");
    const double decay = std::exp(-dt_s / tau_s);
    return decay * prev_v + r_ohm * (1.0 - decay) * current_a;
}

double terminal_voltage(double ocv_v, double current_a, double r0_ohm,
                        double v_rc1, double v_rc2) {
    if (!std::isfinite(ocv_v) || !std::isfinite(current_a) || !std::isfinite(r0_ohm) ||
        !std::isfinite(v_rc1) || !std::isfinite(v_rc2))
        throw InvalidInput("terminal_voltage: non-finite input");
    return ocv_v - current_a * r0_ohm - v_rc1 - v_rc2;
}

double update_soc(double soc, double current_a, double dt_s, double capacity_ah,
                  bool* clamped) {
    if (!std::isfinite(soc) || !std::isfinite(current_a) || !std::isfinite(dt_s))
        throw InvalidInput("update_soc: non-finite input");
    if (!(capacity_ah > 0.0)) throw InvalidInput("update_soc: capacity_ah must be > 0");
    if (dt_s < 0.0) throw InvalidInput("update_soc: dt_s must be >= 0");
    const double next = soc - current_a * dt_s / (3600.0 * capacity_ah);
    const double result = std::clamp(next, 0.0, 1.0);
    if (clamped) *clamped = result != next;
    return result;
}

SimResult simulate(const EcmParams& params, const EcmState& init,
                   std::span<const ProfileStep> profile) {
    params.validate();
    if (profile.empty()) throw InvalidInput("simulate: empty profile");
    if (!std::isfinite(init.v_rc[0]) || !std::isfinite(init.v_rc[1]) ||
        !std::isfinite(init.soc) || init.soc < 0.0 || init.soc > 1.0)
        throw InvalidInput("simulate: invalid initial state");

    SimResult out;
    out.steps.reserve(profile.size());
    EcmState s = init;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const auto& step = profile[i];
        try {
            s.v_rc[0] = step_rc(s.v_rc[0], step.current_a, step.dt_s,
                                params.branches[0].r_ohm, params.branches[0].tau_s);
            s.v_rc[1] = step_rc(s.v_rc[1], step.current_a, step.dt_s,
                                params.branches[1].r_ohm, params.branches[1].tau_s);
            bool clamped = false;
            s.soc = update_soc(s.soc, step.current_a, step.dt_s, params.capacity_ah, &clamped);
            if (clamped) ++out.clamp_events;
            const double ocv = params.ocv.lookup(s.soc);
            const double v = terminal_voltage(ocv, step.current_a, params.r0_ohm,
                                              s.v_rc[0], s.v_rc[1]);
            out.steps.push_back({s, ocv, v});
        } catch (const InvalidInput& e) {
            throw InvalidInput("simulate step " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

namespace {

// Gaussian elimination with partial pivoting; a is n x n row-major, rhs is
// overwritten with the solution. Returns false when near-singular.
bool solve_dense(std::vector<double>& a, std::vector<double>& rhs, std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::fabs(a[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double cand = std::fabs(a[r * n + col]);
            if (cand > best) {
                best = cand;
                piv = r;
            }
        }
        if (best < 1e-300) return false;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(rhs[piv], rhs[col]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    for (std::size_t r = n; r-- > 0;) {
        double s = rhs[r];
        for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * rhs[c];
        rhs[r] = s / a[r * n + r];
    }
    return true;
}

// Residual sum of squares for given time constants, with per-trace offsets and
// the shared branch resistances solved linearly (variable projection).
// Model per trace k: v(t) = off_k - r1*i_k*exp(-t/tau1) - r2*i_k*exp(-t/tau2).
double relaxation_ssq(std::span<const RelaxationTrace> traces, double tau1, double tau2,
                      std::array<double, 2>* r_out) {
    const std::size_t nt = traces.size();
    const std::size_t n = nt + 2;
    std::vector<double> ata(n * n, 0.0), aty(n, 0.0);

    auto add = [&](std::size_t i, std::size_t j, double v) { ata[i * n + j] += v; };

    for (std::size_t k = 0; k < nt; ++k) {
        const double ik = traces[k].hold_current_a;
        for (const auto& [t, v] : traces[k].samples) {
            const double p1 = -ik * std::exp(-t / tau1);
            const double p2 = -ik * std::exp(-t / tau2);
            // columns: k (offset), nt (r1), nt+1 (r2); offset basis is 1
            add(k, k, 1.0);
            add(k, nt, p1);
            add(k, nt + 1, p2);
            add(nt, k, p1);
            add(nt + 1, k, p2);
            add(nt, nt, p1 * p1);
            add(nt, nt + 1, p1 * p2);
            add(nt + 1, nt, p1 * p2);
            add(nt + 1, nt + 1, p2 * p2);
            aty[k] += v;
            aty[nt] += p1 * v;
            aty[nt + 1] += p2 * v;
        }
    }

    std::vector<double> beta = aty;
    if (!solve_dense(ata, beta, n)) return std::numeric_limits<double>::infinity();

    double ssq = 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
        const double ik = traces[k].hold_current_a;
        for (const auto& [t, v] : traces[k].samples) {
            const double model = beta[k] - beta[nt] * ik * std::exp(-t / tau1) -
                                 beta[nt + 1] * ik * std::exp(-t / tau2);
            const double d = v - model;
            ssq += d * d;
        }
    }
    if (r_out) *r_out = {beta[nt], beta[nt + 1]};
    return ssq;
}

// Compact Nelder-Mead, deterministic, for smooth low-dimensional objectives.
std::vector<double> nelder_mead(const std::function<double(const double*)>& f,
                                std::vector<double> x0, double step,
                                std::size_t max_iter, double* best_out) {
    const std::size_t dim = x0.size();
    std::vector<std::vector<double>> pts(dim + 1, x0);
    std::vector<double> vals(dim + 1);
    for (std::size_t i = 0; i < dim; ++i) pts[i + 1][i] += step;
    for (std::size_t i = 0; i <= dim; ++i) vals[i] = f(pts[i].data());

    auto order = [&]() {
        for (std::size_t i = 1; i <= dim; ++i) {
            for (std::size_t j = i; j > 0 && vals[j] < vals[j - 1]; --j) {
                std::swap(vals[j], vals[j - 1]);
                std::swap(pts[j], pts[j - 1]);
            }
        }
    };
    order();

    std::vector<double> centroid(dim), xr(dim), xe(dim), xc(dim);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        if (std::fabs(vals[dim] - vals[0]) <= 1e-14 * (1.0 + std::fabs(vals[0]))) break;

        for (std::size_t d = 0; d < dim; ++d) {
            double s = 0.0;
            for (std::size_t i = 0; i < dim; ++i) s += pts[i][d];
            centroid[d] = s / static_cast<double>(dim);
        }
        for (std::size_t d = 0; d < dim; ++d) xr[d] = centroid[d] + (centroid[d] - pts[dim][d]);
        const double fr = f(xr.data());
        if (fr < vals[0]) {
            for (std::size_t d = 0; d < dim; ++d)
                xe[d] = centroid[d] + 2.0 * (centroid[d] - pts[dim][d]);
            const double fe = f(xe.data());
            if (fe < fr) {
                pts[dim] = xe;
                vals[dim] = fe;
            } else {
                pts[dim] = xr;
                vals[dim] = fr;
            }
        } else if (fr < vals[dim - 1]) {
            pts[dim] = xr;
            vals[dim] = fr;
        } else {
            for (std::size_t d = 0; d < dim; ++d)
                xc[d] = centroid[d] + 0.5 * (pts[dim][d] - centroid[d]);
            const double fc = f(xc.data());
            if (fc < vals[dim]) {
                pts[dim] = xc;
                vals[dim] = fc;
            } else {
                for (std::size_t i = 1; i <= dim; ++i) {
                    for (std::size_t d = 0; d < dim; ++d)
                        pts[i][d] = pts[0][d] + 0.5 * (pts[i][d] - pts[0][d]);
                    vals[i] = f(pts[i].data());
                }
            }
        }
        order();
    }
    if (best_out) *best_out = vals[0];
    return pts[0];
}

double fit_r0(std::span<const PulseTrace> pulses) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < pulses.size(); ++p) {
        const auto& s = pulses[p].samples;
        if (s.size() < 2)
            throw FitError("pulse segment " + std::to_string(p) + " has fewer than 2 samples");
        std::size_t onset = 0;
        double best_di = 0.0;
        for (std::size_t i = 1; i < s.size(); ++i) {
            const double di = std::fabs(s[i][1] - s[i - 1][1]);
            if (di > best_di) {
                best_di = di;
                onset = i;
            }
        }
        if (best_di < 1e-9)
            throw FitError("pulse segment " + std::to_string(p) + " has no current step");
        const double dv = s[onset][2] - s[onset - 1][2];
        const double di = s[onset][1] - s[onset - 1][1];
        acc += std::fabs(dv / di);
        ++count;
    }
    return acc / static_cast<double>(count);
}

}  // namespace

FitResult fit_params(std::span<const RelaxationTrace> relaxations,
                     std::span<const PulseTrace> pulses,
                     double capacity_ah, OcvCurve ocv) {
    if (relaxations.empty()) throw FitError("at least one relaxation segment required");
    if (pulses.empty()) throw FitError("at least one pulse segment required");

    double t_span = 0.0;
    for (std::size_t k = 0; k < relaxations.size(); ++k) {
        const auto& tr = relaxations[k];
        if (tr.samples.size() < 8)
            throw FitError("relaxation segment " + std::to_string(k) + " has too few points");
        if (std::fabs(tr.hold_current_a) < 1e-12)
            throw FitError("relaxation segment " + std::to_string(k) + " has zero hold current");
        double lo = tr.samples.front().second, hi = lo;
        for (const auto& [t, v] : tr.samples) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            t_span = std::max(t_span, t);
        }
        if (hi - lo < 1e-12)
            throw FitError("relaxation segment " + std::to_string(k) + " is constant voltage");
    }
    if (!(t_span > 0.0)) throw FitError("relaxation segments carry no time span");

    auto objective = [&](const double* x) {
        return relaxation_ssq(relaxations, std::exp(x[0]), std::exp(x[1]), nullptr);
    };

    const std::array<std::array<double, 2>, 3> starts = {{
        {t_span / 20.0, t_span / 2.0},
        {t_span / 100.0, t_span / 8.0},
        {t_span / 6.0, t_span},
    }};

    double best_ssq = std::numeric_limits<double>::infinity();
    std::array<double, 2> best_taus{1.0, 1.0};
    for (const auto& s0 : starts) {
        std::vector<double> x0 = {std::log(s0[0]), std::log(s0[1])};
        double val = 0.0;
        auto x = nelder_mead(objective, x0, 0.4, 600, &val);
        if (val < best_ssq) {
            best_ssq = val;
            best_taus = {std::exp(x[0]), std::exp(x[1])};
        }
    }
    if (!std::isfinite(best_ssq)) throw FitError("relaxation fit did not converge");

    std::array<double, 2> r{};
    relaxation_ssq(relaxations, best_taus[0], best_taus[1], &r);

    std::array<RcBranch, 2> branches = {
        RcBranch{r[0], best_taus[0]},
        RcBranch{r[1], best_taus[1]},
    };
    if (branches[0].tau_s > branches[1].tau_s) std::swap(branches[0], branches[1]);
    for (auto& b : branches) b.r_ohm = std::max(b.r_ohm, 1e-9);

    FitResult out;
    out.params.r0_ohm = fit_r0(pulses);
    out.params.branches = branches;
    out.params.capacity_ah = capacity_ah;
    out.params.ocv = std::move(ocv);
    out.params.validate();
    out.residual_norm = std::sqrt(best_ssq);
    return out;
}

}  // namespace evolt::ecm
