#include "liftkit/schedule.hpp"

#include <cmath>
#include <iostream>

#include "liftkit/errors.hpp"

namespace liftkit {

bool DiffusionSchedule::terminal_gaussian_ok() const {
    return !alpha_bars.empty() && alpha_bars.back() <= 1e-3;
}

void DiffusionSchedule::validate() const {
    const int T = total_steps;
    if (T < 1) throw ConfigError("schedule: T must be >= 1");
    if (static_cast<int>(betas.size()) != T || static_cast<int>(alphas.size()) != T ||
        static_cast<int>(alpha_bars.size()) != T || static_cast<int>(posterior_betas.size()) != T)
        throw ConfigError("schedule: array sizes disagree with T");
    double prev_bar = 1.0;
    for (int t = 1; t <= T; ++t) {
        if (!(betas[t - 1] > 0.0 && betas[t - 1] < 1.0))
            throw ConfigError("schedule: beta_t must lie in (0, 1)");
        if (!std::isfinite(alpha_bars[t - 1]) || !(alpha_bars[t - 1] < prev_bar))
            throw ConfigError("schedule: alpha_bar must be strictly decreasing");
        prev_bar = alpha_bars[t - 1];
    }
}

DiffusionSchedule build_schedule(const std::string& kind, int total_steps,
                                 double beta_start, double beta_end) {
    if (total_steps < 1) throw ConfigError("schedule: T must be >= 1");
    DiffusionSchedule s;
    s.total_steps = total_steps;
    s.betas.resize(total_steps);

    if (kind == "linear") {
        if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
            throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
        for (int t = 1; t <= total_steps; ++t)
            s.betas[t - 1] = total_steps == 1
                                 ? beta_start
                                 : beta_start + (beta_end - beta_start) * (t - 1) /
                                       static_cast<double>(total_steps - 1);
    } else if (kind == "cosine") {
        // squared-cosine alpha_bar with the usual 0.008 offset, betas clipped at 0.999
        const double offset = 0.008;
        auto f = [&](double u) {
            const double x = (u + offset) / (1.0 + offset) * M_PI / 2.0;
            return std::cos(x) * std::cos(x);
        };
        double prev = 1.0;
        for (int t = 1; t <= total_steps; ++t) {
            const double cur = f(static_cast<double>(t) / total_steps) / f(0.0);
            s.betas[t - 1] = std::min(1.0 - cur / prev, 0.999);
            prev = cur;
        }
    } else {
        throw ConfigError("schedule: unknown kind '" + kind + "'");
    }

    s.alphas.resize(total_steps);
    s.alpha_bars.resize(total_steps);
    s.posterior_betas.resize(total_steps);
    double bar = 1.0;
    for (int t = 1; t <= total_steps; ++t) {
        s.alphas[t - 1] = 1.0 - s.betas[t - 1];
        const double prev_bar = bar;
        bar *= s.alphas[t - 1];
        s.alpha_bars[t - 1] = bar;
        // with abar_0 := 1 the t = 1 formula degenerates to 0; defined as beta_1
        s.posterior_betas[t - 1] =
            t == 1 ? s.betas[0] : (1.0 - prev_bar) / (1.0 - bar) * s.betas[t - 1];
    }
    s.validate();
    if (!s.terminal_gaussian_ok())
        std::cerr << "[liftkit] warning: alpha_bar_T = " << s.alpha_bars.back()
                  << " > 1e-3; terminal distribution is far from unit gaussian\n";
    return s;
}

namespace {

void check_t(const DiffusionSchedule& s, int t) {
    if (t < 1 || t > s.total_steps)
        throw ConfigError("timestep out of range: t = " + std::to_string(t) +
                          ", T = " + std::to_string(s.total_steps));
}

}  // namespace

Coords3 forward_sample(const DiffusionSchedule& s, const Coords3& y0, int t,
                       const Coords3& eps) {
    check_t(s, t);
    const double abar = s.alpha_bar(t);
    return std::sqrt(abar) * y0 + std::sqrt(1.0 - abar) * eps;
}

double forward_sample_scalar(const DiffusionSchedule& s, double y0, int t, double eps) {
    check_t(s, t);
    const double abar = s.alpha_bar(t);
    return std::sqrt(abar) * y0 + std::sqrt(1.0 - abar) * eps;
}

namespace {

void posterior_coeffs(const DiffusionSchedule& s, int t, double& c0, double& ct) {
    check_t(s, t);
    const double abar_prev = s.alpha_bar(t - 1);
    const double abar = s.alpha_bar(t);
    c0 = std::sqrt(abar_prev) * s.beta(t) / (1.0 - abar);
    ct = std::sqrt(s.alpha(t)) * (1.0 - abar_prev) / (1.0 - abar);
}

}  // namespace

PosteriorParams posterior_params(const DiffusionSchedule& s, const Coords3& y_t,
                                 const Coords3& y0, int t) {
    double c0, ct;
    posterior_coeffs(s, t, c0, ct);
    PosteriorParams p;
    p.mean = c0 * y0 + ct * y_t;
    p.variance = s.posterior_beta(t);
    return p;
}

void posterior_params_scalar(const DiffusionSchedule& s, double y_t, double y0, int t,
                             double& mean, double& variance) {
    double c0, ct;
    posterior_coeffs(s, t, c0, ct);
    mean = c0 * y0 + ct * y_t;
    variance = s.posterior_beta(t);
}

std::vector<int> spacing(int total_steps, int steps) {
    if (steps < 1 || steps > total_steps)
        throw ConfigError("spacing: need 1 <= K <= T");
    std::vector<int> out;
    out.reserve(steps);
    for (int k = 0; k < steps; ++k) {
        const int t = static_cast<int>(
            std::lround(static_cast<double>(total_steps) * (steps - k) / steps));
        if (out.empty() || t < out.back())  // rounding may collide for small T
            out.push_back(t);
    }
    return out;
}

}  // namespace liftkit
