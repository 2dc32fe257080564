#pragma once

#include <string>
#include <vector>

#include "liftkit/types.hpp"

namespace liftkit {

// Diffusion schedule over t = 1..T (t = 0 means clean data, alpha_bar_0 = 1).
// Arrays are stored 1-indexed: element [t-1] belongs to timestep t.
struct DiffusionSchedule {
    int total_steps = 0;  // T
    std::vector<double> betas;
    std::vector<double> alphas;           // 1 - beta_t
    std::vector<double> alpha_bars;       // prod_{k<=t} alpha_k
    std::vector<double> posterior_betas;  // beta~_t ((1-abar_{t-1})/(1-abar_t)) beta_t, beta~_1 = beta_1

    double beta(int t) const { return betas[t - 1]; }
    double alpha(int t) const { return alphas[t - 1]; }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars[t - 1]; }
    double posterior_beta(int t) const { return posterior_betas[t - 1]; }

    // true when alpha_bar_T <= 1e-3, i.e. the terminal marginal is close to unit gaussian
    bool terminal_gaussian_ok() const;
    void validate() const;  // throws ConfigError on broken invariants
};

DiffusionSchedule build_schedule(const std::string& kind, int total_steps,
                                 double beta_start = 1e-4, double beta_end = 0.02);

// Closed-form marginal of the forward chain:
//   y_t = sqrt(abar_t) y0 + sqrt(1 - abar_t) eps
Coords3 forward_sample(const DiffusionSchedule& s, const Coords3& y0, int t,
                       const Coords3& eps);
double forward_sample_scalar(const DiffusionSchedule& s, double y0, int t, double eps);

struct PosteriorParams {
    Coords3 mean;
    double variance = 0.0;
};
// q(y_{t-1} | y_t, y0) = N(mu~_t, beta~_t I); valid for 1 <= t <= T with the
// abar_0 := 1 convention.
PosteriorParams posterior_params(const DiffusionSchedule& s, const Coords3& y_t,
                                 const Coords3& y0, int t);
// scalar view for statistical tests
void posterior_params_scalar(const DiffusionSchedule& s, double y_t, double y0, int t,
                             double& mean, double& variance);

// K reverse-loop timesteps: t_k = round(T (K-k) / K), strictly decreasing,
// t_0 = T. Duplicates after rounding are skipped (small T).
std::vector<int> spacing(int total_steps, int steps);

}  // namespace liftkit
