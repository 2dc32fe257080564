#pragma once

#include <cmath>
#include <cstdint>

#include "liftkit/errors.hpp"
#include "liftkit/types.hpp"

namespace liftkit {

// Adam over a flat parameter vector. Moments are kept in the parameter scalar
// type; bias correction follows the reference formulation.
template <typename S>
struct Adam {
    double lr = 6e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step_count = 0;
    VecX<S> m, v;

    void reset(Eigen::Index n) {
        m = VecX<S>::Zero(n);
        v = VecX<S>::Zero(n);
        step_count = 0;
    }

    void step(VecX<S>& w, const VecX<S>& g) {
        if (m.size() != w.size()) reset(w.size());
        if (g.size() != w.size()) throw ConfigError("adam: gradient size mismatch");
        ++step_count;
        const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
        m = b1 * m + (S(1) - b1) * g;
        v.array() = b2 * v.array() + (S(1) - b2) * g.array().square();
        const S c1 = static_cast<S>(1.0 - std::pow(beta1, static_cast<double>(step_count)));
        const S c2 = static_cast<S>(1.0 - std::pow(beta2, static_cast<double>(step_count)));
        w.array() -= static_cast<S>(lr) * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + static_cast<S>(epsilon));
    }
};

}  // namespace liftkit
