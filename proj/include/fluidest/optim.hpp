#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace fluidest {

/// Adaptive-moment gradient method over a flat parameter vector.
class Adam {
public:
    Adam(std::size_t n, double step, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : step_(step), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    /// Updates the moments with grad and returns the proposed parameter increment.
    std::vector<double> propose(std::span<const double> grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        std::vector<double> delta(m_.size());
        for (std::size_t i = 0; i < m_.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            delta[i] = -step_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
        }
        return delta;
    }

    int steps() const noexcept { return t_; }

private:
    double step_, beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    int t_ = 0;
};

}  // namespace fluidest
