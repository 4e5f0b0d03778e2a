#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "motion_prior/tensor.hpp"

namespace mp {

// Adaptive moment estimation over a fixed parameter list. step() consumes the
// gradients currently stored on the parameters; zero_grad() clears them.
class Adam {
  public:
    explicit Adam(std::vector<Tensor<double>> params, double lr = 1e-4, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        for (auto& p : params_) {
            if (!p.requires_grad())
                throw std::invalid_argument("Adam: parameter does not require gradients");
            m_.emplace_back(p.numel(), 0.0);
            v_.emplace_back(p.numel(), 0.0);
        }
    }

    void step() {
        ++t_;
        double c1 = 1.0 - std::pow(b1_, t_);
        double c2 = 1.0 - std::pow(b2_, t_);
        for (size_t i = 0; i < params_.size(); ++i) {
            double* data = params_[i].mutable_data();
            const auto& g = params_[i].grad();
            for (size_t j = 0; j < m_[i].size(); ++j) {
                m_[i][j] = b1_ * m_[i][j] + (1.0 - b1_) * g[j];
                v_[i][j] = b2_ * v_[i][j] + (1.0 - b2_) * g[j] * g[j];
                data[j] -= lr_ * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps_);
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

  private:
    std::vector<Tensor<double>> params_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Plain gradient descent; useful when the loss surface is dominated by a
// strong quadratic regularizer and momentum would overshoot.
class Sgd {
  public:
    explicit Sgd(std::vector<Tensor<double>> params, double lr)
        : params_(std::move(params)), lr_(lr) {
        for (auto& p : params_)
            if (!p.requires_grad())
                throw std::invalid_argument("Sgd: parameter does not require gradients");
    }

    void step() {
        for (auto& p : params_) {
            double* data = p.mutable_data();
            const auto& g = p.grad();
            for (size_t j = 0; j < g.size(); ++j) data[j] -= lr_ * g[j];
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

  private:
    std::vector<Tensor<double>> params_;
    double lr_;
};

}  // namespace mp
