#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "heatcast/errors.hpp"
#include "heatcast/nn.hpp"

namespace heatcast {

struct AmsGradConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.5;  // the published "momentum of 0.5"
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// AMSGrad: Adam moments plus an elementwise running max of the second
/// moment. Bias correction is applied to the first moment only; the running
/// max enters the denominator uncorrected.
template <typename S>
class AmsGrad {
public:
    AmsGrad(const std::vector<nn::ParamRef<S>>& params, const AmsGradConfig& cfg)
        : cfg_(cfg) {
        sizes_.reserve(params.size());
        for (const auto& p : params) {
            sizes_.push_back(p.size);
            m_.emplace_back(p.size, S(0));
            v_.emplace_back(p.size, S(0));
            vmax_.emplace_back(p.size, S(0));
        }
    }

    /// One update. A non-finite gradient anywhere rejects the whole step and
    /// leaves parameters and moments untouched.
    void step(const std::vector<nn::ParamRef<S>>& params,
              const std::vector<nn::ParamRef<S>>& grads) {
        if (params.size() != sizes_.size() || grads.size() != sizes_.size())
            throw DimensionError("amsgrad: tensor count changed");
        for (size_t t = 0; t < grads.size(); ++t) {
            if (grads[t].size != sizes_[t] || params[t].size != sizes_[t])
                throw DimensionError("amsgrad: tensor shape changed");
            for (size_t i = 0; i < grads[t].size; ++i)
                if (!std::isfinite(double(grads[t].data[i])))
                    throw NumericError("amsgrad: non-finite gradient in " + grads[t].name +
                                       ", step rejected");
        }
        ++k_;
        const double bias1 = 1.0 - std::pow(cfg_.beta1, double(k_));
        for (size_t t = 0; t < grads.size(); ++t) {
            S* m = m_[t].data();
            S* v = v_[t].data();
            S* vm = vmax_[t].data();
            S* theta = params[t].data;
            const S* g = grads[t].data;
            for (size_t i = 0; i < sizes_[t]; ++i) {
                const double gi = double(g[i]);
                const double mi = cfg_.beta1 * double(m[i]) + (1.0 - cfg_.beta1) * gi;
                const double vi = cfg_.beta2 * double(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
                m[i] = S(mi);
                v[i] = S(vi);
                if (v[i] > vm[i]) vm[i] = v[i];
                const double mhat = mi / bias1;
                theta[i] = S(double(theta[i]) -
                             cfg_.learning_rate * mhat /
                                 (std::sqrt(double(vm[i])) + cfg_.epsilon));
            }
        }
    }

    uint64_t step_count() const { return k_; }
    const AmsGradConfig& config() const { return cfg_; }

    // Serialization access (checkpoint resume).
    std::vector<std::vector<S>>& moment1() { return m_; }
    std::vector<std::vector<S>>& moment2() { return v_; }
    std::vector<std::vector<S>>& moment2_max() { return vmax_; }
    void set_step_count(uint64_t k) { k_ = k; }

private:
    AmsGradConfig cfg_;
    std::vector<size_t> sizes_;
    std::vector<std::vector<S>> m_, v_, vmax_;
    uint64_t k_ = 0;
};

}  // namespace heatcast
