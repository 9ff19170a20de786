#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "heatcast/nn.hpp"
#include "heatcast/rng.hpp"

namespace heatcast::testsupport {

struct GradCheckResult {
    bool ok = true;
    size_t checked = 0;
    double max_err = 0.0;       // worst |analytic - fd| over tolerance units
    std::string first_failure;
};

/// Central finite differences (step 1e-4, float64 accumulation) over every
/// trainable parameter and every input element, against one analytic
/// backward pass; tolerance max(1e-4 abs, 1e-3 rel). Train mode with a fixed
/// dropout seed keeps the differentiated function deterministic.
inline GradCheckResult check_gradients(nn::Network<double>& net, nn::Tensor<double> in,
                                       const std::vector<double>& targets,
                                       uint64_t dropout_seed) {
    constexpr double kStep = 1e-4;
    constexpr double kAbsTol = 1e-4;
    constexpr double kRelTol = 1e-3;

    const auto loss_at = [&](const nn::Tensor<double>& input) {
        Rng rng(dropout_seed, rng_stream::dropout);
        net.forward(input, true, &rng);
        return net.bce_loss(targets);
    };

    Rng rng(dropout_seed, rng_stream::dropout);
    net.forward(in, true, &rng);
    net.backward_bce(targets);
    std::vector<std::vector<double>> analytic;
    for (const auto& g : net.grads()) analytic.emplace_back(g.data, g.data + g.size);
    const std::vector<double> input_grad(net.input_grad().v);

    GradCheckResult result;
    const auto compare = [&](double g, double fd, const std::string& what) {
        const double tol = std::max(kAbsTol, kRelTol * std::max(std::abs(fd), std::abs(g)));
        const double err = std::abs(g - fd) / tol;
        result.max_err = std::max(result.max_err, err);
        if (err > 1.0 && result.ok) {
            result.ok = false;
            result.first_failure = what;
        }
        ++result.checked;
    };

    const auto params = net.params();
    for (size_t t = 0; t < params.size(); ++t) {
        for (size_t i = 0; i < params[t].size; ++i) {
            const double saved = params[t].data[i];
            params[t].data[i] = saved + kStep;
            const double lp = loss_at(in);
            params[t].data[i] = saved - kStep;
            const double lm = loss_at(in);
            params[t].data[i] = saved;
            compare(analytic[t][i], (lp - lm) / (2.0 * kStep),
                    params[t].name + "[" + std::to_string(i) + "]");
        }
    }
    for (size_t i = 0; i < in.size(); ++i) {
        const double saved = in.v[i];
        in.v[i] = saved + kStep;
        const double lp = loss_at(in);
        in.v[i] = saved - kStep;
        const double lm = loss_at(in);
        in.v[i] = saved;
        compare(input_grad[i], (lp - lm) / (2.0 * kStep),
                "input[" + std::to_string(i) + "]");
    }
    return result;
}

}  // namespace heatcast::testsupport
