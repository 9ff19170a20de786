#include <cmath>
#include <vector>

#include "doctest.h"

#include "heatcast/errors.hpp"
#include "heatcast/optimizer.hpp"
#include "heatcast/rng.hpp"

using namespace heatcast;
using namespace heatcast::nn;

namespace {

template <typename S>
std::vector<ParamRef<S>> ref(const char* name, std::vector<S>& v) {
    return {{name, v.data(), v.size()}};
}

}  // namespace

TEST_CASE("zero gradient on a fresh state leaves parameters unchanged") {
    std::vector<double> theta = {1.5, -2.0};
    std::vector<double> grad = {0.0, 0.0};
    AmsGrad<double> opt(ref<double>("p", theta), {});
    opt.step(ref<double>("p", theta), ref<double>("g", grad));
    CHECK(theta[0] == 1.5);
    CHECK(theta[1] == -2.0);
}

TEST_CASE("single step matches the hand-evaluated update") {
    std::vector<double> theta = {1.0};
    std::vector<double> grad = {2.0};
    AmsGradConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.beta1 = 0.5;
    cfg.beta2 = 0.999;
    cfg.epsilon = 1e-8;
    AmsGrad<double> opt(ref<double>("p", theta), cfg);
    opt.step(ref<double>("p", theta), ref<double>("g", grad));
    // m = 0.5*0 + 0.5*2 = 1; v = 0.001*4 = 0.004; vmax = 0.004;
    // mhat = 1/(1-0.5) = 2; theta = 1 - 0.1*2/(sqrt(0.004)+1e-8).
    const double expected = 1.0 - 0.1 * 2.0 / (std::sqrt(0.004) + 1e-8);
    CHECK(theta[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("gradient descent on a convex quadratic converges") {
    std::vector<double> theta = {0.0};
    std::vector<double> grad = {0.0};
    AmsGradConfig cfg;
    cfg.learning_rate = 0.05;
    AmsGrad<double> opt(ref<double>("p", theta), cfg);
    for (int k = 0; k < 2000; ++k) {
        grad[0] = 2.0 * (theta[0] - 3.0);
        opt.step(ref<double>("p", theta), ref<double>("g", grad));
    }
    CHECK(std::abs(theta[0] - 3.0) < 0.01);
}

TEST_CASE("vmax is elementwise nondecreasing and bounds the step size") {
    Rng rng(606);
    std::vector<float> theta(16);
    std::vector<float> grad(16);
    for (float& t : theta) t = float(rng.normal());
    AmsGradConfig cfg;
    cfg.beta1 = 0.5;
    AmsGrad<float> opt(ref<float>("p", theta), cfg);
    std::vector<float> prev_vmax(16, 0.0f);
    for (int k = 1; k <= 200; ++k) {
        for (float& g : grad) g = float(rng.normal() * std::exp(rng.normal()));
        const std::vector<float> before = theta;
        opt.step(ref<float>("p", theta), ref<float>("g", grad));
        const auto& vmax = opt.moment2_max()[0];
        const auto& m = opt.moment1()[0];
        const double bias1 = 1.0 - std::pow(cfg.beta1, double(k));
        for (size_t i = 0; i < theta.size(); ++i) {
            CHECK(vmax[i] >= prev_vmax[i]);
            prev_vmax[i] = vmax[i];
            const double mhat = double(m[i]) / bias1;
            const double bound =
                cfg.learning_rate * std::abs(mhat) / std::sqrt(double(vmax[i])) * (1.0 + 1e-6);
            CHECK(std::abs(double(theta[i]) - double(before[i])) <= bound + 1e-12);
        }
    }
}

TEST_CASE("identical gradient sequences give identical trajectories") {
    auto run = [] {
        Rng rng(77);
        std::vector<float> theta = {0.3f, -0.7f, 1.1f};
        std::vector<float> grad(3);
        AmsGrad<float> opt(ref<float>("p", theta), {});
        for (int k = 0; k < 50; ++k) {
            for (float& g : grad) g = float(rng.normal());
            opt.step(ref<float>("p", theta), ref<float>("g", grad));
        }
        return theta;
    };
    CHECK(run() == run());
}

TEST_CASE("non-finite gradients reject the whole step") {
    std::vector<double> theta = {1.0, 2.0};
    std::vector<double> grad = {0.5, std::nan("")};
    AmsGrad<double> opt(ref<double>("p", theta), {});
    CHECK_THROWS_AS(opt.step(ref<double>("p", theta), ref<double>("g", grad)), NumericError);
    CHECK(theta[0] == 1.0);
    CHECK(theta[1] == 2.0);
    CHECK(opt.step_count() == 0);
}

TEST_CASE("tensor shape changes are rejected") {
    std::vector<double> theta = {1.0, 2.0};
    std::vector<double> small = {0.5};
    AmsGrad<double> opt(ref<double>("p", theta), {});
    CHECK_THROWS_AS(opt.step(ref<double>("p", theta), ref<double>("g", small)),
                    DimensionError);
}
