#include <memory>
#include <vector>

#include "doctest.h"

#include "heatcast/nn.hpp"
#include "heatcast/rng.hpp"
#include "support/gradcheck.hpp"

using namespace heatcast;
using namespace heatcast::nn;
using heatcast::testsupport::check_gradients;
using heatcast::testsupport::GradCheckResult;

namespace {

Tensor<double> random_input(int n, int c, int h, int w, uint64_t seed) {
    Tensor<double> t;
    t.resize(n, c, h, w);
    Rng rng(seed);
    for (double& v : t.v) v = rng.normal();
    return t;
}

std::vector<double> random_targets(int n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> z(static_cast<size_t>(n));
    for (double& v : z) v = rng.below(2) ? 1.0 : 0.0;
    return z;
}

std::unique_ptr<DenseLayer<double>> dense_init(int in, int out, Rng& rng) {
    auto d = std::make_unique<DenseLayer<double>>(in, out);
    d->init(rng);
    return d;
}

void expect_pass(const GradCheckResult& r) {
    INFO("first failure: ", r.first_failure, ", worst err/tol: ", r.max_err);
    CHECK(r.ok);
    CHECK(r.checked > 0);
}

}  // namespace

TEST_CASE("gradcheck: convolution layer in isolation") {
    Rng rng(100);
    Network<double> net;
    auto conv = std::make_unique<ConvLayer<double>>(2, 3, 3, 3);
    conv->init(rng);
    net.add(std::move(conv));
    net.add(std::make_unique<FlattenLayer<double>>());
    net.add(dense_init(3 * 2 * 2, 1, rng));
    net.add(std::make_unique<SigmoidLayer<double>>());
    expect_pass(check_gradients(net, random_input(3, 2, 4, 4, 1), random_targets(3, 2), 7));
}

TEST_CASE("gradcheck: batch norm layer in isolation") {
    Rng rng(101);
    Network<double> net;
    net.add(std::make_unique<BatchNormLayer<double>>(3));
    net.add(std::make_unique<FlattenLayer<double>>());
    net.add(dense_init(3 * 3 * 3, 1, rng));
    net.add(std::make_unique<SigmoidLayer<double>>());
    expect_pass(check_gradients(net, random_input(5, 3, 3, 3, 2), random_targets(5, 3), 8));
}

TEST_CASE("gradcheck: relu layer in isolation") {
    Rng rng(102);
    Network<double> net;
    net.add(std::make_unique<ReluLayer<double>>());
    net.add(std::make_unique<FlattenLayer<double>>());
    net.add(dense_init(2 * 3 * 3, 1, rng));
    net.add(std::make_unique<SigmoidLayer<double>>());
    expect_pass(check_gradients(net, random_input(4, 2, 3, 3, 3), random_targets(4, 4), 9));
}

TEST_CASE("gradcheck: max pooling layer in isolation") {
    Rng rng(103);
    Network<double> net;
    net.add(std::make_unique<MaxPoolLayer<double>>());
    net.add(std::make_unique<FlattenLayer<double>>());
    net.add(dense_init(2 * 2 * 2, 1, rng));
    net.add(std::make_unique<SigmoidLayer<double>>());
    expect_pass(check_gradients(net, random_input(4, 2, 4, 4, 4), random_targets(4, 5), 10));
}

TEST_CASE("gradcheck: spatial dropout layer in isolation (fixed mask)") {
    Rng rng(104);
    Network<double> net;
    net.add(std::make_unique<SpatialDropoutLayer<double>>(0.3));
    net.add(std::make_unique<FlattenLayer<double>>());
    net.add(dense_init(4 * 2 * 2, 1, rng));
    net.add(std::make_unique<SigmoidLayer<double>>());
    expect_pass(check_gradients(net, random_input(3, 4, 2, 2, 5), random_targets(3, 6), 11));
}

TEST_CASE("gradcheck: dense layers and sigmoid in isolation") {
    Rng rng(105);
    Network<double> net;
    net.add(std::make_unique<FlattenLayer<double>>());
    net.add(dense_init(6, 4, rng));
    net.add(std::make_unique<ReluLayer<double>>());
    net.add(dense_init(4, 1, rng));
    net.add(std::make_unique<SigmoidLayer<double>>());
    expect_pass(check_gradients(net, random_input(5, 6, 1, 1, 6), random_targets(5, 7), 12));
}

TEST_CASE("gradcheck: composed desk-scale network, every parameter") {
    NetArch arch;
    arch.input_rows = 8;
    arch.input_cols = 8;
    arch.conv_channels = 3;
    arch.dense_hidden = 6;
    arch.kernel1 = 3;
    arch.kernel2 = 1;
    Network<double> net = build_stack<double>(2, arch, true);
    Rng rng(2001);
    net.init(rng);
    REQUIRE(net.param_count() <= 5000);
    const GradCheckResult r =
        check_gradients(net, random_input(4, 2, 8, 8, 8), random_targets(4, 9), 13);
    expect_pass(r);
    CHECK(r.checked > net.param_count());
}
