#include <cmath>

#include "doctest.h"
#include "gaitpred/synth.hpp"
#include "gaitpred/train.hpp"
#include "test_helpers.hpp"

using namespace gaitpred;
using testutil::random_matrix;

namespace {

Parameter scalar_param(double value, double grad) {
    Parameter p("theta", 1, 1);
    p.value[0] = value;
    p.grad[0] = grad;
    return p;
}

WindowedDataset random_dataset(std::size_t n, std::size_t w_in, std::size_t w_out, std::uint64_t seed) {
    WindowedDataset ds;
    ds.w_in = w_in;
    ds.w_out = w_out;
    for (std::size_t i = 0; i < n; ++i) {
        ds.pairs.push_back({random_matrix(w_in, 6, seed + 2 * i, 0, 1),
                            random_matrix(w_out, 6, seed + 2 * i + 1, 0, 1), 0, i});
    }
    return ds;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("losses on identical inputs are zero") {
    const auto y = random_matrix(3, 6, 1);
    for (auto k : {LossKind::MAE, LossKind::MSE}) {
        const auto r = loss_value_and_grad(k, y, y);
        CHECK(r.value == 0.0);
        for (double g : r.grad.values()) CHECK(g == 0.0);
    }
}

TEST_CASE("worked loss example") {
    const Matrix y(1, 3, {1, 2, 3}), yhat(1, 3, {2, 2, 5});
    const auto mae = loss_value_and_grad(LossKind::MAE, y, yhat);
    const auto mse = loss_value_and_grad(LossKind::MSE, y, yhat);
    CHECK(mae.value == doctest::Approx(1.0));
    CHECK(mse.value == doctest::Approx(5.0 / 3.0));
    CHECK(mae.grad == Matrix(1, 3, {1.0 / 3, 0.0, 1.0 / 3}));
    CHECK(mse.grad[2] == doctest::Approx(2.0 * 2.0 / 3.0));
    CHECK_THROWS(loss_value_and_grad(LossKind::MSE, y, Matrix(3, 1)));
}

TEST_CASE("MSE gradient matches finite differences") {
    const auto y = random_matrix(4, 6, 2);
    auto yhat = random_matrix(4, 6, 3);
    const auto r = loss_value_and_grad(LossKind::MSE, y, yhat);
    const double eps = 1e-5;
    for (std::size_t i = 0; i < yhat.size(); ++i) {
        const double saved = yhat[i];
        yhat[i] = saved + eps;
        const double up = loss_value_and_grad(LossKind::MSE, y, yhat).value;
        yhat[i] = saved - eps;
        const double dn = loss_value_and_grad(LossKind::MSE, y, yhat).value;
        yhat[i] = saved;
        const double num = (up - dn) / (2 * eps);
        CHECK(std::abs(r.grad[i] - num) / std::max(std::abs(num), 1e-12) <= 1e-8);
    }
}

TEST_CASE("adam first step moves by the learning rate") {
    Adam adam(1e-4);
    auto p = scalar_param(0.0, 0.5);
    Parameter* ps[] = {&p};
    adam.step(ps);
    CHECK(std::abs(p.value[0] + 1e-4) < 1e-8);
    CHECK(adam.steps_taken() == 1);
}

TEST_CASE("adam and rmsprop leave parameters alone for zero gradients") {
    Adam adam(1e-2);
    RmsProp rms(1e-2);
    auto a = scalar_param(0.7, 0.0);
    auto b = scalar_param(0.7, 0.0);
    Parameter* pa[] = {&a};
    Parameter* pb[] = {&b};
    for (int i = 0; i < 5; ++i) {
        adam.step(pa);
        rms.step(pb);
    }
    CHECK(a.value[0] == 0.7);
    CHECK(b.value[0] == 0.7);
}

TEST_CASE("adam minimises a quadratic") {
    Adam adam(0.1);
    auto p = scalar_param(1.0, 0.0);
    Parameter* ps[] = {&p};
    for (int i = 0; i < 100; ++i) {
        p.grad[0] = 2 * p.value[0];
        adam.step(ps);
    }
    CHECK(std::abs(p.value[0]) < 0.1);
}

TEST_CASE("rmsprop first step and saturation") {
    RmsProp rms(1e-2);
    auto p = scalar_param(0.0, 3.0);
    Parameter* ps[] = {&p};
    rms.step(ps);
    CHECK(p.value[0] == doctest::Approx(-0.031623).epsilon(1e-5));
    double prev = p.value[0];
    double delta = 0;
    for (int i = 0; i < 300; ++i) {
        rms.step(ps);
        delta = p.value[0] - prev;
        prev = p.value[0];
    }
    CHECK(std::abs(delta) == doctest::Approx(1e-2).epsilon(1e-6));
}

TEST_CASE("optimizer state mirrors parameter shapes") {
    Parameter a("a", 3, 4), b("b", 1, 7);
    Parameter* ps[] = {&a, &b};
    Adam adam(1e-3);
    RmsProp rms(1e-3);
    adam.step(ps);
    rms.step(ps);
    REQUIRE(adam.first_moments().size() == 2);
    CHECK(adam.first_moments()[0].same_shape(a.value));
    CHECK(adam.second_moments()[1].same_shape(b.value));
    CHECK(rms.accumulators()[1].same_shape(b.value));
    Parameter c("c", 2, 2);
    Parameter* other[] = {&a, &c};
    CHECK_THROWS(adam.step(other));
    CHECK_THROWS(rms.step(other));
}

TEST_CASE("make_optimizer follows the config") {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::RmsProp;
    cfg.learning_rate = 1e-2;
    CHECK(dynamic_cast<RmsProp*>(make_optimizer(cfg).get()) != nullptr);
    cfg.learning_rate = 0;
    CHECK_THROWS(make_optimizer(cfg));
}

TEST_CASE("batch gradient is the mean of per-example gradients") {
    auto model = Model::build({ModelKind::Lstm2, 5, 2, 4}, 3);
    const auto data = random_dataset(3, 5, 2, 10);
    for (auto loss : {LossKind::MSE, LossKind::MAE}) {
        std::vector<Matrix> sum;
        for (auto* p : model.parameters()) sum.emplace_back(p->value.rows(), p->value.cols());
        double mean_loss = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            const std::size_t one[] = {i};
            mean_loss += accumulate_batch_gradient(model, data, one, loss) / 3;
            auto ps = model.parameters();
            for (std::size_t k = 0; k < ps.size(); ++k) {
                for (std::size_t j = 0; j < sum[k].size(); ++j) sum[k][j] += ps[k]->grad[j] / 3;
            }
        }
        const std::size_t all[] = {0, 1, 2};
        CHECK(accumulate_batch_gradient(model, data, all, loss) == doctest::Approx(mean_loss));
        auto ps = model.parameters();
        for (std::size_t k = 0; k < ps.size(); ++k) {
            for (std::size_t j = 0; j < sum[k].size(); ++j) {
                CHECK(ps[k]->grad[j] == doctest::Approx(sum[k][j]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("one epoch with a full batch takes one optimizer step") {
    auto model = Model::build({ModelKind::SimpleRnn, 5, 1, 4}, 1);
    const auto train = random_dataset(10, 5, 1, 1);
    const auto val = random_dataset(4, 5, 1, 99);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 64;
    const auto h = fit(model, train, val, cfg);
    CHECK(h.optimizer_steps == 1);
    CHECK(h.train_loss.size() == 1);
    CHECK(h.val_loss.size() == 1);
    cfg.epochs = 3;
    cfg.batch_size = 4;
    CHECK(fit(model, train, val, cfg).optimizer_steps == 9);
}

TEST_CASE("fit is deterministic for a fixed seed") {
    const auto train = random_dataset(40, 5, 1, 1);
    const auto val = random_dataset(8, 5, 1, 500);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 77;
    for (bool dropout : {false, true}) {
        ModelSpec spec{ModelKind::CnnRnn, 5, 1, 6};
        spec.dropout_enabled = dropout;
        auto a = Model::build(spec, 5);
        auto b = Model::build(spec, 5);
        const auto ha = fit(a, train, val, cfg);
        const auto hb = fit(b, train, val, cfg);
        CHECK(ha.train_loss == hb.train_loss);
        CHECK(ha.val_loss == hb.val_loss);
        const auto pa = a.parameters();
        const auto pb = b.parameters();
        for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pa[k]->value == pb[k]->value);
    }
}

TEST_CASE("shuffle changes the update order") {
    const auto train = random_dataset(40, 5, 1, 1);
    const auto val = random_dataset(8, 5, 1, 500);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    auto a = Model::build({ModelKind::SimpleRnn, 5, 1, 4}, 5);
    auto b = a;
    fit(a, train, val, cfg);
    cfg.shuffle = false;
    fit(b, train, val, cfg);
    CHECK(a.parameters()[0]->value != b.parameters()[0]->value);
}

TEST_CASE("fit rejects bad input and reports divergence") {
    auto model = Model::build({ModelKind::SimpleRnn, 5, 1, 4}, 1);
    const auto train = random_dataset(4, 5, 1, 1);
    WindowedDataset empty;
    empty.w_in = 5;
    empty.w_out = 1;
    CHECK_THROWS(fit(model, empty, train, {}));
    CHECK_THROWS(fit(model, train, empty, {}));
    CHECK_THROWS(fit(model, random_dataset(4, 6, 1, 1), train, {}));

    auto bad = train;
    bad.pairs[2].y[0] = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.shuffle = false;
    try {
        fit(model, bad, train, cfg);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() == 1);
        CHECK(e.batch() == 2);
    }
}

TEST_CASE("bilstm learns a noiseless trial") {
    auto profile = default_profile();
    profile.noise_std = 0;
    const auto trial = generate_trial(profile, 10.0, 3);
    const auto norm = apply_normalizer(trial, fit_normalizer(trial.values, true));
    const auto split = split_by_trial(norm, 5, 1);
    auto model = Model::build({ModelKind::BiLstm2, 5, 1}, 1);
    TrainConfig cfg;  // MSE, Adam 1e-4, 40 epochs, batch 32
    cfg.seed = 1;
    const auto h = fit(model, split.train, split.val, cfg);
    REQUIRE(h.train_loss.size() == 40);
    CHECK(h.train_loss.back() < 0.1 * h.train_loss.front());
    auto moving = [&](std::size_t end) {
        double s = 0;
        for (std::size_t i = end - 5; i < end; ++i) s += h.train_loss[i];
        return s / 5;
    };
    for (std::size_t e = 6; e < 40; ++e) CHECK(moving(e + 1) <= moving(e));
}

TEST_CASE("history csv") {
    TrainHistory h;
    h.train_loss = {0.5, 0.25};
    h.val_loss = {0.75, 0.125};
    CHECK(history_csv(h) == "epoch,train_loss,val_loss\n1,0.5,0.75\n2,0.25,0.125\n");
}

}  // TEST_SUITE
