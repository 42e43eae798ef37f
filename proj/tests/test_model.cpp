#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "lifecal/model.hpp"
#include "support/oracles.hpp"

using namespace lifecal;
using Catch::Approx;

namespace {

Model random_model(std::uint64_t seed, const std::vector<std::size_t>& res_widths = {4, 8, 8, 2}) {
    Rng rng(seed);
    Model m;
    m.base = BaselineModel::make({2, 8, 2}, rng);
    m.base_scaler = table_grid_scaler();
    m.res = ResidualModel::make(res_widths, rng);
    m.res_scaler = MinMaxScaler({18.0, 1.0, 0.0, 0.0}, {80.0, 12.0, 1.0, 1.0});
    return m;
}

} // namespace

TEST_CASE("architecture parameter counts", "[training]") {
    Rng rng(31);
    // reference widths: dense stack 2/40/40/20/2
    CHECK(BaselineModel::make({2, 40, 40, 20, 2}, rng).param_count() == 2622);
    // residual 4/50x5/2 with a single-bias GRU in the fifth layer
    CHECK(ResidualModel::make({4, 50, 50, 50, 50, 50, 2}, rng).param_count() == 23152);
    // desk-scale variant
    CHECK(ResidualModel::make({4, 32, 32, 32, 32, 32, 2}, rng).param_count() ==
          4 * 32 + 32 + 3 * (32 * 32 + 32) + 3 * (2 * 32 * 32 + 32) + 32 * 2 + 2);
}

TEST_CASE("joint logits are the sum of baseline and residual logits", "[training]") {
    const Model m = random_model(32);
    Rng rng(33);
    const Contract c = oracle::random_contract(rng);
    const int K = c.iterations();

    const Tensor base_logits = m.base.forward(base_feature_matrix(c, m.base_scaler, K));
    const Tensor res_logits = m.res.forward(res_feature_matrix(c, m.res_scaler, K));
    Tensor joint = base_logits;
    for (std::size_t i = 0; i < joint.numel(); ++i) joint.data[i] += res_logits.data[i];
    const Tensor probs = softmax_rows(joint);

    const TransitionSequence seq = predict_sequence(m, c);
    REQUIRE(seq.size() == static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
        CHECK(seq[static_cast<std::size_t>(k)].p01() == probs(static_cast<std::size_t>(k), 1));
}

TEST_CASE("zero residual collapses to the softmax baseline", "[training]") {
    Model m = random_model(34);
    m.res = ResidualModel::zeros({4, 8, 8, 2});
    Rng rng(35);
    for (int trial = 0; trial < 10; ++trial) {
        const Contract c = oracle::random_contract(rng);
        const TransitionSequence seq = predict_sequence(m, c);
        for (int k = 0; k < c.iterations(); ++k) {
            const double base_only =
                baseline_death_prob(m.base, m.base_scaler, current_age(c, k), c.m);
            CHECK(seq[static_cast<std::size_t>(k)].p01() == Approx(base_only).epsilon(1e-14));
        }
    }
}

TEST_CASE("predicted sequences are valid and deterministic", "[training]") {
    const Model m = random_model(36);
    Rng rng(37);
    const Contract c = oracle::random_contract(rng);
    const TransitionSequence a = predict_sequence(m, c);
    const TransitionSequence b = predict_sequence(m, c);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].valid(1e-9));
        CHECK(a[k].p01() == b[k].p01()); // bitwise reproducible
        CHECK(a[k].p[1][0] == 0.0);
        CHECK(a[k].p[1][1] == 1.0);
    }
}

TEST_CASE("step encoding tracks the attained age", "[training]") {
    const MinMaxScaler s({18.0, 1.0, 0.0, 0.0}, {80.0, 12.0, 1.0, 1.0});
    Contract c;
    c.a0 = 40;
    c.m = 12;
    c.n = c.t = 10;
    c.gender = Gender::female;
    c.smoker = true;

    const auto f0 = encode_step(c, 0, s);
    CHECK(s.invert_one(f0[0], 0) == Approx(40.0).epsilon(1e-14));
    const auto f12 = encode_step(c, 12, s);
    CHECK(s.invert_one(f12[0], 0) == Approx(41.0).epsilon(1e-14)); // 12 monthly steps = 1 year
    CHECK(f0[2] == 1.0); // female
    CHECK(f0[3] == 1.0); // smoker
}

TEST_CASE("premium and sum insured never reach the features", "[training]") {
    const Model m = random_model(38);
    Contract c;
    c.a0 = 35;
    c.m = 4;
    c.n = c.t = 12;
    c.S = 250000.0;
    c.P = 1200.0;
    Contract c2 = c;
    c2.S = 999999.0;
    c2.P = 9.0;

    const auto f1 = encode_step(c, 5, m.res_scaler);
    const auto f2 = encode_step(c2, 5, m.res_scaler);
    CHECK(f1 == f2);
    const TransitionSequence s1 = predict_sequence(m, c);
    const TransitionSequence s2 = predict_sequence(m, c2);
    for (std::size_t k = 0; k < s1.size(); ++k) CHECK(s1[k].p01() == s2[k].p01());
}

TEST_CASE("model checkpoints round-trip bit-exactly", "[training]") {
    const Model m = random_model(39, {4, 6, 5, 2});
    const auto path = std::filesystem::temp_directory_path() / "lifecal_model.ckpt";
    save_model_checkpoint(path, m);
    const Model loaded = load_model_checkpoint(path);

    CHECK(loaded.base_gender == m.base_gender);
    CHECK(loaded.base.widths() == m.base.widths());
    CHECK(loaded.res.widths() == m.res.widths());
    CHECK(loaded.res_scaler == m.res_scaler);

    Rng rng(40);
    for (int trial = 0; trial < 5; ++trial) {
        const Contract c = oracle::random_contract(rng);
        const TransitionSequence a = predict_sequence(m, c);
        const TransitionSequence b = predict_sequence(loaded, c);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].p01() == b[k].p01());
    }
}

TEST_CASE("baseline checkpoints round-trip", "[training]") {
    Rng rng(41);
    BaselineCheckpoint b;
    b.net = BaselineModel::make({2, 12, 7, 2}, rng);
    b.scaler = table_grid_scaler();
    b.gender = Gender::female;
    const auto path = std::filesystem::temp_directory_path() / "lifecal_base.ckpt";
    save_baseline_checkpoint(path, b);
    const BaselineCheckpoint loaded = load_baseline_checkpoint(path);
    CHECK(loaded.gender == Gender::female);
    REQUIRE(loaded.net.layers.size() == b.net.layers.size());
    for (std::size_t l = 0; l < b.net.layers.size(); ++l) {
        CHECK(loaded.net.layers[l].W.data == b.net.layers[l].W.data);
        CHECK(loaded.net.layers[l].b.data == b.net.layers[l].b.data);
        CHECK(loaded.net.layers[l].act == b.net.layers[l].act);
    }
}

TEST_CASE("corrupt checkpoints are rejected", "[training]") {
    const auto path = std::filesystem::temp_directory_path() / "lifecal_corrupt.ckpt";
    write_file_atomic(path, "lifecal-checkpoint v1\nbase.gender male\nbase.widths 2 4 2\n");
    CHECK_THROWS_AS(load_baseline_checkpoint(path), SchemaError);
    write_file_atomic(path, "something else\n");
    CHECK_THROWS_AS(load_model_checkpoint(path), SchemaError);
}
