#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "sagc/error.hpp"
#include "sagc/evaluation.hpp"
#include "sagc/taxonomy.hpp"
#include "sagc/training.hpp"

using namespace sagc;

namespace {

template <class F>
ErrorKind error_kind(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::InvalidArgument;
}

std::vector<std::string> names(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("g" + std::to_string(100 + i));
    return out;
}

double mean_cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels, std::size_t c) {
    double total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double* row = logits.data() + i * c;
        const double m = *std::max_element(row, row + c);
        double z = 0;
        for (std::size_t k = 0; k < c; ++k) z += std::exp(row[k] - m);
        total += -(row[labels[i]] - m - std::log(z));
    }
    return total / static_cast<double>(labels.size());
}

int class_id(std::string_view name) { return *find_label(name); }

TrainConfig quick_config(int epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = 17;
    return cfg;
}

}  // namespace

TEST_CASE("split") {
    const auto s = split_dataset(names(68), 0.9, 3);
    CHECK(s.train.size() == 61);
    CHECK(s.test.size() == 7);
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    CHECK(std::is_sorted(s.test.begin(), s.test.end()));
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 68);

    CHECK(split_dataset(names(68), 0.9, 3) == s);
    std::vector<std::string> shuffled = names(68);
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(split_dataset(shuffled, 0.9, 3) == s);
    CHECK(split_dataset(names(68), 0.9, 4) != s);

    const auto two = split_dataset(names(2), 0.5, 1);
    CHECK(two.train.size() == 1);
    CHECK(two.test.size() == 1);
    CHECK(split_dataset(names(3), 0.1, 1).train.size() == 1);
    CHECK(split_dataset(names(3), 0.99, 1).train.size() == 2);

    CHECK(error_kind([] { split_dataset(names(1), 0.5, 1); }) == ErrorKind::TooFewGraphs);
    CHECK(error_kind([] { split_dataset(names(5), 1.0, 1); }) == ErrorKind::InvalidArgument);
    CHECK(split_from_json(to_json(s)) == s);
}

TEST_CASE("focal loss values") {
    const std::vector<double> uniform2{1.0, 1.0};
    auto logits = ad::Tensor::constant({1, 2}, {0.0, 0.0});
    const std::vector<int> label{0};
    CHECK(focal_loss(logits, label, 2.0, uniform2).item() ==
          doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
    CHECK(focal_loss(logits, label, 2.0, uniform2).item() == doctest::Approx(0.173287).epsilon(1e-6));

    auto confident = ad::Tensor::constant({1, 2}, {40.0, -40.0});
    CHECK(focal_loss(confident, label, 2.0, uniform2).item() <= 1e-30);

    const std::vector<double> weights{3.0, 1.0};
    CHECK(focal_loss(logits, label, 2.0, weights).item() == doctest::Approx(0.75 * std::log(2.0)).epsilon(1e-12));

    // Monotone decreasing in p_y for fixed gamma and alpha.
    for (double gamma : {0.0, 0.5, 2.0, 5.0}) {
        double previous = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= 9; ++i) {
            const double p = i / 10.0;
            auto lg = ad::Tensor::constant({1, 2}, {std::log(p), std::log(1 - p)});
            const double l = focal_loss(lg, label, gamma, uniform2).item();
            CHECK(l >= 0.0);
            CHECK(l < previous);
            previous = l;
        }
    }

    // Probability floor keeps confident mistakes finite.
    auto wrong = ad::Tensor::constant({1, 2}, {-800.0, 800.0});
    const double floored = focal_loss(wrong, label, 0.0, uniform2).item();
    CHECK(floored == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("focal loss with gamma 0 is cross-entropy") {
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> cls(0, kNumClasses - 1);
    const std::vector<double> ones(kNumClasses, 1.0);
    double worst = 0;
    for (int draw = 0; draw < 200; ++draw) {
        const std::size_t n = 1 + draw % 7;
        const auto values = test::random_values(gen, n * kNumClasses, -6, 6);
        std::vector<int> labels(n);
        for (auto& l : labels) l = cls(gen);
        const double focal = focal_loss(ad::Tensor::constant({n, kNumClasses}, values), labels, 0.0, ones).item();
        worst = std::max(worst, std::abs(focal - mean_cross_entropy(values, labels, kNumClasses)));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("focal loss gradient and errors") {
    std::mt19937_64 gen(6);
    auto logits = test::random_param(gen, {4, kNumClasses}, -2, 2);
    const std::vector<int> labels{3, 0, 27, 14};
    const auto w = default_class_weights(labels);
    const auto r = test::grad_check({logits}, [&] { return focal_loss(logits, labels, 2.0, w); });
    CHECK(r.max_rel_error <= 1e-6);

    const std::vector<int> bad{3, 0, 28, 14};
    CHECK(error_kind([&] { focal_loss(logits, bad, 2.0, w); }) == ErrorKind::LabelOutOfRange);
    const std::vector<int> short_labels{1};
    CHECK(error_kind([&] { focal_loss(logits, short_labels, 2.0, w); }) == ErrorKind::ShapeMismatch);
    const std::vector<double> few(3, 1.0);
    CHECK(error_kind([&] { focal_loss(logits, labels, 2.0, few); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("default class weights") {
    std::vector<int> balanced;
    for (int c = 0; c < kNumClasses; ++c) balanced.insert(balanced.end(), 3, c);
    for (double w : default_class_weights(balanced)) CHECK(w == doctest::Approx(1.0));

    // Class 0 at half the average frequency, the others at the average.
    std::vector<int> labels;
    for (int c = 1; c < kNumClasses; ++c) labels.insert(labels.end(), 56, c);
    labels.insert(labels.end(), 28, 0);
    const auto w = default_class_weights(labels);
    CHECK(w[0] / w[1] == doctest::Approx(2.0));
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / kNumClasses;
    CHECK(mean == doctest::Approx(1.0));

    // Training-split counts of InternalDoor, Bedroom and DiningRoom.
    std::vector<int> table;
    table.insert(table.end(), 1267, class_id("InternalDoor"));
    table.insert(table.end(), 434, class_id("Bedroom"));
    table.insert(table.end(), 2, class_id("DiningRoom"));
    const auto tw = default_class_weights(table);
    CHECK(tw[class_id("InternalDoor")] < tw[class_id("Bedroom")]);
    CHECK(tw[class_id("Bedroom")] < tw[class_id("DiningRoom")]);
    CHECK(tw[class_id("Kitchen")] == 1.0);
    CHECK(tw[class_id("DiningRoom")] / tw[class_id("InternalDoor")] == doctest::Approx(100.0));
}

TEST_CASE("adam") {
    TrainConfig cfg;
    auto p = ad::Tensor::parameter({3}, {0.5, -0.5, 2.0});
    AdamState state;
    std::vector<ad::Tensor> params{p};
    std::vector<std::vector<double>> grads{{1.0, -1.0, 0.0}};
    adam_step(params, grads, state, cfg);
    CHECK(state.step == 1);
    CHECK(p.at(0) - 0.5 == doctest::Approx(-0.001).epsilon(1e-6));
    CHECK(p.at(1) + 0.5 == doctest::Approx(0.001).epsilon(1e-6));
    CHECK(p.at(2) == 2.0);

    auto q = ad::Tensor::parameter({2}, {1.0, 2.0});
    AdamState zero_state;
    std::vector<ad::Tensor> qs{q};
    std::vector<std::vector<double>> zero{{0.0, 0.0}};
    adam_step(qs, zero, zero_state, cfg);
    CHECK(zero_state.step == 1);
    CHECK(q.at(0) == 1.0);
    CHECK(q.at(1) == 2.0);

    auto a = ad::Tensor::parameter({2}, {0.3, 0.4});
    auto b = ad::Tensor::parameter({2}, {0.3, 0.4});
    std::vector<ad::Tensor> pair{a, b};
    AdamState pair_state;
    for (int i = 0; i < 5; ++i) {
        std::vector<std::vector<double>> g{{0.1 * i, -0.2}, {0.1 * i, -0.2}};
        adam_step(pair, g, pair_state, cfg);
    }
    CHECK(a.at(0) == b.at(0));
    CHECK(a.at(1) == b.at(1));

    std::vector<std::vector<double>> wrong{{1.0}};
    CHECK(error_kind([&] { adam_step(qs, wrong, zero_state, cfg); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.learning_rate = 0;
    CHECK(error_kind([&] { cfg.check(); }) == ErrorKind::InvalidArgument);
    TrainConfig w;
    w.class_weights = {1.0, 2.0};
    CHECK(error_kind([&] { w.check(); }) == ErrorKind::DimensionMismatch);
    const std::vector<FeaturizedGraph> none;
    CHECK(error_kind([&] { train(none, quick_config(1)); }) == ErrorKind::EmptyTrainingSet);
}

TEST_CASE("training loop bookkeeping and determinism") {
    const std::vector<FeaturizedGraph> data{featurize(synth_fixture(3, 6)), featurize(synth_fixture(4, 5))};
    int calls = 0;
    const auto a = train(data, quick_config(40), ModelConfig::standard(),
                         [&](const TrainProgress& p) { calls += p.epoch > 0 ? 1 : 0; });
    CHECK(calls == 40);
    REQUIRE(a.loss_trace.size() == 40);
    const auto best = std::min_element(a.loss_trace.begin(), a.loss_trace.end());
    CHECK(a.checkpoint.best_loss == *best);
    CHECK(a.checkpoint.best_epoch == 1 + (best - a.loss_trace.begin()));
    CHECK(a.checkpoint.best_loss <= a.loss_trace.front());
    CHECK(a.loss_trace.back() < a.loss_trace.front());
    CHECK(a.checkpoint.train_graphs == std::vector<std::string>{data[0].name, data[1].name});
    CHECK(a.checkpoint.class_weights.size() == kNumClasses);

    const auto b = train(data, quick_config(40));
    CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
    CHECK(a.loss_trace == b.loss_trace);

    auto other = quick_config(40);
    other.seed = 18;
    CHECK(serialize_checkpoint(train(data, other).checkpoint) != serialize_checkpoint(a.checkpoint));

    auto unweighted = quick_config(2);
    unweighted.use_class_weights = false;
    for (double x : train(data, unweighted).checkpoint.class_weights) CHECK(x == 1.0);

    const std::string csv = loss_trace_csv(a.loss_trace);
    CHECK(csv.rfind("epoch,loss\n1,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);
}

TEST_CASE("checkpoint round trip") {
    const std::vector<FeaturizedGraph> data{featurize(synth_fixture(5, 6))};
    const auto result = train(data, quick_config(5));
    const auto& ckpt = result.checkpoint;
    const std::string bytes = serialize_checkpoint(ckpt);
    CHECK(bytes.rfind("SAGCCKPT", 0) == 0);

    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back.model_config == ckpt.model_config);
    CHECK(back.stats == ckpt.stats);
    CHECK(back.train_config == ckpt.train_config);
    CHECK(back.class_weights == ckpt.class_weights);
    CHECK(back.train_graphs == ckpt.train_graphs);
    CHECK(back.best_loss == ckpt.best_loss);
    CHECK(back.best_epoch == ckpt.best_epoch);
    CHECK(back.params.seed == ckpt.params.seed);
    const auto ta = ckpt.params.tensors(), tb = back.params.tensors();
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        CHECK(ta[i].shape() == tb[i].shape());
        CHECK(std::equal(ta[i].data().begin(), ta[i].data().end(), tb[i].data().begin()));
    }
    CHECK(serialize_checkpoint(back) == bytes);

    const auto dir = test::temp_dir("ckpt");
    save_checkpoint(ckpt, dir / "model.sagc");
    const Checkpoint loaded = load_checkpoint(dir / "model.sagc");
    const FeaturizedGraph probe = featurize(synth_fixture(9, 7));
    const auto p1 = predict(ckpt, probe);
    const auto p2 = predict(loaded, probe);
    CHECK(p1.predicted == p2.predicted);
    CHECK(p1.probabilities == p2.probabilities);
    CHECK(p1.penultimate == p2.penultimate);

    CHECK(error_kind([&] { deserialize_checkpoint(bytes.substr(0, bytes.size() - 9)); }) == ErrorKind::CorruptPayload);
    CHECK(error_kind([&] { deserialize_checkpoint(bytes.substr(0, 20)); }) == ErrorKind::CorruptPayload);
    CHECK(error_kind([&] { deserialize_checkpoint("hello"); }) == ErrorKind::CorruptPayload);
    std::string flipped = bytes;
    flipped[flipped.size() - 3] = static_cast<char>(flipped[flipped.size() - 3] ^ 0x10);
    CHECK(error_kind([&] { deserialize_checkpoint(flipped); }) == ErrorKind::CorruptPayload);

    std::string bumped = bytes;
    const auto pos = bumped.find("\"format_version\":1");
    REQUIRE(pos != std::string::npos);
    bumped[pos + 17] = '2';
    try {
        deserialize_checkpoint(bumped);
        FAIL("loaded");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::VersionMismatch);
        CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
    CHECK(error_kind([&] { load_checkpoint(dir / "missing.sagc"); }) == ErrorKind::IoFailure);
    std::filesystem::remove_all(dir);
}

TEST_CASE("capacity on a single graph") {
    const std::vector<FeaturizedGraph> data{featurize(synth_fixture(42, 40))};
    auto cfg = quick_config(2000);
    const auto result = train(data, cfg);
    const auto report = evaluate(result.checkpoint, data);
    MESSAGE("nodes " << report.total_support << ", accuracy " << report.accuracy());
    CHECK(report.accuracy() >= 0.95);
}
