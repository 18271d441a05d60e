#include <random>
#include <sstream>

#include "doctest.h"
#include "gnsp/csv.hpp"
#include "gnsp/metrics.hpp"
#include "gnsp/trainer.hpp"
#include "oracles.hpp"

using namespace gnsp;

namespace {

EncoderStack identity_stack(Eigen::Index d) {
    EncoderStack s;
    s.layers.push_back({Matrix::Identity(d, d), Vector::Zero(d), Activation::Identity, true});
    return s;
}

DualEncoder identity_model(Eigen::Index d) { return {identity_stack(d), identity_stack(d), 0.07}; }

// Task whose images are exactly the class text inputs.
TaskDataset aligned_task(int classes, Eigen::Index d) {
    std::mt19937_64 rng(4);
    TaskDataset t;
    t.name = "aligned";
    t.split = Split::Test;
    t.class_prototypes = oracle::random_matrix(rng, classes, d);
    t.images.resize(3 * classes, d);
    for (int i = 0; i < 3 * classes; ++i) {
        t.labels.push_back(i % classes);
        t.images.row(i) = t.class_prototypes.row(i % classes);
    }
    return t;
}

Matrix grid(int tasks, double (*f)(int, int)) {
    Matrix g(tasks + 1, tasks);
    for (int i = 0; i <= tasks; ++i)
        for (int j = 0; j < tasks; ++j) g(i, j) = f(i, j + 1);
    return g;
}

}  // namespace

TEST_CASE("evaluate_accuracy") {
    const auto model = identity_model(5);
    auto task = aligned_task(4, 5);
    CHECK(evaluate_accuracy(model, task) == 1.0);
    for (auto& l : task.labels) l = (l + 1) % 4;
    CHECK(evaluate_accuracy(model, task) == 0.0);

    // Positive rescaling of every input leaves the cosine argmax alone.
    auto scaled = aligned_task(4, 5);
    scaled.images *= 7.5;
    CHECK(evaluate_accuracy(model, scaled) == 1.0);

    const auto random_model = make_dual_encoder(ModelSpec{});
    const auto sep10 = make_task(77, 4, 100, 32, 16, 10.0).test;
    const Matrix img = random_model.embed_images(sep10.images);
    const Matrix txt = random_model.embed_texts(sep10.class_prototypes);
    int correct = 0;
    for (Eigen::Index i = 0; i < img.rows(); ++i) {
        int best = 0;
        double best_d = INFINITY;
        for (int c = 0; c < 4; ++c) {
            const double d = (img.row(i) / img.row(i).norm() - txt.row(c) / txt.row(c).norm()).norm();
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best == sep10.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    const double oracle_acc = correct / static_cast<double>(img.rows());
    CHECK(std::abs(evaluate_accuracy(random_model, sep10) - oracle_acc) <= 0.05);

    TaskDataset empty = task;
    empty.labels.clear();
    empty.images.resize(0, 5);
    CHECK_THROWS_AS(evaluate_accuracy(model, empty), ValueError);
}

TEST_CASE("summarize") {
    const auto ones = summarize({Matrix::Ones(4, 3), {}});
    CHECK(*ones.transfer == 1.0);
    CHECK(ones.last == 1.0);
    CHECK(ones.average == 1.0);
    const auto zeros = summarize({Matrix::Zero(4, 3), {}});
    CHECK(*zeros.transfer == 0.0);
    CHECK(zeros.last == 0.0);
    CHECK(zeros.average == 0.0);

    const auto s = summarize({grid(3, [](int i, int j) { return 0.1 * (i + j); }), {}});
    CHECK(*s.transfer == doctest::Approx(0.325).epsilon(1e-12));
    CHECK(s.last == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.average == doctest::Approx(0.4).epsilon(1e-12));

    CHECK(!summarize({Matrix::Constant(2, 1, 0.5), {}}).transfer.has_value());
    CHECK_THROWS_AS(summarize({Matrix::Ones(3, 3), {}}), DimensionError);

    // Last and Average do not depend on column order.
    std::mt19937_64 rng(6);
    Matrix g = oracle::random_matrix(rng, 5, 4).cwiseAbs();
    Matrix swapped = g;
    swapped.col(0).swap(swapped.col(3));
    CHECK(summarize({g, {}}).last == doctest::Approx(summarize({swapped, {}}).last).epsilon(1e-15));
    CHECK(summarize({g, {}}).average == doctest::Approx(summarize({swapped, {}}).average).epsilon(1e-15));
}

TEST_CASE("retrieval_recall_at_k") {
    const auto model = identity_model(6);
    std::mt19937_64 rng(9);
    ReferenceSet aligned{"aligned", Matrix::Identity(6, 6), Matrix::Identity(6, 6), {0, 1, 2, 3, 4, 5}};
    CHECK(retrieval_recall_at_k(model, aligned, 1) == 1.0);

    ReferenceSet noise{"noise", oracle::random_matrix(rng, 100, 6), oracle::random_matrix(rng, 100, 6), {}};
    CHECK(retrieval_recall_at_k(model, noise, 100) == 1.0);
    const double r5 = retrieval_recall_at_k(model, noise, 5);
    CHECK(r5 >= 0.0);
    CHECK(r5 <= 0.15);
    double previous = 0.0;
    for (std::size_t k = 1; k <= 100; k += 9) {
        const double r = retrieval_recall_at_k(model, noise, k);
        CHECK(r >= previous);
        previous = r;
    }
    CHECK_THROWS_AS(retrieval_recall_at_k(model, noise, 0), ValueError);
    CHECK_THROWS_AS(retrieval_recall_at_k(model, noise, 101), ValueError);
}

TEST_CASE("track_gap and csv output") {
    const auto model = identity_model(4);
    std::mt19937_64 rng(10);
    const Matrix x = oracle::random_matrix(rng, 8, 4);
    ReferenceSet same{"same", x, x, {}};
    ReferenceSet other{"other", x, oracle::random_matrix(rng, 8, 4), {}};
    auto series = track_gap(model, {same, other}, 0, {});
    series = track_gap(model, {same, other}, 1, series);
    REQUIRE(series.records.size() == 4);
    CHECK(series.records[0].gap == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(series.records[1] == GapRecord{0, "other", series.records[3].gap});
    CHECK(series.values_for("other").size() == 2);

    std::ostringstream gap;
    write_gap_csv(gap, series);
    std::istringstream gap_in(gap.str());
    const auto table = read_csv(gap_in);
    CHECK(table.header == std::vector<std::string>{"checkpoint", "probe", "gap"});
    CHECK(table.rows.size() == 4);
    CHECK(parse_double(table.rows[3][2], 5) == series.records[3].gap);

    std::ostringstream acc, sum, rec;
    write_accuracy_csv(acc, {(Matrix(2, 1) << 0.25, 1).finished(), {"t1"}});
    CHECK(acc.str() == "after_task,t1\n0,0.25\n1,1\n");
    write_summary_csv(sum, summarize({(Matrix(2, 1) << 0.25, 1).finished(), {"t1"}}));
    CHECK(sum.str() == "transfer,last,average\n,1,1\n");
    write_recall_csv(rec, {{1, 0.5}, {5, 0.75}});
    CHECK(rec.str() == "k,recall\n1,0.5\n5,0.75\n");

    CHECK(standard_deviation({2, 4, 4, 4, 5, 5, 7, 9}) == 2.0);
    CHECK(standard_deviation({}) == 0.0);
}
