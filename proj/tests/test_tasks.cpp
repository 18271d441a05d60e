#include <set>
#include <sstream>

#include "doctest.h"
#include "gnsp/csv.hpp"
#include "gnsp/tasks.hpp"
#include "oracles.hpp"

using namespace gnsp;

namespace {

double centroid_accuracy(const TaskPair& t) {
    return oracle::nearest_centroid_accuracy(t.train.images, t.train.labels, t.test.images,
                                             t.test.labels, static_cast<int>(t.train.num_classes()));
}

}  // namespace

TEST_CASE("make_task shape and determinism") {
    const auto a = make_task(5, 3, 10, 8, 4, 2.0);
    const auto b = make_task(5, 3, 10, 8, 4, 2.0);
    CHECK(a.train.images == b.train.images);
    CHECK(a.test.images == b.test.images);
    CHECK(a.train.labels == b.train.labels);
    CHECK(a.train.class_prototypes == b.train.class_prototypes);
    CHECK(make_task(6, 3, 10, 8, 4, 2.0).train.images != a.train.images);

    CHECK(a.train.size() == 24);
    CHECK(a.test.size() == 6);
    CHECK(a.train.split == Split::Train);
    CHECK(a.test.split == Split::Test);
    CHECK(a.train.images.cols() == 8);
    CHECK(a.train.class_prototypes.rows() == 3);
    CHECK(a.train.class_prototypes.cols() == 4);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::count(a.train.labels.begin(), a.train.labels.end(), c) == 8);
        CHECK(std::count(a.test.labels.begin(), a.test.labels.end(), c) == 2);
    }

    CHECK_THROWS_AS(make_task(1, 0, 10, 8, 4, 1.0), ValueError);
    CHECK_THROWS_AS(make_task(1, 2, 10, 0, 4, 1.0), ValueError);
    CHECK_THROWS_AS(make_task(1, 2, 10, 8, 4, -1.0), ValueError);
}

TEST_CASE("separation drives nearest-centroid accuracy") {
    CHECK(centroid_accuracy(make_task(11, 4, 100, 32, 16, 10.0)) >= 0.99);
    const double chance = centroid_accuracy(make_task(12, 4, 1000, 32, 16, 0.0));
    CHECK(std::abs(chance - 0.25) <= 0.05);
}

TEST_CASE("common offset shifts every sample by the same vector") {
    TaskGeometry shifted;
    shifted.offset = 16.0;
    const auto plain = make_task(3, 4, 20, 32, 16, 14.0);
    const auto moved = make_task(3, 4, 20, 32, 16, 14.0, shifted);
    const Matrix diff = moved.train.images - plain.train.images;
    const RowVector first = diff.row(0);
    for (Eigen::Index i = 0; i < diff.rows(); ++i) CHECK((diff.row(i) - first).norm() <= 1e-12);
    CHECK(first.norm() == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(centroid_accuracy(moved) == centroid_accuracy(plain));
    CHECK(moved.train.class_prototypes == plain.train.class_prototypes);
}

TEST_CASE("make_reference_set") {
    CHECK(make_reference_set(1, 1000, 32, 16).size() == 1000);
    const auto one = make_reference_set(1, 1, 32, 16);
    CHECK(one.size() == 1);
    CHECK(one.texts.rows() == 1);
    const auto again = make_reference_set(1, 1, 32, 16);
    CHECK(again.images == one.images);

    const auto ref = make_reference_set(202, 1000, 32, 16);
    const auto task = make_task(1000, 4, 100, 32, 16, 14.0);
    std::set<std::vector<double>> seen;
    for (Eigen::Index i = 0; i < task.train.images.rows(); ++i) {
        const RowVector r = task.train.images.row(i);
        seen.insert(std::vector<double>(r.data(), r.data() + r.size()));
    }
    for (Eigen::Index i = 0; i < ref.images.rows(); ++i) {
        const RowVector r = ref.images.row(i);
        CHECK(seen.count(std::vector<double>(r.data(), r.data() + r.size())) == 0);
    }
    CHECK_THROWS_AS(make_reference_set(1, 0, 32, 16), ValueError);
}

TEST_CASE("split_cil") {
    const auto task = make_task(9, 10, 5, 6, 3, 3.0).train;
    const auto whole = split_cil(task, 1);
    REQUIRE(whole.size() == 1);
    CHECK(whole[0].images == task.images);
    CHECK(whole[0].labels == task.labels);

    const auto five = split_cil(task, 5);
    std::set<int> global;
    std::size_t rows = 0;
    for (const auto& part : five) {
        CHECK(part.num_classes() == 2);
        std::set<int> mine;
        for (int l : part.labels) mine.insert(l + part.class_offset);
        for (int g : mine) global.insert(g);
        rows += part.size();
    }
    CHECK(global.size() == 10);
    CHECK(rows == task.size());

    const auto three = split_cil(task, 3);
    CHECK(three[0].num_classes() == 4);
    CHECK(three[1].num_classes() == 3);
    CHECK(three[2].num_classes() == 3);
    // Sample order within a class survives.
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < task.size(); ++i) {
        if (task.labels[i] < 4) CHECK(three[0].images.row(r++) == task.images.row(static_cast<Eigen::Index>(i)));
    }
    CHECK_THROWS_AS(split_cil(task, 11), ValueError);
}

TEST_CASE("as_pairs and csv export") {
    const auto task = make_task(2, 3, 5, 4, 2, 1.0);
    const auto pairs = as_pairs(task.test);
    CHECK(pairs.size() == task.test.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        CHECK(pairs.texts.row(static_cast<Eigen::Index>(i)) ==
              task.test.class_prototypes.row(task.test.labels[i]));

    std::stringstream csv;
    write_dataset_csv(csv, task.test);
    const auto table = read_csv(csv);
    CHECK(table.header == std::vector<std::string>{"index", "label", "feature_0", "feature_1",
                                                   "feature_2", "feature_3"});
    REQUIRE(table.rows.size() == task.test.size());
    CHECK(parse_double(table.rows[1][2], 2) == task.test.images(1, 0));
}
