// SPDX-License-Identifier: Apache-2.0
#include "dot/tensor.hpp"

#include <gtest/gtest.h>

#include "dot/csv.hpp"
#include "dot/tensor_map.hpp"

namespace dot {
namespace {

TEST(Tensor, ShapeAndData) {
    Tensor t({2, 3});
    EXPECT_EQ(t.size(), 6u);
    EXPECT_EQ(t.rank(), 2u);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], 0.0);

    Tensor s = Tensor::scalar(4.5);
    EXPECT_EQ(s.rank(), 0u);
    EXPECT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0], 4.5);
}

TEST(Tensor, RejectsMismatchedData) {
    EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
    EXPECT_THROW(Tensor({0}), std::invalid_argument);
}

TEST(Tensor, ShapeMismatchDiagnosticNamesBothShapes) {
    Tensor a({2, 3});
    Tensor b({3, 2});
    try {
        require_same_shape(a, b, "op");
        FAIL() << "expected a throw";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[3x2]"), std::string::npos) << msg;
    }
}

TEST(Rng, DeterministicStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.unit(), b.unit());
}

TEST(Rng, UniformRange) {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-2.0, 3.0);
        EXPECT_GE(v, -2.0);
        EXPECT_LT(v, 3.0);
    }
}

TEST(Rng, GaussianMoments) {
    Rng rng(11);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sum_sq += g * g;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.05);
    EXPECT_NEAR(sum_sq / n, 1.0, 0.05);
}

TEST(Rng, ShuffleIsPermutation) {
    Rng rng(3);
    std::vector<int> v = {0, 1, 2, 3, 4, 5, 6, 7};
    auto shuffled = v;
    rng.shuffle(shuffled);
    auto sorted = shuffled;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, v);
}

TEST(TensorMap, InsertionOrderAndLookup) {
    TensorMap m;
    m.add("b", Tensor::scalar(1.0));
    m.add("a", Tensor::scalar(2.0));
    EXPECT_EQ(m.names(), (std::vector<std::string>{"b", "a"}));
    EXPECT_EQ(m.at("a")[0], 2.0);
    EXPECT_THROW(m.add("a", Tensor::scalar(0.0)), std::invalid_argument);
    EXPECT_THROW(m.at("missing"), std::out_of_range);
}

TEST(TensorMap, SerializationRoundTripIsExact) {
    TensorMap m;
    m.add("layer0.weight", Tensor({2, 2}, {0.1, -1.0 / 3.0, 1e-300, 12345.678901234567}));
    m.add("layer0.bias", Tensor({2}, {0.0, -0.0}));
    m.add("scalarish", Tensor::scalar(2.718281828459045));
    const std::string text = tensors_to_string(m);
    TensorMap back = tensors_from_string(text);
    EXPECT_TRUE(m == back);
}

TEST(FormatDouble, RoundTripExact) {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double v = (rng.unit() - 0.5) * std::pow(10.0, rng.uniform(-30, 30));
        EXPECT_EQ(parse_double(format_double(v)), v);
    }
    EXPECT_EQ(parse_double(format_double(0.0)), 0.0);
}

TEST(Csv, EmptyRecordListGivesHeaderOnlyFile) {
    const std::string path = ::testing::TempDir() + "empty.csv";
    emit_csv("a,b,c", {}, path);
    CsvTable table = read_csv(path);
    EXPECT_EQ(table.header, (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_TRUE(table.rows.empty());
}

TEST(Csv, RowsRoundTrip) {
    const std::string path = ::testing::TempDir() + "rows.csv";
    emit_csv("x,y", {format_double(1.5) + "," + format_double(-2.25), format_double(0.1) + "," + format_double(3.0)},
             path);
    CsvTable table = read_csv(path);
    ASSERT_EQ(table.rows.size(), 2u);
    EXPECT_EQ(parse_double(table.rows[0][0]), 1.5);
    EXPECT_EQ(parse_double(table.rows[1][0]), 0.1);
}

}  // namespace
}  // namespace dot
