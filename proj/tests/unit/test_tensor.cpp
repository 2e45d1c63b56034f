#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "unirec/tensor/gradcheck.hpp"
#include "unirec/tensor/ops.hpp"

using namespace unirec;

namespace {

Tensor mat(std::size_t r, std::size_t c, std::vector<Real> v, bool grad = false) {
    return Tensor::from_data({r, c}, std::move(v), grad);
}

// Weighted sum with fixed random weights so every output entry carries a
// distinct upstream gradient.
Tensor probe(const Tensor& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor w = Tensor::randn(y.shape(), rng, 1.0);
    return sum(mul(y, w));
}

double check(const std::function<Tensor()>& loss, NamedTensors params) {
    GradCheckOptions opts;
    opts.step = 1e-6;
    return check_gradients(loss, std::move(params), opts).max_rel_error;
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    Tensor eye = mat(2, 2, {1, 0, 0, 1});
    Tensor m = mat(2, 2, {1, 2, 3, 4});
    Tensor out = matmul(eye, m);
    EXPECT_EQ(std::vector<Real>(out.data().begin(), out.data().end()), (std::vector<Real>{1, 2, 3, 4}));
}

TEST(Matmul, RowTimesColumn) {
    Tensor out = matmul(mat(1, 2, {1, 2}), mat(2, 1, {3, 4}));
    ASSERT_EQ(out.shape(), (Shape{1, 1}));
    EXPECT_EQ(out.item(), 11.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    try {
        matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos);
        EXPECT_EQ(msg.find("[2x3]"), msg.rfind("[2x3]") - (msg.rfind("[2x3]") - msg.find("[2x3]")));
        EXPECT_NE(msg.find("[2x3] x [2x3]"), std::string::npos);
    }
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor b = Tensor::randn({4, 2}, rng, 1.0, true);
    const double err = check([&] { return sum(matmul(a, b)); }, {{"a", a}, {"b", b}});
    EXPECT_LT(err, 1e-5);
}

TEST(Matmul, AssociativityOnRandomTriples) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = Tensor::randn({3, 5}, rng, 1.0);
        Tensor b = Tensor::randn({5, 4}, rng, 1.0);
        Tensor c = Tensor::randn({4, 2}, rng, 1.0);
        Tensor left = matmul(matmul(a, b), c);
        Tensor right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.numel(); ++i) {
            EXPECT_LE(relative_error(left.data()[i], right.data()[i], 1e-12), 1e-8);
        }
    }
}

TEST(Softmax, SymmetricInputIsUniform) {
    Tensor y = softmax(mat(1, 2, {0, 0}));
    EXPECT_DOUBLE_EQ(y.data()[0], 0.5);
    EXPECT_DOUBLE_EQ(y.data()[1], 0.5);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
    Tensor y = softmax(mat(1, 2, {1000, 0}));
    EXPECT_DOUBLE_EQ(y.data()[0], 1.0);
    EXPECT_TRUE(std::isfinite(y.data()[1]));
    EXPECT_LT(y.data()[1], 1e-300);
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    Tensor x = Tensor::randn({1, 5}, rng, 1.0, true);
    EXPECT_LT(check([&] { return probe(softmax(x), 99); }, {{"x", x}}), 1e-5);
}

TEST(Softmax, RowsSumToOneAtAnyMagnitude) {
    std::mt19937_64 rng(5);
    for (double magnitude : {1e-3, 1.0, 1e2, 1e4}) {
        Tensor x = Tensor::randn({16, 9}, rng, magnitude);
        Tensor y = softmax(x);
        for (std::size_t r = 0; r < 16; ++r) {
            double total = 0;
            for (std::size_t c = 0; c < 9; ++c) total += y.at(r, c);
            EXPECT_NEAR(total, 1.0, 1e-12) << "magnitude " << magnitude;
        }
    }
}

TEST(Elementwise, L2NormalizeThreeFourFive) {
    Tensor y = l2_normalize(mat(1, 2, {3, 4}));
    EXPECT_DOUBLE_EQ(y.data()[0], 0.6);
    EXPECT_DOUBLE_EQ(y.data()[1], 0.8);
}

TEST(Elementwise, L2NormalizeRejectsZeroRow) {
    EXPECT_THROW(l2_normalize(mat(1, 3, {0, 0, 0})), NumericError);
}

TEST(Elementwise, LayerNormOfConstantIsZero) {
    Tensor x = mat(1, 4, {2.5, 2.5, 2.5, 2.5});
    Tensor y = layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}));
    for (Real v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Elementwise, GeluGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(13);
    Tensor x = Tensor::randn({4, 6}, rng, 2.0, true);
    EXPECT_LT(check([&] { return probe(gelu(x), 1); }, {{"x", x}}), 1e-4);
}

TEST(Elementwise, GeluKnownValues) {
    Tensor y = gelu(mat(1, 3, {0.0, 1.0, -1.0}));
    EXPECT_DOUBLE_EQ(y.data()[0], 0.0);
    EXPECT_NEAR(y.data()[1], 0.8413447460685429, 1e-12);
    EXPECT_NEAR(y.data()[2], -0.15865525393145707, 1e-12);
}

TEST(Elementwise, ConcatAndSliceRoundTrip) {
    Tensor a = mat(2, 2, {1, 2, 3, 4});
    Tensor b = mat(2, 1, {5, 6});
    std::vector<Tensor> parts{a, b};
    Tensor c = concat(parts, 1);
    ASSERT_EQ(c.shape(), (Shape{2, 3}));
    EXPECT_EQ(c.at(1, 2), 6.0);
    Tensor back = slice(c, 1, 0, 2);
    EXPECT_EQ(std::vector<Real>(back.data().begin(), back.data().end()), (std::vector<Real>{1, 2, 3, 4}));
    EXPECT_THROW(slice(c, 1, 2, 2), ShapeError);
}

TEST(Elementwise, BiasBroadcastOnlyOverLeadingAxis) {
    Tensor x = mat(2, 3, {0, 0, 0, 1, 1, 1});
    Tensor b = Tensor::from_data({3}, {1, 2, 3});
    Tensor y = add(x, b);
    EXPECT_EQ(y.at(1, 2), 4.0);
    EXPECT_THROW(add(x, Tensor::zeros({2})), ShapeError);
    EXPECT_THROW(add(x, Tensor::zeros({2, 1})), ShapeError);
}

TEST(Backward, SquareAtThree) {
    Tensor x = Tensor::scalar(3.0, true);
    mul(x, x).backward();
    EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, ProductOfTwoLeaves) {
    Tensor x = Tensor::scalar(2.0, true);
    Tensor y = Tensor::scalar(5.0, true);
    mul(x, y).backward();
    EXPECT_EQ(x.grad()[0], 5.0);
    EXPECT_EQ(y.grad()[0], 2.0);
}

TEST(Backward, AccumulatesAcrossUses) {
    Tensor x = Tensor::scalar(1.5, true);
    // x used three times: d/dx (x + x + x) = 3
    add(add(x, x), x).backward();
    EXPECT_EQ(x.grad()[0], 3.0);
    Tensor y = Tensor::scalar(2.0, true);
    mul(y, y).backward();
    mul(y, y).backward();  // fresh graph, gradient adds
    EXPECT_EQ(y.grad()[0], 8.0);
}

TEST(Backward, RejectsNonScalarLoss) {
    Tensor x = Tensor::zeros({2, 2}, true);
    EXPECT_THROW(scale(x, 2.0).backward(), ShapeError);
}

TEST(Backward, RejectsDetachedLoss) {
    Tensor x = Tensor::scalar(1.0, false);
    EXPECT_THROW(mul(x, x).backward(), NumericError);
    Tensor p = Tensor::scalar(1.0, true);
    Tensor cut = mul(p, p).detach();
    EXPECT_THROW(cut.backward(), NumericError);
}

TEST(Backward, RejectsSecondCallOnConsumedGraph) {
    Tensor x = Tensor::scalar(2.0, true);
    Tensor h = mul(x, x);
    Tensor loss = scale(h, 3.0);
    loss.backward();
    EXPECT_THROW(loss.backward(), NumericError);
    // another loss reusing the consumed intermediate is rejected too
    EXPECT_THROW(scale(h, 2.0).backward(), NumericError);
}

TEST(Backward, NoGradGuardBuildsNoGraph) {
    Tensor x = Tensor::scalar(2.0, true);
    NoGradGuard guard;
    Tensor y = mul(x, x);
    EXPECT_FALSE(y.requires_grad());
}

TEST(FiniteChecks, RejectNonFiniteOutputsWhenEnabled) {
    set_finite_checks(true);
    Tensor x = mat(1, 2, {1e308, 1e308});
    EXPECT_THROW(scale(x, 10.0), NumericError);
    set_finite_checks(false);
    EXPECT_NO_THROW(scale(x, 10.0));
}

TEST(SegmentAttention, SingleKeyReturnsItsValue) {
    std::mt19937_64 rng(1);
    Tensor q = Tensor::randn({3, 4}, rng, 1.0);
    Tensor k = Tensor::randn({1, 4}, rng, 1.0);
    Tensor v = Tensor::randn({1, 4}, rng, 1.0);
    std::vector<AttentionSpan> spans{{0, 3, 0, 1}};
    Tensor out = segment_attention(q, k, v, spans, 2);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(out.at(r, c), v.at(0, c));
}

TEST(SegmentAttention, MaskedKeyDoesNotChangeOutput) {
    std::mt19937_64 rng(2);
    Tensor q = Tensor::randn({2, 4}, rng, 1.0);
    Tensor k = Tensor::randn({3, 4}, rng, 1.0);
    Tensor v = Tensor::randn({3, 4}, rng, 1.0);
    std::vector<AttentionSpan> two{{0, 2, 0, 2}};
    std::vector<AttentionSpan> three{{0, 2, 0, 3}};
    std::vector<unsigned char> mask{1, 1, 0};
    Tensor a = segment_attention(q, slice(k, 0, 0, 2), slice(v, 0, 0, 2), two, 2);
    Tensor b = segment_attention(q, k, v, three, 2, mask);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
    std::vector<unsigned char> none{0, 0, 0};
    EXPECT_THROW(segment_attention(q, k, v, three, 2, none), NumericError);
}

TEST(SegmentAttention, PermutingKeysIsBitIdentical) {
    std::mt19937_64 rng(4);
    Tensor q = Tensor::randn({4, 8}, rng, 1.0);
    Tensor k = Tensor::randn({6, 8}, rng, 1.0);
    Tensor v = Tensor::randn({6, 8}, rng, 1.0);
    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<AttentionSpan> spans{{0, 4, 0, 6}};
    Tensor a = segment_attention(q, k, v, spans, 2);
    Tensor b = segment_attention(q, gather_rows(k, perm), gather_rows(v, perm), spans, 2);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
}

TEST(SegmentAttention, JointOrthogonalRotationPreservesWeights) {
    std::mt19937_64 rng(6);
    const std::size_t d = 5;
    Tensor q = Tensor::randn({3, d}, rng, 1.0);
    Tensor k = Tensor::randn({4, d}, rng, 1.0);
    // Gram-Schmidt on a random matrix gives an orthogonal R.
    std::vector<double> r(d * d);
    std::normal_distribution<double> nd;
    for (double& x : r) x = nd(rng);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += r[i * d + c] * r[j * d + c];
            for (std::size_t c = 0; c < d; ++c) r[i * d + c] -= dot * r[j * d + c];
        }
        double n = 0;
        for (std::size_t c = 0; c < d; ++c) n += r[i * d + c] * r[i * d + c];
        for (std::size_t c = 0; c < d; ++c) r[i * d + c] /= std::sqrt(n);
    }
    Tensor rot = Tensor::from_data({d, d}, std::vector<Real>(r.begin(), r.end()));
    std::vector<AttentionSpan> spans{{0, 3, 0, 4}};
    auto w0 = attention_weights(q, k, spans, 1);
    auto w1 = attention_weights(matmul(q, rot), matmul(k, rot), spans, 1);
    ASSERT_EQ(w0.size(), w1.size());
    for (std::size_t i = 0; i < w0.size(); ++i) EXPECT_NEAR(w0[i], w1[i], 1e-8);
}

// Every op in the vocabulary, on 20 random inputs each, against central
// differences with step 1e-6.
TEST(GradientProperty, EveryOpMatchesFiniteDifferences) {
    using Case = std::function<double(std::mt19937_64&)>;
    std::vector<std::pair<std::string, Case>> cases;
    auto leaf = [](std::mt19937_64& rng, Shape s, double sd = 1.0) { return Tensor::randn(s, rng, sd, true); };
    cases.push_back({"matmul", [&](auto& rng) {
                         Tensor a = leaf(rng, {3, 4}), b = leaf(rng, {4, 2});
                         return check([&] { return probe(matmul(a, b), 1); }, {{"a", a}, {"b", b}});
                     }});
    cases.push_back({"transpose", [&](auto& rng) {
                         Tensor a = leaf(rng, {3, 2});
                         return check([&] { return probe(transpose(a), 2); }, {{"a", a}});
                     }});
    cases.push_back({"add_rows", [&](auto& rng) {
                         Tensor a = leaf(rng, {3, 4}), b = leaf(rng, {4});
                         return check([&] { return probe(add(a, b), 3); }, {{"a", a}, {"b", b}});
                     }});
    cases.push_back({"sub_mul_scale", [&](auto& rng) {
                         Tensor a = leaf(rng, {2, 3}), b = leaf(rng, {2, 3});
                         return check([&] { return probe(scale(mul(sub(a, b), a), 0.7), 4); }, {{"a", a}, {"b", b}});
                     }});
    cases.push_back({"concat_slice", [&](auto& rng) {
                         Tensor a = leaf(rng, {2, 3}), b = leaf(rng, {2, 2}), c = leaf(rng, {1, 5});
                         return check(
                             [&] {
                                 std::vector<Tensor> cols{a, b};
                                 std::vector<Tensor> rows{concat(cols, 1), c};
                                 return probe(slice(concat(rows, 0), 1, 1, 3), 5);
                             },
                             {{"a", a}, {"b", b}, {"c", c}});
                     }});
    cases.push_back({"gather_segment_mean", [&](auto& rng) {
                         Tensor a = leaf(rng, {4, 3});
                         std::vector<std::size_t> idx{2, 0, 2, 3, 1};
                         std::vector<Segment> segs{{0, 2}, {2, 3}};
                         return check([&] { return probe(segment_mean(gather_rows(a, idx), segs), 6); }, {{"a", a}});
                     }});
    cases.push_back({"mean_rowsum_square_sqrt", [&](auto& rng) {
                         Tensor a = leaf(rng, {3, 4});
                         return check([&] { return mean(sqrt(add(row_sum(square(a)), Tensor::full({1}, 0.1)))); },
                                      {{"a", a}});
                     }});
    cases.push_back({"relu", [&](auto& rng) {
                         Tensor a = leaf(rng, {3, 4});
                         // keep entries away from the kink
                         for (Real& v : a.mutable_data()) v = v > 0 ? v + 0.1 : v - 0.1;
                         return check([&] { return probe(relu(a), 7); }, {{"a", a}});
                     }});
    cases.push_back({"gelu", [&](auto& rng) {
                         Tensor a = leaf(rng, {3, 4}, 2.0);
                         return check([&] { return probe(gelu(a), 8); }, {{"a", a}});
                     }});
    cases.push_back({"layer_norm", [&](auto& rng) {
                         Tensor x = leaf(rng, {3, 5}), g = leaf(rng, {5}), b = leaf(rng, {5});
                         return check([&] { return probe(layer_norm(x, g, b), 9); }, {{"x", x}, {"g", g}, {"b", b}});
                     }});
    cases.push_back({"softmax", [&](auto& rng) {
                         Tensor x = leaf(rng, {3, 5}, 2.0);
                         return check([&] { return probe(softmax(x), 10); }, {{"x", x}});
                     }});
    cases.push_back({"l2_normalize", [&](auto& rng) {
                         Tensor x = leaf(rng, {3, 4});
                         return check([&] { return probe(l2_normalize(x), 11); }, {{"x", x}});
                     }});
    cases.push_back({"cross_entropy", [&](auto& rng) {
                         Tensor x = leaf(rng, {4, 4}, 2.0);
                         std::vector<std::size_t> t{0, 3, 1, 1};
                         return check([&] { return cross_entropy(x, t); }, {{"x", x}});
                     }});
    cases.push_back({"segment_attention", [&](auto& rng) {
                         Tensor q = leaf(rng, {5, 4}), k = leaf(rng, {6, 4}), v = leaf(rng, {6, 4});
                         std::vector<AttentionSpan> spans{{0, 2, 0, 4}, {2, 3, 3, 3}};
                         std::vector<unsigned char> mask{1, 0, 1, 1, 1, 1};
                         return check([&] { return probe(segment_attention(q, k, v, spans, 2, mask), 12); },
                                      {{"q", q}, {"k", k}, {"v", v}});
                     }});
    for (auto& [name, run] : cases) {
        std::mt19937_64 rng(std::hash<std::string>{}(name) % 1000);
        double worst = 0;
        for (int trial = 0; trial < 20; ++trial) worst = std::max(worst, run(rng));
        EXPECT_LT(worst, 1e-4) << name;
    }
}
