#include <cmath>

#include <doctest.h>

#include "deltak/error.hpp"
#include "deltak/matrix.hpp"
#include "deltak/rng.hpp"

using namespace deltak;

namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    DenseMatrix m(rows, cols);
    SplitMix64 stream(seed);
    for (double& v : m.data()) v = stream.next_gaussian();
    return m;
}

// brute-force oracle, kept independent of matmul()
DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(r, k) * b(k, c);
            out(r, c) = acc;
        }
    return out;
}

}  // namespace

TEST_CASE("softmax_rows basics") {
    SUBCASE("zero row is uniform") {
        const auto out = softmax_rows(DenseMatrix::from_rows({{0.0, 0.0, 0.0}}));
        for (std::size_t c = 0; c < 3; ++c) CHECK(out(0, c) == doctest::Approx(1.0 / 3).epsilon(1e-15));
    }
    SUBCASE("hand-evaluated two-logit row") {
        const auto out = softmax_rows(DenseMatrix::from_rows({{std::log(2.0), 0.0}}));
        CHECK(out(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-14));
        CHECK(out(0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-14));
    }
    SUBCASE("huge logit gap does not overflow") {
        const auto out = softmax_rows(DenseMatrix::from_rows({{1000.0, 0.0}}));
        CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(out(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(all_finite(out));
    }
    SUBCASE("empty input rejected") {
        CHECK_THROWS_AS(softmax_rows(DenseMatrix{}), DimensionError);
    }
}

TEST_CASE("softmax_rows properties") {
    const auto m = random_matrix(6, 5, 11);
    const auto out = softmax_rows(m);

    SUBCASE("rows are distributions") {
        for (std::size_t r = 0; r < out.rows(); ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < out.cols(); ++c) {
                CHECK(out(r, c) >= 0.0);
                CHECK(out(r, c) <= 1.0);
                sum += out(r, c);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
    SUBCASE("per-row constant shifts cancel") {
        DenseMatrix shifted = m;
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) shifted(r, c) += 3.5 * double(r + 1);
        const auto out2 = softmax_rows(shifted);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(std::abs(out.data()[i] - out2.data()[i]) <= 1e-12);
    }
}

TEST_CASE("scaled_dot_attention") {
    SUBCASE("zero queries attend uniformly") {
        const DenseMatrix q(2, 4);
        const auto k = random_matrix(3, 4, 5);
        const auto v = random_matrix(3, 4, 6);
        const auto out = scaled_dot_attention(q, k, v);
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(out.map(r, c) == doctest::Approx(1.0 / 3).epsilon(1e-14));
    }
    SUBCASE("single key degenerates to that value") {
        const auto q = DenseMatrix::from_rows({{1.0}});
        const auto k = DenseMatrix::from_rows({{1.0}});
        const auto v = DenseMatrix::from_rows({{5.0}});
        const auto out = scaled_dot_attention(q, k, v);
        CHECK(out.map(0, 0) == 1.0);
        CHECK(out.context(0, 0) == 5.0);
    }
    SUBCASE("context equals map x v against the naive oracle") {
        const auto q = random_matrix(4, 8, 21);
        const auto k = random_matrix(6, 8, 22);
        const auto v = random_matrix(6, 8, 23);
        const auto out = scaled_dot_attention(q, k, v);
        const auto expect = naive_matmul(out.map, v);
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(std::abs(out.context.data()[i] - expect.data()[i]) <= 1e-12);
    }
    SUBCASE("dimension mismatches rejected") {
        CHECK_THROWS_AS(
            scaled_dot_attention(random_matrix(2, 3, 1), random_matrix(2, 4, 2), random_matrix(2, 4, 3)),
            DimensionError);
        CHECK_THROWS_AS(
            scaled_dot_attention(random_matrix(2, 4, 1), random_matrix(3, 4, 2), random_matrix(2, 4, 3)),
            DimensionError);
    }
}

TEST_CASE("inject_delta") {
    const auto k = random_matrix(5, 4, 31);
    const auto d = random_matrix(5, 4, 32);

    SUBCASE("alpha zero is bit-identical") {
        const auto out = inject_delta(k, d, 0.0);
        CHECK(out == k);
    }
    SUBCASE("zero base returns the delta") {
        const auto out = inject_delta(DenseMatrix(5, 4), d, 1.0);
        CHECK(out == d);
    }
    SUBCASE("two half injections equal one full within 1e-15") {
        const auto twice = inject_delta(inject_delta(k, d, 0.5), d, 0.5);
        const auto once = inject_delta(k, d, 1.0);
        for (std::size_t i = 0; i < once.size(); ++i)
            CHECK(std::abs(twice.data()[i] - once.data()[i]) <= 1e-15);
    }
    SUBCASE("additivity over strengths within 1e-14") {
        const double a = 0.3, b = 1.7;
        const auto split = inject_delta(inject_delta(k, d, a), d, b);
        const auto joint = inject_delta(k, d, a + b);
        for (std::size_t i = 0; i < joint.size(); ++i)
            CHECK(std::abs(split.data()[i] - joint.data()[i]) <= 1e-14);
    }
    SUBCASE("shape and alpha validation") {
        CHECK_THROWS_AS(inject_delta(k, random_matrix(4, 4, 33), 1.0), DimensionError);
        CHECK_THROWS_AS(inject_delta(k, d, std::nan("")), InputError);
    }
}

TEST_CASE("projection commutes with injection") {
    // (x + a*dx) W == x W + a (dx W): the identity that licenses injecting
    // before the key projection
    const auto x = random_matrix(5, 6, 41);
    const auto dx = random_matrix(5, 6, 42);
    const auto w = random_matrix(6, 3, 43);
    const double a = 0.37;
    const auto lhs = matmul(inject_delta(x, dx, a), w);
    const auto rhs = add(matmul(x, w), scaled(matmul(dx, w), a));
    for (std::size_t i = 0; i < lhs.size(); ++i)
        CHECK(std::abs(lhs.data()[i] - rhs.data()[i]) <= 1e-12);
}

TEST_CASE("bit_checksum tracks content") {
    const auto a = random_matrix(3, 3, 7);
    auto b = a;
    CHECK(bit_checksum(a) == bit_checksum(b));
    b(1, 1) = std::nextafter(b(1, 1), 2.0);
    CHECK(bit_checksum(a) != bit_checksum(b));
}
