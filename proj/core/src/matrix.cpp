#include "deltak/matrix.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "deltak/error.hpp"

namespace deltak {

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    DenseMatrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != m.cols()) throw DimensionError("from_rows: ragged rows");
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

bool all_finite(const DenseMatrix& m) {
    for (double v : m.data())
        if (!std::isfinite(v)) return false;
    return true;
}

std::uint64_t bit_checksum(std::span<const double> values) {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (i * 8)) & 0xFFu;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::uint64_t bit_checksum(const DenseMatrix& m) {
    return bit_checksum(std::span<const double>(m.data()));
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double av = a(r, k);
            if (av == 0.0) continue;
            for (std::size_t c = 0; c < b.cols(); ++c) out(r, c) += av * b(k, c);
        }
    }
    return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_nt: column counts differ");
    DenseMatrix out(a.rows(), b.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < b.rows(); ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(r, k) * b(c, k);
            out(r, c) = acc;
        }
    }
    return out;
}

DenseMatrix scaled(const DenseMatrix& a, double factor) {
    DenseMatrix out = a;
    for (double& v : out.data()) v *= factor;
    return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
    DenseMatrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw DimensionError("sub: shape mismatch");
    DenseMatrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

DenseMatrix softmax_rows(const DenseMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw DimensionError("softmax_rows: empty matrix");
    if (!all_finite(m)) throw InputError("softmax_rows: non-finite input");
    DenseMatrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < m.cols(); ++c) row_max = std::max(row_max, m(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const double e = std::exp(m(r, c) - row_max);
            out(r, c) = e;
            sum += e;
        }
        for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) /= sum;
    }
    return out;
}

AttentionOutput scaled_dot_attention(const DenseMatrix& q, const DenseMatrix& k,
                                     const DenseMatrix& v) {
    if (q.cols() != k.cols()) throw DimensionError("scaled_dot_attention: q/k width mismatch");
    if (k.rows() != v.rows()) throw DimensionError("scaled_dot_attention: k/v row mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    AttentionOutput out;
    out.map = softmax_rows(scaled(matmul_nt(q, k), scale));
    out.context = matmul(out.map, v);
    return out;
}

DenseMatrix inject_delta(const DenseMatrix& k_input, const DenseMatrix& delta, double alpha) {
    if (!k_input.same_shape(delta)) throw DimensionError("inject_delta: shape mismatch");
    if (!std::isfinite(alpha)) throw InputError("inject_delta: non-finite alpha");
    if (alpha == 0.0) return k_input;
    DenseMatrix out = k_input;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += alpha * delta.data()[i];
    return out;
}

}  // namespace deltak
