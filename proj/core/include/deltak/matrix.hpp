#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace deltak {

/// Row-major dense matrix of doubles. The universal carrier for queries,
/// keys, values, embeddings and attention maps. Desk-scale sizes only, so
/// plain loops beat any blocked/sparse machinery.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const DenseMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

bool all_finite(const DenseMatrix& m);

/// FNV-1a over the raw bit patterns; equal checksums on bit-identical content.
std::uint64_t bit_checksum(const DenseMatrix& m);
std::uint64_t bit_checksum(std::span<const double> values);

DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a · bᵀ without materializing the transpose.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& a, double factor);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);

/// Per-row softmax with per-row max subtraction, so huge logit shifts stay
/// inside exp's range.
DenseMatrix softmax_rows(const DenseMatrix& m);

struct AttentionOutput {
    DenseMatrix map;      // queries x keys, row-stochastic
    DenseMatrix context;  // queries x value-dim
};

/// map = softmax(q·kᵀ/√d_k), context = map·v.
AttentionOutput scaled_dot_attention(const DenseMatrix& q, const DenseMatrix& k,
                                     const DenseMatrix& v);

/// k_input + alpha·delta, operands untouched. alpha == 0 returns k_input
/// bit-identically.
DenseMatrix inject_delta(const DenseMatrix& k_input, const DenseMatrix& delta, double alpha);

}  // namespace deltak
