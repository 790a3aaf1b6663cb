#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dfs/error.hpp"

namespace dfs {

// Dense numeric matrix, column-major, NaN marks a missing value.
class DesignMatrix {
public:
    DesignMatrix() = default;
    DesignMatrix(std::vector<std::string> names, std::size_t rows)
        : names_(std::move(names)), rows_(rows), data_(names_.size() * rows, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    std::span<double> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
    std::span<const double> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

    double at(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }
    double& at(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }

    DesignMatrix select_rows(std::span<const std::size_t> idx) const {
        DesignMatrix out(names_, idx.size());
        for (std::size_t j = 0; j < cols(); ++j) {
            auto src = col(j);
            auto dst = out.col(j);
            for (std::size_t i = 0; i < idx.size(); ++i) dst[i] = src[idx[i]];
        }
        return out;
    }

    // Keeps the columns at the given indices, in that order.
    DesignMatrix select_cols(std::span<const std::size_t> idx) const {
        std::vector<std::string> names;
        for (auto j : idx) names.push_back(names_[j]);
        DesignMatrix out(std::move(names), rows_);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            auto src = col(idx[k]);
            std::copy(src.begin(), src.end(), out.col(k).begin());
        }
        return out;
    }

private:
    std::vector<std::string> names_;
    std::size_t rows_ = 0;
    std::vector<double> data_;
};

}  // namespace dfs
