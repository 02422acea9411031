#include <algorithm>
#include <cassert>
#include <cmath>
#include <iostream>
#include <numeric>
#include <vector>

/*
 * Small dense matrix with row-major storage.
 * Only what the solver needs.
 */
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Matrix multiply(const Matrix& other) const {
    assert(cols_ == other.rows_);
    Matrix out(rows_, other.cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < other.cols_; ++j) {
        double sum = 0.0;
        for (std::size_t k = 0; k < cols_; ++k) {
          sum += at(i, k) * other.at(k, j);
        }
        out.at(i, j) = sum;
      }
    }
    return out;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

double frobenius(const Matrix& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      total += m.at(i, j) * m.at(i, j);  // squared entry
    }
  }
  return std::sqrt(total);
}

template <typename T>
T clamp_sum(const std::vector<T>& xs, T limit) {
  T s = std::accumulate(xs.begin(), xs.end(), T{});
  return std::min(s, limit);
}

int main() {
  Matrix a(2, 2);
  a.at(0, 0) = 1.0;
  a.at(1, 1) = 2.0;
  auto scale = [](double x) { return x * 3.0; };
  Matrix b = a.multiply(a);
  std::cout << frobenius(b) << " " << scale(1.0) << " " << clamp_sum<int>({1, 2, 3}, 5) << "\n";
  return 0;
}
