#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace fern::num {

// Dense row-major float64 container. Rank 1 and 2 cover everything the
// library does; the buffer length always equals the product of the extents.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::initializer_list<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  // Rank-2 accessors; throw on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::vector<double>& buffer() noexcept { return data_; }
  const std::vector<double>& buffer() const noexcept { return data_; }

  bool all_finite() const noexcept;
  bool same_shape(const Tensor& other) const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Records the shape of every Tensor constructed on this thread while alive.
// Tests use it to prove that a code path never materializes matrices of a
// forbidden shape. Probes nest; each sees allocations made during its
// lifetime only.
class AllocationProbe {
 public:
  AllocationProbe();
  ~AllocationProbe();
  AllocationProbe(const AllocationProbe&) = delete;
  AllocationProbe& operator=(const AllocationProbe&) = delete;

  const std::vector<std::vector<std::size_t>>& shapes() const {
    return shapes_;
  }

  static void record(const std::vector<std::size_t>& shape);

 private:
  std::vector<std::vector<std::size_t>> shapes_;
  AllocationProbe* parent_ = nullptr;
};

}  // namespace fern::num
