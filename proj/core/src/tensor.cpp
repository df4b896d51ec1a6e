#include "fern/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace fern::num {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

thread_local AllocationProbe* g_probe = nullptr;

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
  AllocationProbe::record(shape_);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw std::invalid_argument("tensor: buffer length does not match shape");
  }
  AllocationProbe::record(shape_);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros(std::initializer_list<std::size_t> shape) {
  return Tensor(std::vector<std::size_t>(shape));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = v;
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::logic_error("tensor: rows() needs rank 2");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::logic_error("tensor: cols() needs rank 2");
  return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
  return data_[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return data_[r * cols() + c];
}

bool Tensor::all_finite() const noexcept {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool Tensor::same_shape(const Tensor& other) const noexcept {
  return shape_ == other.shape_;
}

AllocationProbe::AllocationProbe() : parent_(g_probe) { g_probe = this; }

AllocationProbe::~AllocationProbe() { g_probe = parent_; }

void AllocationProbe::record(const std::vector<std::size_t>& shape) {
  for (AllocationProbe* p = g_probe; p != nullptr; p = p->parent_) {
    p->shapes_.push_back(shape);
  }
}

}  // namespace fern::num
