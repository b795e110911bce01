#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace attnseg {

using Scalar = double;

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major tensor. Copies share storage; tensors are treated as
// immutable once they enter the autodiff graph, so sharing is safe.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape)
      : storage_(std::make_shared<std::vector<Scalar>>(count(shape), Scalar(0))),
        shape_(std::move(shape)) {}

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, Scalar v) {
    Tensor t(std::move(shape));
    std::fill(t.data(), t.data() + t.size(), v);
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<Scalar> values) {
    if (count(shape) != (long long)values.size())
      throw ShapeError("Tensor::from: value count does not match shape");
    Tensor t;
    t.storage_ = std::make_shared<std::vector<Scalar>>(std::move(values));
    t.shape_ = std::move(shape);
    return t;
  }

  static Tensor scalar(Scalar v) { return full({1}, v); }

  bool defined() const { return storage_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return (int)shape_.size(); }
  int dim(int i) const { return shape_[(size_t)i]; }
  long long size() const { return storage_ ? (long long)storage_->size() : 0; }

  Scalar* data() { return storage_->data(); }
  const Scalar* data() const { return storage_->data(); }

  Scalar& operator[](long long i) { return (*storage_)[(size_t)i]; }
  Scalar operator[](long long i) const { return (*storage_)[(size_t)i]; }

  Scalar& at(int i, int j) { return (*storage_)[(size_t)(i * shape_[1] + j)]; }
  Scalar at(int i, int j) const { return (*storage_)[(size_t)(i * shape_[1] + j)]; }
  Scalar& at(int n, int c, int h, int w) {
    return (*storage_)[idx4(n, c, h, w)];
  }
  Scalar at(int n, int c, int h, int w) const {
    return (*storage_)[idx4(n, c, h, w)];
  }

  // Shares storage; total element count must match.
  Tensor reshaped(std::vector<int> new_shape) const {
    if (count(new_shape) != size())
      throw ShapeError("reshaped: element count mismatch");
    Tensor t;
    t.storage_ = storage_;
    t.shape_ = std::move(new_shape);
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.storage_ = std::make_shared<std::vector<Scalar>>(*storage_);
    t.shape_ = shape_;
    return t;
  }

  void fill(Scalar v) { std::fill(data(), data() + size(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  static long long count(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
      if (d < 0) throw ShapeError("negative dimension");
      n *= d;
    }
    return n;
  }

  static std::string shape_str(const std::vector<int>& shape);

 private:
  size_t idx4(int n, int c, int h, int w) const {
    return (size_t)(((n * (long long)shape_[1] + c) * shape_[2] + h) * shape_[3] + w);
  }

  std::shared_ptr<std::vector<Scalar>> storage_;
  std::vector<int> shape_;
};

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace attnseg
