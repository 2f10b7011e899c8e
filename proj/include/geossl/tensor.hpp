#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "geossl/errors.hpp"

namespace geossl {

/// Dense float tensor, row-major, NCHW for images and [N, F] for features.
/// Deliberately minimal: layers own all the indexing logic.
struct Tensor {
  std::vector<std::int64_t> dims;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape) : dims(std::move(shape)) {
    data.assign(static_cast<std::size_t>(numel()), 0.0f);
  }

  static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
  }

  std::int64_t dim(std::size_t i) const { return dims.at(i); }

  bool same_shape(const Tensor& other) const { return dims == other.dims; }

  void fill(float v) { std::fill(data.begin(), data.end(), v); }

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  // NCHW accessors.
  float& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data[static_cast<std::size_t>(((n * dims[1] + c) * dims[2] + h) * dims[3] + w)];
  }
  float at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return data[static_cast<std::size_t>(((n * dims[1] + c) * dims[2] + h) * dims[3] + w)];
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims[i]);
    }
    return s + "]";
  }
};

inline void check_shape(const Tensor& t, const std::vector<std::int64_t>& expect,
                        const std::string& what) {
  if (t.dims != expect) {
    Tensor e;
    e.dims = expect;
    raise(ErrorCode::ConfigError, what + ": expected shape " + e.shape_str() + ", got " + t.shape_str());
  }
}

}  // namespace geossl
