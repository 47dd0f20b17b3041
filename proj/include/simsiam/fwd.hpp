#ifndef SIMSIAM_FWD_HPP
#define SIMSIAM_FWD_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace simsiam {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

// Row-major throughout: tensors are flat row-major buffers and their 2-d
// views are batch-by-feature matrices.
template <typename Scalar>
using MatrixR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatMap = Eigen::Map<MatrixR<Scalar>>;
template <typename Scalar>
using ConstMatMap = Eigen::Map<const MatrixR<Scalar>>;
template <typename Scalar>
using VecMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
template <typename Scalar>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
template <typename Scalar>
using ArrayRR = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ArrMap = Eigen::Map<ArrayRR<Scalar>>;
template <typename Scalar>
using ConstArrMap = Eigen::Map<const ArrayRR<Scalar>>;

enum class Mode { train, eval };

// Raised when a forward op produces NaN/Inf. Training treats this as an
// abort-and-record event rather than letting NaNs propagate silently.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

inline Index shape_numel(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace simsiam

#endif  // SIMSIAM_FWD_HPP
