#ifndef FUZZYSEG_TYPES_HPP
#define FUZZYSEG_TYPES_HPP

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace fuzzyseg {

using Index = Eigen::Index;

/// Row-major H x W array (one value per pixel).
template <typename Scalar>
using PlaneArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Pixel-major N x C array: row j holds the C channel values of pixel j.
template <typename Scalar>
using ChannelArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using ClassMeans = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using LabelArray = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Physical pixel size along rows (dy) and columns (dx).
struct Spacing {
  double dy = 1.0;
  double dx = 1.0;
};

enum class ErrorKind { Usage, Io, Numerical };

/// Every error raised by the library carries a kind so the CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return Error(ErrorKind::Usage, what); }
inline Error io_error(const std::string& what) { return Error(ErrorKind::Io, what); }
inline Error numerical_error(const std::string& what) { return Error(ErrorKind::Numerical, what); }

}  // namespace fuzzyseg

#endif  // FUZZYSEG_TYPES_HPP
