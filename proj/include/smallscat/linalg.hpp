#pragma once

#include <Eigen/Dense>
#include <complex>

namespace smallscat {

using cdouble = std::complex<double>;

using Vec3 = Eigen::Vector3d;
using Vec3c = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;
using Mat3c = Eigen::Matrix3cd;
using Vec6c = Eigen::Matrix<cdouble, 6, 1>;
using Mat6c = Eigen::Matrix<cdouble, 6, 6>;
using Mat2c = Eigen::Matrix2cd;

inline constexpr double pi = 3.14159265358979323846;

// Matrix form of v x (.), so cross_matrix(v) * w == v.cross(w).
inline Mat3 cross_matrix(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return m;
}

// Plain cross product for complex 3-vectors.  Eigen's cross() conjugates the
// result for complex scalars, which is never what the field algebra here wants.
inline Vec3c ccross(const Vec3c& a, const Vec3c& b) {
  return Vec3c(a.y() * b.z() - a.z() * b.y(),
               a.z() * b.x() - a.x() * b.z(),
               a.x() * b.y() - a.y() * b.x());
}

inline Vec3c ccross(const Vec3& a, const Vec3c& b) {
  return ccross(Vec3c(a.cast<cdouble>()), b);
}

// Row-sum norm used for scattering operators: max over rows of sum of |entries|.
template <typename Derived>
double row_sum_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace smallscat
