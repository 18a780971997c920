#pragma once

#include <Eigen/Core>
#include <optional>

namespace hdrgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kNearPlane = 0.01;
inline constexpr double kLowPassDilation = 0.3;
inline constexpr double kAlphaMax = 0.99;
inline constexpr double kFootprintSigmas = 3.0;
/// x/z and y/z are clamped to this multiple of the half-FOV tangent before
/// the projection Jacobian is evaluated.
inline constexpr double kFrustumClampFactor = 1.3;

double sigmoid(double x);
double logit(double p);

/// One scene primitive. All fields are unconstrained so the optimizer can
/// update them directly; constrained quantities are derived on use.
struct Gaussian3D {
  Vec3 mean = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  /// (w, x, y, z), renormalized before every covariance build.
  Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);
  double opacity_logit = 0.0;
  /// Learned log-domain radiance L', one value per color channel.
  Vec3 radiance = Vec3::Zero();

  double opacity() const { return sigmoid(opacity_logit); }
  Vec3 scale() const { return log_scale.array().exp(); }
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Pinhole camera. Camera space looks down +z, x right, y down.
struct Camera {
  Intrinsics intrinsics;
  Mat4 world_to_camera = Mat4::Identity();
  int width = 0;
  int height = 0;
  double exposure_time = 1.0;

  Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
  Vec3 center() const { return -rotation().transpose() * translation(); }

  /// Throws ConfigError on fx/fy <= 0, non-orthonormal rotation, empty
  /// image, or non-positive exposure.
  void validate() const;
};

/// World-to-camera transform for a camera at `eye` looking at `target`.
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

struct ProjectedGaussian {
  Vec2 mean2d = Vec2::Zero();
  /// Screen covariance including the low-pass dilation.
  Mat2 cov2d = Mat2::Identity();
  /// Inverse of cov2d.
  Mat2 conic = Mat2::Identity();
  double depth = 0.0;
  double opacity = 0.0;
  Vec3 radiance = Vec3::Zero();
  /// Half-width of the square pixel footprint: ceil(3 sqrt(lambda_max)).
  int radius = 0;

  /// True when `pixel` lies inside the square footprint around mean2d.
  bool covers(const Vec2& pixel) const;
};

/// Unit-quaternion rotation matrix. Throws DegenerateRotationError when q = 0.
Mat3 rotation_from_quaternion(const Vec4& q);

/// R S S^T R^T with S = diag(exp(log_scale)).
Mat3 build_covariance(const Vec3& log_scale, const Vec4& rotation);

/// Returns std::nullopt when the Gaussian is culled: depth <= near plane or
/// its 3-sigma footprint lies entirely off screen.
std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g, const Camera& cam);

/// min(0.99, opacity * exp(-0.5 d^T cov2d^-1 d)), d = pixel - mean2d.
/// Evaluated on the full plane; the footprint restriction is applied by the
/// renderers, not here. Throws NumericalDegeneracyError for a singular cov2d.
double evaluate_alpha(const ProjectedGaussian& pg, const Vec2& pixel);

/// Upstream gradients of a loss with respect to one projected Gaussian.
struct ProjectedGradient {
  Vec2 mean2d = Vec2::Zero();
  /// Full-matrix convention: dL = tr(G^T dConic) for symmetric perturbations.
  Mat2 conic = Mat2::Zero();
  double opacity = 0.0;
  Vec3 radiance = Vec3::Zero();

  ProjectedGradient& operator+=(const ProjectedGradient& o) {
    mean2d += o.mean2d;
    conic += o.conic;
    opacity += o.opacity;
    radiance += o.radiance;
    return *this;
  }
};

/// Gradient with respect to the raw Gaussian parameters.
struct GaussianGradient {
  Vec3 mean = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 rotation = Vec4::Zero();
  double opacity_logit = 0.0;
  Vec3 radiance = Vec3::Zero();

  GaussianGradient& operator+=(const GaussianGradient& o) {
    mean += o.mean;
    log_scale += o.log_scale;
    rotation += o.rotation;
    opacity_logit += o.opacity_logit;
    radiance += o.radiance;
    return *this;
  }
};

/// Chains screen-space gradients back through projection, covariance
/// construction and the opacity sigmoid. `g` must project (not culled).
GaussianGradient project_backward(const Gaussian3D& g, const Camera& cam,
                                  const ProjectedGradient& upstream);

}  // namespace hdrgs
