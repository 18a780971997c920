#include "hdrgs/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "hdrgs/error.hpp"

namespace hdrgs {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("logit: argument outside (0, 1)");
  }
  return std::log(p / (1.0 - p));
}

void Camera::validate() const {
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
    throw ConfigError("camera: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw ConfigError("camera: image size must be positive");
  }
  if (!(exposure_time > 0.0)) {
    throw ConfigError("camera: exposure time must be positive");
  }
  const Mat3 r = rotation();
  if (!(r * r.transpose()).isApprox(Mat3::Identity(), 1e-6) || r.determinant() < 0.0) {
    throw ConfigError("camera: rotation block is not a proper rotation");
  }
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Mat4 w = Mat4::Identity();
  w.block<1, 3>(0, 0) = right.transpose();
  w.block<1, 3>(1, 0) = down.transpose();
  w.block<1, 3>(2, 0) = forward.transpose();
  w.topRightCorner<3, 1>() = -w.topLeftCorner<3, 3>() * eye;
  return w;
}

bool ProjectedGaussian::covers(const Vec2& pixel) const {
  return std::abs(pixel.x() - mean2d.x()) <= radius && std::abs(pixel.y() - mean2d.y()) <= radius;
}

Mat3 rotation_from_quaternion(const Vec4& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DegenerateRotationError("rotation quaternion has zero or non-finite norm");
  }
  const Vec4 u = q / n;
  const double w = u[0], x = u[1], y = u[2], z = u[3];
  Mat3 r;
  r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return r;
}

Mat3 build_covariance(const Vec3& log_scale, const Vec4& rotation) {
  const Mat3 m = rotation_from_quaternion(rotation) * log_scale.array().exp().matrix().asDiagonal();
  return m * m.transpose();
}

namespace {

// Tangent-space coordinates x/z, y/z clamped to the widened frustum. The
// affine approximation is evaluated at the clamped point.
struct ClampedRay {
  double ux = 0.0;
  double uy = 0.0;
  bool clamped_x = false;
  bool clamped_y = false;
};

ClampedRay clamp_ray(const Vec3& t, const Camera& cam) {
  const auto& k = cam.intrinsics;
  const double lim_x = kFrustumClampFactor * 0.5 * cam.width / k.fx;
  const double lim_y = kFrustumClampFactor * 0.5 * cam.height / k.fy;
  ClampedRay r;
  r.ux = t.x() / t.z();
  r.uy = t.y() / t.z();
  if (std::abs(r.ux) > lim_x) {
    r.ux = std::copysign(lim_x, r.ux);
    r.clamped_x = true;
  }
  if (std::abs(r.uy) > lim_y) {
    r.uy = std::copysign(lim_y, r.uy);
    r.clamped_y = true;
  }
  return r;
}

// Affine approximation of the perspective map at camera-space point t.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3& t, const ClampedRay& r, const Intrinsics& k) {
  const double iz = 1.0 / t.z();
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx * iz, 0.0, -k.fx * r.ux * iz,
      0.0, k.fy * iz, -k.fy * r.uy * iz;
  return j;
}

}  // namespace

std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g, const Camera& cam) {
  const Mat3 rw = cam.rotation();
  const Vec3 t = rw * g.mean + cam.translation();
  if (t.z() <= kNearPlane) {
    return std::nullopt;
  }
  const auto& k = cam.intrinsics;

  ProjectedGaussian pg;
  pg.depth = t.z();
  pg.mean2d = Vec2(k.fx * t.x() / t.z() + k.cx, k.fy * t.y() / t.z() + k.cy);

  const auto j = projection_jacobian(t, clamp_ray(t, cam), k);
  const Mat3 cov_cam = rw * build_covariance(g.log_scale, g.rotation) * rw.transpose();
  pg.cov2d = j * cov_cam * j.transpose();
  pg.cov2d += kLowPassDilation * Mat2::Identity();

  const double det = pg.cov2d.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) {
    return std::nullopt;
  }
  pg.conic = pg.cov2d.inverse();

  const double mid = 0.5 * pg.cov2d.trace();
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  pg.radius = static_cast<int>(std::ceil(kFootprintSigmas * std::sqrt(lambda_max)));

  if (pg.mean2d.x() + pg.radius < 0.0 || pg.mean2d.x() - pg.radius > cam.width - 1 ||
      pg.mean2d.y() + pg.radius < 0.0 || pg.mean2d.y() - pg.radius > cam.height - 1) {
    return std::nullopt;
  }

  pg.opacity = g.opacity();
  pg.radiance = g.radiance;
  return pg;
}

double evaluate_alpha(const ProjectedGaussian& pg, const Vec2& pixel) {
  const double det = pg.cov2d.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) {
    throw NumericalDegeneracyError("evaluate_alpha: singular screen covariance");
  }
  const Vec2 d = pixel - pg.mean2d;
  const double power = -0.5 * d.dot(pg.conic * d);
  return std::min(kAlphaMax, pg.opacity * std::exp(power));
}

GaussianGradient project_backward(const Gaussian3D& g, const Camera& cam,
                                  const ProjectedGradient& up) {
  GaussianGradient out;
  out.radiance = up.radiance;
  const double sig = g.opacity();
  out.opacity_logit = up.opacity * sig * (1.0 - sig);

  const auto& k = cam.intrinsics;
  const Mat3 rw = cam.rotation();
  const Vec3 t = rw * g.mean + cam.translation();
  const double iz = 1.0 / t.z();
  const double iz2 = iz * iz;

  const Mat3 rot = rotation_from_quaternion(g.rotation);
  const Vec3 s = g.log_scale.array().exp();
  const Mat3 a = rot * s.asDiagonal();
  const Mat3 cov3 = a * a.transpose();
  const Mat3 cov_cam = rw * cov3 * rw.transpose();
  const ClampedRay ray = clamp_ray(t, cam);
  const auto j = projection_jacobian(t, ray, k);
  const Mat2 cov2 = j * cov_cam * j.transpose() + kLowPassDilation * Mat2::Identity();
  const Mat2 conic = cov2.inverse();

  // conic = cov2^-1
  const Mat2 g_cov2 = -conic * up.conic * conic;
  // cov2 = J M J^T
  const Mat3 g_cov_cam = j.transpose() * g_cov2 * j;
  const Eigen::Matrix<double, 2, 3> g_j = 2.0 * g_cov2 * j * cov_cam;
  // M = Rw Sigma Rw^T
  const Mat3 g_cov3 = rw.transpose() * g_cov_cam * rw;
  // Sigma = A A^T, A = R S
  const Mat3 g_a = 2.0 * g_cov3 * a;
  const Mat3 g_rot = g_a * s.asDiagonal();
  const Mat3 g_s_full = rot.transpose() * g_a;
  for (int i = 0; i < 3; ++i) {
    out.log_scale[i] = g_s_full(i, i) * s[i];
  }

  // R(q / |q|)
  const double n = g.rotation.norm();
  const Vec4 u = g.rotation / n;
  const double w = u[0], x = u[1], y = u[2], z = u[3];
  Mat3 dw, dx, dy, dz;
  dw << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
  dx << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
  dy << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
  dz << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
  const Vec4 g_u(g_rot.cwiseProduct(dw).sum(), g_rot.cwiseProduct(dx).sum(),
                 g_rot.cwiseProduct(dy).sum(), g_rot.cwiseProduct(dz).sum());
  out.rotation = (g_u - u * u.dot(g_u)) / n;

  // Camera-space point: through the projected mean and through J.
  Vec3 g_t = Vec3::Zero();
  g_t.x() += up.mean2d.x() * k.fx * iz;
  g_t.y() += up.mean2d.y() * k.fy * iz;
  g_t.z() += -up.mean2d.x() * k.fx * t.x() * iz2 - up.mean2d.y() * k.fy * t.y() * iz2;

  // J02 = -fx ux / z with ux = x / z unless clamped to a constant.
  g_t.z() += g_j(0, 0) * (-k.fx * iz2) + g_j(1, 1) * (-k.fy * iz2);
  if (ray.clamped_x) {
    g_t.z() += g_j(0, 2) * (k.fx * ray.ux * iz2);
  } else {
    g_t.x() += g_j(0, 2) * (-k.fx * iz2);
    g_t.z() += g_j(0, 2) * (2.0 * k.fx * t.x() * iz2 * iz);
  }
  if (ray.clamped_y) {
    g_t.z() += g_j(1, 2) * (k.fy * ray.uy * iz2);
  } else {
    g_t.y() += g_j(1, 2) * (-k.fy * iz2);
    g_t.z() += g_j(1, 2) * (2.0 * k.fy * t.y() * iz2 * iz);
  }

  out.mean = rw.transpose() * g_t;
  return out;
}

}  // namespace hdrgs
