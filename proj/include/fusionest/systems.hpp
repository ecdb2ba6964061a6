#pragma once

// The two benchmark systems: a maneuvering target tracked by two sensors and
// a unicycle robot localizing against four landmarks.

#include <cmath>

#include "fusionest/models.hpp"

namespace fusionest {

enum class SamplingKind { Constant, Sinusoidal };

/// Time-varying sampling period: 0.5 or 0.5 + 0.2 sin(t), t in radians.
inline double tracking_fs(SamplingKind kind, int t) {
  return kind == SamplingKind::Constant ? 0.5 : 0.5 + 0.2 * std::sin(static_cast<double>(t));
}

inline SamplingKind tracking_sampling_for(NoiseKind kind) {
  return kind == NoiseKind::TypeI ? SamplingKind::Constant : SamplingKind::Sinusoidal;
}

/// Position/velocity target model with sensors C_1 = [0.5 1], C_2 = [1 0] and
/// measurement-noise gains 1.2 cos(f_s), 2.0 sin(f_s).
inline LinearTimeVaryingModel make_tracking_model(SamplingKind sampling) {
  LinearTimeVaryingModel m;
  m.n = 2;
  m.L = 2;
  m.n_w = 1;
  m.q = {1, 1};
  m.n_v = {1, 1};
  m.A = [sampling](int t) {
    const double fs = tracking_fs(sampling, t);
    Matrix a(2, 2);
    a << 1.0, fs, 0.0, 1.0;
    return a;
  };
  m.B = [sampling](int t) {
    const double fs = tracking_fs(sampling, t);
    Matrix b(2, 1);
    b << 0.5 * fs * fs, fs;
    return b;
  };
  m.C = [](int, int sensor) {
    Matrix c(1, 2);
    if (sensor == 0)
      c << 0.5, 1.0;
    else
      c << 1.0, 0.0;
    return c;
  };
  m.Bv = [sampling](int t, int sensor) {
    const double fs = tracking_fs(sampling, t);
    return Matrix::Constant(1, 1, sensor == 0 ? 1.2 * std::cos(fs) : 2.0 * std::sin(fs));
  };
  return m;
}

/// Both tracking sensors share the single scalar measurement-noise process;
/// the draws are replicated per sensor.
inline NoiseSource make_tracking_noise(NoiseKind kind, uint64_t seed,
                                       std::function<NoiseDraw(int, uint64_t)> custom = {}) {
  NoiseSource src;
  src.kind = kind;
  src.seed = seed;
  switch (kind) {
    case NoiseKind::TypeI:
      src.gen = [](int t, uint64_t) {
        const double td = static_cast<double>(t);
        NoiseDraw d;
        d.w = Vector::Constant(1, (2.0 + 0.2 * std::cos(td)) * std::exp(-td / 9.0));
        const double v = 0.8 * std::sin(td) * std::exp(-td / 6.0);
        d.v = {Vector::Constant(1, v), Vector::Constant(1, v)};
        return d;
      };
      break;
    case NoiseKind::TypeII:
      src.gen = [seed](int t, uint64_t run) {
        NoiseDraw d;
        d.w = Vector::Constant(1, std::sqrt(1.8) * rng::gaussian(seed, run, t, 0));
        const double v = std::sqrt(0.5) * rng::gaussian(seed, run, t, 1);
        d.v = {Vector::Constant(1, v), Vector::Constant(1, v)};
        return d;
      };
      break;
    case NoiseKind::TypeIII:
      src.gen = [](int t, uint64_t) {
        const double td = static_cast<double>(t);
        NoiseDraw d;
        d.w = Vector::Constant(1, std::cos(td) - 0.5);
        const double v = 0.7 * std::sin(td) - 0.3;
        d.v = {Vector::Constant(1, v), Vector::Constant(1, v)};
        return d;
      };
      break;
    default:
      src.gen = std::move(custom);
      break;
  }
  return src;
}

struct RobotParams {
  double T0 = 1.0;
  double u_p = 0.075;
  double u_r = 0.025;
  std::vector<Eigen::Vector2d> landmarks = {{5.0, 10.0}, {10.0, 10.0}, {10.0, 5.0}, {5.0, 5.0}};
  Eigen::Vector2d d1 = {0.5, 0.3};
  Eigen::Vector2d d2 = {0.3, 0.5};
  Eigen::Vector2d d3 = {0.2, 0.6};
  Eigen::Vector2d d4 = {0.5, 0.7};
};

namespace detail_robot {

inline double sinc(double z) { return z == 0.0 ? 1.0 : std::sin(z) / z; }

// (u/r)(sin(theta + T0 r) - sin(theta)) evaluated without cancellation
inline double arc_dx(double u, double r, double t0, double theta) {
  const double h = 0.5 * t0 * r;
  return u * t0 * std::cos(theta + h) * sinc(h);
}

// (u/r)(cos(theta) - cos(theta + T0 r))
inline double arc_dy(double u, double r, double t0, double theta) {
  const double h = 0.5 * t0 * r;
  return u * t0 * std::sin(theta + h) * sinc(h);
}

}  // namespace detail_robot

/// Range/azimuth pair to one landmark.
inline Vector robot_landmark_measurement(const Eigen::Vector2d& landmark, const Vector& x) {
  const double sx = landmark(0) - x(0);
  const double sy = landmark(1) - x(1);
  const double d2 = sx * sx + sy * sy;
  if (d2 < 1e-12) throw std::runtime_error("robot measurement: robot coincides with a landmark");
  Vector out(2);
  out << std::sqrt(d2), x(2) - std::atan2(sy, sx);
  return out;
}

/// Sensor 0 observes landmarks {0,1}, sensor 1 observes landmarks {2,3}.
inline NonlinearModel make_robot_model(const RobotParams& params = {}) {
  NonlinearModel m;
  m.n = 3;
  m.L = 2;
  m.n_w = 3;
  m.q = {4, 4};
  m.n_v = {4, 2};
  const double t0 = params.T0, up = params.u_p, ur = params.u_r;

  m.f = [t0, up, ur](const Vector& x) {
    const double theta = x(2);
    Vector out(3);
    out << x(0) - (up / ur) * (std::sin(theta) - std::sin(theta + t0 * ur)),
        x(1) + (up / ur) * (std::cos(theta) - std::cos(theta + t0 * ur)), theta + t0 * ur;
    return out;
  };
  m.f_jacobian = [t0, up, ur](const Vector& x) {
    const double theta = x(2);
    Matrix j = Matrix::Identity(3, 3);
    j(0, 2) = -(up / ur) * std::cos(theta) + (up / ur) * std::cos(theta + t0 * ur);
    j(1, 2) = -(up / ur) * std::sin(theta) + (up / ur) * std::sin(theta + t0 * ur);
    return j;
  };

  auto group = [&params](int first) {
    return [landmarks = params.landmarks, first](const Vector& x) {
      Vector out(4);
      out.head(2) = robot_landmark_measurement(landmarks[first], x);
      out.tail(2) = robot_landmark_measurement(landmarks[first + 1], x);
      return out;
    };
  };
  m.g = {group(0), group(2)};

  auto group_jac = [&params](int first) {
    return [landmarks = params.landmarks, first](const Vector& x) {
      Matrix j(4, 3);
      for (int k = 0; k < 2; ++k) {
        const double sx = landmarks[first + k](0) - x(0);
        const double sy = landmarks[first + k](1) - x(1);
        const double d2 = sx * sx + sy * sy;
        if (d2 < 1e-12) throw std::runtime_error("robot Jacobian: robot coincides with a landmark");
        const double d = std::sqrt(d2);
        j.row(2 * k) << -sx / d, -sy / d, 0.0;
        j.row(2 * k + 1) << -sy / d2, sx / d2, 1.0;
      }
      return j;
    };
  };
  m.g_jacobian = {group_jac(0), group_jac(2)};

  m.B = [t0](int) {
    Vector diag(3);
    diag << 1.0, 1.0, t0;
    return Matrix(diag.asDiagonal());
  };
  m.Bv = [params](int, int sensor) {
    if (sensor == 0) {
      Matrix b = Matrix::Zero(4, 4);
      b(0, 0) = params.d1(0);
      b(1, 1) = params.d1(1);
      b(2, 2) = params.d2(0);
      b(3, 3) = params.d2(1);
      return b;
    }
    Matrix b = Matrix::Zero(4, 2);
    b(0, 0) = params.d3(0);
    b(1, 1) = params.d3(1);
    b(2, 0) = params.d4(0);
    b(3, 1) = params.d4(1);
    return b;
  };

  // Maps the commanded-velocity disturbance channels (w_p, w_r, w_theta) to
  // the state-dependent process noise of the nominal-plus-noise form.
  m.process_noise = [t0, up, ur](const Vector& x, const Vector& channels) {
    const double theta = x(2);
    const double up_hat = up + channels(0);
    const double ur_hat = ur + channels(1);
    Vector w(3);
    w(0) = detail_robot::arc_dx(up_hat, ur_hat, t0, theta) - detail_robot::arc_dx(up, ur, t0, theta);
    w(1) = detail_robot::arc_dy(up_hat, ur_hat, t0, theta) - detail_robot::arc_dy(up, ur, t0, theta);
    w(2) = channels(1) + channels(2);
    return w;
  };
  return m;
}

/// Uniform-shifted bounded channels of the robot experiment.
inline NoiseSource make_robot_noise(uint64_t seed,
                                    std::function<NoiseDraw(int, uint64_t)> custom = {}) {
  NoiseSource src;
  src.kind = custom ? NoiseKind::Custom : NoiseKind::TypeIV;
  src.seed = seed;
  if (custom) {
    src.gen = std::move(custom);
    return src;
  }
  src.gen = [seed](int t, uint64_t run) {
    auto u = [&](int channel) { return rng::uniform(seed, run, t, channel); };
    NoiseDraw d;
    d.w = Vector(3);
    d.w << 0.2 * u(0) - 0.1, 0.3 * u(1) - 0.1, 0.2 * u(2) - 0.1;
    Vector v1(4);
    v1 << 0.05 * u(3) - 0.01, 0.02 * u(4) - 0.01, 0.03 * u(5) - 0.01, 0.05 * u(6) - 0.03;
    Vector v2(2);
    v2 << 0.02 * u(7) - 0.01, 0.06 * u(8) - 0.02;
    d.v = {v1, v2};
    return d;
  };
  return src;
}

/// Variance of each robot noise channel from its uniform range (range^2 / 12),
/// with the state-dependent channels bounded numerically over theta and the
/// channel extremes. Used only to tune the Gaussian baseline filters.
inline Matrix robot_pseudo_process_covariance(const RobotParams& params = {}) {
  const auto model = make_robot_model(params);
  double b1 = 0.0, b2 = 0.0;
  Vector x = Vector::Zero(3);
  Vector ch(3);
  for (int it = 0; it <= 628; ++it) {
    x(2) = it * 0.01;
    for (double rp : {0.0, 0.5, 1.0})
      for (double rr : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        ch << 0.2 * rp - 0.1, 0.3 * rr - 0.1, 0.0;
        const Vector w = model.process_noise(x, ch);
        b1 = std::max(b1, std::abs(w(0)));
        b2 = std::max(b2, std::abs(w(1)));
      }
  }
  Vector diag(3);
  diag << b1 * b1 / 3.0, b2 * b2 / 3.0, (0.3 * 0.3 + 0.2 * 0.2) / 12.0;
  return Matrix(diag.asDiagonal());
}

inline Matrix robot_pseudo_measurement_covariance(int sensor) {
  if (sensor == 0) {
    Vector diag(4);
    diag << 0.05 * 0.05, 0.02 * 0.02, 0.03 * 0.03, 0.05 * 0.05;
    return Matrix((diag / 12.0).asDiagonal());
  }
  Vector diag(2);
  diag << 0.02 * 0.02, 0.06 * 0.06;
  return Matrix((diag / 12.0).asDiagonal());
}

}  // namespace fusionest
