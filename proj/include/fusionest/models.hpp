#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "fusionest/linalg.hpp"
#include "fusionest/rng.hpp"

namespace fusionest {

/// Time-indexed providers of the system matrices x(t+1) = A(t)x(t) + B(t)w(t),
/// y_i(t) = C_i(t)x(t) + B_i(t)v_i(t).
struct LinearTimeVaryingModel {
  int n = 0;    // state dimension
  int L = 0;    // sensor count
  int n_w = 0;  // process-noise dimension
  std::vector<int> q;    // measurement dimension per sensor
  std::vector<int> n_v;  // measurement-noise dimension per sensor
  std::function<Matrix(int)> A;
  std::function<Matrix(int)> B;
  std::function<Matrix(int, int)> C;   // (t, sensor)
  std::function<Matrix(int, int)> Bv;  // (t, sensor)
};

/// Nonlinear plant x(t+1) = f(x(t)) + B(t)w(t) with per-sensor measurement
/// maps g_i. Jacobian providers are optional; finite differences fill in.
struct NonlinearModel {
  int n = 0;
  int L = 0;
  int n_w = 0;
  std::vector<int> q;
  std::vector<int> n_v;
  std::function<Vector(const Vector&)> f;
  std::vector<std::function<Vector(const Vector&)>> g;
  std::function<Matrix(int)> B;
  std::function<Matrix(int, int)> Bv;
  std::function<Matrix(const Vector&)> f_jacobian;                     // may be empty
  std::vector<std::function<Matrix(const Vector&)>> g_jacobian;        // may be empty
  std::function<Vector(const Vector&, const Vector&)> process_noise;   // (x, channels) -> w
};

/// Central-difference Jacobian with step max(1e-6, 1e-6 |x_j|) per coordinate.
inline Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& map,
                                         const Vector& x) {
  const Vector y0 = map(x);
  Matrix jac(y0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x(j)));
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const Vector d = (map(xp) - map(xm)) / (2.0 * h);
    if (!d.allFinite()) throw std::runtime_error("finite_difference_jacobian: non-finite evaluation");
    jac.col(j) = d;
  }
  return jac;
}

inline Matrix jacobian_f(const NonlinearModel& model, const Vector& x) {
  if (model.f_jacobian) return model.f_jacobian(x);
  return finite_difference_jacobian(model.f, x);
}

inline Matrix jacobian_g(const NonlinearModel& model, int sensor, const Vector& x) {
  if (!model.g_jacobian.empty() && model.g_jacobian[sensor]) return model.g_jacobian[sensor](x);
  return finite_difference_jacobian(model.g[sensor], x);
}

inline Vector step_truth(const LinearTimeVaryingModel& model, const Vector& x, int t,
                         const Vector& w) {
  Vector out = model.A(t) * x + model.B(t) * w;
  if (!out.allFinite()) throw std::runtime_error("step_truth: model blow-up");
  return out;
}

inline Vector step_truth(const NonlinearModel& model, const Vector& x, int t, const Vector& w) {
  Vector out = model.f(x) + model.B(t) * w;
  if (!out.allFinite()) throw std::runtime_error("step_truth: model blow-up");
  return out;
}

inline Vector measure(const LinearTimeVaryingModel& model, const Vector& x, int t, int sensor,
                      const Vector& v) {
  return model.C(t, sensor) * x + model.Bv(t, sensor) * v;
}

inline Vector measure(const NonlinearModel& model, const Vector& x, int t, int sensor,
                      const Vector& v) {
  return model.g[sensor](x) + model.Bv(t, sensor) * v;
}

enum class NoiseKind { TypeI, TypeII, TypeIII, TypeIV, Custom };

struct NoiseDraw {
  Vector w;                // process channels (for Type IV these are w_p, w_r, w_theta)
  std::vector<Vector> v;   // per-sensor measurement noise
};

/// Per-step noise generator. Types I and III are deterministic in t; Types II
/// and IV reproduce exactly for a given (seed, run).
struct NoiseSource {
  NoiseKind kind = NoiseKind::Custom;
  uint64_t seed = 0;
  std::function<NoiseDraw(int, uint64_t)> gen;
  NoiseDraw at(int t, uint64_t run) const { return gen(t, run); }
};

inline NoiseDraw noise_at(const NoiseSource& source, int t, uint64_t run) {
  return source.at(t, run);
}

/// True states, measurements and the noises that produced them; replaying the
/// stored noises through step_truth reproduces the states bit for bit.
struct TrajectoryRecord {
  std::vector<Vector> x;               // 0..T
  std::vector<std::vector<Vector>> y;  // y[t][sensor], t = 1..T (slot 0 unused)
  std::vector<Vector> w;               // applied process noise w(t), t = 0..T-1
  std::vector<std::vector<Vector>> v;  // v[t][sensor], t = 1..T
};

template <class Model>
TrajectoryRecord simulate(const Model& model, const NoiseSource& source, const Vector& x0, int T,
                          uint64_t run) {
  TrajectoryRecord rec;
  rec.x.resize(T + 1);
  rec.y.resize(T + 1);
  rec.v.resize(T + 1);
  rec.w.resize(T);
  rec.x[0] = x0;
  for (int t = 0; t < T; ++t) {
    const NoiseDraw draw = source.at(t, run);
    Vector w_applied = draw.w;
    if constexpr (std::is_same_v<Model, NonlinearModel>) {
      if (model.process_noise) w_applied = model.process_noise(rec.x[t], draw.w);
    }
    rec.w[t] = w_applied;
    rec.x[t + 1] = step_truth(model, rec.x[t], t, w_applied);
  }
  for (int t = 1; t <= T; ++t) {
    const NoiseDraw draw = source.at(t, run);
    rec.y[t].resize(model.L);
    rec.v[t].resize(model.L);
    for (int i = 0; i < model.L; ++i) {
      rec.v[t][i] = draw.v[i];
      rec.y[t][i] = measure(model, rec.x[t], t, i, draw.v[i]);
    }
  }
  return rec;
}

/// Re-runs the recursion from the recorded noises; used to assert bit-exact
/// reproducibility of TrajectoryRecord.
template <class Model>
bool replay_matches(const Model& model, const TrajectoryRecord& rec) {
  Vector x = rec.x[0];
  for (size_t t = 0; t + 1 < rec.x.size(); ++t) {
    x = step_truth(model, x, static_cast<int>(t), rec.w[t]);
    if ((x.array() != rec.x[t + 1].array()).any()) return false;
  }
  return true;
}

}  // namespace fusionest
