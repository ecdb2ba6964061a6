#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fusionest/fusion.hpp"
#include "fusionest/linear_estimator.hpp"
#include "fusionest/systems.hpp"
#include "oracle_utils.hpp"

using namespace fusionest;

namespace {

// Solved tracking gains at t = 1 give a realistic stacked system.
StackedErrorSystem tracking_stacked(int t = 1) {
  const auto model = make_tracking_model(SamplingKind::Sinusoidal);
  std::vector<Matrix> cl, gw, kv;
  for (int sensor = 0; sensor < 2; ++sensor) {
    const LocalGainResult res = solve_local_gain(model, t, sensor);
    REQUIRE(res.status == SdpSolution::Status::Optimal);
    const Matrix g = Matrix::Identity(2, 2) - res.K * model.C(t, sensor);
    cl.push_back(g * model.A(t - 1));
    gw.push_back(g * model.B(t - 1));
    kv.push_back(res.K * model.Bv(t, sensor));
  }
  return build_stacked(cl, gw, kv, StackLayout::LinearSharedNoise);
}

}  // namespace

TEST_CASE("stacked systems follow the shared and per-sensor noise layouts", "[fusion]") {
  SECTION("single sensor degenerates to the plain error system") {
    std::vector<Matrix> cl{Matrix::Constant(1, 1, 0.5)};
    std::vector<Matrix> gw{Matrix::Constant(1, 1, 0.2)};
    std::vector<Matrix> kv{Matrix::Constant(1, 1, 0.3)};
    const auto sys = build_stacked(cl, gw, kv, StackLayout::LinearSharedNoise);
    CHECK(sys.A_F(0, 0) == 0.5);
    REQUIRE(sys.n_xi() == 2);
    CHECK(sys.B_F(0, 0) == 0.2);
    CHECK(sys.B_F(0, 1) == -0.3);
  }
  SECTION("two scalar sensors pad the shared process-noise column") {
    std::vector<Matrix> cl{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.4)};
    std::vector<Matrix> gw{Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, 0.1)};
    std::vector<Matrix> kv{Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 0.6)};
    const auto sys = build_stacked(cl, gw, kv, StackLayout::LinearSharedNoise);
    REQUIRE(sys.n_xi() == 3);
    Matrix expect(2, 3);
    expect << 0.2, -0.3, 0.0, 0.1, 0.0, -0.6;
    CHECK((sys.B_F - expect).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sys.A_F(0, 1) == 0.0);
    CHECK(sys.A_F(1, 1) == 0.4);
  }
  SECTION("nonlinear layout is block diagonal with one noise pair per sensor") {
    std::vector<Matrix> cl{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.4)};
    std::vector<Matrix> gw{Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, 0.1)};
    std::vector<Matrix> kv{Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 0.6)};
    const auto sys = build_stacked(cl, gw, kv, StackLayout::NonlinearPerSensorNoise);
    REQUIRE(sys.n_xi() == 4);
    Matrix expect(2, 4);
    expect << 0.2, -0.3, 0.0, 0.0, 0.0, 0.0, 0.1, -0.6;
    CHECK((sys.B_F - expect).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("fusing identical estimates returns them exactly", "[fusion]") {
  FusionWeights w;
  w.n = 2;
  w.L = 3;
  std::mt19937 mt(3);
  w.omega_head = {test_oracle::random_matrix(mt, 2, 2), test_oracle::random_matrix(mt, 2, 2)};
  Vector v(2);
  v << 0.123456789, -7.654321;
  const Vector fused = fuse(w, {v, v, v});
  CHECK(fused(0) == v(0));
  CHECK(fused(1) == v(1));

  Matrix sum = w.omega(0) + w.omega(1) + w.omega(2);
  CHECK((sum - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("fusion weight arithmetic", "[fusion]") {
  SECTION("selection of the first sensor") {
    FusionWeights w;
    w.n = 1;
    w.L = 2;
    w.omega_head = {Matrix::Identity(1, 1)};
    CHECK(fuse(w, {Vector::Constant(1, 2.0), Vector::Constant(1, 9.0)})(0) == Catch::Approx(2.0));
  }
  SECTION("scalar convex combination") {
    FusionWeights w;
    w.n = 1;
    w.L = 2;
    w.omega_head = {Matrix::Constant(1, 1, 0.3)};
    CHECK(fuse(w, {Vector::Constant(1, 2.0), Vector::Constant(1, 4.0)})(0) == Catch::Approx(3.4));
  }
}

TEST_CASE("single-sensor fusion reduces to certificate feasibility", "[fusion]") {
  std::vector<Matrix> cl{Matrix::Constant(1, 1, 0.5)};
  std::vector<Matrix> gw{Matrix::Constant(1, 1, 0.2)};
  std::vector<Matrix> kv{Matrix::Constant(1, 1, 0.3)};
  const auto sys = build_stacked(cl, gw, kv, StackLayout::LinearSharedNoise);
  const FusionWeights w = solve_fusion_weights(sys);
  REQUIRE(w.status == SdpSolution::Status::Optimal);
  CHECK((w.omega(0) - Matrix::Identity(1, 1)).cwiseAbs().maxCoeff() == 0.0);
  const double oracle = test_oracle::fusion_ls_oracle(sys.A_F, sys.B_F, 1, 1);
  CHECK(w.objective == Catch::Approx(oracle).margin(1e-5));
}

TEST_CASE("fusion optimum matches the least-squares oracle and dominates selections", "[fusion]") {
  const auto sys = tracking_stacked();
  const FusionWeights w = solve_fusion_weights(sys);
  REQUIRE(w.status == SdpSolution::Status::Optimal);

  const double oracle = test_oracle::fusion_ls_oracle(sys.A_F, sys.B_F, sys.n, sys.L);
  CHECK(w.objective == Catch::Approx(oracle).epsilon(1e-5).margin(1e-6));

  for (int i = 0; i < sys.L; ++i) {
    const double sel = solve_selection_objective(sys, i);
    CHECK(w.objective <= sel * (1.0 + 1e-6) + 1e-9);
  }

  // certificates satisfy the bordered LMI
  Matrix row = w.omega_row();
  const Eigen::Index n = sys.n, nl = sys.A_F.rows(), nxi = sys.n_xi();
  Matrix bordered = Matrix::Zero(n + nl + nxi, n + nl + nxi);
  bordered.topLeftCorner(n, n) = -Matrix::Identity(n, n);
  bordered.block(0, n, n, nl) = row * sys.A_F;
  bordered.block(n, 0, nl, n) = (row * sys.A_F).transpose();
  bordered.block(0, n + nl, n, nxi) = row * sys.B_F;
  bordered.block(n + nl, 0, nxi, n) = (row * sys.B_F).transpose();
  bordered.block(n, n, nl, nl) = -w.P;
  bordered.block(n, n + nl, nl, nxi) = -w.Upsilon;
  bordered.block(n + nl, n, nxi, nl) = -w.Upsilon.transpose();
  bordered.bottomRightCorner(nxi, nxi) = -w.Theta;
  CHECK(check_negative_definite(bordered, 0.0));
  CHECK(check_negative_definite(schur_expand(bordered, n), 0.0));
}

TEST_CASE("identical error systems: averaging beats selection at the certificate level",
          "[fusion]") {
  // Both rows of the stacked system identical (same dynamics, same noise
  // columns). The fused error cannot actually improve, but the trace
  // certificate can: the optimum equals the least-squares oracle, which sits
  // strictly below the single-sensor selection value when the dynamics block
  // is nonzero.
  StackedErrorSystem sys;
  sys.layout = StackLayout::LinearSharedNoise;
  sys.n = 1;
  sys.L = 2;
  sys.A_F = Matrix::Zero(2, 2);
  sys.A_F.diagonal().setConstant(0.6);
  sys.B_F = Matrix(2, 2);
  sys.B_F << 0.2, -0.3, 0.2, -0.3;

  const FusionWeights w = solve_fusion_weights(sys);
  REQUIRE(w.status == SdpSolution::Status::Optimal);
  const double oracle = test_oracle::fusion_ls_oracle(sys.A_F, sys.B_F, 1, 2);
  CHECK(w.objective == Catch::Approx(oracle).margin(1e-5));
  const double sel = solve_selection_objective(sys, 0);
  CHECK(w.objective <= sel * (1.0 + 1e-6));
  CHECK(sel == Catch::Approx(0.36 + 0.13).margin(1e-5));  // ||row||^2 of one sensor
}

TEST_CASE("fusion error recursion equals simulate-and-difference", "[fusion]") {
  const auto model = make_tracking_model(SamplingKind::Sinusoidal);
  const auto noise = make_tracking_noise(NoiseKind::TypeIII, 5);
  const int T = 12;
  const TrajectoryRecord rec = simulate(model, noise, Vector::Zero(2), T, 0);

  std::vector<Vector> xhat{Vector::Zero(2), Vector::Zero(2)};
  Vector e_f = Vector::Zero(4);
  for (int t = 1; t <= T; ++t) {
    std::vector<Matrix> cl, gw, kv, gains;
    for (int sensor = 0; sensor < 2; ++sensor) {
      const LocalGainResult res = solve_local_gain(model, t, sensor);
      REQUIRE(res.status == SdpSolution::Status::Optimal);
      const Matrix g = Matrix::Identity(2, 2) - res.K * model.C(t, sensor);
      cl.push_back(g * model.A(t - 1));
      gw.push_back(g * model.B(t - 1));
      kv.push_back(res.K * model.Bv(t, sensor));
      gains.push_back(res.K);
    }
    const auto sys = build_stacked(cl, gw, kv, StackLayout::LinearSharedNoise);
    const FusionWeights w = solve_fusion_weights(sys);
    REQUIRE(w.status == SdpSolution::Status::Optimal);

    Vector xi(3);
    xi << rec.w[t - 1](0), rec.v[t][0](0), rec.v[t][1](0);
    const auto [e_f_next, e0] = fusion_error_recursion(e_f, sys, w, xi);

    for (int sensor = 0; sensor < 2; ++sensor)
      xhat[sensor] =
          lse_update(xhat[sensor], model.A(t - 1), model.C(t, sensor), gains[sensor], rec.y[t][sensor]);
    const Vector fused = fuse(w, xhat);

    REQUIRE((e_f_next.segment(0, 2) - (rec.x[t] - xhat[0])).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((e_f_next.segment(2, 2) - (rec.x[t] - xhat[1])).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((e0 - (rec.x[t] - fused)).cwiseAbs().maxCoeff() < 1e-12);

    // fused bound and trace bound from the certificates
    Vector xi_bar(4 + 3);
    xi_bar << e_f, xi;
    Matrix cert(7, 7);
    cert.topLeftCorner(4, 4) = w.P;
    cert.topRightCorner(4, 3) = w.Upsilon;
    cert.bottomLeftCorner(3, 4) = w.Upsilon.transpose();
    cert.bottomRightCorner(3, 3) = w.Theta;
    CHECK(e0.squaredNorm() < xi_bar.dot(cert * xi_bar));
    CHECK(e0.squaredNorm() <
          max_eigenvalue(Matrix(xi_bar * xi_bar.transpose())) * (w.P.trace() + w.Theta.trace()));

    e_f = e_f_next;
  }

  SECTION("zero inputs stay zero") {
    const auto sys = tracking_stacked();
    FusionWeights w = solve_fusion_weights(sys);
    const auto [ef, e0] = fusion_error_recursion(Vector::Zero(4), sys, w, Vector::Zero(3));
    CHECK(ef.norm() == 0.0);
    CHECK(e0.norm() == 0.0);
  }
}
