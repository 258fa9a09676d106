#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

#include "cgrelax/envelope.hpp"

using namespace cgrelax;

namespace {

const Eigen::Matrix2d kA{{1.15, 0.65}, {0.65, 1.15}};
const Eigen::Matrix3d kAnisoD{{20, 2, 0}, {2, 5, 0}, {0, 0, 3}};

Eigen::Matrix2d random_F(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return Eigen::Matrix2d::NullaryExpr([&]() { return u(rng); });
}

Eigen::Matrix2d rotation(double th) { return Eigen::Matrix2d{{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}}; }

}  // namespace

TEST_CASE("spectral truncation examples") {
  CHECK(spectral_truncation_envelope(Eigen::Matrix2d::Identity()) == doctest::Approx(0.0));
  // singular values 1.8 and 0.5
  CHECK(spectral_truncation_envelope(kA) == doctest::Approx(5.0176).epsilon(1e-13));
  CHECK(spectral_truncation_envelope(Eigen::Vector2d(2.0, 0.5).asDiagonal().toDenseMatrix()) ==
        doctest::Approx(9.0).epsilon(1e-14));
}

TEST_CASE("projection examples") {
  const auto svk = svk_energy(0.0, 4.0);
  const auto r = project_envelope(kA, svk);
  REQUIRE(r.status == sdp::Status::optimal);
  CHECK(r.lifted);
  CHECK(std::abs(r.value - 5.0176) <= 1e-6);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.P_star).eigenvalues()(0) >= -1e-8);

  for (double a : {0.2, 0.5, 0.7, 0.95, 1.0}) {
    const auto z = project_envelope(a * Eigen::Matrix2d::Identity(), svk);
    REQUIRE(z.status == sdp::Status::optimal);
    CHECK(std::abs(z.value) <= 1e-7);
  }

  StiffnessForm form;
  form.D = kAnisoD;
  const auto an = project_envelope(Eigen::Matrix2d{{0.9, -0.3}, {1.2, 0.6}}, anisotropic_energy(form));
  REQUIRE(an.status == sdp::Status::optimal);
  CHECK(std::abs(an.value - 32.383260) <= 1e-4);
}

TEST_CASE("oracle equivalence on random gradients") {
  const auto svk = svk_energy(0.0, 4.0);
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto F = random_F(rng);
    const auto r = project_envelope(F, svk);
    REQUIRE(r.status == sdp::Status::optimal);
    worst = std::max(worst, std::abs(r.value - spectral_truncation_envelope(F)));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("envelope properties") {
  StiffnessForm form;
  form.D = kAnisoD;
  const auto aniso = anisotropic_energy(form);
  const auto svk = svk_energy(0.0, 4.0);
  const auto svk2 = svk_energy(1.0, 2.0);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
  for (const auto* e : {&svk, &svk2, &aniso}) {
    for (int t = 0; t < 30; ++t) {
      const auto F1 = random_F(rng), F2 = random_F(rng);
      const double q1 = project_envelope(F1, *e).value;
      const double q2 = project_envelope(F2, *e).value;
      const double qm = project_envelope(0.5 * (F1 + F2), *e).value;
      // dominance
      CHECK(q1 <= (*e)(F1) + 1e-8);
      // midpoint convexity
      CHECK(qm <= 0.5 * (q1 + q2) + 1e-6);
      // frame invariance: same C gives the identical value; rotated F agrees to solver accuracy
      const Eigen::Matrix2d C = F1.transpose() * F1;
      CHECK(project_envelope_strain(C, *e).value == project_envelope_strain(C, *e).value);
      const double qr = project_envelope(rotation(angle(rng)) * F1, *e).value;
      CHECK(std::abs(qr - q1) <= 1e-6 * (1.0 + std::abs(q1)));
    }
  }
}

TEST_CASE("fixed region where the envelope equals W") {
  const auto svk = svk_energy(0.0, 4.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> sv(1.0, 2.0), angle(0.0, 6.283185307179586);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Matrix2d F = rotation(angle(rng)) * Eigen::Vector2d(sv(rng), sv(rng)).asDiagonal() * rotation(angle(rng));
    const auto r = project_envelope(F, svk);
    CHECK(std::abs(r.value - svk(F)) <= 1e-7);
    CHECK(std::abs(spectral_truncation_envelope(F) - svk(F)) <= 1e-9 * (1.0 + svk(F)));
  }
}

TEST_CASE("moment path for an SOS-convex quartic") {
  // q = |C - I|^2 is a non-negative convex quadratic, so min q^2 = (min q)^2.
  const auto well = svk_energy(0.0, 4.0).wtilde;
  const auto e = custom_energy(well * well);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto F = random_F(rng);
    const auto r = project_envelope(F, e);
    REQUIRE(r.status == sdp::Status::optimal);
    CHECK_FALSE(r.lifted);
    const double s = spectral_truncation_envelope(F);
    CHECK(std::abs(r.value - s * s) <= 1e-6 * (1.0 + s * s));
  }
  const auto strain = VariableSpace::strain(2);
  const auto c11 = Poly::variable(strain, 0);
  CHECK_THROWS_AS(project_envelope(kA, custom_energy(c11 * c11 * c11)), ValidationError);
  CHECK_THROWS_AS(project_envelope(kA, custom_energy(-1.0 * well)), ValidationError);
}

TEST_CASE("surface and grid") {
  const auto svk = svk_energy(0.0, 4.0);
  const auto rows = envelope_surface({0.5, 1.2, 2}, {0.5, 1.1, 2}, svk);
  REQUIRE(rows.size() == 4);
  // (0.5, 0.5)
  CHECK(rows[0].Wquasi == 0.0);
  CHECK(rows[0].W == doctest::Approx(1.125).epsilon(1e-14));
  // (1.2, 1.1)
  CHECK(rows[3].s1 == 1.2);
  CHECK(rows[3].s2 == doctest::Approx(1.1));
  CHECK(rows[3].W == doctest::Approx(rows[3].Wquasi).epsilon(1e-12));
  const auto one = envelope_surface({1, 1, 1}, {1, 1, 1}, svk);
  CHECK(one[0].W == 0.0);
  CHECK(one[0].Wquasi == 0.0);

  const auto [g1, g2] = parse_grid("s1:0:2:21,s2:0:2:11");
  CHECK(g1.steps == 21);
  CHECK(g2.at(10) == 2.0);
  const auto full = envelope_surface(g1, g2, svk);
  for (const auto& r : full) {
    if (std::max(r.s1, r.s2) <= 1.0) CHECK(r.Wquasi == 0.0);
    CHECK(r.Wquasi <= r.W + 1e-12);
  }
  std::ostringstream os;
  write_surface_csv(os, one);
  CHECK(os.str().rfind("s1,s2,W,Wquasi\n", 0) == 0);

  CHECK_THROWS_AS(parse_grid("s1:0:2"), ValidationError);
  CHECK_THROWS_AS(parse_grid("s1:0:2:5"), ValidationError);
  CHECK_THROWS_AS(parse_grid("s3:0:2:5,s1:0:1:2"), ValidationError);

  // projection-backed surface agrees with the closed form
  const auto proj = envelope_surface({0.3, 1.7, 4}, {0.3, 1.7, 4}, svk, EnvelopeMethod::projection);
  const auto spec = envelope_surface({0.3, 1.7, 4}, {0.3, 1.7, 4}, svk, EnvelopeMethod::spectral);
  for (std::size_t i = 0; i < proj.size(); ++i) CHECK(std::abs(proj[i].Wquasi - spec[i].Wquasi) <= 1e-6);

  StiffnessForm form;
  form.D = kAnisoD;
  CHECK_THROWS_AS(quasiconvex_envelope(kA, anisotropic_energy(form), EnvelopeMethod::spectral), ValidationError);
}
