#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "spmx/error.hpp"
#include "spmx/spectral.hpp"

using namespace spmx;

namespace {

EmissionSpectrum flat(double lo, double hi) { return EmissionSpectrum("flat", {{lo, 1.0}, {hi, 1.0}}); }

Eigen::VectorXd col(const MixingMatrix& m, Eigen::Index j) { return m.matrix().col(j); }

// Midpoint-rule band integral of a piecewise-linear profile, evaluated
// without the library's interpolation.
double midpoint_integral(const std::vector<std::pair<double, double>>& pts, double lo, double hi,
                         double step) {
  double total = 0.0;
  for (double w = lo + step / 2; w < hi; w += step) {
    double v = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      if (w >= pts[i].first && w <= pts[i + 1].first) {
        const double t = (w - pts[i].first) / (pts[i + 1].first - pts[i].first);
        v = pts[i].second + t * (pts[i + 1].second - pts[i].second);
      }
    total += v * step;
  }
  return total;
}

}  // namespace

TEST_CASE("discretize: constant profile splits evenly") {
  const auto layout = BandLayout::uniform(400, 700, 4);
  const auto c = discretize_spectrum(flat(400, 700), layout);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(c(i) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("discretize: symmetric triangle") {
  const EmissionSpectrum tri("tri", {{450, 0}, {500, 1}, {550, 0}});
  const BandLayout layout({{450, 500}, {500, 550}});
  const auto c = discretize_spectrum(tri, layout);
  CHECK(c(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("discretize: ramp matches an independent quadrature") {
  const std::vector<std::pair<double, double>> pts{{500, 0}, {600, 2}};
  const EmissionSpectrum ramp("ramp", {{500, 0}, {600, 2}});
  const BandLayout layout({{500, 550}, {550, 600}});
  const auto c = discretize_spectrum(ramp, layout);
  const double a = midpoint_integral(pts, 500, 550, 0.1);
  const double b = midpoint_integral(pts, 550, 600, 0.1);
  CHECK(c(0) == doctest::Approx(a / (a + b)).epsilon(1e-9));
  CHECK(c(1) == doctest::Approx(b / (a + b)).epsilon(1e-9));
  CHECK(c(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(c(1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("discretize: errors") {
  CHECK_THROWS_AS(EmissionSpectrum("bad", {{500, 1}, {500, 2}}), Error);
  try {
    EmissionSpectrum("bad", {{510, 1}, {500, 2}});
    FAIL("expected MalformedSpectrum");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedSpectrum);
  }
  try {
    discretize_spectrum(flat(800, 900), BandLayout::uniform(400, 700, 4));
    FAIL("expected NoOverlap");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoOverlap);
  }
}

TEST_CASE("band layout validation") {
  CHECK_THROWS(BandLayout({{500, 550}, {540, 600}}));
  CHECK_THROWS(BandLayout({{500, 500}}));
  CHECK_THROWS(BandLayout({{550, 600}, {500, 550}}));
  const auto u = BandLayout::uniform(440, 696, 32);
  CHECK(u.size() == 32);
  CHECK(u[0].lo_nm == 440.0);
  CHECK(u[31].hi_nm == 696.0);
  CHECK(BandLayout::from_json(u.to_json()) == u);
}

TEST_CASE("build_mixing_matrix") {
  SUBCASE("disjoint narrow spectra give the identity") {
    const EmissionSpectrum a("a", {{410, 0}, {420, 1}, {430, 0}});
    const EmissionSpectrum b("b", {{510, 0}, {520, 1}, {530, 0}});
    const auto m = build_mixing_matrix({a, b}, BandLayout({{400, 500}, {500, 600}}));
    CHECK(m.matrix().isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-15));
  }
  SUBCASE("identical spectra are rank one") {
    const auto egfp = builtin_spectrum("EGFP");
    const auto m = build_mixing_matrix({egfp, egfp, egfp}, BandLayout::uniform(440, 696, 32));
    CHECK(col(m, 0) == col(m, 1));
    const auto report = analyze_conditioning(m);
    CHECK(report.rank_deficient);
    CHECK(std::isinf(report.kappa));
  }
  SUBCASE("50 nm shift decorrelates the columns") {
    const auto egfp = builtin_spectrum("EGFP");
    const auto m = build_mixing_matrix({egfp, shift_spectrum(egfp, 50)},
                                       BandLayout::uniform(440, 696, 32));
    double dot = 0, na = 0, nb = 0;
    for (Eigen::Index l = 0; l < 32; ++l) {
      dot += m(l, 0) * m(l, 1);
      na += m(l, 0) * m(l, 0);
      nb += m(l, 1) * m(l, 1);
    }
    CHECK(dot / std::sqrt(na * nb) < 0.9);
  }
  SUBCASE("errors name the fluorophore") {
    const EmissionSpectrum far("farred", {{900, 1}, {950, 1}});
    try {
      build_mixing_matrix({builtin_spectrum("EGFP"), far}, BandLayout::uniform(440, 696, 32));
      FAIL("expected NoOverlap");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NoOverlap);
      CHECK(std::string(e.what()).find("farred") != std::string::npos);
    }
  }
}

TEST_CASE("mixing matrix invariants") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.6;
  CHECK_THROWS(MixingMatrix(bad));
  bad << -0.1, 0.5, 1.1, 0.5;
  CHECK_THROWS(MixingMatrix(bad));
  Eigen::MatrixXd raw(2, 1);
  raw << 2, 6;
  CHECK(MixingMatrix::normalized(raw)(1, 0) == doctest::Approx(0.75));
}

TEST_CASE("mix_forward") {
  SUBCASE("identity") {
    const MixingMatrix id(Eigen::MatrixXd::Identity(2, 2));
    ConcentrationMap u{Tensor4(Shape{2, 1, 1, 1}), {}, {}};
    u.data(0, 0) = 3;
    u.data(1, 0) = 7;
    const auto s = mix_forward(u, id);
    CHECK(s.data(0, 0) == 3);
    CHECK(s.data(1, 0) == 7);
  }
  SUBCASE("two-column example") {
    Eigen::MatrixXd m(2, 2);
    m << 0.6, 0.2, 0.4, 0.8;
    ConcentrationMap u{Tensor4(Shape{2, 1, 1, 1}), {}, {}};
    u.data(0, 0) = 10;
    u.data(1, 0) = 5;
    const auto s = mix_forward(u, MixingMatrix(m));
    const Eigen::Vector2d oracle = m * Eigen::Vector2d(10, 5);
    CHECK(s.data(0, 0) == doctest::Approx(oracle(0)));
    CHECK(s.data(1, 0) == doctest::Approx(oracle(1)));
    CHECK(s.data(0, 0) == doctest::Approx(7.0));
    CHECK(s.data(1, 0) == doctest::Approx(8.0));
    CHECK(s.data(0, 0) + s.data(1, 0) == doctest::Approx(15.0));
  }
  SUBCASE("zero input") {
    std::mt19937_64 rng(1);
    const auto m = test::random_mixing(8, 3, rng);
    ConcentrationMap u{Tensor4(Shape{3, 1, 4, 4}), {}, {}};
    const auto s = mix_forward(u, m);
    for (double v : s.data.values()) CHECK(v == 0.0);
  }
  SUBCASE("shape mismatch") {
    std::mt19937_64 rng(2);
    const auto m = test::random_mixing(8, 3, rng);
    ConcentrationMap u{Tensor4(Shape{2, 1, 4, 4}), {}, {}};
    try {
      mix_forward(u, m);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
  }
}

TEST_CASE("mix_forward: intensity conservation and linearity") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = test::random_mixing(16, 4, rng, 1e6);
    const auto u1 = test::random_map(4, 8, 8, rng);
    const auto u2 = test::random_map(4, 8, 8, rng);
    const auto s1 = mix_forward(u1, m);
    for (std::size_t p = 0; p < u1.voxels(); ++p) {
      double bands = 0, channels = 0;
      for (std::size_t l = 0; l < 16; ++l) bands += s1.data(l, p);
      for (std::size_t j = 0; j < 4; ++j) channels += u1.data(j, p);
      CHECK(std::abs(bands - channels) <= 1e-6 * channels);
    }
    const double a = 1.7, b = -0.3;
    ConcentrationMap combo = u1;
    for (std::size_t i = 0; i < combo.data.values().size(); ++i)
      combo.data.values()[i] = a * u1.data.values()[i] + b * u2.data.values()[i];
    const auto lhs = mix_forward(combo, m);
    const auto s2 = mix_forward(u2, m);
    for (std::size_t i = 0; i < lhs.data.values().size(); ++i) {
      const double rhs = a * s1.data.values()[i] + b * s2.data.values()[i];
      CHECK(std::abs(lhs.data.values()[i] - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST_CASE("analyze_conditioning") {
  SUBCASE("identity") {
    const auto r = analyze_conditioning(MixingMatrix(Eigen::MatrixXd::Identity(2, 2)));
    CHECK(r.singular_values == std::vector<double>{1.0, 1.0});
    CHECK(r.kappa == 1.0);
    CHECK(r.amplification_bound == 1.0);
    CHECK_FALSE(r.rank_deficient);
  }
  SUBCASE("duplicated columns") {
    Eigen::MatrixXd m(2, 2);
    m << 0.5, 0.5, 0.5, 0.5;
    const auto r = analyze_conditioning(MixingMatrix(m));
    CHECK(r.singular_values[1] == doctest::Approx(0.0));
    CHECK(std::isinf(r.kappa));
    CHECK(std::isinf(r.amplification_bound));
    CHECK(r.rank_deficient);
    const auto j = r.to_json();
    CHECK(j["kappa"] == "inf");
    CHECK(j["rank_deficient"] == true);
  }
  SUBCASE("singular values match an eigen-solve of M^T M") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const auto m = test::random_mixing(12, 4, rng, 1e6);
      const auto r = analyze_conditioning(m);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.matrix().transpose() * m.matrix());
      std::vector<double> oracle;
      for (Eigen::Index i = 3; i >= 0; --i) oracle.push_back(std::sqrt(std::max(0.0, eig.eigenvalues()(i))));
      for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(r.singular_values[i] - oracle[i]) < 1e-8);
      for (std::size_t i = 1; i < 4; ++i) CHECK(r.singular_values[i] <= r.singular_values[i - 1]);
      CHECK(r.kappa >= 1.0);
      CHECK(r.kappa == doctest::Approx(r.singular_values[0] / r.singular_values[3]));

      Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.matrix(), Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Eigen::MatrixXd rebuilt =
          svd.matrixU() * svd.singularValues().asDiagonal() * svd.matrixV().transpose();
      CHECK((rebuilt - m.matrix()).norm() / m.matrix().norm() < 1e-10);
    }
  }
  SUBCASE("wide matrix pads singular values with zeros") {
    Eigen::MatrixXd m(2, 3);
    m << 0.5, 0.2, 0.1, 0.5, 0.8, 0.9;
    const auto r = analyze_conditioning(MixingMatrix(m));
    CHECK(r.singular_values.size() == 3);
    CHECK(r.singular_values[2] == 0.0);
    CHECK(r.rank_deficient);
  }
}

TEST_CASE("conditioning improves with spectral separation") {
  const auto egfp = builtin_spectrum("EGFP");
  const auto layout = BandLayout::uniform(440, 696, 32);
  double previous = std::numeric_limits<double>::infinity();
  for (double delta : {2.0, 5.0, 10.0, 20.0, 50.0}) {
    const auto m = build_mixing_matrix({egfp, shift_spectrum(egfp, delta)}, layout);
    // Oracle: sqrt of the eigenvalue ratio of M^T M.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.matrix().transpose() * m.matrix());
    const double kappa = std::sqrt(eig.eigenvalues()(1) / eig.eigenvalues()(0));
    CHECK(analyze_conditioning(m).kappa == doctest::Approx(kappa).epsilon(1e-6));
    CHECK(kappa < previous);
    previous = kappa;
  }
}

TEST_CASE("shift_spectrum") {
  const auto egfp = builtin_spectrum("EGFP");
  CHECK(shift_spectrum(egfp, 0.0) == egfp);
  CHECK(shift_spectrum(shift_spectrum(egfp, 50.0), -50.0) == egfp);
  const auto shifted = shift_spectrum(egfp, 10.0);
  for (std::size_t i = 0; i < egfp.samples().size(); ++i) {
    CHECK(shifted.samples()[i].wavelength_nm == egfp.samples()[i].wavelength_nm + 10.0);
    CHECK(shifted.samples()[i].intensity == egfp.samples()[i].intensity);
  }
  // 2 nm bands: a 10 nm shift moves the argmax by exactly five bands.
  const auto layout = BandLayout::uniform(400, 720, 160);
  Eigen::Index a = 0, b = 0;
  discretize_spectrum(egfp, layout).maxCoeff(&a);
  discretize_spectrum(shifted, layout).maxCoeff(&b);
  CHECK(b - a == 5);
}

TEST_CASE("built-in spectra") {
  for (const char* name : {"mTurquoise", "EGFP", "EYFP", "mOrange", "mScarlet"}) {
    const auto s = builtin_spectrum(name);
    CHECK(s.name() == name);
    const auto shape = builtin_shape(name);
    CHECK(s.value_at(shape.peak_nm) == doctest::Approx(1.0));
    // FWHM: half maximum one half-width either side for a Gaussian-like core.
    CHECK(shape(shape.peak_nm + 100) < shape(shape.peak_nm + 10));
  }
  CHECK_THROWS(builtin_spectrum("unobtainium"));
}

TEST_CASE("spectrum, layout and mixing files round trip") {
  const auto dir = test::scratch_dir("spectral_io");
  const auto egfp = builtin_spectrum("EGFP");
  write_spectrum_csv(dir / "egfp.csv", egfp);
  const auto back = read_spectrum_csv(dir / "egfp.csv", "EGFP");
  CHECK(back == egfp);

  const auto layout = BandLayout::uniform(440, 696, 32);
  write_layout_json(dir / "layout.json", layout);
  CHECK(read_layout_json(dir / "layout.json") == layout);

  const auto m = build_mixing_matrix({egfp, builtin_spectrum("mScarlet")}, layout);
  const MixingMatrix labelled(m.matrix(), {"EGFP", "mScarlet"});
  write_mixing_csv(dir / "mixing.csv", labelled, layout);
  const auto csv = read_mixing_csv(dir / "mixing.csv");
  CHECK(csv.matrix.matrix() == labelled.matrix());
  CHECK(csv.matrix.labels() == labelled.labels());
  CHECK(csv.layout == layout);

  {
    std::ofstream out(dir / "unnormalized.csv");
    out << "band_lo_nm,band_hi_nm,a,b\n500,550,0.5,2\n550,600,0.5,2\n";
  }
  try {
    read_mixing_csv(dir / "unnormalized.csv");
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
  }
  const auto fixed = read_mixing_csv(dir / "unnormalized.csv", true);
  CHECK(fixed.matrix(0, 1) == doctest::Approx(0.5));

  {
    std::ofstream out(dir / "malformed.csv");
    out << "band_lo_nm,band_hi_nm,a\n500,550,x\n";
  }
  CHECK_THROWS_AS(read_mixing_csv(dir / "malformed.csv"), Error);
  CHECK_THROWS_AS(read_spectrum_csv(dir / "missing.csv"), Error);
}

TEST_CASE("resolve_spectrum") {
  const auto dir = test::scratch_dir("resolve");
  write_spectrum_csv(dir / "custom.csv", EmissionSpectrum("custom", {{500, 1}, {600, 1}}));
  CHECK(resolve_spectrum("custom", dir).name() == "custom");
  CHECK(resolve_spectrum("custom.csv", {}, dir).samples().size() == 2);
  CHECK(resolve_spectrum("EGFP").name() == "EGFP");
  try {
    resolve_spectrum("mCherry", dir);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
    CHECK(std::string(e.what()).find("mCherry") != std::string::npos);
  }
}
