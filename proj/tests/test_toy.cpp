#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "buddykit/toy.hpp"
#include "helpers.hpp"

using namespace buddykit;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ToyTrainConfig tiny_config(ToyLoss kind, std::uint64_t seed) {
  ToyTrainConfig cfg;
  cfg.loss_kind = kind;
  cfg.n_train = 256;
  cfg.steps = 60;
  cfg.batch_size = 32;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("swiss roll samples satisfy the downsampling identity") {
  const auto data = gen_swiss_roll(512, 3);
  for (const auto& s : data) CHECK(s.x == 0.5 * (s.y[0] + s.y[1]));
}

TEST_CASE("swiss roll generation is deterministic per seed") {
  const auto a = gen_swiss_roll(128, 11);
  const auto b = gen_swiss_roll(128, 11);
  const auto c = gen_swiss_roll(128, 12);
  REQUIRE(a.size() == b.size());
  bool identical = true, differs = false;
  for (size_t i = 0; i < a.size(); ++i) {
    identical = identical && a[i].y == b[i].y && a[i].x == b[i].x;
    differs = differs || a[i].y != c[i].y;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("swiss roll samples stay inside the scaled envelope") {
  const auto data = gen_swiss_roll(4096, 7);
  const double bound = 0.5 * 4.5 * std::numbers::pi + 5.0 * 0.05;
  for (const auto& s : data) {
    REQUIRE(std::abs(s.y[0]) <= bound);
    REQUIRE(std::abs(s.y[1]) <= bound);
  }
}

TEST_CASE("zero model maps everything to the origin") {
  MlpModel m;
  m.w1 = Eigen::MatrixXd::Zero(64, 1);
  m.w2 = Eigen::MatrixXd::Zero(64, 64);
  m.w3 = Eigen::MatrixXd::Zero(2, 64);
  m.b1 = Eigen::VectorXd::Zero(64);
  m.b2 = Eigen::VectorXd::Zero(64);
  m.b3 = Eigen::VectorXd::Zero(2);
  CHECK(m.forward(3.7) == Eigen::Vector2d::Zero());
  CHECK(m.forward(-123.0) == Eigen::Vector2d::Zero());
}

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    MlpModel model = MlpModel::init(1000 + trial);
    Eigen::RowVectorXd xs(3);
    Eigen::Matrix2Xd target(2, 3);
    for (int i = 0; i < 3; ++i) {
      xs[i] = 8.0 * (testkit::uniform01(rng) - 0.5);
      target.col(i) =
          Eigen::Vector2d(testkit::uniform01(rng) - 0.5, testkit::uniform01(rng) - 0.5);
    }

    const auto loss_of = [&](const MlpModel& m) {
      return 0.5 * (m.forward_batch(xs) - target).squaredNorm();
    };
    const MlpGradients grads = mlp_grad(model, xs, model.forward_batch(xs) - target);

    // Probe one random parameter from each tensor.
    auto probe = [&](Eigen::MatrixXd& param, const Eigen::MatrixXd& grad) {
      const Eigen::Index r = static_cast<Eigen::Index>(rng() % param.rows());
      const Eigen::Index c = static_cast<Eigen::Index>(rng() % param.cols());
      const double h = 1e-5;
      const double saved = param(r, c);
      param(r, c) = saved + h;
      const double up = loss_of(model);
      param(r, c) = saved - h;
      const double down = loss_of(model);
      param(r, c) = saved;
      const double fd = (up - down) / (2.0 * h);
      const double analytic = grad(r, c);
      const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-8});
      REQUIRE(std::abs(fd - analytic) / scale <= 1e-4);
    };
    probe(model.w1, grads.w1);
    probe(model.w2, grads.w2);
    probe(model.w3, grads.w3);
    auto probe_vec = [&](Eigen::VectorXd& param, const Eigen::VectorXd& grad) {
      Eigen::MatrixXd pm = param, gm = grad;
      const Eigen::Index r = static_cast<Eigen::Index>(rng() % param.rows());
      const double h = 1e-5, saved = param[r];
      param[r] = saved + h;
      const double up = loss_of(model);
      param[r] = saved - h;
      const double down = loss_of(model);
      param[r] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(grad[r]), 1e-8});
      REQUIRE(std::abs(fd - grad[r]) / scale <= 1e-4);
    };
    probe_vec(model.b1, grads.b1);
    probe_vec(model.b2, grads.b2);
    probe_vec(model.b3, grads.b3);
  }
}

TEST_CASE("all-positive pre-activations reduce to an affine map") {
  MlpModel m;
  m.w1 = Eigen::MatrixXd::Constant(64, 1, 0.01);
  m.w2 = Eigen::MatrixXd::Constant(64, 64, 0.005);
  m.w3 = Eigen::MatrixXd::Constant(2, 64, 0.02);
  m.w3.row(1).setConstant(-0.01);
  m.b1 = Eigen::VectorXd::Constant(64, 1.0);
  m.b2 = Eigen::VectorXd::Constant(64, 2.0);
  m.b3 = Eigen::Vector2d(0.5, -0.25);

  // For x in [0, 10] every hidden unit stays positive, so the composition is
  // exactly w3*(w2*(w1 x + b1) + b2) + b3.
  const Eigen::MatrixXd a = m.w3 * m.w2 * m.w1;
  const Eigen::Vector2d c = m.w3 * (m.w2 * m.b1 + m.b2) + m.b3;
  for (const double x : {0.0, 0.5, 3.0, 10.0}) {
    const Eigen::Vector2d want = a * x + c;
    CHECK((m.forward(x) - want).norm() <= 1e-12);
  }
}

TEST_CASE("toy buddy selection") {
  std::mt19937_64 rng(31);
  Eigen::Matrix2Xd targets(2, 256);
  for (int j = 0; j < 256; ++j)
    targets.col(j) =
        Eigen::Vector2d(8.0 * (testkit::uniform01(rng) - 0.5), 8.0 * (testkit::uniform01(rng) - 0.5));

  const Eigen::Vector2d gi = targets.col(17);
  const Eigen::Vector2d yhat(0.3, -0.2);

  SUBCASE("beta = 0 returns the anchor") {
    CHECK(toy_buddy(targets, gi, yhat, 1.0, 0.0) == gi);
  }
  SUBCASE("alpha = 0 returns the estimate when present") {
    Eigen::Matrix2Xd with_yhat = targets;
    with_yhat.col(99) = yhat;
    CHECK(toy_buddy(with_yhat, gi, yhat, 0.0, 1.0) == yhat);
  }
  SUBCASE("matches the exhaustive objective scan") {
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::Vector2d g = targets.col(static_cast<Eigen::Index>(rng() % 256));
      const Eigen::Vector2d y(6.0 * (testkit::uniform01(rng) - 0.5),
                              6.0 * (testkit::uniform01(rng) - 0.5));
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index want = 0;
      for (Eigen::Index j = 0; j < 256; ++j) {
        const double obj =
            (targets.col(j) - g).squaredNorm() + (targets.col(j) - y).squaredNorm();
        if (obj < best) {
          best = obj;
          want = j;
        }
      }
      REQUIRE(toy_buddy_index(targets, g, y, 1.0, 1.0) == want);
    }
  }
  SUBCASE("ties break to the lowest index") {
    Eigen::Matrix2Xd dup(2, 4);
    dup.col(0) = Eigen::Vector2d(1.0, 1.0);
    dup.col(1) = Eigen::Vector2d(1.0, 1.0);
    dup.col(2) = Eigen::Vector2d(5.0, 5.0);
    dup.col(3) = Eigen::Vector2d(1.0, 1.0);
    CHECK(toy_buddy_index(dup, dup.col(0), Eigen::Vector2d(1.1, 0.9), 1.0, 1.0) == 0);
  }
  SUBCASE("empty target set throws") {
    CHECK_THROWS_AS(toy_buddy(Eigen::Matrix2Xd(2, 0), gi, yhat, 1.0, 1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("buddy objective never exceeds the anchor objective") {
  // The anchor is itself a candidate, so the chosen buddy's objective is
  // bounded by beta * |g_i - y|^2; checked across an evolving model.
  const auto data = gen_swiss_roll(256, 5);
  Eigen::Matrix2Xd targets(2, 256);
  for (int i = 0; i < 256; ++i) targets.col(i) = data[static_cast<size_t>(i)].y;

  for (int snapshot = 0; snapshot < 4; ++snapshot) {
    ToyTrainConfig cfg = tiny_config(ToyLoss::bbl, 14);
    cfg.steps = 1 + snapshot * 30;
    const MlpModel model = train_toy(cfg);
    for (int i = 0; i < 256; i += 7) {
      const Eigen::Vector2d gi = targets.col(i);
      const Eigen::Vector2d yhat = model.forward(data[static_cast<size_t>(i)].x);
      const Eigen::Vector2d buddy = toy_buddy(targets, gi, yhat, 1.0, 1.0);
      const double obj = (buddy - gi).squaredNorm() + (buddy - yhat).squaredNorm();
      REQUIRE(obj <= (gi - yhat).squaredNorm());
    }
  }
}

TEST_CASE("training is bit-deterministic per seed") {
  for (const auto kind : {ToyLoss::mae, ToyLoss::mse, ToyLoss::bbl}) {
    const MlpModel a = train_toy(tiny_config(kind, 77));
    const MlpModel b = train_toy(tiny_config(kind, 77));
    CHECK(a.w1 == b.w1);
    CHECK(a.w2 == b.w2);
    CHECK(a.w3 == b.w3);
    CHECK(a.b1 == b.b1);
    CHECK(a.b2 == b.b2);
    CHECK(a.b3 == b.b3);
  }
}

TEST_CASE("training aborts on divergence") {
  ToyTrainConfig cfg = tiny_config(ToyLoss::mse, 1);
  cfg.learning_rate = 1e155;
  cfg.steps = 10;
  CHECK_THROWS_AS(train_toy(cfg), std::runtime_error);
}

TEST_CASE("curve distance is zero on the curve and positive off it") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 10; ++i) {
    const double t = 1.5 * std::numbers::pi + 3.0 * std::numbers::pi * testkit::uniform01(rng);
    REQUIRE(swiss_roll_curve_distance(swiss_roll_point(t)) <= 1e-6);
  }

  // Independent dense scan as the oracle for an off-curve point.
  const Eigen::Vector2d p(0.0, 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 1000000; ++i) {
    const double t =
        1.5 * std::numbers::pi + 3.0 * std::numbers::pi * static_cast<double>(i) / 1000000.0;
    best = std::min(best, (p - swiss_roll_point(t)).norm());
  }
  CHECK(swiss_roll_curve_distance(p) == doctest::Approx(best).epsilon(1e-5));
}

TEST_CASE("manifold evaluation reports the grid and the lr residual") {
  CHECK(toy_grid() == std::vector<double>{-7, -6, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6, 7});

  // Constant model: y = b3 everywhere.
  MlpModel m;
  m.w1 = Eigen::MatrixXd::Zero(64, 1);
  m.w2 = Eigen::MatrixXd::Zero(64, 64);
  m.w3 = Eigen::MatrixXd::Zero(2, 64);
  m.b1 = Eigen::VectorXd::Zero(64);
  m.b2 = Eigen::VectorXd::Zero(64);
  m.b3 = Eigen::Vector2d(1.0, 3.0);

  const ManifoldFitStats stats = eval_manifold_fit(m);
  REQUIRE(stats.points.size() == 15);
  const double expect_dist = swiss_roll_curve_distance(Eigen::Vector2d(1.0, 3.0));
  for (const auto& pt : stats.points) {
    CHECK(pt.curve_distance == doctest::Approx(expect_dist).epsilon(1e-12));
    CHECK(pt.lr_residual == doctest::Approx(std::abs(2.0 - pt.x)).epsilon(1e-12));
  }
  CHECK(stats.mean_dist == doctest::Approx(expect_dist).epsilon(1e-12));
  CHECK(stats.max_dist == doctest::Approx(expect_dist).epsilon(1e-12));
}

TEST_CASE("toy outputs are complete and byte-stable") {
  const auto data = gen_swiss_roll(256, 5);
  std::vector<std::pair<std::string, ManifoldFitStats>> runs;
  for (const auto kind : {ToyLoss::mae, ToyLoss::mse, ToyLoss::bbl})
    runs.emplace_back(to_string(kind), eval_manifold_fit(train_toy(tiny_config(kind, 5))));

  const auto dir = std::filesystem::temp_directory_path() / "buddykit_toy_out";
  std::filesystem::remove_all(dir);
  export_toy_outputs(runs, data, dir.string());

  const std::string csv = slurp(dir / "toy_estimates.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 15);
  CHECK(csv.rfind("loss_kind,x,y1,y2,curve_distance\n", 0) == 0);

  const std::string svg = slurp(dir / "toy_plot.svg");
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '<') == std::count(svg.begin(), svg.end(), '>'));

  const std::string stats = slurp(dir / "toy_stats.json");
  CHECK(stats.find("\"bbl\"") != std::string::npos);
  CHECK(stats.find("mean_dist") != std::string::npos);

  // Re-export must be byte-identical.
  const auto dir2 = std::filesystem::temp_directory_path() / "buddykit_toy_out2";
  std::filesystem::remove_all(dir2);
  export_toy_outputs(runs, data, dir2.string());
  CHECK(slurp(dir2 / "toy_estimates.csv") == csv);
  CHECK(slurp(dir2 / "toy_plot.svg") == svg);
  CHECK(slurp(dir2 / "toy_stats.json") == stats);

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}
