#include "buddykit/toy.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace buddykit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kRollTMin = 1.5 * std::numbers::pi;
constexpr double kRollTMax = 4.5 * std::numbers::pi;
constexpr double kRollNoiseStd = 0.05;

// Stream separators so data, init and batch sampling draw from independent
// deterministic sequences per seed.
constexpr std::uint64_t kInitStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kBatchStream = 0x517CC1B727220A95ull;

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller pair; engines and math only, so the stream is reproducible
// across standard libraries.
inline std::pair<double, double> normal_pair(std::mt19937_64& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
}

}  // namespace

std::vector<SwissRollSample> gen_swiss_roll(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_swiss_roll: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<SwissRollSample> out(static_cast<size_t>(n));
  for (auto& s : out) {
    const double t = kRollTMin + (kRollTMax - kRollTMin) * uniform01(rng);
    const auto [n1, n2] = normal_pair(rng);
    s.y = swiss_roll_point(t) + kRollNoiseStd * Eigen::Vector2d(n1, n2);
    s.x = 0.5 * (s.y[0] + s.y[1]);
  }
  return out;
}

Eigen::Vector2d swiss_roll_point(double t) {
  return {0.5 * t * std::cos(t), 0.5 * t * std::sin(t)};
}

double swiss_roll_curve_distance(const Eigen::Vector2d& p) {
  constexpr int kDense = 10000;
  const double step = (kRollTMax - kRollTMin) / (kDense - 1);
  double best_t = kRollTMin;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kDense; ++i) {
    const double t = kRollTMin + i * step;
    const double d2 = (p - swiss_roll_point(t)).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_t = t;
    }
  }
  // Golden-section polish around the dense winner.
  constexpr double kGolden = 0.6180339887498949;
  double lo = std::max(kRollTMin, best_t - step);
  double hi = std::min(kRollTMax, best_t + step);
  double m1 = hi - kGolden * (hi - lo);
  double m2 = lo + kGolden * (hi - lo);
  double f1 = (p - swiss_roll_point(m1)).squaredNorm();
  double f2 = (p - swiss_roll_point(m2)).squaredNorm();
  for (int it = 0; it < 80; ++it) {
    if (f1 <= f2) {
      hi = m2;
      m2 = m1;
      f2 = f1;
      m1 = hi - kGolden * (hi - lo);
      f1 = (p - swiss_roll_point(m1)).squaredNorm();
    } else {
      lo = m1;
      m1 = m2;
      f1 = f2;
      m2 = lo + kGolden * (hi - lo);
      f2 = (p - swiss_roll_point(m2)).squaredNorm();
    }
  }
  return std::sqrt(std::min({best_d2, f1, f2}));
}

MlpModel MlpModel::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto fill_normal = [&rng](Eigen::MatrixXd& m, double std_dev) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const auto [z, _] = normal_pair(rng);
        m(r, c) = std_dev * z;
      }
  };
  MlpModel model;
  model.w1.resize(64, 1);
  model.w2.resize(64, 64);
  model.w3.resize(2, 64);
  fill_normal(model.w1, std::sqrt(2.0 / 1.0));
  fill_normal(model.w2, std::sqrt(2.0 / 64.0));
  fill_normal(model.w3, std::sqrt(1.0 / 64.0));
  model.b1 = Eigen::VectorXd::Zero(64);
  model.b2 = Eigen::VectorXd::Zero(64);
  model.b3 = Eigen::VectorXd::Zero(2);
  return model;
}

Eigen::Vector2d MlpModel::forward(double x) const {
  Eigen::RowVectorXd xs(1);
  xs[0] = x;
  return forward_batch(xs).col(0);
}

Eigen::Matrix2Xd MlpModel::forward_batch(const Eigen::RowVectorXd& xs) const {
  const Eigen::MatrixXd a1 = ((w1 * xs).colwise() + b1).cwiseMax(0.0);
  const Eigen::MatrixXd a2 = ((w2 * a1).colwise() + b2).cwiseMax(0.0);
  return (w3 * a2).colwise() + b3;
}

bool MlpModel::finite() const {
  return w1.allFinite() && w2.allFinite() && w3.allFinite() && b1.allFinite() &&
         b2.allFinite() && b3.allFinite();
}

MlpGradients mlp_grad(const MlpModel& model, const Eigen::RowVectorXd& xs,
                      const Eigen::Matrix2Xd& dloss_dout) {
  if (xs.size() != dloss_dout.cols())
    throw std::invalid_argument("mlp_grad: batch size mismatch");
  if (!model.finite()) throw std::invalid_argument("mlp_grad: non-finite parameters");

  const Eigen::MatrixXd z1 = (model.w1 * xs).colwise() + model.b1;
  const Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
  const Eigen::MatrixXd z2 = (model.w2 * a1).colwise() + model.b2;
  const Eigen::MatrixXd a2 = z2.cwiseMax(0.0);

  MlpGradients g;
  g.w3 = dloss_dout * a2.transpose();
  g.b3 = dloss_dout.rowwise().sum();
  // ReLU subgradient is taken as 0 at the kink.
  const Eigen::MatrixXd d2 =
      (model.w3.transpose() * dloss_dout).cwiseProduct((z2.array() > 0.0).cast<double>().matrix());
  g.w2 = d2 * a1.transpose();
  g.b2 = d2.rowwise().sum();
  const Eigen::MatrixXd d1 =
      (model.w2.transpose() * d2).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
  g.w1 = d1 * xs.transpose();
  g.b1 = d1.rowwise().sum();
  return g;
}

std::string to_string(ToyLoss kind) {
  switch (kind) {
    case ToyLoss::mae: return "mae";
    case ToyLoss::mse: return "mse";
    case ToyLoss::bbl: return "bbl";
  }
  throw std::invalid_argument("to_string: bad ToyLoss");
}

Eigen::Index toy_buddy_index(const Eigen::Matrix2Xd& targets, const Eigen::Vector2d& g_i,
                             const Eigen::Vector2d& y_hat, double alpha, double beta) {
  if (targets.cols() == 0) throw std::invalid_argument("toy_buddy: empty target set");
  Eigen::Index best = 0;
  double best_obj = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < targets.cols(); ++j) {
    const Eigen::Vector2d g = targets.col(j);
    const double obj = alpha * (g - g_i).squaredNorm() + beta * (g - y_hat).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = j;
    }
  }
  return best;
}

Eigen::Vector2d toy_buddy(const Eigen::Matrix2Xd& targets, const Eigen::Vector2d& g_i,
                          const Eigen::Vector2d& y_hat, double alpha, double beta) {
  return targets.col(toy_buddy_index(targets, g_i, y_hat, alpha, beta));
}

namespace {

struct AdamState {
  Eigen::MatrixXd m, v;
  explicit AdamState(Eigen::Index rows, Eigen::Index cols)
      : m(Eigen::MatrixXd::Zero(rows, cols)), v(Eigen::MatrixXd::Zero(rows, cols)) {}
};

struct AdamOptimizer {
  double lr;  // set per step by the cosine schedule
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<AdamState> states;

  void step_param(size_t i, Eigen::Ref<Eigen::MatrixXd> param,
                  const Eigen::Ref<const Eigen::MatrixXd>& grad, double c1, double c2) {
    AdamState& s = states[i];
    s.m = beta1 * s.m + (1.0 - beta1) * grad;
    s.v = beta2 * s.v + (1.0 - beta2) * grad.cwiseProduct(grad);
    param -= lr * (s.m / c1).cwiseQuotient(((s.v / c2).cwiseSqrt().array() + eps).matrix());
  }

  void update(MlpModel& model, const MlpGradients& g) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    step_param(0, model.w1, g.w1, c1, c2);
    step_param(1, model.w2, g.w2, c1, c2);
    step_param(2, model.w3, g.w3, c1, c2);
    step_param(3, model.b1, g.b1, c1, c2);
    step_param(4, model.b2, g.b2, c1, c2);
    step_param(5, model.b3, g.b3, c1, c2);
  }
};

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

MlpModel train_toy(const ToyTrainConfig& cfg) {
  if (cfg.n_train < 1 || cfg.steps < 1 || cfg.batch_size < 1 || cfg.learning_rate <= 0.0)
    throw std::invalid_argument("train_toy: counts and learning rate must be positive");
  if (cfg.alpha < 0.0 || cfg.beta < 0.0 || cfg.alpha + cfg.beta <= 0.0)
    throw std::invalid_argument("train_toy: need alpha, beta >= 0 and alpha + beta > 0");

  const std::vector<SwissRollSample> data = gen_swiss_roll(cfg.n_train, cfg.seed);
  Eigen::RowVectorXd xs(cfg.n_train);
  Eigen::Matrix2Xd ys(2, cfg.n_train);
  for (int i = 0; i < cfg.n_train; ++i) {
    xs[i] = data[static_cast<size_t>(i)].x;
    ys.col(i) = data[static_cast<size_t>(i)].y;
  }

  MlpModel model = MlpModel::init(cfg.seed + kInitStream);
  AdamOptimizer adam{cfg.learning_rate};
  for (const auto* p : {&model.w1, &model.w2, &model.w3})
    adam.states.emplace_back(p->rows(), p->cols());
  for (const auto* p : {&model.b1, &model.b2, &model.b3})
    adam.states.emplace_back(p->rows(), p->cols());

  std::mt19937_64 batch_rng(cfg.seed + kBatchStream);
  const int b = cfg.batch_size;
  Eigen::RowVectorXd xb(b);
  Eigen::Matrix2Xd targets(2, b);

  // Cosine decay from the configured rate down to 1% of it. The tail of the
  // schedule is what lets the L1-based losses settle instead of jittering
  // around their fixed point.
  const double lr_floor = 0.01 * cfg.learning_rate;

  for (int step = 1; step <= cfg.steps; ++step) {
    const double phase = static_cast<double>(step - 1) / static_cast<double>(cfg.steps);
    adam.lr = lr_floor + 0.5 * (cfg.learning_rate - lr_floor) *
                             (1.0 + std::cos(std::numbers::pi * phase));
    std::vector<int> idx(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i)
      idx[static_cast<size_t>(i)] = static_cast<int>(batch_rng() % static_cast<std::uint64_t>(cfg.n_train));
    for (int i = 0; i < b; ++i) xb[i] = xs[idx[static_cast<size_t>(i)]];

    const Eigen::Matrix2Xd yhat = model.forward_batch(xb);
    if (cfg.loss_kind == ToyLoss::bbl) {
      for (int i = 0; i < b; ++i)
        targets.col(i) =
            toy_buddy(ys, ys.col(idx[static_cast<size_t>(i)]), yhat.col(i), cfg.alpha, cfg.beta);
    } else {
      for (int i = 0; i < b; ++i) targets.col(i) = ys.col(idx[static_cast<size_t>(i)]);
    }

    const Eigen::Matrix2Xd diff = yhat - targets;
    const double denom = static_cast<double>(b) * 2.0;
    double loss = 0.0;
    Eigen::Matrix2Xd grad_out(2, b);
    if (cfg.loss_kind == ToyLoss::mse) {
      loss = diff.squaredNorm() / denom;
      grad_out = (2.0 / denom) * diff;
    } else {
      loss = diff.cwiseAbs().sum() / denom;
      grad_out = diff.unaryExpr([](double d) { return sign(d); }) / denom;
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("train_toy: loss diverged to non-finite at step " +
                               std::to_string(step));

    const MlpGradients g = mlp_grad(model, xb, grad_out);
    adam.update(model, g);
  }

  if (!model.finite()) throw std::runtime_error("train_toy: non-finite parameters after training");
  return model;
}

std::vector<double> toy_grid() {
  std::vector<double> g;
  for (int x = -7; x <= 7; ++x) g.push_back(static_cast<double>(x));
  return g;
}

ManifoldFitStats eval_manifold_fit(const MlpModel& model, const std::vector<double>& grid) {
  ManifoldFitStats stats;
  stats.points.reserve(grid.size());
  double sum = 0.0;
  for (double x : grid) {
    const Eigen::Vector2d y = model.forward(x);
    ManifoldFitStats::GridPoint pt;
    pt.x = x;
    pt.y1 = y[0];
    pt.y2 = y[1];
    pt.curve_distance = swiss_roll_curve_distance(y);
    pt.lr_residual = std::abs(0.5 * (y[0] + y[1]) - x);
    sum += pt.curve_distance;
    stats.max_dist = std::max(stats.max_dist, pt.curve_distance);
    stats.points.push_back(pt);
  }
  stats.mean_dist = grid.empty() ? 0.0 : sum / static_cast<double>(grid.size());
  return stats;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Map roll coordinates ([-8, 8] both axes) onto a 640x640 canvas, y up.
double svg_x(double v) { return (v + 8.0) * 40.0; }
double svg_y(double v) { return (8.0 - v) * 40.0; }

void append_marker(std::string& svg, const std::string& kind, double cx, double cy,
                   const std::string& color) {
  const std::string x = fmt2(cx), y = fmt2(cy);
  if (kind == "mae") {  // triangle
    svg += "<path d=\"M " + x + " " + fmt2(cy - 5.0) + " L " + fmt2(cx - 4.5) + " " +
           fmt2(cy + 4.0) + " L " + fmt2(cx + 4.5) + " " + fmt2(cy + 4.0) +
           " Z\" fill=\"" + color + "\"/>\n";
  } else if (kind == "mse") {  // four-point star
    svg += "<path d=\"M " + x + " " + fmt2(cy - 6.0) + " L " + fmt2(cx + 1.6) + " " +
           fmt2(cy - 1.6) + " L " + fmt2(cx + 6.0) + " " + y + " L " + fmt2(cx + 1.6) + " " +
           fmt2(cy + 1.6) + " L " + x + " " + fmt2(cy + 6.0) + " L " + fmt2(cx - 1.6) + " " +
           fmt2(cy + 1.6) + " L " + fmt2(cx - 6.0) + " " + y + " L " + fmt2(cx - 1.6) + " " +
           fmt2(cy - 1.6) + " Z\" fill=\"" + color + "\"/>\n";
  } else {  // plus
    svg += "<path d=\"M " + fmt2(cx - 5.0) + " " + y + " L " + fmt2(cx + 5.0) + " " + y +
           " M " + x + " " + fmt2(cy - 5.0) + " L " + x + " " + fmt2(cy + 5.0) +
           "\" stroke=\"" + color + "\" stroke-width=\"2.4\" fill=\"none\"/>\n";
  }
}

}  // namespace

void export_toy_outputs(const std::vector<std::pair<std::string, ManifoldFitStats>>& runs,
                        const std::vector<SwissRollSample>& train_data,
                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  // CSV of grid predictions.
  {
    std::ofstream csv(fs::path(out_dir) / "toy_estimates.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("export_toy_outputs: cannot write toy_estimates.csv");
    csv << "loss_kind,x,y1,y2,curve_distance\n";
    for (const auto& [kind, stats] : runs)
      for (const auto& pt : stats.points)
        csv << kind << ',' << fmt(pt.x) << ',' << fmt(pt.y1) << ',' << fmt(pt.y2) << ','
            << fmt(pt.curve_distance) << '\n';
  }

  // Stats JSON.
  {
    nlohmann::json stats_json;
    stats_json["schema"] = 1;
    nlohmann::json per_kind;
    for (const auto& [kind, stats] : runs)
      per_kind[kind] = {{"mean_dist", stats.mean_dist}, {"max_dist", stats.max_dist}};
    stats_json["stats"] = per_kind;
    std::ofstream js(fs::path(out_dir) / "toy_stats.json", std::ios::binary);
    if (!js) throw std::runtime_error("export_toy_outputs: cannot write toy_stats.json");
    js << stats_json.dump(2) << '\n';
  }

  // Scatter plot.
  {
    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
           "viewBox=\"0 0 640 640\">\n";
    svg += "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";

    // Noiseless roll for orientation.
    svg += "<polyline fill=\"none\" stroke=\"#dddddd\" stroke-width=\"1\" points=\"";
    for (int i = 0; i <= 600; ++i) {
      const double t = kRollTMin + (kRollTMax - kRollTMin) * i / 600.0;
      const Eigen::Vector2d c = swiss_roll_point(t);
      svg += fmt2(svg_x(c[0])) + "," + fmt2(svg_y(c[1])) + " ";
    }
    svg += "\"/>\n";

    const size_t max_points = 2000;
    const size_t stride = std::max<size_t>(1, train_data.size() / max_points);
    for (size_t i = 0; i < train_data.size(); i += stride) {
      const auto& s = train_data[i];
      svg += "<circle cx=\"" + fmt2(svg_x(s.y[0])) + "\" cy=\"" + fmt2(svg_y(s.y[1])) +
             "\" r=\"1.4\" fill=\"#b0b0b0\"/>\n";
    }

    const auto color_of = [](const std::string& kind) -> std::string {
      if (kind == "mae") return "#1e6fd9";
      if (kind == "mse") return "#2ca02c";
      return "#d62728";
    };
    for (const auto& [kind, stats] : runs)
      for (const auto& pt : stats.points)
        append_marker(svg, kind, svg_x(pt.y1), svg_y(pt.y2), color_of(kind));

    double legend_y = 24.0;
    for (const auto& [kind, stats] : runs) {
      append_marker(svg, kind, 24.0, legend_y - 4.0, color_of(kind));
      svg += "<text x=\"36\" y=\"" + fmt2(legend_y) + "\" font-family=\"sans-serif\" "
             "font-size=\"14\">" + kind + "</text>\n";
      legend_y += 20.0;
    }
    svg += "</svg>\n";

    std::ofstream out(fs::path(out_dir) / "toy_plot.svg", std::ios::binary);
    if (!out) throw std::runtime_error("export_toy_outputs: cannot write toy_plot.svg");
    out << svg;
  }
}

}  // namespace buddykit
