#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "buddykit/bench.hpp"
#include "buddykit/image.hpp"
#include "buddykit/losses.hpp"
#include "buddykit/patch.hpp"
#include "buddykit/png_io.hpp"
#include "buddykit/region_mask.hpp"
#include "buddykit/toy.hpp"

namespace {

using nlohmann::json;

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("BUDDYKIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

// Shared by bbl and losses: both need images sliceable into 3x3 patches (dims
// divisible by 3) and a x2/x4 pyramid (divisible by 4).
void require_search_dims(const buddykit::Image& img, const std::string& name, bool crop_hint) {
  if (img.height % 12 == 0 && img.width % 12 == 0) return;
  std::string msg = name + " must have height and width divisible by 12 "
                    "(3 for the patch grid, 4 for the pyramid)";
  if (crop_hint) msg += "; pass --crop to center-crop";
  throw std::invalid_argument(msg);
}

struct BblArgs {
  std::string sr, hr, out;
  double alpha = 1.0, beta = 1.0;
  std::string mode = "fast";
  bool crop = false;
  int threads = 0;
};

json run_bbl_report(const BblArgs& args) {
  buddykit::Image sr = buddykit::load_png(args.sr);
  buddykit::Image hr = buddykit::load_png(args.hr);
  if (args.crop) {
    sr = buddykit::crop_to_multiple(sr, 12);
    hr = buddykit::crop_to_multiple(hr, 12);
  }
  if (!sr.same_shape(hr)) throw std::invalid_argument("--sr and --hr dimensions differ");
  require_search_dims(hr, "images", !args.crop);

  const auto pyramid = buddykit::build_pyramid(hr);
  const buddykit::PatchDatabase db = buddykit::build_database(pyramid);
  const buddykit::PatchGrid gts = buddykit::unfold(hr, db.patch_size, db.query_stride);
  const buddykit::PatchGrid queries = buddykit::unfold(sr, db.patch_size, db.query_stride);

  buddykit::BuddySearchConfig cfg;
  cfg.alpha = args.alpha;
  cfg.beta = args.beta;
  cfg.mode = (args.mode == "brute") ? buddykit::SearchMode::brute
                                    : buddykit::SearchMode::accelerated;
  cfg.threads = resolve_threads(args.threads);

  const buddykit::BuddyAssignment assignment = buddykit::buddy_search(queries, gts, db, cfg);
  const double bb = buddykit::best_buddy_loss(queries, assignment, db);

  json report;
  report["schema"] = 1;
  report["alpha"] = args.alpha;
  report["beta"] = args.beta;
  report["patch_size"] = db.patch_size;
  report["stride"] = db.query_stride;
  report["bb_loss"] = bb;
  report["assignments"] = buddykit::assignment_to_json(assignment, db);
  return report;
}

buddykit::LogitBatch load_logits(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("--logits: malformed JSON: " + std::string(e.what()));
  }
  if (!j.contains("real") || !j.contains("fake"))
    throw std::invalid_argument("--logits: expected {\"real\": [...], \"fake\": [...]}");
  const auto to_array = [](const json& arr) {
    Eigen::ArrayXd out(arr.size());
    Eigen::Index i = 0;
    for (const auto& v : arr) out[i++] = v.get<double>();
    return out;
  };
  return {to_array(j["real"]), to_array(j["fake"])};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"best-buddy super-resolution supervision toolkit"};
  app.require_subcommand(1);

  // resize
  auto* resize = app.add_subcommand("resize", "bicubic down/upscale a PNG");
  std::string rz_in, rz_out, rz_dir;
  int rz_scale = 2;
  bool rz_no_aa = false;
  resize->add_option("input", rz_in, "input PNG")->required();
  resize->add_option("output", rz_out, "output PNG")->required();
  resize->add_option("--scale", rz_scale, "integer scale factor")->required();
  resize->add_option("--dir", rz_dir, "down or up")
      ->required()
      ->check(CLI::IsMember({"down", "up"}));
  resize->add_flag("--no-antialias", rz_no_aa, "disable kernel stretching on downscale");
  resize->callback([&] {
    const buddykit::Image img = buddykit::load_png(rz_in);
    buddykit::ResampleSpec spec;
    spec.factor = rz_scale;
    spec.direction = (rz_dir == "down") ? buddykit::ResampleDirection::down
                                        : buddykit::ResampleDirection::up;
    spec.antialias = !rz_no_aa;
    buddykit::save_png(buddykit::bicubic_resample(img, spec), rz_out);
  });

  // bbl
  auto* bbl = app.add_subcommand("bbl", "best-buddy search and loss report");
  BblArgs bbl_args;
  std::string bbl_out;
  bbl->add_option("--sr", bbl_args.sr, "estimated HR PNG")->required();
  bbl->add_option("--hr", bbl_args.hr, "ground-truth HR PNG")->required();
  bbl->add_option("--alpha", bbl_args.alpha, "anchor weight");
  bbl->add_option("--beta", bbl_args.beta, "estimate weight");
  bbl->add_option("--mode", bbl_args.mode, "search mode")
      ->check(CLI::IsMember({"brute", "fast"}));
  bbl->add_option("--out", bbl_out, "report JSON path (default stdout)");
  bbl->add_flag("--crop", bbl_args.crop, "center-crop inputs to a multiple of 12");
  bbl->add_option("--threads", bbl_args.threads, "worker threads (default $BUDDYKIT_THREADS or 1)");
  bbl->callback([&] { write_json(run_bbl_report(bbl_args), bbl_out); });

  // mask
  auto* mask = app.add_subcommand("mask", "region-aware texture mask");
  std::string mk_in, mk_out_mask, mk_out_masked;
  int mk_k = 11;
  double mk_delta = 0.025;
  mask->add_option("--in", mk_in, "input PNG")->required();
  mask->add_option("--k", mk_k, "window side (odd)");
  mask->add_option("--delta", mk_delta, "std threshold");
  mask->add_option("--out-mask", mk_out_mask, "mask PNG path")->required();
  mask->add_option("--out-masked", mk_out_masked, "masked image PNG path");
  mask->callback([&] {
    const buddykit::Image img = buddykit::load_png(mk_in);
    const buddykit::RegionMask m = buddykit::compute_mask(img, {mk_k, mk_delta});
    buddykit::save_png(buddykit::mask_to_image(m), mk_out_mask);
    if (!mk_out_masked.empty())
      buddykit::save_png(buddykit::apply_mask(img, m), mk_out_masked);
  });

  // losses
  auto* losses = app.add_subcommand("losses", "full generator loss report");
  std::string ls_sr, ls_hr, ls_lr, ls_logits, ls_out;
  int ls_scale = 4;
  double ls_alpha = 1.0, ls_beta = 1.0;
  std::string ls_mode = "fast";
  int ls_threads = 0;
  buddykit::LossWeights ls_weights;
  losses->add_option("--sr", ls_sr, "estimated HR PNG")->required();
  losses->add_option("--hr", ls_hr, "ground-truth HR PNG")->required();
  losses->add_option("--lr", ls_lr, "low-resolution PNG")->required();
  losses->add_option("--scale", ls_scale, "downscale factor s");
  losses->add_option("--alpha", ls_alpha, "best-buddy anchor weight");
  losses->add_option("--beta", ls_beta, "best-buddy estimate weight");
  losses->add_option("--mode", ls_mode, "search mode")->check(CLI::IsMember({"brute", "fast"}));
  losses->add_option("--lambda-bb", ls_weights.lambda_bb, "best-buddy weight");
  losses->add_option("--lambda-bp", ls_weights.lambda_bp, "back-projection weight");
  losses->add_option("--lambda-p", ls_weights.lambda_p, "perceptual weight");
  losses->add_option("--lambda-g", ls_weights.lambda_g, "adversarial weight");
  std::vector<double> ls_weight_list;
  losses->add_option("--weights", ls_weight_list, "all four weights: bb bp perceptual adversarial")
      ->expected(4);
  losses->add_option("--logits", ls_logits, "JSON with real/fake logits for the RaGAN term");
  losses->add_option("--threads", ls_threads, "worker threads");
  losses->add_option("--out", ls_out, "report JSON path (default stdout)");
  losses->callback([&] {
    if (!ls_weight_list.empty()) {
      ls_weights.lambda_bb = ls_weight_list[0];
      ls_weights.lambda_bp = ls_weight_list[1];
      ls_weights.lambda_p = ls_weight_list[2];
      ls_weights.lambda_g = ls_weight_list[3];
    }
    const buddykit::Image sr = buddykit::load_png(ls_sr);
    const buddykit::Image hr = buddykit::load_png(ls_hr);
    const buddykit::Image lr = buddykit::load_png(ls_lr);
    if (!sr.same_shape(hr)) throw std::invalid_argument("--sr and --hr dimensions differ");
    if (sr.height != lr.height * ls_scale || sr.width != lr.width * ls_scale ||
        sr.channels != lr.channels)
      throw std::invalid_argument("--lr dimensions must be --sr dimensions divided by --scale");
    require_search_dims(hr, "--sr/--hr", false);

    const auto pyramid = buddykit::build_pyramid(hr);
    const buddykit::PatchDatabase db = buddykit::build_database(pyramid);
    const buddykit::PatchGrid gts = buddykit::unfold(hr, db.patch_size, db.query_stride);
    const buddykit::PatchGrid queries = buddykit::unfold(sr, db.patch_size, db.query_stride);
    buddykit::BuddySearchConfig cfg;
    cfg.alpha = ls_alpha;
    cfg.beta = ls_beta;
    cfg.mode = (ls_mode == "brute") ? buddykit::SearchMode::brute
                                    : buddykit::SearchMode::accelerated;
    cfg.threads = resolve_threads(ls_threads);

    buddykit::LossParts parts;
    parts.bb = buddykit::best_buddy_loss(queries, buddykit::buddy_search(queries, gts, db, cfg), db);
    parts.bp = buddykit::back_projection_loss(sr, lr, ls_scale);
    parts.perceptual = buddykit::perceptual_loss(sr, hr, buddykit::IdentityExtractor());
    parts.ragan_g = ls_logits.empty() ? 0.0 : buddykit::ragan_g_loss(load_logits(ls_logits));

    json report = buddykit::loss_report_json(parts, ls_weights);
    report["schema"] = 1;
    write_json(report, ls_out);
  });

  // toy
  auto* toy = app.add_subcommand("toy", "swiss-roll regression experiment");
  std::string toy_loss = "all", toy_dir;
  buddykit::ToyTrainConfig toy_cfg;
  toy->add_option("--loss", toy_loss, "mae, mse, bbl or all")
      ->check(CLI::IsMember({"mae", "mse", "bbl", "all"}));
  toy->add_option("--seed", toy_cfg.seed, "RNG seed");
  toy->add_option("--out-dir", toy_dir, "output directory")->required();
  toy->add_option("--steps", toy_cfg.steps, "training steps");
  toy->add_option("--batch", toy_cfg.batch_size, "mini-batch size");
  toy->add_option("--lr", toy_cfg.learning_rate, "Adam learning rate");
  toy->add_option("--n-train", toy_cfg.n_train, "training set size");
  toy->add_option("--alpha", toy_cfg.alpha, "best-buddy anchor weight");
  toy->add_option("--beta", toy_cfg.beta, "best-buddy estimate weight");
  toy->callback([&] {
    std::vector<buddykit::ToyLoss> kinds;
    if (toy_loss == "all")
      kinds = {buddykit::ToyLoss::mae, buddykit::ToyLoss::mse, buddykit::ToyLoss::bbl};
    else if (toy_loss == "mae")
      kinds = {buddykit::ToyLoss::mae};
    else if (toy_loss == "mse")
      kinds = {buddykit::ToyLoss::mse};
    else
      kinds = {buddykit::ToyLoss::bbl};

    std::vector<std::pair<std::string, buddykit::ManifoldFitStats>> runs;
    for (const auto kind : kinds) {
      buddykit::ToyTrainConfig cfg = toy_cfg;
      cfg.loss_kind = kind;
      const buddykit::MlpModel model = buddykit::train_toy(cfg);
      runs.emplace_back(buddykit::to_string(kind), buddykit::eval_manifold_fit(model));
    }
    const auto data = buddykit::gen_swiss_roll(toy_cfg.n_train, toy_cfg.seed);
    buddykit::export_toy_outputs(runs, data, toy_dir);
  });

  // bench
  auto* bench = app.add_subcommand("bench", "brute vs accelerated search timing");
  int bn_size = 192, bn_iters = 5, bn_threads = 0;
  std::uint64_t bn_seed = 0;
  std::string bn_out;
  bench->add_option("--size", bn_size, "square image side, multiple of 12");
  bench->add_option("--iters", bn_iters, "timed iterations");
  bench->add_option("--seed", bn_seed, "RNG seed");
  bench->add_option("--threads", bn_threads, "worker threads");
  bench->add_option("--out", bn_out, "report JSON path (default stdout)");
  bench->callback([&] {
    if (bn_size % 12 != 0 || bn_size <= 0)
      throw std::invalid_argument("--size must be a positive multiple of 12");
    const buddykit::BenchResult r =
        buddykit::run_buddy_bench(bn_size, bn_iters, bn_seed, resolve_threads(bn_threads));
    if (!r.outputs_match)
      throw std::runtime_error("bench: brute and accelerated searches disagreed");
    json report;
    report["schema"] = 1;
    report["size"] = r.size;
    report["iters"] = r.iters;
    report["brute_ms"] = r.brute_ms;
    report["fast_ms"] = r.fast_ms;
    report["speedup"] = r.speedup;
    write_json(report, bn_out);
  });

  // mae
  auto* mae = app.add_subcommand("mae", "mean absolute error between two PNGs");
  std::string mae_a, mae_b, mae_out;
  mae->add_option("--a", mae_a, "first PNG")->required();
  mae->add_option("--b", mae_b, "second PNG")->required();
  mae->add_option("--out", mae_out, "report JSON path (default stdout)");
  mae->callback([&] {
    const double v =
        buddykit::mean_absolute_error(buddykit::load_png(mae_a), buddykit::load_png(mae_b));
    write_json(json{{"schema", 1}, {"mae", v}}, mae_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
