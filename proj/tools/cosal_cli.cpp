// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cosal/data/synthetic.hpp"
#include "cosal/harness/config.hpp"
#include "cosal/harness/evaluate.hpp"
#include "cosal/harness/gradcheck.hpp"
#include "cosal/harness/infer.hpp"
#include "cosal/harness/pr_export.hpp"
#include "cosal/harness/train.hpp"

namespace {

int run_train(const std::string& config_path, int seed_override) {
  auto cfg = cosal::harness::load_config(config_path);
  if (seed_override >= 0) cfg.seed = seed_override;
  auto result = cosal::harness::train(cfg, &std::cout);
  std::printf("wrote %s\n", result.checkpoint_path.string().c_str());
  std::printf("final epoch mean loss %.17g\n", result.epoch_means.back());
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& out_dir,
             bool bypass_gt, const std::string& split) {
  auto ck = cosal::harness::load_checkpoint(ckpt_path);
  cosal::harness::EvalOptions opt;
  opt.out_dir = out_dir;
  opt.bypass_gt = bypass_gt;
  opt.split = cosal::data::split_from_name(split);
  auto res = cosal::harness::evaluate(ck, data_dir, opt);
  std::fputs(res.report.to_key_values().c_str(), stdout);
  std::printf("wrote %s\n", res.metrics_txt.string().c_str());
  return 0;
}

int run_infer(const std::string& ckpt_path, const std::string& image, const std::string& out) {
  auto ck = cosal::harness::load_checkpoint(ckpt_path);
  cosal::harness::infer(ck, image, out);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int run_gradcheck(const std::string& config_path, int samples) {
  auto cfg = cosal::harness::load_config(config_path);
  auto res = cosal::harness::grad_check(cfg, samples);
  std::printf("checked %d parameter entries, max relative error %.17g (%s[%lld])\n",
              res.n_checked, res.max_rel_err, res.worst.param.c_str(),
              static_cast<long long>(res.worst.index));
  for (const auto& f : res.failures)
    std::printf("FAIL %s[%lld]: analytic %.17g numeric %.17g rel %.17g\n", f.param.c_str(),
                static_cast<long long>(f.index), f.analytic, f.numeric, f.rel_err);
  return res.failures.empty() ? 0 : 1;
}

int run_export_pr(const std::string& report, const std::string& csv, const std::string& plot) {
  cosal::harness::export_pr(report, csv, plot);
  std::printf("wrote %s and %s\n", csv.c_str(), plot.c_str());
  return 0;
}

int run_synth(const std::string& out_dir, const std::string& split, int count, int side,
              int seed) {
  auto base = cosal::data::write_synthetic_dataset(out_dir, cosal::data::split_from_name(split),
                                                   count, side,
                                                   static_cast<std::uint64_t>(seed));
  std::printf("wrote %d samples under %s\n", count, base.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative RGB-D saliency reference: train, evaluate, infer"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, data_dir, out_dir, image_path, out_path;
  std::string report_path, csv_path, plot_path, split = "train", eval_split = "test";
  int seed_override = -1, samples = 200, count = 8, side = 64, seed = 1;
  bool bypass_gt = false;

  auto* train = app.add_subcommand("train", "Train from a config file");
  train->add_option("--config", config_path, "flat key=value config")->required();
  train->add_option("--seed", seed_override, "override the config seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a test split");
  eval->add_option("--checkpoint", ckpt_path)->required();
  eval->add_option("--data", data_dir, "dataset root")->required();
  eval->add_option("--out", out_dir, "report directory")->required();
  eval->add_flag("--bypass-gt", bypass_gt, "score ground truth against itself");
  eval->add_option("--split", eval_split, "train|test (default test)");

  auto* infer = app.add_subcommand("infer", "Write a saliency map for one image");
  infer->add_option("--checkpoint", ckpt_path)->required();
  infer->add_option("--image", image_path)->required();
  infer->add_option("--out", out_path)->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gradcheck->add_option("--config", config_path)->required();
  gradcheck->add_option("--samples", samples, "parameter entries to sample");

  auto* export_pr = app.add_subcommand("export-pr", "Export a PR curve as csv + plot");
  export_pr->add_option("--report", report_path, "pr_curve.csv from eval")->required();
  export_pr->add_option("--csv", csv_path)->required();
  export_pr->add_option("--plot", plot_path)->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--split", split, "train|test");
  synth->add_option("--count", count);
  synth->add_option("--side", side);
  synth->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(config_path, seed_override);
    if (eval->parsed()) return run_eval(ckpt_path, data_dir, out_dir, bypass_gt, eval_split);
    if (infer->parsed()) return run_infer(ckpt_path, image_path, out_path);
    if (gradcheck->parsed()) return run_gradcheck(config_path, samples);
    if (export_pr->parsed()) return run_export_pr(report_path, csv_path, plot_path);
    if (synth->parsed()) return run_synth(out_dir, split, count, side, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
