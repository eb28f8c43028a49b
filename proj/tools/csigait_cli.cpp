#include <CLI11.hpp>

#include <iostream>

#include "pipeline.hpp"

namespace cli = csigait::cli;

int main(int argc, char** argv) {
  CLI::App app{"csigait: WiFi CSI gait identification pipeline"};
  app.require_subcommand(1);

  std::string config_path, out, mode, preset, sample, partition;
  std::optional<std::uint64_t> seed;
  bool audit = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--mode", mode, "time or freq")->check(CLI::IsMember({"time", "freq"}));
    sub->add_option("--preset", preset, "full or desk")->check(CLI::IsMember({"full", "desk"}));
    sub->add_flag("--audit", audit, "log every data file open with its partition");
  };
  auto* synth = app.add_subcommand("synth", "generate a synthetic capture dataset");
  auto* prep = app.add_subcommand("preprocess", "clean captures and fit the train-only scaler");
  auto* train = app.add_subcommand("train", "train the residual network");
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on one partition");
  auto* spec = app.add_subcommand("spectrogram", "PCA spectrogram with Doppler overlay for one sample");
  for (auto* s : {synth, prep, train, eval, spec}) common(s);
  eval->add_option("--partition", partition, "train or test")->check(CLI::IsMember({"train", "test"}));
  spec->add_option("--sample", sample, "sample id: index path or <subject>/<sample>");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    cli::PipelineConfig cfg;
    if (!config_path.empty()) cfg = cli::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    if (!mode.empty()) cfg.mode = cli::parse_domain(mode);
    if (!preset.empty()) cli::set_preset(cfg, preset);
    if (!sample.empty()) cfg.sample = sample;
    if (!partition.empty()) cfg.partition = partition;
    cfg.audit = cfg.audit || audit;

    cli::Log log(std::cerr, cfg.audit);
    if (synth->parsed()) cli::cmd_synth(cfg, log);
    else if (prep->parsed()) cli::cmd_preprocess(cfg, log);
    else if (train->parsed()) cli::cmd_train(cfg, log);
    else if (eval->parsed()) cli::cmd_evaluate(cfg, log);
    else cli::cmd_spectrogram(cfg, log);
  } catch (const csigait::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
