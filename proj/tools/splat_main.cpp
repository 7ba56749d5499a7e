#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "splat/commands.hpp"

namespace {

struct Args {
  std::string config;
  long long seed = -1;  // override when >= 0
  std::string out;
};

splat::RunConfig load_config(const Args& args) {
  splat::RunConfig cfg = splat::RunConfig::from_file(args.config);
  if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
  if (!args.out.empty()) cfg.paths.output = args.out;
  return cfg;
}

void add_common(CLI::App* sub, Args& args) {
  sub->add_option("--config", args.config, "run configuration file (JSON)")->required();
  sub->add_option("--seed", args.seed, "override the config seed");
  sub->add_option("--out", args.out, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"schema-guided dialogue state tracker"};
  app.require_subcommand(1);
  Args args;

  CLI::App* gen = app.add_subcommand("gen-synth", "generate a synthetic corpus");
  CLI::App* pretrain = app.add_subcommand("pretrain-rss", "span-selection pre-training");
  CLI::App* train = app.add_subcommand("train", "train on a dialogue corpus");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a trained model");
  CLI::App* robust = app.add_subcommand("robustness", "evaluate across schema variants");
  for (CLI::App* sub : {gen, pretrain, train, eval, robust}) add_common(sub, args);

  CLI11_PARSE(app, argc, argv);

  try {
    splat::RunConfig cfg = load_config(args);
    if (gen->parsed()) {
      splat::cmd_gen_synth(cfg);
    } else if (pretrain->parsed()) {
      splat::cmd_pretrain_rss(cfg);
    } else if (train->parsed()) {
      splat::cmd_train(cfg);
    } else if (eval->parsed()) {
      splat::cmd_eval(cfg);
    } else if (robust->parsed()) {
      splat::cmd_robustness(cfg);
    }
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = {{"message", e.what()}};
    std::cerr << err.dump() << std::endl;
    return 1;
  }
  return 0;
}
