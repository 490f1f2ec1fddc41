// advlab: train targets, craft bounded attacks, fit the denoiser and
// restorer defenses, and evaluate the whole stack from one config file.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "advlab/attacks.hpp"
#include "advlab/checkpoint.hpp"
#include "advlab/dataset.hpp"
#include "advlab/errors.hpp"
#include "advlab/fr_training.hpp"
#include "advlab/id_training.hpp"
#include "advlab/manifest.hpp"
#include "advlab/pipeline.hpp"
#include "advlab/target_model.hpp"
#include "advlab/verify.hpp"

namespace {

using advlab::ConfigError;
using advlab::MissingInputError;

struct CommonState {
  nlohmann::json config = nlohmann::json::object();
  std::string config_path;
  std::vector<std::string> raw_args;
};

nlohmann::json config_section(const CommonState& st, const std::string& name) {
  if (st.config.contains(name) && st.config[name].is_object())
    return st.config[name];
  return nlohmann::json::object();
}

// Precedence: explicit flag > config value > built-in default.
template <typename T>
T pick(const CLI::Option* opt, const T& flag_value, const nlohmann::json& sec,
       const std::string& key, const T& fallback) {
  if (opt && opt->count() > 0) return flag_value;
  if (sec.contains(key)) {
    try {
      return sec[key].get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field " + key + " has the wrong type");
    }
  }
  return fallback;
}

double default_fraction(const std::string& dataset) {
  return dataset == "cifar10" ? 0.2 : 1.0;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  int64_t ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - t0)
        .count();
  }
};

void record_manifest(const CommonState& st, const std::string& command,
                     const std::filesystem::path& manifest_path,
                     const std::vector<std::filesystem::path>& artifacts,
                     int64_t wall_ms) {
  advlab::ManifestEntry entry;
  entry.command = command;
  entry.args = st.raw_args;
  entry.config_digest =
      st.config_path.empty() ? "-" : advlab::file_digest_hex(st.config_path);
  for (const auto& a : artifacts)
    entry.artifacts.emplace_back(a.string(), advlab::file_digest_hex(a));
  entry.wall_ms = wall_ms;
  advlab::append_manifest(manifest_path, entry);
}

std::filesystem::path manifest_for(const std::filesystem::path& out) {
  auto dir = out.has_parent_path() ? out.parent_path() : std::filesystem::path(".");
  return dir / "manifest.json";
}

advlab::TargetModel load_target(const std::string& path) {
  if (path.empty())
    throw ConfigError("missing required field: target (--target or config)");
  if (!std::filesystem::exists(path))
    throw MissingInputError("checkpoint not found: " + path);
  return advlab::TargetModel::from_checkpoint(advlab::load_checkpoint(path));
}

void write_id_metrics_csv(const std::filesystem::path& path,
                          const advlab::IdTrainResult& result) {
  std::ofstream csv(path, std::ios::trunc);
  csv << "epoch,mean_loss,validation_ae_accuracy,adversarial_seen,clean_seen\n";
  for (const auto& e : result.epochs)
    csv << e.epoch << "," << e.mean_loss << "," << e.validation_ae_accuracy
        << "," << e.adversarial_seen << "," << e.clean_seen << "\n";
}

void write_fr_metrics_csv(const std::filesystem::path& path,
                          const advlab::FrTrainResult& result) {
  std::ofstream csv(path, std::ios::trunc);
  csv << "epoch,mean_loss,p1_retention,p2_recovery,alpha_mean\n";
  for (const auto& e : result.epochs)
    csv << e.epoch << "," << e.mean_loss << "," << e.p1_retention << ","
        << e.p2_recovery << "," << e.alpha_mean << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"adversarial defense laboratory"};
  app.require_subcommand(1);

  CommonState st;
  for (int i = 1; i < argc; ++i) st.raw_args.emplace_back(argv[i]);
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration")
      ->expected(1);

  // ---- train-target ----
  auto* tt = app.add_subcommand("train-target", "train a target classifier");
  std::string tt_dataset, tt_arch, tt_out;
  double tt_fraction = 0.0, tt_lr = 0.0;
  int tt_epochs = 0, tt_batch = 0;
  uint64_t tt_seed = 0;
  auto* tt_dataset_o = tt->add_option("--dataset", tt_dataset, "mnist|cifar10");
  auto* tt_arch_o = tt->add_option("--arch", tt_arch, "small_cnn|resnet_mini");
  auto* tt_fraction_o = tt->add_option("--fraction", tt_fraction);
  auto* tt_epochs_o = tt->add_option("--epochs", tt_epochs);
  auto* tt_lr_o = tt->add_option("--lr", tt_lr);
  auto* tt_batch_o = tt->add_option("--batch", tt_batch);
  auto* tt_seed_o = tt->add_option("--seed", tt_seed);
  tt->add_option("--out", tt_out, "output checkpoint")->required();

  // ---- attack ----
  auto* at = app.add_subcommand("attack", "generate a bounded attack set");
  std::string at_model, at_method, at_split, at_out;
  double at_eps = 0.0, at_step = 0.0, at_margin = 0.0, at_fraction = 0.0;
  int at_iterations = 0, at_n = 0;
  uint64_t at_seed = 0;
  auto* at_model_o = at->add_option("--model", at_model, "target checkpoint");
  auto* at_method_o = at->add_option("--method", at_method, "fgsm|bim|cw");
  auto* at_eps_o = at->add_option("--eps", at_eps, "budget on the 0-255 scale");
  auto* at_iter_o = at->add_option("--iterations", at_iterations);
  auto* at_step_o = at->add_option("--step", at_step);
  auto* at_margin_o = at->add_option("--margin", at_margin);
  auto* at_split_o = at->add_option("--split", at_split, "train|validation|test");
  auto* at_n_o = at->add_option("--n", at_n, "examples to attack (0 = all)");
  auto* at_fraction_o = at->add_option("--fraction", at_fraction);
  auto* at_seed_o = at->add_option("--seed", at_seed);
  at->add_option("--out", at_out, "output .advset")->required();

  // ---- train-id ----
  auto* ti = app.add_subcommand("train-id", "train the input denoiser");
  std::string ti_target, ti_attacks, ti_out, ti_metrics, ti_sigmas;
  double ti_lr = 0.0, ti_fraction = 0.0;
  int ti_epochs = 0, ti_batch = 0, ti_subset = 0, ti_rounds = 0;
  bool ti_no_original = false;
  uint64_t ti_seed = 0;
  auto* ti_target_o = ti->add_option("--target", ti_target);
  auto* ti_attacks_o =
      ti->add_option("--attacks", ti_attacks, "e.g. fgsm:4,8,16");
  auto* ti_epochs_o = ti->add_option("--epochs", ti_epochs);
  auto* ti_lr_o = ti->add_option("--lr", ti_lr);
  auto* ti_batch_o = ti->add_option("--batch", ti_batch);
  auto* ti_fraction_o = ti->add_option("--fraction", ti_fraction);
  auto* ti_subset_o = ti->add_option("--train-subset", ti_subset,
                                     "cap on training examples (0 = all)");
  auto* ti_rounds_o = ti->add_option("--augment-rounds", ti_rounds);
  auto* ti_sigmas_o = ti->add_option("--augment-sigmas", ti_sigmas,
                                     "comma list, one per round");
  ti->add_flag("--no-include-original", ti_no_original);
  auto* ti_seed_o = ti->add_option("--seed", ti_seed);
  ti->add_option("--out", ti_out)->required();
  ti->add_option("--metrics-csv", ti_metrics);

  // ---- train-fr ----
  auto* tf = app.add_subcommand("train-fr", "train the feature restorer");
  std::string tf_target, tf_id, tf_attacks, tf_out, tf_metrics;
  double tf_lr = 0.0, tf_fraction = 0.0;
  int tf_epochs = 0, tf_batch = 0, tf_subset = 0;
  uint64_t tf_seed = 0;
  auto* tf_target_o = tf->add_option("--target", tf_target);
  auto* tf_id_o = tf->add_option("--id", tf_id, "denoiser checkpoint");
  auto* tf_attacks_o = tf->add_option("--attacks", tf_attacks);
  auto* tf_epochs_o = tf->add_option("--epochs", tf_epochs);
  auto* tf_lr_o = tf->add_option("--lr", tf_lr);
  auto* tf_batch_o = tf->add_option("--batch", tf_batch);
  auto* tf_fraction_o = tf->add_option("--fraction", tf_fraction);
  auto* tf_subset_o = tf->add_option("--train-subset", tf_subset);
  auto* tf_seed_o = tf->add_option("--seed", tf_seed);
  tf->add_option("--out", tf_out)->required();
  tf->add_option("--metrics-csv", tf_metrics);

  // ---- eval / ablate ----
  auto add_eval_like = [&](const char* name, const char* desc) {
    return app.add_subcommand(name, desc);
  };
  struct EvalArgs {
    std::string target, surrogate, id, fr, attacks, eps, boxes, modes, out;
    int n = 0;
    double fraction = 0.0;
    uint64_t seed = 0;
    CLI::Option *target_o, *surrogate_o, *id_o, *fr_o, *attacks_o, *eps_o,
        *boxes_o, *modes_o, *n_o, *fraction_o, *seed_o;
  };
  auto wire_eval = [&](CLI::App* cmd, EvalArgs& a) {
    a.target_o = cmd->add_option("--target", a.target);
    a.surrogate_o = cmd->add_option("--surrogate", a.surrogate);
    a.id_o = cmd->add_option("--id", a.id);
    a.fr_o = cmd->add_option("--fr", a.fr);
    a.attacks_o = cmd->add_option("--attacks", a.attacks, "e.g. fgsm,bim,cw");
    a.eps_o = cmd->add_option("--eps", a.eps, "e.g. 4,8,16");
    a.boxes_o = cmd->add_option("--boxes", a.boxes, "black,white");
    a.modes_o = cmd->add_option("--modes", a.modes, "none,id_only,id_fr");
    a.n_o = cmd->add_option("--n", a.n);
    a.fraction_o = cmd->add_option("--fraction", a.fraction);
    a.seed_o = cmd->add_option("--seed", a.seed);
    cmd->add_option("--out", a.out, "report directory")->required();
  };
  auto* ev = add_eval_like("eval", "evaluate defenses over an attack grid");
  EvalArgs ev_args;
  wire_eval(ev, ev_args);
  auto* ab = add_eval_like("ablate", "three-mode ablation over the grid");
  EvalArgs ab_args;
  wire_eval(ab, ab_args);

  // ---- verify ----
  auto* vf = app.add_subcommand("verify", "run the self-contained property suites");
  int vf_trials = 1000, vf_cases = 10000;
  double vf_tol = 1e-6;
  uint64_t vf_seed = 7;
  vf->add_option("--trials", vf_trials, "hull-closure trials");
  vf->add_option("--fuzz-cases", vf_cases, "attack budget fuzz cases");
  vf->add_option("--budget-tolerance", vf_tol);
  vf->add_option("--seed", vf_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "advlab: error kind=config msg=\"" << e.what() << "\"\n";
    return 3;
  }

  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw MissingInputError("config file not found: " + config_path);
    try {
      in >> st.config;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config parse failure in " + config_path + ": " +
                        e.what());
    }
    st.config_path = config_path;
  }

  if (tt->parsed()) {
    Timer timer;
    auto sec = config_section(st, "dataset");
    auto tsec = config_section(st, "target");
    std::string dataset = pick(tt_dataset_o, tt_dataset, sec, "name",
                               std::string("mnist"));
    auto desc = advlab::DatasetDescriptor::by_name(dataset);
    double fraction = pick(tt_fraction_o, tt_fraction, sec, "fraction",
                           default_fraction(dataset));
    advlab::TrainConfig cfg;
    cfg.seed = pick(tt_seed_o, tt_seed, sec, "seed", uint64_t{0});
    cfg.epochs_target = pick(tt_epochs_o, tt_epochs, tsec, "epochs", 5);
    cfg.learning_rate = pick(tt_lr_o, tt_lr, tsec, "learning_rate", 0.001);
    cfg.batch_size = pick(tt_batch_o, tt_batch, tsec, "batch_size", 64);
    std::string arch =
        pick(tt_arch_o, tt_arch, tsec, "arch", std::string("small_cnn"));

    auto splits = advlab::load_dataset(desc, fraction, cfg.seed);
    advlab::TargetModel model(desc, arch, cfg.seed);
    auto metrics = advlab::train_target(model, splits.train, cfg,
                                        &splits.validation, &splits.test);
    std::map<std::string, double> m{
        {"clean_test_accuracy", metrics.final_accuracy},
        {"train_fraction", fraction}};
    advlab::save_checkpoint(model.to_checkpoint(cfg, m), tt_out);
    std::cout << "trained " << arch << " on " << dataset
              << ": clean test accuracy " << metrics.final_accuracy << "\n";
    record_manifest(st, "train-target", manifest_for(tt_out), {tt_out},
                    timer.ms());
    return 0;
  }

  if (at->parsed()) {
    Timer timer;
    auto sec = config_section(st, "attack");
    std::string model_path =
        pick(at_model_o, at_model, sec, "model", std::string());
    if (model_path.empty())
      throw ConfigError("missing required field: model (--model or config)");
    auto model = load_target(model_path);
    advlab::AttackConfig cfg;
    cfg.method = pick(at_method_o, at_method, sec, "method", std::string("fgsm"));
    cfg.epsilon_255 = pick(at_eps_o, at_eps, sec, "eps", 8.0);
    cfg.iterations = pick(at_iter_o, at_iterations, sec, "iterations", 0);
    cfg.step_size = pick(at_step_o, at_step, sec, "step", 0.03);
    cfg.confidence_margin = pick(at_margin_o, at_margin, sec, "margin", 0.0);
    cfg.validate();
    uint64_t seed = pick(at_seed_o, at_seed, sec, "seed", uint64_t{0});
    double fraction =
        pick(at_fraction_o, at_fraction, sec, "fraction",
             default_fraction(model.descriptor().name));
    auto splits = advlab::load_dataset(model.descriptor(), fraction, seed);
    std::string split =
        pick(at_split_o, at_split, sec, "split", std::string("test"));
    const advlab::ExampleSet* pool = nullptr;
    if (split == "train") pool = &splits.train;
    else if (split == "validation") pool = &splits.validation;
    else if (split == "test") pool = &splits.test;
    else throw ConfigError("unknown split: " + split);
    int n = pick(at_n_o, at_n, sec, "n", 0);
    advlab::ExampleSet subset =
        (n > 0 && n < pool->size()) ? pool->stratified_sample(n, seed) : *pool;
    auto set = advlab::generate_attack_set(model, subset, cfg, seed);
    advlab::save_attack_set(set, at_out);
    double acc = advlab::model_accuracy(model, set.pixels, set.labels);
    std::cout << "attack " << cfg.method << " eps=" << cfg.epsilon_255
              << "/255 on " << set.size() << " examples: target accuracy "
              << acc << "\n";
    record_manifest(st, "attack", manifest_for(at_out), {at_out}, timer.ms());
    return 0;
  }

  if (ti->parsed()) {
    Timer timer;
    auto sec = config_section(st, "id");
    std::string target_path =
        pick(ti_target_o, ti_target, sec, "target", std::string());
    auto target = load_target(target_path);
    advlab::IdTrainOptions options;
    options.train.epochs_id = pick(ti_epochs_o, ti_epochs, sec, "epochs", 100);
    options.train.learning_rate =
        pick(ti_lr_o, ti_lr, sec, "learning_rate", 0.01);
    options.train.batch_size = pick(ti_batch_o, ti_batch, sec, "batch_size", 64);
    options.train.seed = pick(ti_seed_o, ti_seed, sec, "seed", uint64_t{0});
    std::string attacks = pick(ti_attacks_o, ti_attacks, sec, "attacks",
                               std::string("fgsm:4,8,16"));
    options.attacks = advlab::parse_attack_spec(attacks);
    options.augment.rounds = pick(ti_rounds_o, ti_rounds, sec, "augment_rounds", 3);
    std::string sigmas =
        pick(ti_sigmas_o, ti_sigmas, sec, "augment_sigmas", std::string());
    if (!sigmas.empty()) {
      options.augment.sigmas.clear();
      for (const auto& tok : split_csv(sigmas))
        options.augment.sigmas.push_back(std::stod(tok));
    } else {
      options.augment.sigmas.resize(static_cast<size_t>(options.augment.rounds),
                                    0.03);
      if (options.augment.rounds == 3)
        options.augment.sigmas = {0.01, 0.03, 0.05};
    }
    options.augment.include_original = !ti_no_original;
    options.augment.validate();

    double fraction =
        pick(ti_fraction_o, ti_fraction, sec, "fraction",
             default_fraction(target.descriptor().name));
    auto splits =
        advlab::load_dataset(target.descriptor(), fraction, options.train.seed);
    int cap = pick(ti_subset_o, ti_subset, sec, "train_subset", 0);
    advlab::ExampleSet train =
        (cap > 0 && cap < splits.train.size())
            ? splits.train.stratified_sample(cap, options.train.seed)
            : splits.train;

    advlab::IdTrainResult result;
    auto denoiser =
        advlab::train_id(target, train, splits.validation, options, &result);
    std::map<std::string, double> metrics;
    if (!result.epochs.empty()) {
      metrics["final_loss"] = result.epochs.back().mean_loss;
      metrics["final_validation_ae_accuracy"] =
          result.epochs.back().validation_ae_accuracy;
    }
    advlab::save_checkpoint(denoiser.to_checkpoint(options.train, metrics),
                            ti_out);
    std::vector<std::filesystem::path> artifacts{ti_out};
    if (!ti_metrics.empty()) {
      write_id_metrics_csv(ti_metrics, result);
      artifacts.push_back(ti_metrics);
    }
    if (!result.epochs.empty())
      std::cout << "denoiser trained: final loss "
                << result.epochs.back().mean_loss << ", validation AE accuracy "
                << result.epochs.back().validation_ae_accuracy << "\n";
    record_manifest(st, "train-id", manifest_for(ti_out), artifacts, timer.ms());
    return 0;
  }

  if (tf->parsed()) {
    Timer timer;
    auto sec = config_section(st, "fr");
    std::string target_path =
        pick(tf_target_o, tf_target, sec, "target", std::string());
    auto target = load_target(target_path);
    std::string id_path = pick(tf_id_o, tf_id, sec, "id", std::string());
    if (id_path.empty())
      throw ConfigError("missing required field: id (--id or config)");
    if (!std::filesystem::exists(id_path))
      throw MissingInputError("checkpoint not found: " + id_path);
    auto denoiser =
        advlab::Denoiser::from_checkpoint(advlab::load_checkpoint(id_path));

    advlab::TrainConfig cfg;
    cfg.epochs_fr = pick(tf_epochs_o, tf_epochs, sec, "epochs", 80);
    cfg.learning_rate = pick(tf_lr_o, tf_lr, sec, "learning_rate", 0.01);
    cfg.batch_size = pick(tf_batch_o, tf_batch, sec, "batch_size", 64);
    cfg.seed = pick(tf_seed_o, tf_seed, sec, "seed", uint64_t{0});
    std::string attacks = pick(tf_attacks_o, tf_attacks, sec, "attacks",
                               std::string("fgsm:4,8,16"));
    auto attack_cfgs = advlab::parse_attack_spec(attacks);

    double fraction = pick(tf_fraction_o, tf_fraction, sec, "fraction",
                           default_fraction(target.descriptor().name));
    auto splits = advlab::load_dataset(target.descriptor(), fraction, cfg.seed);
    int cap = pick(tf_subset_o, tf_subset, sec, "train_subset", 0);
    advlab::ExampleSet train =
        (cap > 0 && cap < splits.train.size())
            ? splits.train.stratified_sample(cap, cfg.seed)
            : splits.train;

    auto aes = advlab::build_mixed_attack_set(target, train, attack_cfgs,
                                              cfg.seed);
    auto spaces = advlab::partition_spaces(target, denoiser, train, aes);
    advlab::FrTrainResult result;
    auto restorer = advlab::train_fr(target, spaces, cfg, &result);
    std::map<std::string, double> metrics;
    if (!result.epochs.empty()) {
      metrics["final_loss"] = result.epochs.back().mean_loss;
      metrics["p1_retention"] = result.epochs.back().p1_retention;
      metrics["p2_recovery"] = result.epochs.back().p2_recovery;
    }
    advlab::save_checkpoint(restorer.to_checkpoint(cfg, metrics), tf_out);
    std::vector<std::filesystem::path> artifacts{tf_out};
    if (!tf_metrics.empty()) {
      write_fr_metrics_csv(tf_metrics, result);
      artifacts.push_back(tf_metrics);
    }
    if (!result.epochs.empty())
      std::cout << "restorer trained: p1 retention "
                << result.epochs.back().p1_retention << ", p2 recovery "
                << result.epochs.back().p2_recovery << "\n";
    record_manifest(st, "train-fr", manifest_for(tf_out), artifacts, timer.ms());
    return 0;
  }

  auto run_eval = [&](EvalArgs& a, bool ablation) {
    Timer timer;
    auto sec = config_section(st, ablation ? "ablate" : "eval");
    std::string target_path = pick(a.target_o, a.target, sec, "target",
                                   std::string());
    if (target_path.empty())
      throw ConfigError("missing required field: target (--target or config)");
    auto target = load_target(target_path);

    std::string surrogate_path =
        pick(a.surrogate_o, a.surrogate, sec, "surrogate", std::string());
    std::optional<advlab::TargetModel> surrogate;
    if (!surrogate_path.empty()) surrogate = load_target(surrogate_path);

    std::string id_path = pick(a.id_o, a.id, sec, "id", std::string());
    std::optional<advlab::Denoiser> denoiser;
    if (!id_path.empty()) {
      if (!std::filesystem::exists(id_path))
        throw MissingInputError("checkpoint not found: " + id_path);
      denoiser = advlab::Denoiser::from_checkpoint(advlab::load_checkpoint(id_path));
    }
    std::string fr_path = pick(a.fr_o, a.fr, sec, "fr", std::string());
    std::optional<advlab::Restorer> restorer;
    if (!fr_path.empty()) {
      if (!std::filesystem::exists(fr_path))
        throw MissingInputError("checkpoint not found: " + fr_path);
      restorer =
          advlab::Restorer::from_checkpoint(advlab::load_checkpoint(fr_path));
    }

    advlab::EvalGrid grid;
    std::string methods = pick(a.attacks_o, a.attacks, sec, "attacks",
                               std::string("fgsm,bim,cw"));
    for (const auto& m : split_csv(methods))
      grid.attacks.push_back(advlab::AttackConfig::make(m, 8.0));
    std::string eps =
        pick(a.eps_o, a.eps, sec, "epsilons", std::string("4,8,16"));
    for (const auto& e : split_csv(eps))
      grid.epsilons_255.push_back(std::stod(e));
    std::string boxes =
        pick(a.boxes_o, a.boxes, sec, "boxes", std::string("black"));
    grid.boxes = split_csv(boxes);
    std::string modes = pick(a.modes_o, a.modes, sec, "modes",
                             std::string("none,id_only,id_fr"));
    grid.modes.clear();
    for (const auto& m : split_csv(modes))
      grid.modes.push_back(advlab::defense_mode_from_string(m));
    grid.n_examples = pick(a.n_o, a.n, sec, "n", 1000);
    uint64_t seed = pick(a.seed_o, a.seed, sec, "seed", uint64_t{0});
    double fraction = pick(a.fraction_o, a.fraction, sec, "fraction",
                           default_fraction(target.descriptor().name));

    auto splits = advlab::load_dataset(target.descriptor(), fraction, seed);
    advlab::EvalComponents components;
    components.target = &target;
    components.surrogate = surrogate ? &*surrogate : nullptr;
    components.denoiser = denoiser ? &*denoiser : nullptr;
    components.restorer = restorer ? &*restorer : nullptr;

    advlab::EvalReport report =
        ablation ? advlab::run_ablation(components, splits.test, grid, seed)
                 : advlab::evaluate(components, splits.test, grid, seed);
    advlab::emit_report(report, a.out);
    for (const auto& r : report.rows)
      std::cout << r.attack << " eps=" << r.epsilon_255 << " " << r.box << " "
                << advlab::to_string(r.mode) << ": " << r.accuracy << " ("
                << r.correct << "/" << r.n << ")\n";
    std::vector<std::filesystem::path> artifacts{
        std::filesystem::path(a.out) / "report.csv",
        std::filesystem::path(a.out) / "report.md"};
    record_manifest(st, ablation ? "ablate" : "eval",
                    std::filesystem::path(a.out) / "manifest.json", artifacts,
                    timer.ms());
    return 0;
  };

  if (ev->parsed()) return run_eval(ev_args, false);
  if (ab->parsed()) return run_eval(ab_args, true);

  if (vf->parsed()) {
    auto results = advlab::verify::run_all(vf_trials, vf_cases, vf_tol, vf_seed);
    bool all_ok = true;
    for (const auto& r : results) {
      std::cout << r.name << ": " << (r.total - r.failed) << "/" << r.total
                << " passed";
      if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
      std::cout << "\n";
      if (!r.ok()) {
        all_ok = false;
        std::cout << "  first failure: " << r.first_failure << "\n";
      }
    }
    return all_ok ? 0 : 1;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "advlab: error kind=config msg=\"" << e.what() << "\"\n";
    return 3;
  } catch (const MissingInputError& e) {
    std::cerr << "advlab: error kind=missing-input msg=\"" << e.what() << "\"\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "advlab: error kind=failure msg=\"" << e.what() << "\"\n";
    return 1;
  }
}
