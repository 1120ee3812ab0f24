#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "halo/acquisition.hpp"
#include "halo/adapt.hpp"
#include "halo/analysis.hpp"
#include "halo/io.hpp"
#include "halo/network.hpp"
#include "halo/optim.hpp"
#include "halo/synthdata.hpp"
#include "halo/uncertainty.hpp"

namespace halo::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kToolVersion = "1.0.0";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat JSON object keyed by long flag names without the leading dashes,
// applied to the subcommand named in `section`.
class JsonConfig : public CLI::Config {
 public:
  std::string section;

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      if (!section.empty()) item.parents = {section};
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(key, v));
      } else {
        item.inputs.push_back(scalar(key, value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const std::string& key, const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config key '" + key + "' must be a string, number or boolean");
  }
};

// Registers options and remembers how to write their resolved values back
// out, so run.json can be fed to the same subcommand as a config file.
class Binder {
 public:
  explicit Binder(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* opt(const std::string& name, T& ref, const std::string& desc) {
    auto* o = app_->add_option("--" + name, ref, desc)->capture_default_str();
    emit_.push_back([name, &ref](json& j) { j[name] = ref; });
    return o;
  }

  CLI::Option* path(const std::string& name, std::string& ref, const std::string& desc) {
    auto* o = app_->add_option("--" + name, ref, desc);
    emit_.push_back([name, &ref](json& j) {
      if (!ref.empty()) j[name] = fs::absolute(ref).lexically_normal().string();
    });
    return o;
  }

  CLI::Option* list(const std::string& name, std::vector<std::string>& ref, const std::string& desc) {
    auto* o = app_->add_option("--" + name, ref, desc);
    emit_.push_back([name, &ref](json& j) {
      if (!ref.empty()) j[name] = ref;
    });
    return o;
  }

  json resolved() const {
    json j = json::object();
    for (const auto& e : emit_) e(j);
    return j;
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::function<void(json&)>> emit_;
};

struct ModelOpts {
  int hidden_dim = 32;
  int embed_dim = 16;
  int hfr_hidden = 0;
  double curvature = 1.0;
  double eps = 1e-5;
  bool use_hfr = true;
  std::string hfr_norm = "per_pixel";
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;

  void bind(Binder& b) {
    b.opt("hidden-dim", hidden_dim, "encoder hidden width (0: single affine layer)");
    b.opt("embed-dim", embed_dim, "embedding dimension N");
    b.opt("hfr-hidden", hfr_hidden, "reweighting hidden width (0: N)");
    b.opt("curvature", curvature, "ball curvature magnitude c");
    b.opt("eps", eps, "boundary margin");
    b.opt("use-hfr", use_hfr, "enable feature reweighting");
    b.opt("hfr-norm", hfr_norm, "reweighting normalizer")
        ->check(CLI::IsMember({"per_pixel", "per_channel", "batch"}));
    b.opt("bn-momentum", bn_momentum, "running-statistics retention");
    b.opt("bn-eps", bn_eps, "batch-norm epsilon");
  }

  ModelConfig to_config(int input_dim, int num_classes) const {
    ModelConfig m;
    m.dims = {input_dim, hidden_dim, embed_dim, num_classes, hfr_hidden};
    m.manifold = {curvature, eps};
    m.use_hfr = use_hfr;
    m.hfr_norm = hfr_normalization_from_string(hfr_norm);
    m.bn_momentum = bn_momentum;
    m.bn_eps = bn_eps;
    return m;
  }
};

struct TrainOpts {
  OptimConfig optim;
  long pretrain_steps = 2000;
  long adapt_steps = 2000;
  int batch_size = 256;
  std::uint64_t seed = 0;

  void bind(Binder& b, bool pretrain_phase, bool adapt_phase) {
    b.opt("lr-encoder", optim.base_lr_encoder, "base learning rate of the encoder");
    b.opt("lr-head", optim.base_lr_head, "base learning rate of reweighting and classifier");
    b.opt("momentum", optim.momentum, "SGD momentum");
    b.opt("weight-decay", optim.weight_decay, "weight decay (not applied to offsets)");
    b.opt("poly-power", optim.poly_power, "poly schedule exponent");
    if (pretrain_phase) b.opt("pretrain-steps", pretrain_steps, "source training steps");
    if (adapt_phase) b.opt("adapt-steps", adapt_steps, "adaptation steps over all rounds");
    b.opt("batch-size", batch_size, "pixels per batch");
    b.opt("seed", seed, "random seed");
  }

  RunConfig to_run(const ModelConfig& model, const AcquisitionConfig& acq) const {
    RunConfig rc;
    rc.model = model;
    rc.optim = optim;
    rc.acquisition = acq;
    rc.pretrain_steps = pretrain_steps;
    rc.adapt_steps = adapt_steps;
    rc.batch_size = batch_size;
    rc.seed = seed;
    return rc;
  }
};

struct AcqOpts {
  std::string strategy = "halo";
  std::string mode = "pixel";
  int region_size = 3;
  double budget = 0.05;
  int rounds = 5;

  void bind(Binder& b) {
    b.opt("strategy", strategy, "acquisition strategy")
        ->check(CLI::IsMember({"halo", "entropy", "radius", "random", "gt-boundary"}));
    b.opt("mode", mode, "pixel or region scoring")->check(CLI::IsMember({"pixel", "region"}));
    b.opt("region-size", region_size, "odd side of the region window");
    b.opt("budget", budget, "fraction of target pixels labeled in total");
    b.opt("rounds", rounds, "acquisition rounds");
  }

  AcquisitionConfig to_config() const {
    AcquisitionConfig a;
    a.strategy = strategy_from_string(strategy);
    a.mode = mode_from_string(mode);
    a.region_size = region_size;
    a.total_budget = budget;
    a.rounds = rounds;
    return a;
  }
};

// Throws UsageError for configurations rejected by validate().
template <typename F>
auto checked(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
}

PixelDataset load_data(const std::string& path, std::ostream& err) {
  std::vector<std::string> warnings;
  PixelDataset ds = load_dataset(path, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return ds;
}

// A run directory may be passed where a checkpoint is expected.
fs::path checkpoint_dir(const std::string& path) {
  const fs::path p(path);
  if (!fs::exists(p / "manifest.json") && fs::exists(p / "checkpoint" / "manifest.json")) {
    return p / "checkpoint";
  }
  return p;
}

std::string digest(const fs::path& p) {
  return fs::is_directory(p) ? io::sha256_directory(p) : io::sha256_file(p);
}

struct RunRecord {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  json inputs = json::object();
  std::vector<std::string> outputs;  // relative to the run directory

  void input(const std::string& name, const fs::path& p) {
    inputs[name] = {{"path", fs::absolute(p).lexically_normal().string()}, {"sha256", digest(p)}};
  }

  void write(const fs::path& dir) const {
    json j;
    j["tool"] = "halo";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = inputs;
    json out = json::object();
    for (const auto& name : outputs) out[name] = digest(dir / name);
    j["outputs"] = out;
    io::write_text(dir / "run.json", j.dump(2) + "\n");
  }
};

void write_training_log(const TrainingTrace& trace, const fs::path& path) {
  std::ostringstream o;
  o << "step,loss,max_embedding_norm\n";
  for (std::size_t i = 0; i < trace.loss.size(); ++i) {
    o << i + 1 << ',' << io::format_double(trace.loss[i]) << ','
      << io::format_double(trace.max_embedding_norm[i]) << '\n';
  }
  io::write_text(path, o.str());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void print_eval(const EvalReport& r, const PixelDataset& ds, std::ostream& out) {
  out << std::left << std::setw(16) << "class" << "IoU\n";
  for (int k = 0; k < r.num_classes; ++k) {
    const std::string name =
        k < static_cast<int>(ds.class_names.size()) ? ds.class_names[k] : std::to_string(k);
    const double v = r.iou[static_cast<std::size_t>(k)];
    out << std::left << std::setw(16) << name;
    if (std::isnan(v)) {
      out << "n/a\n";
    } else {
      out << std::fixed << std::setprecision(4) << v << '\n';
    }
  }
  out << std::left << std::setw(16) << "mIoU" << std::fixed << std::setprecision(4) << r.miou << '\n';
  out.unsetf(std::ios::floatfield);
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const BudgetExhausted& e) {
    err << "error: " << e.what() << '\n';
    return kBudget;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << '\n';
    return kTraining;
  } catch (const FrechetError& e) {
    err << "error: " << e.what() << '\n';
    return kTraining;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

namespace {

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperbolic active domain adaptation on synthetic pixel data", "halo"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  auto formatter = std::make_shared<JsonConfig>();
  // CLI11 reads config files on the root app only.
  app.config_formatter(formatter);
  app.set_config("--config", "", "JSON file of flag values; explicit flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  auto add_sub = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->fallthrough();
    sub->preparse_callback([formatter, name](std::size_t) { formatter->section = name; });
    return sub;
  };

  // generate
  CLI::App* gen = add_sub("generate", "write synthetic source/ and target/ datasets");
  Binder gen_b(gen);
  SynthConfig synth;
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen_b.opt("num-classes", synth.num_classes, "classes C");
  gen_b.opt("feature-dim", synth.feature_dim, "pixel feature dimension");
  gen_b.opt("height", synth.height, "image height");
  gen_b.opt("width", synth.width, "image width");
  gen_b.opt("source-images", synth.source_images, "source images");
  gen_b.opt("target-images", synth.target_images, "target images");
  gen_b.opt("zipf-s", synth.zipf_s, "class frequency exponent");
  gen_b.opt("shift", synth.shift, "target class-mean shift");
  gen_b.opt("mean-spread", synth.mean_spread, "std of class-mean coordinates");
  gen_b.opt("noise-scale", synth.noise_scale, "within-class feature std");
  gen_b.opt("cells-per-image", synth.cells_per_image, "Voronoi cells per image");
  gen_b.opt("seed", synth.seed, "random seed");

  // pretrain
  CLI::App* pre = add_sub("pretrain", "train a model on the source split");
  Binder pre_b(pre);
  std::string pre_source, pre_out;
  ModelOpts pre_model;
  TrainOpts pre_train;
  pre_b.path("source", pre_source, "source dataset directory")->required();
  pre->add_option("--out", pre_out, "run directory")->required();
  pre_model.bind(pre_b);
  pre_train.bind(pre_b, true, false);

  // adapt
  CLI::App* ada = add_sub("adapt", "acquire target labels in rounds and adapt");
  Binder ada_b(ada);
  std::string ada_ckpt, ada_source, ada_target, ada_out;
  TrainOpts ada_train;
  AcqOpts ada_acq;
  ada_b.path("checkpoint", ada_ckpt, "pretrained checkpoint (or its run directory)")->required();
  ada_b.path("source", ada_source, "source dataset (omit for source-free adaptation)");
  ada_b.path("target", ada_target, "target dataset directory")->required();
  ada->add_option("--out", ada_out, "run directory")->required();
  ada_train.bind(ada_b, false, true);
  ada_acq.bind(ada_b);

  // eval
  CLI::App* ev = add_sub("eval", "per-class IoU and mIoU of a checkpoint on a dataset");
  Binder ev_b(ev);
  std::string ev_ckpt, ev_data, ev_out;
  ev_b.path("checkpoint", ev_ckpt, "checkpoint (or its run directory)")->required();
  ev_b.path("data", ev_data, "labeled dataset directory")->required();
  ev->add_option("--out", ev_out, "optional run directory for eval.csv and run.json");

  // analyze
  CLI::App* an = add_sub("analyze", "class statistics, correlations and selection analyses");
  Binder an_b(an);
  std::string an_ckpt, an_data, an_log, an_source, an_out;
  std::vector<std::string> an_variance_logs;
  int an_ensemble = 0;
  std::size_t an_variance_sample = 256;
  TrainOpts an_train;
  an_b.path("checkpoint", an_ckpt, "checkpoint (or its run directory)")->required();
  an_b.path("data", an_data, "labeled target dataset")->required();
  an_b.path("log", an_log, "acquisition log for per-round selection ratios");
  an_b.path("source", an_source, "source dataset (needed with --ensemble)");
  an_b.list("variance-log", an_variance_logs, "BUDGET=PATH acquisition logs for the variance curve");
  an_b.opt("ensemble", an_ensemble, "ensemble size for epistemic-uncertainty correlations (0: off)");
  an_b.opt("variance-sample", an_variance_sample, "embeddings per class for Riemannian variance");
  an->add_option("--out", an_out, "output directory")->required();
  an_train.bind(an_b, true, true);

  // report
  CLI::App* rep = add_sub("report", "render SVG plots from analysis CSVs");
  std::string rep_dir;
  rep->add_option("--dir", rep_dir, "directory holding analysis CSVs")->required();

  // replay
  CLI::App* rpl = add_sub("replay", "re-run a recorded run and compare checksums");
  std::string rpl_run, rpl_out;
  rpl->add_option("--run", rpl_run, "run.json of the original run")->required();
  rpl->add_option("--out", rpl_out, "directory for the re-run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (gen->parsed()) {
    checked([&] { synth.validate(); return 0; });
    auto [source, target] = generate(synth);
    const fs::path dir(gen_out);
    ensure_dir(dir);
    save_dataset(source, dir / "source");
    save_dataset(target, dir / "target");
    RunRecord rec{"generate", gen_b.resolved(), synth.seed, json::object(), {"source", "target"}};
    rec.write(dir);
    out << "wrote " << (dir / "source").string() << " and " << (dir / "target").string() << '\n';
    return kOk;
  }

  if (pre->parsed()) {
    const PixelDataset source = load_data(pre_source, err);
    const RunConfig rc = checked([&] {
      RunConfig r = pre_train.to_run(pre_model.to_config(source.feature_dim, source.num_classes), {});
      r.validate();
      return r;
    });
    TrainingTrace trace;
    const Model model = pretrain(rc, source, &trace);
    const fs::path dir(pre_out);
    ensure_dir(dir);
    save_checkpoint(model, dir / "checkpoint");
    write_training_log(trace, dir / "training_log.csv");
    RunRecord rec{"pretrain", pre_b.resolved(), rc.seed, json::object(),
                  {"checkpoint", "training_log.csv"}};
    rec.input("source", pre_source);
    rec.write(dir);
    out << "pretrained " << rc.pretrain_steps << " steps; checkpoint at "
        << (dir / "checkpoint").string() << '\n';
    return kOk;
  }

  if (ada->parsed()) {
    const fs::path ckpt = checkpoint_dir(ada_ckpt);
    Model model = load_checkpoint(ckpt);
    const PixelDataset target = load_data(ada_target, err);
    const PixelDataset source = ada_source.empty() ? PixelDataset{} : load_data(ada_source, err);
    const RunConfig rc = checked([&] {
      RunConfig r = ada_train.to_run(model.config, ada_acq.to_config());
      r.validate();
      return r;
    });
    AdaptResult result = adapt(std::move(model), source, target, rc);
    const fs::path dir(ada_out);
    ensure_dir(dir);
    save_checkpoint(result.model, dir / "checkpoint");
    write_acquisition_log(result.log, dir / "acquisition_log.csv");
    write_eval_csv(result.rounds, dir / "eval_rounds.csv");
    write_training_log(result.trace, dir / "training_log.csv");
    RunRecord rec{"adapt", ada_b.resolved(), rc.seed, json::object(),
                  {"checkpoint", "acquisition_log.csv", "eval_rounds.csv", "training_log.csv"}};
    rec.input("checkpoint", ckpt);
    rec.input("target", ada_target);
    if (!ada_source.empty()) rec.input("source", ada_source);
    rec.write(dir);
    for (std::size_t r = 0; r < result.rounds.size(); ++r) {
      out << "round " << r + 1 << ": labeled " << std::count_if(result.log.begin(), result.log.end(),
                                                                 [&](const AcquisitionRecord& a) {
                                                                   return a.round <= static_cast<int>(r + 1);
                                                                 })
          << " pixels, mIoU " << std::fixed << std::setprecision(4) << result.rounds[r].miou << '\n';
      out.unsetf(std::ios::floatfield);
    }
    return kOk;
  }

  if (ev->parsed()) {
    const fs::path ckpt = checkpoint_dir(ev_ckpt);
    const Model model = load_checkpoint(ckpt);
    const PixelDataset data = load_data(ev_data, err);
    const EvalReport report = evaluate_miou(model, data);
    print_eval(report, data, out);
    if (!ev_out.empty()) {
      const fs::path dir(ev_out);
      ensure_dir(dir);
      write_eval_csv({report}, dir / "eval.csv");
      RunRecord rec{"eval", ev_b.resolved(), 0, json::object(), {"eval.csv"}};
      rec.input("checkpoint", ckpt);
      rec.input("data", ev_data);
      rec.write(dir);
    }
    return kOk;
  }

  if (an->parsed()) {
    const fs::path ckpt = checkpoint_dir(an_ckpt);
    const Model model = load_checkpoint(ckpt);
    const PixelDataset data = load_data(an_data, err);
    const auto& m = model.config.manifold;
    const DatasetInference inference = infer(model, data);

    AnalysisReport report;
    report.stats = class_stats(inference, data.labels, model.config.dims.num_classes, m,
                               {true, an_variance_sample});
    report.correlations = class_correlations(report.stats);

    AcquisitionLog log;
    if (!an_log.empty()) {
      log = read_acquisition_log(an_log);
      report.selection = selection_distribution(log, data);
    }
    std::vector<std::pair<double, AcquisitionLog>> budget_logs;
    for (const auto& spec : an_variance_logs) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw UsageError("--variance-log expects BUDGET=PATH, got " + spec);
      double budget = 0.0;
      try {
        budget = std::stod(spec.substr(0, eq));
      } catch (const std::exception&) {
        throw UsageError("--variance-log budget is not a number: " + spec);
      }
      budget_logs.emplace_back(budget, read_acquisition_log(spec.substr(eq + 1)));
    }
    report.variance_curve = selection_variance_curve(budget_logs, model.config.dims.num_classes);

    const fs::path dir(an_out);
    ensure_dir(dir);
    std::vector<std::string> outputs;
    if (an_ensemble > 0) {
      if (an_ensemble < 2) throw UsageError("--ensemble needs at least 2 members");
      if (an_source.empty() || an_log.empty()) {
        throw UsageError("--ensemble requires --source and --log");
      }
      const PixelDataset source = load_data(an_source, err);
      LabelMask mask = LabelMask::empty(data.images, data.height, data.width);
      for (const auto& rec : log) mask.mark({rec.pixel}, std::max(1, rec.round));
      AcquisitionConfig acq;
      acq.rounds = 1;
      const RunConfig rc = checked([&] {
        RunConfig r = an_train.to_run(model.config, acq);
        r.validate();
        return r;
      });
      const EnsembleProbs ens = train_ensemble(source, data, mask, rc, an_ensemble);
      const ScoreMap radius = radius_map(inference.embeddings, data.images, data.height, data.width, m);
      const ScoreMap entropy = entropy_map(inference.probs, data.images, data.height, data.width);
      const ScoreMap acquisition = acquisition_map(radius, entropy);
      const ScoreMap epistemic = epistemic_uncertainty(ens);
      report.correlations.push_back(map_correlation("acquisition_vs_epistemic", acquisition, epistemic));
      report.correlations.push_back(map_correlation("radius_vs_epistemic", radius, epistemic));
      report.correlations.push_back(map_correlation("entropy_vs_epistemic", entropy, epistemic));
      report.correlations.push_back(map_correlation("radius_vs_entropy", radius, entropy));
      ensure_dir(dir / "maps");
      export_score_map(radius, dir / "maps" / "radius.bin");
      export_score_map(entropy, dir / "maps" / "entropy.bin");
      export_score_map(acquisition, dir / "maps" / "acquisition.bin");
      export_score_map(epistemic, dir / "maps" / "epistemic.bin");
      outputs.push_back("maps");
    }
    emit_report(report, dir);
    for (const char* f : {"class_stats.csv", "correlations.csv", "selection_distribution.csv",
                          "selection_variance.csv"}) {
      outputs.emplace_back(f);
    }
    RunRecord rec{"analyze", an_b.resolved(), an_train.seed, json::object(), outputs};
    rec.input("checkpoint", ckpt);
    rec.input("data", an_data);
    if (!an_log.empty()) rec.input("log", an_log);
    if (!an_source.empty()) rec.input("source", an_source);
    rec.write(dir);
    for (const auto& c : report.correlations) {
      out << std::left << std::setw(28) << c.name << " pearson "
          << (std::isnan(c.pearson) ? std::string("n/a") : io::format_double(c.pearson)) << '\n';
    }
    return kOk;
  }

  if (rep->parsed()) {
    if (!fs::is_directory(rep_dir)) throw DataError("report directory not found: " + rep_dir);
    for (const auto& p : render_report(rep_dir)) out << "wrote " << p.string() << '\n';
    return kOk;
  }

  if (rpl->parsed()) {
    json original;
    try {
      original = json::parse(io::read_text(rpl_run));
    } catch (const json::exception& e) {
      throw DataError("malformed run record " + rpl_run + ": " + e.what());
    }
    const std::string command = original.value("command", "");
    if (command.empty() || command == "replay") throw DataError("run record has no replayable command: " + rpl_run);
    std::random_device rd;
    const fs::path cfg = fs::temp_directory_path() / ("halo-replay-" + std::to_string(rd()) + ".json");
    io::write_text(cfg, original.at("config").dump(2));
    const std::string cfg_s = cfg.string();
    const char* args[] = {"halo", command.c_str(), "--config", cfg_s.c_str(), "--out", rpl_out.c_str()};
    const int code = run(6, args, out, err);
    std::error_code ec;
    fs::remove(cfg, ec);
    if (code != kOk) return code;
    const json replayed = json::parse(io::read_text(fs::path(rpl_out) / "run.json"));
    int mismatches = 0;
    for (const auto& [name, sha] : original.at("outputs").items()) {
      const bool same = replayed.at("outputs").contains(name) && replayed["outputs"][name] == sha;
      out << (same ? "identical " : "DIFFERS   ") << name << '\n';
      if (!same) ++mismatches;
    }
    if (mismatches > 0) {
      err << "error: " << mismatches << " artifact(s) differ from the recorded run\n";
      return kFailure;
    }
    out << "replay reproduced all " << original.at("outputs").size() << " artifacts\n";
    return kOk;
  }
  return kUsage;
}

}  // namespace

}  // namespace halo::cli
