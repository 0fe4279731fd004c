#include "cimsim/experiment.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <set>

namespace cimsim {

using nlohmann::json;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::train: return "train";
    case ExperimentKind::evaluate: return "evaluate";
    case ExperimentKind::gaussianity: return "gaussianity";
    case ExperimentKind::crossbar_check: return "crossbar-check";
    case ExperimentKind::noise_calibrate: return "noise-calibrate";
    case ExperimentKind::ecc_campaign: return "ecc-campaign";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (auto k : {ExperimentKind::train, ExperimentKind::evaluate, ExperimentKind::gaussianity,
                 ExperimentKind::crossbar_check, ExperimentKind::noise_calibrate, ExperimentKind::ecc_campaign})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

namespace {

// Reads optional keys from one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      used_.insert(key);
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError("unknown config key '" + name_ + "." + item.key() + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

NoiseScale noise_scale_from_string(const std::string& s) {
  if (s == "relative") return NoiseScale::relative;
  if (s == "absolute") return NoiseScale::absolute;
  throw ConfigError("weight_scale must be 'relative' or 'absolute', got '" + s + "'");
}

std::string to_string(NoiseScale s) { return s == NoiseScale::relative ? "relative" : "absolute"; }

NetworkSpec parse_network(const json& j) {
  Section s(j, "network");
  if (s.has("layers")) {
    std::vector<LayerSpec> layers;
    for (const auto& l : s.raw("layers")) {
      Section ls(l, "network.layers[]");
      std::string kind;
      LayerSpec spec;
      ls.get("kind", kind);
      ls.get("in", spec.in_dim);
      ls.get("out", spec.out_dim);
      ls.finish();
      try {
        spec.kind = layer_kind_from_string(kind);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
      layers.push_back(spec);
    }
    s.finish();
    return NetworkSpec(std::move(layers));
  }
  Eigen::Index in = kMnistPixels, hidden = 128, out = 10;
  std::string act = "relu";
  s.get("input", in);
  s.get("hidden", hidden);
  s.get("output", out);
  s.get("activation", act);
  s.finish();
  LayerKind kind;
  try {
    kind = layer_kind_from_string(act);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return NetworkSpec::mlp(in, hidden, out, kind);
}

json network_json(const NetworkSpec& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) layers.push_back({{"kind", to_string(l.kind)}, {"in", l.in_dim}, {"out", l.out_dim}});
  return {{"layers", layers}};
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

CsvTable metrics_table(const std::map<std::string, double>& metrics) {
  CsvTable t({"metric", "value"});
  for (const auto& [k, v] : metrics) t.add_row({k, v});
  return t;
}

double empirical_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section top(j, "config");
  std::string kind;
  top.get("kind", kind);
  if (!kind.empty()) {
    cfg.kind = experiment_kind_from_string(kind);
    cfg.kind_given = true;
  }
  top.get("seed", cfg.seed);
  std::string out;
  top.get("output_dir", out);
  if (!out.empty()) cfg.output_dir = out;
  top.get("threads", cfg.threads);

  if (top.has("network")) cfg.network = parse_network(top.raw("network"));

  if (top.has("train")) {
    Section s(top.raw("train"), "train");
    s.get("sigma_train", cfg.train.sigma_train);
    s.get("epochs", cfg.train.epochs);
    s.get("lr", cfg.train.lr);
    s.get("batch_size", cfg.train.batch_size);
    std::string scale = to_string(cfg.train.noise_scale);
    s.get("noise_scale", scale);
    cfg.train.noise_scale = noise_scale_from_string(scale);
    s.finish();
  }

  if (top.has("noise")) {
    auto& n = cfg.noise;
    Section s(top.raw("noise"), "noise");
    s.get("temperature", n.temperature);
    s.get("bandwidth", n.bandwidth);
    s.get("thermal", n.thermal_enabled);
    s.get("shot", n.shot_enabled);
    s.get("prog_sigma_rel", n.prog_sigma_rel);
    if (s.has("rtn")) {
      const json& r = s.raw("rtn");
      if (r.is_null()) {
        n.rtn.reset();
      } else {
        RtnConfig rtn;
        Section rs(r, "noise.rtn");
        rs.get("amplitude_rel", rtn.amplitude_rel);
        rs.get("tau_low", rtn.tau_low);
        rs.get("tau_high", rtn.tau_high);
        rs.finish();
        n.rtn = rtn;
      }
    }
    s.get("stuck_low_prob", n.stuck_low_prob);
    s.get("stuck_high_prob", n.stuck_high_prob);
    s.get("global_offset_rel", n.global_offset_rel);
    s.get("tile_offset_sigma_rel", n.tile_offset_sigma_rel);
    s.get("weight_sigma", n.weight_sigma);
    std::string scale = to_string(n.weight_scale);
    s.get("weight_scale", scale);
    n.weight_scale = noise_scale_from_string(scale);
    s.finish();
  }

  if (top.has("crossbar")) {
    auto& c = cfg.crossbar;
    Section s(top.raw("crossbar"), "crossbar");
    s.get("rows", c.rows);
    s.get("cols", c.cols);
    s.get("bits_per_device", c.bits_per_device);
    s.get("g_min", c.g_min);
    s.get("g_max", c.g_max);
    s.get("adc_bits", c.adc_bits);
    s.get("dac_bits", c.dac_bits);
    s.get("differential", c.differential);
    s.get("v_read", c.v_read);
    s.finish();
  }

  if (top.has("ecc")) {
    Section s(top.raw("ecc"), "ecc");
    s.get("K", cfg.ecc.code.K);
    s.get("operand_bits", cfg.ecc.code.operand_bits);
    std::optional<int> positions;
    s.get("error_positions", positions);
    s.get("error_model", cfg.ecc.code.error_model);
    if (positions) {
      require(!cfg.ecc.code.error_model, "ecc: give error_positions or error_model, not both");
      require(*positions >= 1 && *positions < 62, "ecc.error_positions must be in [1, 61]");
      cfg.ecc.code.error_model = ANCodeConfig::single_bit_errors(*positions);
    }
    s.get("flip_positions", cfg.ecc.flip_positions);
    s.finish();
  }

  if (top.has("dataset")) {
    Section s(top.raw("dataset"), "dataset");
    std::string path;
    s.get("path", path);
    if (!path.empty()) cfg.dataset.path = path;
    s.get("train_subset", cfg.dataset.train_subset);
    s.get("test_subset", cfg.dataset.test_subset);
    s.finish();
  }

  if (top.has("gaussianity")) {
    auto& g = cfg.gaussianity;
    Section s(top.raw("gaussianity"), "gaussianity");
    s.get("inits", g.inits);
    s.get("n_samples", g.n_samples);
    s.get("sigma", g.sigma);
    s.get("bins", g.bins);
    s.get("test_index", g.test_index);
    std::vector<std::string> models;
    s.get("models", models);
    g.models.assign(models.begin(), models.end());
    s.finish();
  }

  if (top.has("evaluate")) {
    Section s(top.raw("evaluate"), "evaluate");
    std::string model;
    s.get("model", model);
    cfg.evaluate.model = model;
    s.get("sigma", cfg.evaluate.sigma);
    s.get("trials", cfg.evaluate.trials);
    s.finish();
  }

  if (top.has("crossbar_check")) {
    auto& c = cfg.crossbar_check;
    Section s(top.raw("crossbar_check"), "crossbar_check");
    s.get("matrices", c.matrices);
    s.get("max_dim", c.max_dim);
    s.get("weight_bits", c.weight_bits);
    s.get("adc_bits", c.adc_bits);
    s.finish();
  }

  if (top.has("calibrate")) {
    auto& c = cfg.calibrate;
    Section s(top.raw("calibrate"), "calibrate");
    s.get("n", c.n);
    s.get("resistance", c.resistance);
    s.get("current", c.current);
    s.finish();
  }

  top.finish();
  return cfg;
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["kind"] = to_string(kind);
  j["seed"] = seed;
  j["network"] = network_json(network);
  j["train"] = {{"sigma_train", train.sigma_train}, {"epochs", train.epochs}, {"lr", train.lr},
                {"batch_size", train.batch_size}, {"noise_scale", to_string(train.noise_scale)}};
  j["noise"] = {{"temperature", noise.temperature},
                {"bandwidth", noise.bandwidth},
                {"thermal", noise.thermal_enabled},
                {"shot", noise.shot_enabled},
                {"prog_sigma_rel", noise.prog_sigma_rel},
                {"rtn", noise.rtn ? json{{"amplitude_rel", noise.rtn->amplitude_rel},
                                         {"tau_low", noise.rtn->tau_low},
                                         {"tau_high", noise.rtn->tau_high}}
                                  : json(nullptr)},
                {"stuck_low_prob", noise.stuck_low_prob},
                {"stuck_high_prob", noise.stuck_high_prob},
                {"global_offset_rel", noise.global_offset_rel},
                {"tile_offset_sigma_rel", noise.tile_offset_sigma_rel},
                {"weight_sigma", noise.weight_sigma},
                {"weight_scale", to_string(noise.weight_scale)}};
  j["crossbar"] = {{"rows", crossbar.rows},         {"cols", crossbar.cols},
                   {"bits_per_device", crossbar.bits_per_device},
                   {"g_min", crossbar.g_min},       {"g_max", crossbar.g_max},
                   {"adc_bits", opt(crossbar.adc_bits)},
                   {"dac_bits", opt(crossbar.dac_bits)},
                   {"differential", crossbar.differential},
                   {"v_read", crossbar.v_read}};
  j["ecc"] = {{"K", ecc.code.K},
              {"operand_bits", ecc.code.operand_bits},
              {"error_model", opt(ecc.code.error_model)},
              {"flip_positions", opt(ecc.flip_positions)}};
  j["dataset"] = {{"path", dataset.path.string()},
                  {"train_subset", opt(dataset.train_subset)},
                  {"test_subset", opt(dataset.test_subset)}};
  std::vector<std::string> models;
  for (const auto& m : gaussianity.models) models.push_back(m.string());
  j["gaussianity"] = {{"inits", gaussianity.inits}, {"n_samples", gaussianity.n_samples},
                      {"sigma", gaussianity.sigma}, {"bins", gaussianity.bins},
                      {"test_index", gaussianity.test_index}, {"models", models}};
  j["evaluate"] = {{"model", evaluate.model.string()}, {"sigma", evaluate.sigma}, {"trials", evaluate.trials}};
  j["crossbar_check"] = {{"matrices", crossbar_check.matrices}, {"max_dim", crossbar_check.max_dim},
                         {"weight_bits", crossbar_check.weight_bits}, {"adc_bits", crossbar_check.adc_bits}};
  j["calibrate"] = {{"n", calibrate.n}, {"resistance", calibrate.resistance}, {"current", calibrate.current}};
  return j.dump(1) + "\n";
}

void ExperimentConfig::validate() const {
  require(threads >= 1, "threads must be >= 1");
  switch (kind) {
    case ExperimentKind::train:
    case ExperimentKind::evaluate:
    case ExperimentKind::gaussianity:
      require(network.input_dim() == kMnistPixels, "network input must be 784 for MNIST");
      require(network.output_dim() == 10, "network output must be 10 for MNIST");
      train.validate();
      if (dataset.train_subset) require(*dataset.train_subset >= 1, "dataset.train_subset must be >= 1");
      if (dataset.test_subset) require(*dataset.test_subset >= 1, "dataset.test_subset must be >= 1");
      break;
    default:
      break;
  }
  switch (kind) {
    case ExperimentKind::evaluate:
      require(evaluate.sigma >= 0.0 && std::isfinite(evaluate.sigma), "evaluate.sigma must be finite and >= 0");
      require(evaluate.trials >= 1, "evaluate.trials must be >= 1");
      noise.validate();
      break;
    case ExperimentKind::gaussianity:
      require(gaussianity.sigma >= 0.0 && std::isfinite(gaussianity.sigma),
              "gaussianity.sigma must be finite and >= 0");
      require(gaussianity.inits >= 1, "gaussianity.inits must be >= 1");
      require(gaussianity.n_samples >= 100, "gaussianity.n_samples must be >= 100");
      require(gaussianity.bins >= 2, "gaussianity.bins must be >= 2");
      require(gaussianity.models.empty() || gaussianity.models.size() == gaussianity.inits,
              "gaussianity.models must list one model per init");
      noise.validate();
      break;
    case ExperimentKind::crossbar_check: {
      crossbar.validate();
      require(crossbar_check.matrices >= 1, "crossbar_check.matrices must be >= 1");
      require(crossbar_check.max_dim >= 1, "crossbar_check.max_dim must be >= 1");
      require(crossbar_check.adc_bits >= 1 && crossbar_check.adc_bits <= 30,
              "crossbar_check.adc_bits must be in [1, 30]");
      try {
        map_weights(Matrix::Ones(1, 1), crossbar, crossbar_check.weight_bits);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("crossbar_check.weight_bits: ") + e.what());
      }
      break;
    }
    case ExperimentKind::noise_calibrate:
      noise.validate();
      require(calibrate.n >= 2, "calibrate.n must be >= 2");
      require(calibrate.resistance > 0.0, "calibrate.resistance must be positive");
      require(calibrate.current >= 0.0, "calibrate.current must be >= 0");
      require(noise.temperature > 0.0 && noise.bandwidth > 0.0,
              "noise-calibrate needs positive temperature and bandwidth");
      break;
    case ExperimentKind::ecc_campaign:
      ecc.code.validate();
      if (ecc.flip_positions)
        require(*ecc.flip_positions >= 0 && *ecc.flip_positions <= ecc.code.codeword_bits(),
                "ecc.flip_positions must be in [0, codeword_bits]");
      break;
    default:
      break;
  }
}

Datasets load_datasets(const ExperimentConfig& cfg) {
  const auto dir = resolve_mnist_dir(cfg.dataset.path);
  Datasets d{load_mnist(dir, Split::train), load_mnist(dir, Split::test)};
  if (cfg.dataset.train_subset) d.train = take_subset(d.train, *cfg.dataset.train_subset, derive_seed(cfg.seed, "train-subset"));
  if (cfg.dataset.test_subset) d.test = take_subset(d.test, *cfg.dataset.test_subset, derive_seed(cfg.seed, "test-subset"));
  return d;
}

Parameters train_model(const ExperimentConfig& cfg, const DatasetHandle& train, std::uint64_t index,
                       const TrainObservers& observers) {
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train", index);
  return noise_injection_train(cfg.network, train.images, train.labels, tc, std::nullopt, observers);
}

Report run_train(const ExperimentConfig& cfg, const Datasets& data) {
  CsvTable log({"epoch", "mean_loss"});
  TrainObservers obs;
  obs.on_epoch = [&](int epoch, const Parameters&, double loss) { log.add_row({std::int64_t{epoch}, loss}); };
  const Parameters params = train_model(cfg, data.train, 0, obs);
  Report r;
  r.metrics["train_accuracy"] = accuracy(cfg.network, params, data.train.images, data.train.labels);
  r.metrics["test_accuracy"] = accuracy(cfg.network, params, data.test.images, data.test.labels);
  r.metrics["sigma_train"] = cfg.train.sigma_train;
  r.tables.emplace_back("training.csv", std::move(log));
  r.tables.emplace_back("summary.csv", metrics_table(r.metrics));
  r.files.emplace_back("model.json", model_to_json(cfg.network, params));
  return r;
}

Report run_evaluate(const ExperimentConfig& cfg, const Datasets& data) {
  Parameters params;
  if (cfg.evaluate.model.empty()) {
    params = train_model(cfg, data.train, 0);
  } else {
    Model m = load_model(cfg.evaluate.model);
    if (!(m.net == cfg.network)) throw ConfigError("evaluate.model does not match the configured network");
    params = std::move(m.params);
  }
  const RobustnessReport rep =
      evaluate_under_variation(cfg.network, params, cfg.evaluate.sigma, cfg.evaluate.trials, data.test.images,
                               data.test.labels, derive_seed(cfg.seed, "evaluate"), cfg.noise.weight_scale,
                               cfg.threads);
  Report r;
  CsvTable trials({"trial", "accuracy"});
  for (std::size_t i = 0; i < rep.trial_accuracy.size(); ++i)
    trials.add_row({static_cast<std::int64_t>(i), rep.trial_accuracy[i]});
  r.metrics = {{"clean_accuracy", rep.clean_accuracy},
               {"noisy_accuracy_mean", rep.noisy_accuracy_mean},
               {"noisy_accuracy_std", rep.noisy_accuracy_std},
               {"noisy_accuracy_min", rep.noisy_accuracy_min},
               {"accuracy_drop", rep.accuracy_drop},
               {"sigma_eval", cfg.evaluate.sigma},
               {"n_trials", static_cast<double>(rep.n_trials)}};
  r.tables.emplace_back("robustness_trials.csv", std::move(trials));
  r.tables.emplace_back("robustness.csv", metrics_table(r.metrics));
  return r;
}

Report run_gaussianity(const ExperimentConfig& cfg, const Datasets& data) {
  const auto& g = cfg.gaussianity;
  if (g.test_index >= data.test.size())
    throw ConfigError("gaussianity.test_index " + std::to_string(g.test_index) + " is outside the test set");
  std::vector<Parameters> models;
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < g.inits; ++k) {
    if (g.models.empty()) {
      models.push_back(train_model(cfg, data.train, k));
    } else {
      Model m = load_model(g.models[k]);
      if (!(m.net == cfg.network)) throw ConfigError("gaussianity model " + g.models[k].string() + " does not match the network");
      models.push_back(std::move(m.params));
    }
    seeds.push_back(derive_seed(cfg.seed, "gaussianity", k));
  }
  const Vector input = data.test.images.row(static_cast<Eigen::Index>(g.test_index)).transpose();
  const GaussianityReport rep = gaussianity_experiment(cfg.network, models, input, g.sigma, g.n_samples, seeds,
                                                       g.bins, cfg.noise.weight_scale, cfg.threads);

  Report r;
  CsvTable elements({"init", "element", "mean", "std", "chi2", "mse", "degenerate"});
  CsvTable inits({"init", "test_accuracy", "avg_chi2", "avg_mse"});
  CsvTable hist({"init", "element", "bin", "lo", "hi", "observed", "expected"});
  double min_acc = 1.0;
  for (std::size_t k = 0; k < rep.per_init.size(); ++k) {
    const auto& fr = rep.per_init[k];
    const double acc = accuracy(cfg.network, models[k], data.test.images, data.test.labels);
    min_acc = std::min(min_acc, acc);
    inits.add_row({static_cast<std::int64_t>(k), acc, fr.quality.avg_chi2, fr.quality.avg_mse});
    for (Eigen::Index e = 0; e < fr.fit.mean.size(); ++e) {
      const auto ue = static_cast<std::size_t>(e);
      elements.add_row({static_cast<std::int64_t>(k), static_cast<std::int64_t>(e), fr.fit.mean(e), fr.fit.stddev(e),
                        fr.quality.chi2(e), fr.quality.mse(e), std::int64_t{fr.quality.degenerate[ue] ? 1 : 0}});
      const auto& h = fr.histograms[ue];
      const double width = (h.hi - h.lo) / static_cast<double>(h.observed.size());
      for (std::size_t b = 0; b < h.observed.size(); ++b)
        hist.add_row({static_cast<std::int64_t>(k), static_cast<std::int64_t>(e), static_cast<std::int64_t>(b),
                      h.lo + width * static_cast<double>(b), h.lo + width * static_cast<double>(b + 1), h.observed[b],
                      h.expected[b]});
    }
  }
  r.metrics = {{"avg_chi2", rep.avg_chi2},
               {"avg_mse", rep.avg_mse},
               {"scored_inits", static_cast<double>(rep.scored_inits)},
               {"min_test_accuracy", min_acc},
               {"sigma", g.sigma},
               {"n_samples", static_cast<double>(g.n_samples)}};
  r.tables.emplace_back("gaussianity_elements.csv", std::move(elements));
  r.tables.emplace_back("gaussianity_inits.csv", std::move(inits));
  r.tables.emplace_back("gaussianity_histograms.csv", std::move(hist));
  r.tables.emplace_back("gaussianity.csv", metrics_table(r.metrics));
  return r;
}

Report run_crossbar_check(const ExperimentConfig& cfg) {
  const auto& cc = cfg.crossbar_check;
  CrossbarConfig ideal = cfg.crossbar;
  ideal.adc_bits.reset();
  ideal.dac_bits.reset();
  CrossbarConfig with_adc = ideal;
  with_adc.adc_bits = cc.adc_bits;

  CsvTable t({"matrix", "rows", "cols", "ideal_rel_error", "adc_max_abs_error", "adc_bound", "adc_within_bound"});
  double worst_rel = 0.0;
  std::int64_t violations = 0;
  for (std::size_t i = 0; i < cc.matrices; ++i) {
    Rng rng = make_rng(derive_seed(cfg.seed, "crossbar-check"), i);
    std::uniform_int_distribution<Eigen::Index> dim(1, cc.max_dim);
    const Eigen::Index rows = dim(rng), cols = dim(rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Matrix W = Matrix::NullaryExpr(rows, cols, [&] { return u(rng); });
    const Vector x = Vector::NullaryExpr(cols, [&] { return u(rng); });
    const Vector exact = quantize(W, cc.weight_bits).dequantize() * x;

    const Vector y = mvm(map_weights(W, ideal, cc.weight_bits), x);
    const double denom = exact.norm();
    const double rel = denom > 0.0 ? (y - exact).norm() / denom : (y - exact).norm();
    worst_rel = std::max(worst_rel, rel);

    const MappedLayer adc_layer = map_weights(W, with_adc, cc.weight_bits);
    const double err = (mvm(adc_layer, x) - exact).cwiseAbs().maxCoeff();
    const double bound = mvm_adc_error_bound(adc_layer, x);
    const bool ok = err <= bound;
    violations += !ok;
    t.add_row({static_cast<std::int64_t>(i), static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols), rel,
               err, bound, std::int64_t{ok ? 1 : 0}});
  }
  Report r;
  r.metrics = {{"max_ideal_rel_error", worst_rel},
               {"adc_bound_violations", static_cast<double>(violations)},
               {"matrices", static_cast<double>(cc.matrices)}};
  r.tables.emplace_back("crossbar_check_matrices.csv", std::move(t));
  r.tables.emplace_back("crossbar_check.csv", metrics_table(r.metrics));
  return r;
}

Report run_noise_calibrate(const ExperimentConfig& cfg) {
  const auto& c = cfg.calibrate;
  const auto& n = cfg.noise;
  const RtnConfig rtn = n.rtn.value_or(RtnConfig{0.1, 3.0, 1.0});
  const std::uint64_t base = derive_seed(cfg.seed, "noise-calibrate");
  std::vector<double> v(c.n);

  CsvTable t({"quantity", "expected", "measured", "error", "tolerance", "pass"});
  std::int64_t failures = 0;
  auto row = [&](const std::string& name, double expected, double measured, bool relative, double tol) {
    const double err = relative ? std::abs(measured - expected) / expected : std::abs(measured - expected);
    const bool ok = err <= tol;
    failures += !ok;
    t.add_row({name, expected, measured, err, tol, std::int64_t{ok ? 1 : 0}});
  };

  Rng rng = make_rng(base, 0);
  for (auto& s : v) s = sample_thermal_current(c.resistance, n.temperature, n.bandwidth, rng);
  row("thermal_std", thermal_sigma(c.resistance, n.temperature, n.bandwidth), empirical_std(v), true, 0.01);

  rng = make_rng(base, 1);
  for (auto& s : v) s = sample_shot_current(c.current, n.bandwidth, rng);
  row("shot_std", shot_sigma(c.current, n.bandwidth), empirical_std(v), true, 0.01);

  rng = make_rng(base, 2);
  std::size_t trapped = 0;
  for (std::size_t i = 0; i < c.n; ++i) trapped += rtn_multiplier(rtn, rng) != 1.0;
  row("rtn_trap_fraction", rtn.trap_probability(), static_cast<double>(trapped) / static_cast<double>(c.n), false,
      0.005);

  if (n.prog_sigma_rel > 0.0) {
    rng = make_rng(base, 3);
    const double g0 = 0.5 * (cfg.crossbar.g_min + cfg.crossbar.g_max);
    for (auto& s : v) s = (sample_programming_error(g0, n, cfg.crossbar, rng) - g0) / g0;
    row("programming_rel_std", n.prog_sigma_rel, empirical_std(v), true, 0.02);
  }

  Report r;
  r.metrics = {{"failures", static_cast<double>(failures)}, {"n", static_cast<double>(c.n)}};
  r.tables.emplace_back("noise_calibration.csv", std::move(t));
  return r;
}

Report run_ecc_campaign(const ExperimentConfig& cfg) {
  const CorrectionTable table = CorrectionTable::build(cfg.ecc.code);
  const EccCampaign c = ecc_campaign(cfg.ecc.code, table, cfg.ecc.flip_positions.value_or(cfg.ecc.code.codeword_bits()));
  CsvTable per_bit({"bit", "trials", "corrected", "miscorrected", "reported_clean", "flagged", "correction_rate"});
  for (const auto& b : c.per_bit)
    per_bit.add_row({std::int64_t{b.bit}, static_cast<std::int64_t>(b.trials), static_cast<std::int64_t>(b.corrected),
                     static_cast<std::int64_t>(b.miscorrected), static_cast<std::int64_t>(b.reported_clean),
                     static_cast<std::int64_t>(b.flagged),
                     b.trials ? static_cast<double>(b.corrected) / static_cast<double>(b.trials) : 0.0});
  Report r;
  r.metrics = {{"K", static_cast<double>(c.K)},
               {"operand_bits", static_cast<double>(c.operand_bits)},
               {"codeword_bits", static_cast<double>(c.codeword_bits)},
               {"modeled_trials", static_cast<double>(c.modeled_trials())},
               {"modeled_corrected", static_cast<double>(c.modeled_corrected())},
               {"miscorrections", static_cast<double>(c.miscorrections())},
               {"false_clean", static_cast<double>(c.false_clean())},
               {"clean_trials", static_cast<double>(c.clean_trials)},
               {"clean_ok", static_cast<double>(c.clean_ok)},
               {"unmodeled_trials", static_cast<double>(c.unmodeled_trials)},
               {"unmodeled_flagged", static_cast<double>(c.unmodeled_flagged)}};
  r.tables.emplace_back("ecc_campaign_bits.csv", std::move(per_bit));
  r.tables.emplace_back("ecc_campaign.csv", metrics_table(r.metrics));
  return r;
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    log << "invalid config: " << e.what() << "\n";
    return 2;
  }

  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) {
    log << "cannot create " << cfg.output_dir.string() << ": " << ec.message() << "\n";
    return 1;
  }

  json manifest;
  manifest["schema_version"] = kManifestSchemaVersion;
  manifest["kind"] = to_string(cfg.kind);
  manifest["config_hash"] = hex64(cfg.hash());
  manifest["master_seed"] = cfg.seed;
  manifest["artifacts"] = json::array();
  int status = 0;
  try {
    Report r;
    switch (cfg.kind) {
      case ExperimentKind::train: r = run_train(cfg, load_datasets(cfg)); break;
      case ExperimentKind::evaluate: r = run_evaluate(cfg, load_datasets(cfg)); break;
      case ExperimentKind::gaussianity: r = run_gaussianity(cfg, load_datasets(cfg)); break;
      case ExperimentKind::crossbar_check: r = run_crossbar_check(cfg); break;
      case ExperimentKind::noise_calibrate: r = run_noise_calibrate(cfg); break;
      case ExperimentKind::ecc_campaign: r = run_ecc_campaign(cfg); break;
    }
    write_text(cfg.output_dir / "config.json", cfg.canonical_json());
    manifest["artifacts"].push_back("config.json");
    for (const auto& [name, table] : r.tables) {
      table.write(cfg.output_dir / name);
      manifest["artifacts"].push_back(name);
    }
    for (const auto& [name, text] : r.files) {
      write_text(cfg.output_dir / name, text);
      manifest["artifacts"].push_back(name);
    }
    manifest["status"] = "complete";
    for (const auto& [k, v] : r.metrics) log << k << " = " << format_double(v) << "\n";
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["partial"] = true;
    manifest["error"] = e.what();
    log << "error: " << e.what() << "\n";
    status = 1;
  }
  try {
    write_text(cfg.output_dir / "manifest.json", manifest.dump(1) + "\n");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    status = 1;
  }
  return status;
}

}  // namespace cimsim
