// mtnn: sweep, train, cv, eval, predict and demo-fcn.

#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtnn/mtnn.hpp"

namespace {

using namespace mtnn;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  int exp_min = 5;
  int exp_max = 10;
  int reps = 5;
  int warmup = 2;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::string model = "mtnn_model.json";
  std::string samples = "samples.csv";
  std::string records = "records.csv";
  std::string out;
  std::vector<std::string> overrides;
  std::size_t scale_divisor = 8;
  bool verbose = false;

  KernelConfig kernel() const {
    KernelConfig k;
    k.threads = threads;
    return k;
  }
  TimingOptions timing() const { return {reps, warmup, seed, kernel()}; }

  PlatformFeatures platform() const {
    PlatformOverrides o;
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--platform-override expects key=value, got '" + kv + "'");
      const auto key = kv.substr(0, eq);
      double value = 0.0;
      try {
        std::size_t used = 0;
        value = std::stod(kv.substr(eq + 1), &used);
        if (used != kv.size() - eq - 1) throw std::invalid_argument(kv);
      } catch (const std::exception&) {
        throw UsageError("--platform-override value for '" + key + "' is not a number");
      }
      bool known = false;
      for (auto k : kPlatformKeys) known = known || k == key;
      if (!known) throw UsageError("--platform-override: unknown key '" + key + "' (gm, sm, cc, mbw, l2c)");
      o[key] = value;
    }
    return probe_platform(o, std::cerr);
  }
};

void print_platform(std::ostream& os, const PlatformFeatures& p) {
  os << "platform: gm=" << p.gm << " sm=" << p.sm << " cc=" << p.cc << " mbw=" << p.mbw << " l2c=" << p.l2c
     << "\n";
}

void print_sample_summary(std::ostream& os, const LabelCounts& c) {
  os << std::left << std::setw(10) << "Samples" << std::right << std::setw(8) << "-1" << std::setw(8) << "+1"
     << std::setw(8) << "Total" << "\n"
     << std::left << std::setw(10) << "host" << std::right << std::setw(8) << c.negative << std::setw(8)
     << c.positive << std::setw(8) << c.total() << "\n";
}

int cmd_sweep(const Common& c, const std::string& fixture) {
  const auto platform = c.platform();
  print_platform(std::cout, platform);
  std::cout << "threads: " << c.threads << "\n";
  const CaseTimer timer = fixture.empty() ? measured_timer(c.timing()) : fixture_timer(load_records(fixture));
  auto result = sweep_grid(c.exp_min, c.exp_max, timer, c.verbose ? &std::cerr : nullptr);
  const auto samples = label_records(result.records, platform);
  write_file(c.records, [&](std::ostream& os) { write_records(os, result.records); });
  write_file(c.samples, [&](std::ostream& os) { write_samples(os, samples); });
  if (!result.skipped.empty()) std::cout << "skipped " << result.skipped.size() << " infeasible cases\n";
  print_sample_summary(std::cout, count_labels(samples));
  std::cout << "wrote " << c.records << " and " << c.samples << "\n";
  return 0;
}

int cmd_train(const Common& c, const GbdtParams& params, double test_fraction, const std::string& test_out) {
  params.validate();
  auto samples = load_samples(c.samples);
  if (samples.empty()) throw std::runtime_error("'" + c.samples + "' has no samples");
  std::vector<Sample> held_out;
  if (test_fraction > 0.0) {
    auto split = stratified_holdout(samples, test_fraction, c.seed);
    samples = std::move(split.train);
    held_out = std::move(split.test);
    if (samples.empty()) throw std::runtime_error("no training samples left after the holdout split");
    if (!test_out.empty()) write_file(test_out, [&](std::ostream& os) { write_samples(os, held_out); });
  }
  const auto model = fit_gbdt(samples, params);
  save_model(model, c.model);
  std::cout << "params: max_depth=" << params.max_depth << " n_estimators=" << params.n_estimators
            << " eta=" << params.eta << " gamma=" << params.gamma << "\n";
  std::cout << "training samples: " << samples.size() << "\n";
  std::cout << "training accuracy: " << std::fixed << std::setprecision(4) << accuracy(model, samples) << "\n";
  if (!held_out.empty()) {
    std::cout << "held-out samples: " << held_out.size() << "\n";
    std::cout << "held-out accuracy: " << accuracy(model, held_out) << "\n";
  }
  std::cout << "wrote " << c.model << "\n";
  return 0;
}

void print_cv_table(std::ostream& os, const CvReport& r) {
  const auto cell = [](const AccuracyStats& s, double v) {
    return s.folds == 0 ? std::string("n/a") : percent(100.0 * v) + "%";
  };
  os << std::left << std::setw(10) << "" << std::right << std::setw(10) << "Minimum" << std::setw(10) << "Maximum"
     << std::setw(10) << "Average" << "\n";
  const std::pair<const char*, const AccuracyStats*> rows[] = {
      {"Negative", &r.negative}, {"Positive", &r.positive}, {"Total", &r.total}};
  for (const auto& [name, s] : rows) {
    os << std::left << std::setw(10) << name << std::right << std::setw(10) << cell(*s, s->min) << std::setw(10)
       << cell(*s, s->max) << std::setw(10) << cell(*s, s->average) << "\n";
  }
}

int cmd_cv(const Common& c, std::size_t folds, const GbdtParams& params, bool cart) {
  params.validate();
  const auto samples = load_samples(c.samples);
  const auto report = cross_validate(samples, folds, params, c.seed, Objective::Logistic);
  std::cout << folds << "-fold cross-validation, " << samples.size() << " samples (GBDT)\n";
  print_cv_table(std::cout, report);
  if (cart) {
    GbdtParams single = params;
    single.n_estimators = 1;
    single.eta = 1.0;
    const auto base = cross_validate(samples, folds, single, c.seed, Objective::SquaredError);
    std::cout << "\nsingle CART baseline\n";
    print_cv_table(std::cout, base);
  }
  return 0;
}

std::vector<ProblemShape> shapes_of(const std::vector<Sample>& samples) {
  std::vector<ProblemShape> out;
  for (const auto& s : samples) out.push_back(s.shape());
  return out;
}

int cmd_eval(const Common& c, const std::string& mode, bool from_samples, const std::string& hist_out,
             const std::string& cases_out) {
  if (mode != "copied" && mode != "remeasured") throw UsageError("--mode must be 'copied' or 'remeasured'");
  auto model = std::make_shared<const GbdtModel>(load_model(c.model));
  const auto platform = c.platform();
  const Mtnn mtnn(model, platform, available_memory_bytes(), c.kernel());
  print_platform(std::cout, platform);
  std::cout << "threads: " << c.threads << "\nmode: " << mode << "\n";

  std::vector<EvalCase> cases;
  if (mode == "copied" && !from_samples) {
    cases = evaluate_records(mtnn, load_records(c.records));
  } else {
    const auto shapes = from_samples ? shapes_of(load_samples(c.samples)) : grid_shapes(c.exp_min, c.exp_max);
    EvalOptions opt{c.timing(), mode == "copied" ? EvalMode::Copied : EvalMode::Remeasured};
    cases = evaluate_shapes(mtnn, shapes, opt, c.verbose ? &std::cerr : nullptr);
  }
  if (cases.empty()) throw std::runtime_error("no feasible evaluation cases");
  const auto report = aggregate(cases);
  print_metrics_table(std::cout, report);
  if (!c.out.empty()) {
    write_file(c.out, [&](std::ostream& os) {
      write_metrics_csv(os, report);
      os << "mode," << mode << "\nthreads," << c.threads << "\n";
    });
  }
  if (!hist_out.empty()) write_file(hist_out, [&](std::ostream& os) { write_histogram_csv(os, report); });
  if (!cases_out.empty()) write_file(cases_out, [&](std::ostream& os) { write_cases_csv(os, cases); });
  return 0;
}

int cmd_predict(const Common& c, const std::vector<long long>& dims) {
  if (dims.size() != 3) throw UsageError("predict expects three extents: M N K");
  for (auto d : dims) {
    if (d <= 0) throw UsageError("matrix extents must be positive integers");
  }
  const ProblemShape shape{static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                           static_cast<std::size_t>(dims[2])};
  const auto platform = c.platform();
  const auto model = load_model(c.model);
  const auto d = select(model, platform, shape, available_memory_bytes());
  std::cout << to_string(d.choice) << " raw_score=" << format_double(d.raw_score) << " reason=" << to_string(d.reason)
            << "\n";
  return 0;
}

std::vector<Dispatcher> parse_dispatchers(const std::string& s) {
  if (s == "all") return {Dispatcher::AlwaysNT, Dispatcher::AlwaysTNN, Dispatcher::Mtnn};
  if (s == "compare") return {Dispatcher::AlwaysNT, Dispatcher::Mtnn};
  if (s == "nt") return {Dispatcher::AlwaysNT};
  if (s == "tnn") return {Dispatcher::AlwaysTNN};
  if (s == "mtnn") return {Dispatcher::Mtnn};
  throw UsageError("--dispatcher must be one of all, compare, nt, tnn, mtnn");
}

struct PhaseTotals {
  double forward = 0.0;
  double backward = 0.0;
  double total() const { return forward + backward; }
};

void print_fcn_table(std::ostream& os, const std::string& preset, const std::vector<Dispatcher>& ds,
                     const std::map<Dispatcher, PhaseTotals>& sums, std::size_t configs) {
  const bool speedup = sums.contains(Dispatcher::AlwaysNT) && sums.contains(Dispatcher::Mtnn);
  os << std::left << std::setw(18) << preset << std::setw(10) << "Phase" << std::right;
  for (auto d : ds) os << std::setw(14) << (std::string(to_string(d)) + " (ms)");
  if (speedup) os << std::setw(10) << "Speedup";
  os << "\n";
  const auto row = [&](const char* name, auto get) {
    os << std::left << std::setw(18) << "" << std::setw(10) << name << std::right;
    for (auto d : ds) os << std::setw(14) << percent(1e3 * get(sums.at(d)) / static_cast<double>(configs));
    if (speedup) os << std::setw(10) << percent(get(sums.at(Dispatcher::AlwaysNT)) / get(sums.at(Dispatcher::Mtnn)));
    os << "\n";
  };
  row("Forward", [](const PhaseTotals& t) { return t.forward; });
  row("Backward", [](const PhaseTotals& t) { return t.backward; });
  row("Total", [](const PhaseTotals& t) { return t.total(); });
}

std::vector<std::size_t> parse_list(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": '" + item + "' is not a positive integer");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

int cmd_demo_fcn(const Common& c, const std::string& preset, const std::string& layers_arg,
                 const std::string& mnist_batches, const std::string& synthetic_batches,
                 const std::string& dispatcher_arg) {
  const auto ds = parse_dispatchers(dispatcher_arg);
  const auto layers = parse_list(layers_arg, "--layers");
  std::vector<std::string> presets;
  if (preset == "all") {
    presets = {"mnist-like", "synthetic-like"};
  } else if (preset == "mnist-like" || preset == "synthetic-like") {
    presets = {preset};
  } else {
    throw UsageError("--preset must be mnist-like, synthetic-like or all");
  }

  std::unique_ptr<Mtnn> mtnn;
  bool needs_model = false;
  for (auto d : ds) needs_model = needs_model || d == Dispatcher::Mtnn;
  if (needs_model) {
    mtnn = std::make_unique<Mtnn>(std::make_shared<const GbdtModel>(load_model(c.model)), c.platform(),
                                  available_memory_bytes(), c.kernel());
  }
  FcnOptions opt;
  opt.reps = c.reps;
  opt.warmup = c.warmup;
  opt.seed = c.seed;
  opt.kernel = c.kernel();

  std::ofstream csv;
  if (!c.out.empty()) {
    csv.open(c.out);
    if (!csv) throw std::runtime_error("cannot open '" + c.out + "' for writing");
    csv << "preset,hidden_layers,batch,dispatcher,forward_s,backward_s,total_s\n";
  }
  std::cout << "scale divisor: " << c.scale_divisor << "  threads: " << c.threads << "\n";
  for (const auto& p : presets) {
    const auto batches = parse_list(p == "mnist-like" ? mnist_batches : synthetic_batches, "--batches");
    std::map<Dispatcher, PhaseTotals> sums;
    std::size_t configs = 0;
    for (auto l : layers) {
      for (auto b : batches) {
        const auto cfg = p == "mnist-like" ? mnist_like(l, b) : synthetic_like(l, b, c.scale_divisor);
        const auto timings = fcn_compare(cfg, ds, mtnn.get(), opt);
        ++configs;
        for (const auto& t : timings) {
          sums[t.dispatcher].forward += t.forward;
          sums[t.dispatcher].backward += t.backward;
          if (csv) {
            csv << p << ',' << l << ',' << b << ',' << to_string(t.dispatcher) << ',' << format_double(t.forward)
                << ',' << format_double(t.backward) << ',' << format_double(t.total()) << '\n';
          }
          if (c.verbose) {
            for (const auto& call : t.calls) {
              std::cerr << cfg.name << " batch " << b << " " << to_string(t.dispatcher) << " " << layer_name(call.layer)
                        << " " << to_string(call.phase) << " " << call.op << to_string(call.shape) << " -> "
                        << call.algorithm << "\n";
            }
          }
        }
      }
    }
    print_fcn_table(std::cout, p, ds, sums, configs);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-guided selection between direct NT and transpose-then-NN matrix products"};
  app.require_subcommand(1);
  app.fallthrough();
  Common c;
  app.add_option("--exp-min", c.exp_min, "Smallest size exponent of the grid")->capture_default_str();
  app.add_option("--exp-max", c.exp_max, "Largest size exponent of the grid")->capture_default_str();
  app.add_option("--reps", c.reps, "Timed repetitions per measurement")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--warmup", c.warmup, "Untimed warmup runs")->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--seed", c.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", c.threads, "Kernel threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--model", c.model, "Model file")->capture_default_str();
  app.add_option("--samples", c.samples, "Samples CSV")->capture_default_str();
  app.add_option("--records", c.records, "Records CSV")->capture_default_str();
  app.add_option("--out", c.out, "Report output file");
  app.add_option("--platform-override", c.overrides, "Platform feature override key=value");
  app.add_option("--scale-divisor", c.scale_divisor, "Width divisor for the synthetic FCN preset")
      ->check(CLI::Range(1, 4096))
      ->capture_default_str();
  app.add_flag("-v,--verbose", c.verbose, "Per-case progress on stderr");

  auto* sweep = app.add_subcommand("sweep", "Time NN/NT/TNN over the grid and write records and samples");
  std::string fixture;
  sweep->add_option("--fixture", fixture, "Replay timings from a records file instead of measuring");

  auto* train = app.add_subcommand("train", "Fit the GBDT on a samples file");
  GbdtParams params;
  double test_fraction = 0.0;
  std::string test_out;
  for (auto* sc : {train, app.add_subcommand("cv", "Stratified k-fold cross-validation")}) {
    sc->add_option("--max-depth", params.max_depth)->capture_default_str();
    sc->add_option("--trees", params.n_estimators)->capture_default_str();
    sc->add_option("--eta", params.eta)->capture_default_str();
    sc->add_option("--gamma", params.gamma)->capture_default_str();
    sc->add_option("--lambda", params.lambda)->capture_default_str();
    sc->add_option("--min-child-weight", params.min_child_weight)->capture_default_str();
  }
  train->add_option("--test-fraction", test_fraction, "Hold out this stratified fraction")
      ->check(CLI::Range(0.0, 0.99));
  train->add_option("--test-out", test_out, "Write held-out samples here");
  auto* cv = app.get_subcommand("cv");
  std::size_t folds = 5;
  bool cart = false;
  cv->add_option("--folds", folds)->capture_default_str();
  cv->add_flag("--cart-baseline", cart, "Also cross-validate a single CART");

  auto* eval = app.add_subcommand("eval", "Evaluate the dispatcher against NT and TNN");
  std::string mode = "remeasured", hist_out, cases_out;
  bool eval_samples = false;
  eval->add_option("--mode", mode, "copied | remeasured")->capture_default_str();
  eval->add_flag("--from-samples", eval_samples, "Evaluate the shapes listed in --samples instead of the grid");
  eval->add_option("--hist-out", hist_out, "Histogram CSV");
  eval->add_option("--cases-out", cases_out, "Per-case CSV");

  auto* pred = app.add_subcommand("predict", "Print the algorithm chosen for one shape");
  std::vector<long long> dims;
  pred->add_option("dims", dims, "M N K")->expected(3)->required();

  auto* fcn = app.add_subcommand("demo-fcn", "Per-phase timing of an emulated FCN training iteration");
  std::string preset = "all", layers = "2,3,4";
  const auto join = [](std::span<const std::size_t> v) {
    std::string s;
    for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
    return s;
  };
  std::string mnist_batches = join(kMnistBatches), synthetic_batches = join(kSyntheticBatches);
  std::string dispatcher = "compare";
  fcn->add_option("--preset", preset, "mnist-like | synthetic-like | all")->capture_default_str();
  fcn->add_option("--layers", layers, "Hidden layer counts")->capture_default_str();
  fcn->add_option("--mnist-batches", mnist_batches)->capture_default_str();
  fcn->add_option("--synthetic-batches", synthetic_batches)->capture_default_str();
  fcn->add_option("--dispatcher", dispatcher, "all | compare | nt | tnn | mtnn")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << " (see --help)\n";
    return 2;
  }

  try {
    if (*sweep) return cmd_sweep(c, fixture);
    if (*train) return cmd_train(c, params, test_fraction, test_out);
    if (*cv) return cmd_cv(c, folds, params, cart);
    if (*eval) return cmd_eval(c, mode, eval_samples, hist_out, cases_out);
    if (*pred) return cmd_predict(c, dims);
    if (*fcn) return cmd_demo_fcn(c, preset, layers, mnist_batches, synthetic_batches, dispatcher);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
