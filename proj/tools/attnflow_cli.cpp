#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "attnflow/attnflow.hpp"

namespace fs = std::filesystem;
using namespace attnflow;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

const std::vector<double> kDefaultAlphas{0.2, 0.4, 0.6, 0.8, 1.0};

// Shared plumbing ----------------------------------------------------------------

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string join(const std::vector<std::string>& xs, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? std::string(1, sep) : "") + xs[i];
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::vector<std::string> s;
  for (double x : xs) s.push_back(io::fmt17(x));
  return join(s);
}

std::vector<Paradigm> parse_paradigms(const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("paradigm list is empty");
  std::vector<Paradigm> out;
  for (const auto& n : names) out.push_back(parse_paradigm(n));
  return out;
}

std::vector<std::string> paradigm_names(const std::vector<Paradigm>& ps) {
  std::vector<std::string> out;
  for (Paradigm p : ps) out.emplace_back(to_string(p));
  return out;
}

void check_alphas(const std::vector<double>& alphas) {
  if (alphas.empty()) throw ConfigError("alpha grid is empty");
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha values must lie in [0, 1]");
}

std::size_t worker_count(std::size_t cells) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ATTNFLOW_WORKERS")) {
    long long v = 0;
    try {
      v = io::parse_int(env);
    } catch (const Error&) {
      throw ConfigError("ATTNFLOW_WORKERS must be a positive integer");
    }
    if (v < 1) throw ConfigError("ATTNFLOW_WORKERS must be a positive integer");
    n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, cells));
}

/// Runs work(i) for every cell on a small pool. Each cell owns its outputs and
/// returns the lines to report; they are printed in cell order. The first
/// failing cell (by index) is rethrown after all workers finish.
template <typename Work>
void run_cells(std::size_t cells, const Work& work) {
  std::vector<std::vector<std::string>> reports(cells);
  std::vector<std::exception_ptr> errors(cells);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      try {
        reports[i] = work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = worker_count(cells);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < cells; ++i) {
    for (const auto& line : reports[i]) std::cout << line << '\n';
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
}

std::string emit(const fs::path& path, const std::string& content) {
  io::atomic_write(path, content);
  return "digest " + io::hex64(io::content_digest(content)) + "  " + path.string();
}

io::HeaderBlock base_header(const std::string& command) {
  io::HeaderBlock h;
  h.set(std::string(io::kTimestampKey), io::timestamp_utc());
  h.set("command", command);
  return h;
}

SdcDataset load_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  return read_dataset(in);
}

FcamParams load_params(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open parameters " + path.string());
  return read_params(in);
}

void add_dataset_keys(io::HeaderBlock& h, const SdcDataset& ds, const fs::path& path) {
  h.set("data", path.string());
  const io::HeaderBlock dh = dataset_header(ds.config, ds.size());
  for (const auto& [k, v] : dh.entries()) h.set("data_" + k, v);
}

// gen-data -----------------------------------------------------------------------

struct GenDataArgs {
  SdcConfig cfg;
  std::string mode = "ortho-zero";
  std::size_t n = 100;
  std::uint64_t split = 0;
  std::string out = "data.csv";
};

void cmd_gen_data(GenDataArgs a) {
  a.cfg.mode = parse_sdc_mode(a.mode);
  a.cfg.validate();
  const SdcDataset ds = generate_dataset(a.cfg, a.n, a.split);
  io::HeaderBlock extra = base_header("gen-data");
  extra.set("split", a.split);
  std::ostringstream os;
  write_dataset(os, ds, extra);
  std::cout << emit(a.out, os.str()) << '\n';
}

// simulate-ode -------------------------------------------------------------------

struct SimulateArgs {
  bool joint = false;
  bool fixed_focus = false;
  std::vector<std::string> paradigms{"sa", "ha", "lv"};
  std::vector<double> alphas = kDefaultAlphas;
  std::size_t m = 20;
  std::size_t C = 20;
  double T = 0.0;
  double dt = 0.0;
  std::size_t stride = 0;
  std::string out_dir = ".";
};

void cmd_simulate_ode(SimulateArgs a) {
  const bool joint = !a.fixed_focus;
  const auto pars = parse_paradigms(a.paradigms);
  if (a.C < 2) throw ConfigError("C must be at least 2");
  if (joint && a.m < 2) throw ConfigError("m must be at least 2");
  if (!joint) check_alphas(a.alphas);
  const OdeGrid grid = joint ? default_joint_grid(a.m, a.C) : default_fixed_grid();
  const double T = a.T > 0.0 ? a.T : grid.horizon;
  const double dt = a.dt > 0.0 ? a.dt : grid.dt;
  if (a.T < 0.0 || a.dt < 0.0) throw ConfigError("T and dt must be positive");
  // auto stride keeps about 2000 rows per trace
  const std::size_t stride =
      a.stride ? a.stride : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(T / dt / 2000.0)));

  struct Cell {
    Paradigm par;
    double alpha;
  };
  std::vector<Cell> cells;
  for (Paradigm p : pars) {
    if (joint)
      cells.push_back({p, std::numeric_limits<double>::quiet_NaN()});
    else
      for (double al : a.alphas) cells.push_back({p, al});
  }

  run_cells(cells.size(), [&](std::size_t i) {
    const Cell& c = cells[i];
    const FlowTrace tr = joint ? integrate_joint(c.par, a.m, a.C, T, dt, stride)
                               : integrate_fixed_focus(c.par, c.alpha, a.C, T, dt, stride);
    io::HeaderBlock h = base_header("simulate-ode");
    h.set("mode", std::string(to_string(tr.mode)))
        .set("paradigm", std::string(to_string(c.par)))
        .set("C", std::uint64_t{a.C})
        .set("T", T)
        .set("dt", dt)
        .set("stride", std::uint64_t{stride});
    if (joint)
      h.set("m", std::uint64_t{a.m});
    else
      h.set("alpha", c.alpha);
    std::ostringstream os;
    write_trace_csv(os, tr, h);
    const std::string name = joint ? "ode_joint_" + std::string(to_string(c.par)) + ".csv"
                                   : "ode_fixed_" + std::string(to_string(c.par)) + "_a" + short_num(c.alpha) + ".csv";
    return std::vector<std::string>{emit(fs::path(a.out_dir) / name, os.str())};
  });
}

// train --------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string mode = "joint";
  std::vector<std::string> paradigms{"sa"};
  std::vector<double> alphas = kDefaultAlphas;
  double lr = 0.1;
  std::size_t epochs = 100;
  std::size_t batch = 0;
  std::uint64_t seed = 0;
  std::string init = "zero";
  double init_sigma = 0.01;
  long long switch_epoch = -1;
  double switch_incentive = std::numeric_limits<double>::quiet_NaN();
  std::size_t checkpoint_every = 0;
  std::string out_dir = ".";
};

std::string fixed_cell_name(Paradigm p, double alpha) {
  return "fixed_" + std::string(to_string(p)) + "_a" + short_num(alpha);
}

std::string checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%06zu.params", epoch);
  return buf;
}

void cmd_train(TrainArgs a) {
  if (a.mode != "fixed" && a.mode != "joint" && a.mode != "hybrid")
    throw ConfigError("train mode must be fixed, joint or hybrid");
  const auto pars = parse_paradigms(a.paradigms);
  if (a.mode == "fixed") check_alphas(a.alphas);
  if (a.init != "zero" && a.init != "gaussian") throw ConfigError("init must be zero or gaussian");

  TrainConfig base;
  base.learning_rate = a.lr;
  base.epochs = a.epochs;
  base.batch = a.batch;
  base.seed = a.seed;
  base.init = a.init == "gaussian" ? InitKind::Gaussian : InitKind::Zero;
  base.init_sigma = a.init_sigma;
  if (a.switch_epoch >= 0) base.switch_epoch = static_cast<std::size_t>(a.switch_epoch);
  if (std::isfinite(a.switch_incentive)) base.switch_incentive_threshold = a.switch_incentive;
  base.validate();
  if (a.mode == "hybrid" && base.switch_epoch && *base.switch_epoch > a.epochs)
    throw ConfigError("switch_epoch must not exceed epochs");

  const SdcDataset ds = load_dataset(a.data);
  if (a.mode == "fixed")
    for (double al : a.alphas) FixedFocusSpec{al}.validate(static_cast<Index>(ds.config.m));

  struct Cell {
    std::string name;
    TrainConfig cfg;
  };
  std::vector<Cell> cells;
  if (a.mode == "hybrid") {
    cells.push_back({"hybrid", base});
  } else {
    for (Paradigm p : pars) {
      TrainConfig c = base;
      c.paradigm = p;
      if (a.mode == "joint") {
        cells.push_back({"joint_" + std::string(to_string(p)), c});
        continue;
      }
      for (double al : a.alphas) {
        c.alpha = al;
        cells.push_back({fixed_cell_name(p, al), c});
      }
    }
  }

  auto header_for = [&](const Cell& cell) {
    io::HeaderBlock h = base_header("train");
    h.set("train_mode", a.mode).set("cell", cell.name);
    add_dataset_keys(h, ds, a.data);
    if (a.mode != "hybrid") h.set("paradigm", std::string(to_string(cell.cfg.paradigm)));
    if (cell.cfg.alpha) h.set("alpha", *cell.cfg.alpha);
    h.set("lr", a.lr)
        .set("epochs", std::uint64_t{a.epochs})
        .set("batch", std::uint64_t{a.batch})
        .set("seed", a.seed)
        .set("init", a.init)
        .set("init_sigma", a.init_sigma)
        .set("checkpoint_every", std::uint64_t{a.checkpoint_every});
    if (a.mode == "hybrid") {
      h.set("switch_epoch", std::uint64_t{base.switch_epoch.value_or(a.epochs / 2)});
      if (base.switch_incentive_threshold) h.set("switch_incentive", *base.switch_incentive_threshold);
    }
    return h;
  };

  std::vector<TrainTrace> traces(cells.size());
  run_cells(cells.size(), [&](std::size_t i) {
    const Cell& cell = cells[i];
    const fs::path dir = fs::path(a.out_dir) / cell.name;
    const io::HeaderBlock h = header_for(cell);
    std::vector<std::string> report;
    auto checkpoint = [&](std::size_t epoch, const FcamParams& p) {
      io::HeaderBlock ch = h;
      ch.set("epoch", std::uint64_t{epoch});
      std::ostringstream os;
      write_params(os, p, ch);
      io::atomic_write(dir / checkpoint_name(epoch), os.str());
    };
    EpochCallback on_epoch;
    if (a.checkpoint_every > 0) {
      checkpoint(0, initial_params(ds, cell.cfg));
      on_epoch = [&](std::size_t e, const FcamParams& p) {
        if (e % a.checkpoint_every == 0 || e == a.epochs) checkpoint(e, p);
      };
    }
    TrainResult res = a.mode == "fixed"   ? train_fixed_focus(ds, cell.cfg, on_epoch)
                      : a.mode == "joint" ? train_joint(ds, cell.cfg, on_epoch)
                                          : train_hybrid(ds, cell.cfg, on_epoch);
    io::HeaderBlock th = h;
    if (res.trace.switch_epoch) th.set("switched_at", std::uint64_t{*res.trace.switch_epoch});
    std::ostringstream trace, params;
    write_train_trace_csv(trace, res.trace, th);
    write_params(params, res.params, th);
    report.push_back(emit(dir / "trace.csv", trace.str()));
    report.push_back(emit(dir / "params.txt", params.str()));
    traces[i] = std::move(res.trace);
    return report;
  });

  if (a.mode != "fixed") return;
  // one loss curve per alpha, one file per paradigm
  for (std::size_t pi = 0; pi < pars.size(); ++pi) {
    io::HeaderBlock h = base_header("train");
    h.set("train_mode", a.mode).set("paradigm", std::string(to_string(pars[pi]))).set("alphas", join(a.alphas));
    add_dataset_keys(h, ds, a.data);
    h.set("lr", a.lr).set("epochs", std::uint64_t{a.epochs}).set("batch", std::uint64_t{a.batch}).set("seed", a.seed);
    h.set("init", a.init).set("init_sigma", a.init_sigma);
    std::ostringstream os;
    h.write(os, "# ");
    os << "epoch";
    for (double al : a.alphas) os << ",alpha_" << short_num(al);
    os << '\n';
    for (std::size_t e = 0; e <= a.epochs; ++e) {
      os << e;
      for (std::size_t ai = 0; ai < a.alphas.size(); ++ai)
        os << ',' << io::fmt17(traces[pi * a.alphas.size() + ai].records[e].loss);
      os << '\n';
    }
    std::cout << emit(fs::path(a.out_dir) / ("loss_curves_" + std::string(to_string(pars[pi])) + ".csv"), os.str())
              << '\n';
  }
}

// evaluate -----------------------------------------------------------------------

struct EvaluateArgs {
  std::string data;
  std::string params;
  std::vector<std::string> paradigms{"sa", "ha", "lv"};
  std::size_t bins = 5;
  double threshold = 0.8;
  std::string out_dir = ".";
};

void cmd_evaluate(EvaluateArgs a) {
  const auto pars = parse_paradigms(a.paradigms);
  if (a.bins < 2) throw ConfigError("bins must be at least 2");
  if (!(a.threshold >= 0.0 && a.threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  const SdcDataset ds = load_dataset(a.data);
  const FcamParams p = load_params(a.params);
  if (p.d() != static_cast<Index>(ds.config.d) || p.C() != static_cast<Index>(ds.config.C))
    throw ConfigError("parameter shape does not match the dataset");

  io::HeaderBlock base = base_header("evaluate");
  add_dataset_keys(base, ds, a.data);
  base.set("params", a.params).set("bins", std::uint64_t{a.bins}).set("threshold", a.threshold);

  std::vector<double> saifs(pars.size()), accs(pars.size());
  run_cells(pars.size(), [&](std::size_t i) {
    const HeatMap hm = focus_prediction_heatmap(p, ds, pars[i], a.bins, a.threshold);
    accs[i] = accuracy(p, ds, pars[i]);
    saifs[i] = saif(hm);
    io::HeaderBlock h = base;
    h.set("paradigm", std::string(to_string(pars[i])));
    std::ostringstream os;
    write_heatmap_csv(os, hm, pars[i], accs[i], h);
    return std::vector<std::string>{
        emit(fs::path(a.out_dir) / ("heatmap_" + std::string(to_string(pars[i])) + ".csv"), os.str())};
  });

  io::HeaderBlock h = base;
  h.set("paradigms", join(paradigm_names(pars)));
  std::ostringstream os;
  h.write(os, "# ");
  os << "paradigm,saif,accuracy,n\n";
  for (std::size_t i = 0; i < pars.size(); ++i)
    os << to_string(pars[i]) << ',' << io::fmt17(saifs[i]) << ',' << io::fmt17(accs[i]) << ',' << ds.size() << '\n';
  std::cout << emit(fs::path(a.out_dir) / "metrics.csv", os.str()) << '\n';
}

// incentive ----------------------------------------------------------------------

struct IncentiveArgs {
  std::string data;
  std::string checkpoints;
  std::vector<std::string> paradigms{"sa", "ha", "lv"};
  std::vector<double> alphas = kDefaultAlphas;
  std::vector<std::size_t> epochs;
  std::string out_dir = ".";
};

std::vector<std::size_t> discover_epochs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("missing checkpoint directory " + dir.string());
  std::set<std::size_t> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    std::size_t e = 0;
    char tail = 0;
    if (std::sscanf(name.c_str(), "epoch_%zu.param%c", &e, &tail) == 2 && tail == 's' &&
        name == checkpoint_name(e))
      found.insert(e);
  }
  if (found.empty()) throw ConfigError("no checkpoints in " + dir.string());
  return {found.begin(), found.end()};
}

void cmd_incentive(IncentiveArgs a) {
  const auto pars = parse_paradigms(a.paradigms);
  check_alphas(a.alphas);
  const SdcDataset ds = load_dataset(a.data);
  for (double al : a.alphas) FixedFocusSpec{al}.validate(static_cast<Index>(ds.config.m));
  const fs::path root(a.checkpoints);
  std::vector<std::size_t> epochs = a.epochs;
  if (epochs.empty()) epochs = discover_epochs(root / fixed_cell_name(pars.front(), a.alphas.front()));
  std::sort(epochs.begin(), epochs.end());
  epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());

  // validate the whole grid before any work
  for (Paradigm p : pars)
    for (double al : a.alphas)
      for (std::size_t e : epochs) {
        const fs::path f = root / fixed_cell_name(p, al) / checkpoint_name(e);
        if (!fs::is_regular_file(f)) throw ConfigError("missing checkpoint " + f.string());
      }

  const std::size_t na = a.alphas.size(), ne = epochs.size();
  std::vector<double> delta(pars.size() * na * ne);
  run_cells(pars.size() * na, [&](std::size_t i) {
    const Paradigm p = pars[i / na];
    const double al = a.alphas[i % na];
    for (std::size_t k = 0; k < ne; ++k) {
      const FcamParams params = load_params(root / fixed_cell_name(p, al) / checkpoint_name(epochs[k]));
      delta[i * ne + k] = incentive(params, ds, p, al);
    }
    return std::vector<std::string>{};
  });

  for (std::size_t pi = 0; pi < pars.size(); ++pi) {
    io::HeaderBlock h = base_header("incentive");
    add_dataset_keys(h, ds, a.data);
    h.set("checkpoints", a.checkpoints)
        .set("paradigm", std::string(to_string(pars[pi])))
        .set("alphas", join(a.alphas));
    std::vector<std::string> es;
    for (std::size_t e : epochs) es.push_back(std::to_string(e));
    h.set("epochs", join(es));
    std::ostringstream os;
    h.write(os, "# ");
    os << "epoch";
    for (double al : a.alphas) os << ",alpha_" << short_num(al);
    os << '\n';
    for (std::size_t k = 0; k < ne; ++k) {
      os << epochs[k];
      for (std::size_t ai = 0; ai < na; ++ai) os << ',' << io::fmt17(delta[(pi * na + ai) * ne + k]);
      os << '\n';
    }
    std::cout << emit(fs::path(a.out_dir) / ("incentive_" + std::string(to_string(pars[pi])) + ".csv"), os.str())
              << '\n';
  }
}

// Config files -------------------------------------------------------------------

/// Turns `key=value` lines into `--key=value` arguments placed ahead of the
/// explicit flags, skipping keys that were also given on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty() || rest.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::set<std::string> given;
  for (const auto& r : rest)
    if (r.starts_with("--")) given.insert(r.substr(2, r.find('=') - 2));
  std::vector<std::string> out{rest.front()};
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (!item.parents.empty()) throw ConfigError("config sections are not supported: " + item.fullname());
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (given.count(key)) continue;
    out.push_back("--" + key + "=" + join(item.inputs));
  }
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

int run(int argc, char** argv) {
  CLI::App app("Numerical lab for soft, hard and latent-variable attention dynamics.");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  std::string config_doc;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_doc, "key=value file; explicit flags win");
  };

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic mosaic dataset");
  add_config(g);
  g->add_option("--d", gen.cfg.d, "feature dimension")->capture_default_str();
  g->add_option("--m", gen.cfg.m, "segments per instance")->capture_default_str();
  g->add_option("--C", gen.cfg.C, "number of classes")->capture_default_str();
  g->add_option("--mode", gen.mode, "ortho-zero | ortho-rademacher | gaussian")->capture_default_str();
  g->add_option("--fg-scale", gen.cfg.fg_scale)->capture_default_str();
  g->add_option("--noise-std", gen.cfg.noise_std)->capture_default_str();
  g->add_option("--n", gen.n, "number of instances")->capture_default_str();
  g->add_option("--seed", gen.cfg.seed)->capture_default_str();
  g->add_option("--split", gen.split, "sample stream index (0 train, 1 test, ...)")->capture_default_str();
  g->add_option("--out", gen.out, "output file")->capture_default_str();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate-ode", "Integrate the structured gradient flow");
  add_config(s);
  auto* j_flag = s->add_flag("--joint", sim.joint, "joint focus and classifier flow (default)");
  s->add_flag("--fixed-focus", sim.fixed_focus, "classifier flow at fixed alpha")->excludes(j_flag);
  s->add_option("--paradigm", sim.paradigms, "comma list of sa, ha, lv")->delimiter(',');
  s->add_option("--alpha", sim.alphas, "fixed-focus alpha grid")->delimiter(',');
  s->add_option("--m", sim.m)->capture_default_str();
  s->add_option("--C", sim.C)->capture_default_str();
  s->add_option("--T", sim.T, "horizon (0 = default for the mode)");
  s->add_option("--dt", sim.dt, "RK4 step (0 = default for the mode)");
  s->add_option("--stride", sim.stride, "rows every k steps (0 = about 2000 rows)");
  s->add_option("--out-dir", sim.out_dir)->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Gradient-descent training");
  add_config(t);
  t->add_option("--data", tr.data, "dataset file")->required();
  t->add_option("--mode", tr.mode, "fixed | joint | hybrid")->capture_default_str();
  t->add_option("--paradigm", tr.paradigms, "comma list of sa, ha, lv")->delimiter(',');
  t->add_option("--alpha", tr.alphas, "fixed-focus alpha grid")->delimiter(',');
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--batch", tr.batch, "minibatch size (0 = full batch)")->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--init", tr.init, "zero | gaussian")->capture_default_str();
  t->add_option("--init-sigma", tr.init_sigma)->capture_default_str();
  t->add_option("--switch-epoch", tr.switch_epoch, "hybrid: first HA epoch (default epochs/2)");
  t->add_option("--switch-incentive", tr.switch_incentive, "hybrid: switch once the SA incentive falls below this");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "write params every k epochs (0 = off)");
  t->add_option("--out-dir", tr.out_dir)->capture_default_str();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Focus-prediction heat maps, SAIF and accuracy");
  add_config(e);
  e->add_option("--data", ev.data)->required();
  e->add_option("--params", ev.params)->required();
  e->add_option("--paradigm", ev.paradigms, "inference procedures")->delimiter(',');
  e->add_option("--bins", ev.bins)->capture_default_str();
  e->add_option("--threshold", ev.threshold)->capture_default_str();
  e->add_option("--out-dir", ev.out_dir)->capture_default_str();

  IncentiveArgs in;
  auto* c = app.add_subcommand("incentive", "Focus-improvement incentive over fixed-focus checkpoints");
  add_config(c);
  c->add_option("--data", in.data)->required();
  c->add_option("--checkpoints", in.checkpoints, "output directory of a fixed-mode train run")->required();
  c->add_option("--paradigm", in.paradigms)->delimiter(',');
  c->add_option("--alpha", in.alphas)->delimiter(',');
  c->add_option("--epochs", in.epochs, "checkpoint epochs (default: all found)")->delimiter(',');
  c->add_option("--out-dir", in.out_dir)->capture_default_str();

  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  try {
    args = expand_config(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitConfig;
  }

  if (g->parsed()) cmd_gen_data(gen);
  if (s->parsed()) cmd_simulate_ode(sim);
  if (t->parsed()) cmd_train(tr);
  if (e->parsed()) cmd_evaluate(ev);
  if (c->parsed()) cmd_incentive(in);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const DivergenceError& err) {
    std::cerr << "diverged: " << err.what() << '\n';
    return kExitDivergence;
  } catch (const FormatError& err) {
    std::cerr << "format error: " << err.what() << '\n';
    return 1;
  } catch (const Error& err) {
    // bad flags, shapes or values
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
}
