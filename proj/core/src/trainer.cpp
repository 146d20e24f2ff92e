#include "lidcd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace lidcd {

using namespace ad;
using nlohmann::json;

namespace {

// Substream ids for the independent random streams of one fit.
enum StreamId : std::uint64_t {
  kInitStream = 1,
  kSplitStream = 2,
  kMaskStream = 3,
  kTrainStream = 4,
  kValStream = 5,
};

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::map<std::string, std::string> FitSettings::echo() const {
  std::map<std::string, std::string> m;
  m["variant"] = to_string(variant);
  m["likelihood"] = to_string(likelihood);
  m["model_family"] = to_string(family);
  m["alpha"] = fmt(alpha);
  m["gamma"] = fmt(gamma);
  m["xi_g"] = fmt(xi_g);
  m["h"] = fmt(h);
  m["K"] = fmt(K);
  m["ffn_hidden"] = fmt(ffn_hidden);
  m["ffn_blocks"] = fmt(ffn_blocks);
  m["dropout"] = fmt(dropout);
  m["flow_layers"] = fmt(flow_layers);
  m["flow_hidden"] = fmt(flow_hidden);
  m["sigma_floor"] = fmt(sigma_floor);
  m["lr"] = fmt(lr);
  m["weight_decay"] = fmt(weight_decay);
  m["batch"] = fmt(batch);
  m["epochs_first"] = fmt(epochs_first);
  m["epochs_rest"] = fmt(epochs_rest);
  m["fixed_epochs"] = fixed_epochs ? "true" : "false";
  m["max_outer"] = fmt(max_outer);
  m["h_tol"] = fmt(h_tol);
  m["temperature"] = fmt(temperature);
  m["edge_threshold"] = fmt(edge_threshold);
  m["val_split"] = fmt(val_split);
  m["al_phi0"] = fmt(al_phi0);
  m["al_mu0"] = fmt(al_mu0);
  m["al_eta"] = fmt(al_eta);
  m["al_delta"] = fmt(al_delta);
  m["kappa"] = fmt(kappa);
  m["label_fraction"] = fmt(label_fraction);
  return m;
}

SupervisionPlan resolve_variant(const Dataset& ds, Variant variant, int config_K) {
  SupervisionPlan plan;
  plan.variant = variant;
  switch (variant) {
    case Variant::Latent:
      plan.K_eff = config_K;
      plan.needs_encoder = true;
      break;
    case Variant::Observational:
      plan.K_eff = 0;
      break;
    case Variant::Unknown:
      if (!ds.labels.has_value())
        throw std::invalid_argument("variant 'unknown' requires per-sample labels");
      plan.K_eff = ds.regimes() - 1;
      plan.use_labels = true;
      break;
    case Variant::Known:
      if (!ds.labels.has_value())
        throw std::invalid_argument("variant 'known' requires per-sample labels");
      if (!ds.manifest.has_value())
        throw std::invalid_argument("variant 'known' requires a ground-truth manifest");
      if (ds.manifest->targets.size() != static_cast<std::size_t>(ds.regimes()))
        throw std::invalid_argument("variant 'known': manifest regimes disagree with labels");
      plan.K_eff = ds.regimes() - 1;
      plan.use_labels = true;
      plan.use_targets = true;
      break;
    case Variant::Semi:
      if (!ds.labels.has_value())
        throw std::invalid_argument("variant 'semi' requires per-sample labels");
      plan.K_eff = ds.regimes() - 1;
      plan.use_labels = true;
      plan.needs_encoder = true;
      break;
  }
  if (plan.K_eff < 0) throw std::invalid_argument("resolve_variant: negative truncation");
  return plan;
}

namespace {

struct Split {
  std::vector<int> train, val;
};

Split make_split(int n, double val_fraction, RngStream rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
  }
  const int n_val = static_cast<int>(std::floor(val_fraction * n));
  Split s;
  s.val.assign(perm.begin(), perm.begin() + n_val);
  s.train.assign(perm.begin() + n_val, perm.end());
  return s;
}

struct StagedBatch {
  Tensor X;
  const std::vector<int>* labels = nullptr;
  const std::vector<std::uint8_t>* observed = nullptr;
};

Tensor stage_X(Tape& tape, const Dataset& ds) {
  return tape.constant(ds.n, ds.d, ds.X);
}

Tensor stage_known_targets(Tape& tape, const Dataset& ds) {
  const int R = ds.regimes();
  std::vector<double> t(static_cast<std::size_t>(R) * ds.d, 0.0);
  for (int k = 0; k < R; ++k)
    for (int j : ds.manifest->targets[static_cast<std::size_t>(k)])
      t[static_cast<std::size_t>(k) * ds.d + j] = 1.0;
  return tape.constant(R, ds.d, std::move(t));
}

}  // namespace

FitReport fit(const Dataset& input, const FitSettings& settings, std::uint64_t seed) {
  const auto t_start = std::chrono::steady_clock::now();
  FitReport report;
  report.seed = seed;
  report.config_echo = settings.echo();
  report.d = input.d;

  const SupervisionPlan plan = resolve_variant(input, settings.variant, settings.K);

  Dataset ds = input;
  if (!ds.normalized) ds.normalize();
  if (settings.variant == Variant::Semi && ds.observed_mask.empty()) {
    RngStream mask_rng = RngStream(seed, kMaskStream);
    assign_observed_mask(ds, settings.label_fraction, mask_rng);
  }

  const Split split = make_split(ds.n, settings.val_split, RngStream(seed, kSplitStream));
  Dataset train = ds.subset(split.train);
  Dataset val = split.val.empty() ? Dataset{} : ds.subset(split.val);
  const long n_train = train.n;

  // Model construction; registration order fixes parameter staging order.
  ParamStore store;
  RngStream init_rng(seed, kInitStream);
  ModelState state{
      GraphPosterior(store, ds.d, init_rng),
      InterventionPosterior(store,
                            DppPrior{settings.alpha, settings.gamma, settings.h, plan.K_eff},
                            ds.d, plan.needs_encoder, settings.ffn_hidden,
                            settings.ffn_blocks, settings.dropout, init_rng),
      DensityModel(store,
                   DensityConfig{settings.family, ds.d, settings.h, settings.ffn_hidden,
                                 settings.ffn_blocks, settings.dropout,
                                 settings.flow_layers, settings.flow_hidden,
                                 settings.sigma_floor},
                   init_rng),
  };
  for (Param& p : store.entries()) {
    p.adam.lr = settings.lr;
    p.adam.weight_decay = settings.weight_decay;
  }

  LossOptions opts;
  opts.variant = settings.variant;
  opts.likelihood = settings.likelihood;
  opts.hard = true;
  opts.temperature = settings.temperature;
  opts.xi_g = settings.xi_g;
  opts.kappa = settings.kappa;
  opts.dataset_size = n_train;

  AlState al;
  al.phi = settings.al_phi0;
  al.mu = settings.al_mu0;
  al.eta = settings.al_eta;
  al.delta = settings.al_delta;

  const int batch_size = settings.batch <= 0 ? train.n : std::min(settings.batch, train.n);
  const int batches_per_epoch = (train.n + batch_size - 1) / batch_size;
  std::int64_t step_counter = 0;

  const RngStream train_base(seed, kTrainStream);

  try {
    for (int outer = 0; outer < settings.max_outer; ++outer) {
      const int epochs = (settings.fixed_epochs || outer == 0) ? settings.epochs_first
                                                               : settings.epochs_rest;
      for (int epoch = 0; epoch < epochs; ++epoch) {
        // Minibatch order: a fresh shuffle per epoch (full batch is a no-op).
        std::vector<int> order(static_cast<std::size_t>(train.n));
        std::iota(order.begin(), order.end(), 0);
        if (batch_size < train.n) {
          RngStream shuffle = train_base.substream(
              combine_keys(0xe90cu, static_cast<std::uint64_t>(step_counter)));
          for (int i = train.n - 1; i > 0; --i) {
            const int k = static_cast<int>(shuffle.below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(k)]);
          }
        }
        for (int b = 0; b < batches_per_epoch; ++b) {
          ++step_counter;
          const std::uint64_t step_key =
              combine_keys(seed, static_cast<std::uint64_t>(step_counter));
          RngStream sample_rng = train_base.substream(static_cast<std::uint64_t>(step_counter));

          const int lo = b * batch_size;
          const int hi = std::min(train.n, lo + batch_size);
          Dataset view;
          const Dataset* data = &train;
          if (batch_size < train.n) {
            std::vector<int> rows(order.begin() + lo, order.begin() + hi);
            view = train.subset(rows);
            data = &view;
          }

          Tape tape;
          EvalCtx ctx(tape, store, /*training=*/true, seed, step_key);
          Tensor X = stage_X(tape, *data);
          Tensor targets;
          BatchView batch_view;
          batch_view.X = &X;
          if (data->labels.has_value() && plan.use_labels) batch_view.labels = &*data->labels;
          if (settings.variant == Variant::Semi) {
            batch_view.labels = &*data->labels;
            batch_view.observed = &data->observed_mask;
          }
          if (plan.use_targets) {
            targets = stage_known_targets(tape, *data);
            batch_view.known_targets = &targets;
          }

          LossResult loss = build_loss(ctx, batch_view, state, al, opts, sample_rng);
          tape.backward(loss.total);
          for (std::size_t pi = 0; pi < store.size(); ++pi) {
            Param& p = store.entries()[pi];
            adam_step(p.value, ctx.leaves()[pi].grad(), p.adam);
          }
          report.loss_trace.push_back(loss.parts.total);
          report.nll_trace.push_back(loss.parts.nll);
        }
      }

      const double h_val = state.graph.acyclicity_value(store);
      report.h_trace.push_back(h_val);
      report.outer_iterations = outer + 1;

      if (val.n > 0) {
        Tape tape;
        EvalCtx ctx(tape, store, /*training=*/false, seed,
                    combine_keys(seed, 0xa1000u + static_cast<std::uint64_t>(outer)));
        RngStream val_rng = RngStream(seed, kValStream).substream(static_cast<std::uint64_t>(outer));
        Tensor X = stage_X(tape, val);
        Tensor targets;
        BatchView bv;
        bv.X = &X;
        if (val.labels.has_value() && plan.use_labels) bv.labels = &*val.labels;
        if (settings.variant == Variant::Semi) {
          bv.labels = &*val.labels;
          bv.observed = &val.observed_mask;
        }
        if (plan.use_targets) {
          targets = stage_known_targets(tape, val);
          bv.known_targets = &targets;
        }
        LossOptions vopts = opts;
        vopts.dataset_size = val.n;
        LossResult vloss = build_loss(ctx, bv, state, al, vopts, val_rng);
        report.val_loglik_trace.push_back(-(vloss.parts.nll + vloss.parts.kl));
      }

      if (h_val < settings.h_tol) {
        report.converged = true;
        break;
      }
      al.outer_update(h_val);
    }
  } catch (const NonFiniteError& e) {
    report.error = std::string("diverged: ") + e.what();
  }

  report.steps = step_counter;
  const Param& lam = store.at(state.graph.param_handle());
  report.lambda = lam.value;
  report.adjacency = state.graph.threshold(store, settings.edge_threshold);
  {
    CausalGraph g(ds.d);
    g.adj = report.adjacency;
    report.acyclic_at_threshold = g.is_acyclic();
  }

  report.K = plan.K_eff;
  report.h_dim = settings.h;
  const auto& entries = store.entries();
  for (const Param& p : entries) {
    if (p.name == "post.mu") report.post_mu = p.value;
    if (p.name == "post.sigma_raw") {
      report.post_sigma.resize(p.value.size());
      for (std::size_t i = 0; i < p.value.size(); ++i)
        report.post_sigma[i] = std::log1p(std::exp(p.value[i])) + 1e-6;
    }
    if (p.name == "post.rho_raw") {
      report.post_rho.resize(p.value.size());
      for (std::size_t i = 0; i < p.value.size(); ++i)
        report.post_rho[i] = 1.0 / (1.0 + std::exp(-p.value[i]));
    }
    if (p.name == "post.mass_raw") {
      report.post_mass.resize(p.value.size());
      for (std::size_t i = 0; i < p.value.size(); ++i)
        report.post_mass[i] = std::log1p(std::exp(p.value[i])) + 1e-6;
    }
    if (p.name == "post.pi_raw") {
      report.post_pi.resize(p.value.size());
      for (std::size_t i = 0; i < p.value.size(); ++i)
        report.post_pi[i] = 1.0 / (1.0 + std::exp(-p.value[i]));
    }
  }

  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

void write_fit_report(const FitReport& r, const std::string& path) {
  json j;
  j["d"] = r.d;
  j["lambda"] = r.lambda;
  j["adjacency"] = std::vector<int>(r.adjacency.begin(), r.adjacency.end());
  j["converged"] = r.converged;
  j["acyclic_at_threshold"] = r.acyclic_at_threshold;
  j["outer_iterations"] = r.outer_iterations;
  j["steps"] = r.steps;
  j["loss_trace"] = r.loss_trace;
  j["nll_trace"] = r.nll_trace;
  j["h_trace"] = r.h_trace;
  j["val_loglik_trace"] = r.val_loglik_trace;
  j["wall_clock_sec"] = r.wall_clock_sec;
  j["seed"] = r.seed;
  j["config"] = r.config_echo;
  j["error"] = r.error;
  j["posterior"] = {{"K", r.K},         {"h", r.h_dim},      {"mu", r.post_mu},
                    {"sigma", r.post_sigma}, {"rho", r.post_rho}, {"mass", r.post_mass},
                    {"pi", r.post_pi}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_fit_report: cannot open " + path);
  out << j.dump(2) << '\n';
}

FitReport load_fit_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_fit_report: cannot open " + path);
  json j = json::parse(in);
  FitReport r;
  r.d = j.at("d").get<int>();
  r.lambda = j.at("lambda").get<std::vector<double>>();
  const std::vector<int> adj = j.at("adjacency").get<std::vector<int>>();
  r.adjacency.assign(adj.begin(), adj.end());
  r.converged = j.value("converged", false);
  r.acyclic_at_threshold = j.value("acyclic_at_threshold", false);
  r.outer_iterations = j.value("outer_iterations", 0);
  r.steps = j.value("steps", static_cast<std::int64_t>(0));
  if (j.contains("loss_trace")) r.loss_trace = j["loss_trace"].get<std::vector<double>>();
  if (j.contains("nll_trace")) r.nll_trace = j["nll_trace"].get<std::vector<double>>();
  if (j.contains("h_trace")) r.h_trace = j["h_trace"].get<std::vector<double>>();
  if (j.contains("val_loglik_trace"))
    r.val_loglik_trace = j["val_loglik_trace"].get<std::vector<double>>();
  r.wall_clock_sec = j.value("wall_clock_sec", 0.0);
  r.seed = j.value("seed", static_cast<std::uint64_t>(0));
  if (j.contains("config"))
    r.config_echo = j["config"].get<std::map<std::string, std::string>>();
  r.error = j.value("error", std::string());
  if (j.contains("posterior")) {
    const json& p = j["posterior"];
    r.K = p.value("K", 0);
    r.h_dim = p.value("h", 0);
    if (p.contains("mu")) r.post_mu = p["mu"].get<std::vector<double>>();
    if (p.contains("sigma")) r.post_sigma = p["sigma"].get<std::vector<double>>();
    if (p.contains("rho")) r.post_rho = p["rho"].get<std::vector<double>>();
    if (p.contains("mass")) r.post_mass = p["mass"].get<std::vector<double>>();
    if (p.contains("pi")) r.post_pi = p["pi"].get<std::vector<double>>();
  }
  return r;
}

}  // namespace lidcd
