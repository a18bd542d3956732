#include "deconv/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "deconv/csv.hpp"

namespace deconv {

using nlohmann::json;

config_error::config_error(std::vector<std::string> errs)
    : std::runtime_error([&errs] {
        std::ostringstream os;
        os << "config invalid (" << errs.size() << " problem(s)):";
        for (const auto& e : errs) os << "\n  - " << e;
        return os.str();
      }()),
      errors(std::move(errs)) {}

namespace {

struct Parser {
  std::vector<std::string> errors;

  void check_keys(const json& obj, const std::string& path,
                  const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key()))
        errors.push_back(path + ": unknown key '" + it.key() + "'");
  }

  template <class T>
  void get(const json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      errors.push_back(path + "." + key + ": wrong type");
    }
  }

  void get_p_list(const json& obj, const std::string& path, std::vector<double>& out) {
    if (!obj.contains("p_list")) return;
    const json& arr = obj.at("p_list");
    if (!arr.is_array()) {
      errors.push_back(path + ".p_list: must be an array");
      return;
    }
    out.clear();
    for (const auto& v : arr) {
      if (v.is_string() && (v == "inf" || v == "Inf"))
        out.push_back(std::numeric_limits<double>::infinity());
      else if (v.is_number())
        out.push_back(v.get<double>());
      else
        errors.push_back(path + ".p_list: entries must be numbers or \"inf\"");
    }
  }

  void require(bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  }
};

json p_to_json(double p) {
  if (std::isinf(p)) return json("inf");
  return json(p);
}

} // namespace

TrueDensity ExperimentConfig::build_truth() const {
  if (truth.kind == "gauss_mixture") return make_gauss_mixture(truth.weights, truth.means, truth.sds);
  if (truth.kind == "heavy_tail") return make_heavy_tail(truth.c2, truth.scale, truth.center);
  if (truth.kind == "bspline2") return make_bspline2(truth.scale, truth.center);
  throw std::invalid_argument("unknown truth kind: " + truth.kind);
}

ErrorModel ExperimentConfig::build_error() const {
  ErrorModel m = [&] {
    if (error.kind == "gaussian") return ErrorModel::gaussian(error.sigma);
    if (error.kind == "cauchy") return ErrorModel::cauchy(error.sigma);
    if (error.kind == "none") return ErrorModel::none();
    throw std::invalid_argument("unknown error kind: " + error.kind);
  }();
  if (error.envelope) m.set_envelope(*error.envelope);
  return m;
}

DeconvKernel ExperimentConfig::build_kernel() const {
  TaperKind t = kernel.taper == "polynomial" ? TaperKind::Polynomial : TaperKind::SmoothExp;
  return DeconvKernel(kernel.flat_radius, t, kernel.taper_degree);
}

BandwidthSchedule ExperimentConfig::build_bandwidth() const {
  BandwidthSchedule s;
  if (bandwidth.regime == "supersmooth_lp")
    s.regime = BandwidthRegime::SupersmoothLp;
  else if (bandwidth.regime == "supersmooth_sup")
    s.regime = BandwidthRegime::SupersmoothSup;
  else
    s.regime = BandwidthRegime::Accelerated;
  s.gamma = bandwidth.gamma;
  s.eta = bandwidth.eta;
  s.t_exponent = bandwidth.t_exponent;
  return s;
}

GridSpec ExperimentConfig::build_grid() const {
  return GridSpec{grid.xmin, grid.xmax, grid.points, grid.pad_factor};
}

DpmmPrior ExperimentConfig::build_prior() const {
  DpmmPrior p;
  p.alpha = prior.alpha;
  p.mu0 = prior.mu0;
  p.sigma0_sq = prior.sigma0_sq;
  p.a = prior.a;
  p.b = prior.b;
  p.k_trunc = prior.k_trunc;
  p.h_prior = prior.h_prior == "exponential" ? HPriorKind::ExponentialOnH
                                             : HPriorKind::InvGammaOnH2;
  p.lambda = prior.lambda;
  return p;
}

ChainConfig ExperimentConfig::build_chain() const {
  ChainConfig c;
  c.iters = chain.iters;
  c.burnin = chain.burnin;
  c.thin = chain.thin;
  c.seed = seed;
  c.band_level = chain.band_level;
  return c;
}

RateConfig ExperimentConfig::build_rates() const {
  RateConfig rc{.truth = build_truth()};
  if (rates.use_sigma_schedule)
    rc.sigma_schedule = SigmaSchedule{rates.schedule_eta, rates.schedule_t};
  else
    rc.error = build_error();
  rc.n_grid = rates.n_grid;
  rc.reps = rates.reps;
  rc.methods.clear();
  for (const auto& m : rates.methods) {
    if (m == "dke")
      rc.methods.push_back(RateMethod::Dke);
    else if (m == "dpmm")
      rc.methods.push_back(RateMethod::DpmmMean);
    else if (m == "kde")
      rc.methods.push_back(RateMethod::KdeW);
    else
      throw std::invalid_argument("unknown rates method: " + m);
  }
  rc.p_list = rates.p_list;
  rc.bw = build_bandwidth();
  if (rates.use_sigma_schedule) {
    rc.bw.regime = BandwidthRegime::Accelerated;
    rc.bw.eta = rates.schedule_eta;
    rc.bw.t_exponent = rates.schedule_t;
  }
  if (bandwidth.h > 0.0) rc.fixed_h = bandwidth.h;
  rc.prior = build_prior();
  rc.chain = build_chain();
  rc.grid_points = rates.grid_points;
  rc.master_seed = seed;
  return rc;
}

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["truth"] = {{"kind", truth.kind},     {"weights", truth.weights}, {"means", truth.means},
                {"sds", truth.sds},       {"c2", truth.c2},           {"scale", truth.scale},
                {"center", truth.center}};
  j["error"] = {{"kind", error.kind}, {"sigma", error.sigma}};
  if (error.envelope) {
    const EnvelopeParams& e = *error.envelope;
    j["error"]["envelope"] = {{"beta", e.beta}, {"varrho", e.varrho}, {"beta0", e.beta0},
                              {"beta1", e.beta1}, {"d0", e.d0},       {"d1", e.d1}};
  }
  j["kernel"] = {{"flat_radius", kernel.flat_radius},
                 {"taper", kernel.taper},
                 {"taper_degree", kernel.taper_degree}};
  j["bandwidth"] = {{"regime", bandwidth.regime},
                    {"gamma", bandwidth.gamma},
                    {"eta", bandwidth.eta},
                    {"t_exponent", bandwidth.t_exponent},
                    {"h", bandwidth.h}};
  j["grid"] = {{"points", grid.points}, {"pad_factor", grid.pad_factor}};
  if (!std::isnan(grid.xmin)) j["grid"]["xmin"] = grid.xmin;
  if (!std::isnan(grid.xmax)) j["grid"]["xmax"] = grid.xmax;
  j["prior"] = {{"alpha", prior.alpha}, {"mu0", prior.mu0},   {"sigma0_sq", prior.sigma0_sq},
                {"a", prior.a},         {"b", prior.b},       {"k_trunc", prior.k_trunc},
                {"h_prior", prior.h_prior}, {"lambda", prior.lambda}};
  j["chain"] = {{"iters", chain.iters},
                {"burnin", chain.burnin},
                {"thin", chain.thin},
                {"band_level", chain.band_level}};
  json pl = json::array();
  for (double p : rates.p_list) pl.push_back(p_to_json(p));
  j["rates"] = {{"n_grid", rates.n_grid},
                {"reps", rates.reps},
                {"methods", rates.methods},
                {"p_list", pl},
                {"use_sigma_schedule", rates.use_sigma_schedule},
                {"schedule_eta", rates.schedule_eta},
                {"schedule_t", rates.schedule_t},
                {"grid_points", rates.grid_points}};
  j["concentration"] = {{"mode", concentration.mode}, {"h_grid", concentration.h_grid},
                        {"p", p_to_json(concentration.p)}, {"n", concentration.n},
                        {"reps", concentration.reps},      {"h", concentration.h},
                        {"M1", concentration.M1},          {"xi_n", concentration.xi_n}};
  j["simulate"] = {{"n", simulate.n}};
  j["dke"] = {{"input", dke.input}, {"h", dke.h}};
  j["fit_dpmm"] = {{"input", fit_dpmm.input}, {"save_draws", fit_dpmm.save_draws}};
  return j;
}

std::string ExperimentConfig::canonical() const { return to_json().dump(); }

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical()); }

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  Parser p;
  if (!j.is_object()) throw config_error({"top level: must be a JSON object"});
  p.check_keys(j, "top",
               {"seed", "threads", "truth", "error", "kernel", "bandwidth", "grid", "prior",
                "chain", "rates", "concentration", "simulate", "dke", "fit_dpmm"});
  p.get(j, "top", "seed", c.seed);
  p.get(j, "top", "threads", c.threads);

  if (j.contains("truth")) {
    const json& t = j.at("truth");
    p.check_keys(t, "truth", {"kind", "weights", "means", "sds", "c2", "scale", "center"});
    p.get(t, "truth", "kind", c.truth.kind);
    p.get(t, "truth", "weights", c.truth.weights);
    p.get(t, "truth", "means", c.truth.means);
    p.get(t, "truth", "sds", c.truth.sds);
    p.get(t, "truth", "c2", c.truth.c2);
    p.get(t, "truth", "scale", c.truth.scale);
    p.get(t, "truth", "center", c.truth.center);
  }
  if (j.contains("error")) {
    const json& e = j.at("error");
    p.check_keys(e, "error", {"kind", "sigma", "envelope"});
    p.get(e, "error", "kind", c.error.kind);
    p.get(e, "error", "sigma", c.error.sigma);
    if (e.contains("envelope")) {
      const json& env = e.at("envelope");
      p.check_keys(env, "error.envelope", {"beta", "varrho", "beta0", "beta1", "d0", "d1"});
      EnvelopeParams ep;
      p.get(env, "error.envelope", "beta", ep.beta);
      p.get(env, "error.envelope", "varrho", ep.varrho);
      p.get(env, "error.envelope", "beta0", ep.beta0);
      p.get(env, "error.envelope", "beta1", ep.beta1);
      p.get(env, "error.envelope", "d0", ep.d0);
      p.get(env, "error.envelope", "d1", ep.d1);
      c.error.envelope = ep;
    }
  }
  if (j.contains("kernel")) {
    const json& k = j.at("kernel");
    p.check_keys(k, "kernel", {"flat_radius", "taper", "taper_degree"});
    p.get(k, "kernel", "flat_radius", c.kernel.flat_radius);
    p.get(k, "kernel", "taper", c.kernel.taper);
    p.get(k, "kernel", "taper_degree", c.kernel.taper_degree);
  }
  if (j.contains("bandwidth")) {
    const json& b = j.at("bandwidth");
    p.check_keys(b, "bandwidth", {"regime", "gamma", "eta", "t_exponent", "h"});
    p.get(b, "bandwidth", "regime", c.bandwidth.regime);
    p.get(b, "bandwidth", "gamma", c.bandwidth.gamma);
    p.get(b, "bandwidth", "eta", c.bandwidth.eta);
    p.get(b, "bandwidth", "t_exponent", c.bandwidth.t_exponent);
    p.get(b, "bandwidth", "h", c.bandwidth.h);
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    p.check_keys(g, "grid", {"points", "pad_factor", "xmin", "xmax"});
    p.get(g, "grid", "points", c.grid.points);
    p.get(g, "grid", "pad_factor", c.grid.pad_factor);
    p.get(g, "grid", "xmin", c.grid.xmin);
    p.get(g, "grid", "xmax", c.grid.xmax);
  }
  if (j.contains("prior")) {
    const json& pr = j.at("prior");
    p.check_keys(pr, "prior",
                 {"alpha", "mu0", "sigma0_sq", "a", "b", "k_trunc", "h_prior", "lambda"});
    p.get(pr, "prior", "alpha", c.prior.alpha);
    p.get(pr, "prior", "mu0", c.prior.mu0);
    p.get(pr, "prior", "sigma0_sq", c.prior.sigma0_sq);
    p.get(pr, "prior", "a", c.prior.a);
    p.get(pr, "prior", "b", c.prior.b);
    p.get(pr, "prior", "k_trunc", c.prior.k_trunc);
    p.get(pr, "prior", "h_prior", c.prior.h_prior);
    p.get(pr, "prior", "lambda", c.prior.lambda);
  }
  if (j.contains("chain")) {
    const json& ch = j.at("chain");
    p.check_keys(ch, "chain", {"iters", "burnin", "thin", "band_level"});
    p.get(ch, "chain", "iters", c.chain.iters);
    p.get(ch, "chain", "burnin", c.chain.burnin);
    p.get(ch, "chain", "thin", c.chain.thin);
    p.get(ch, "chain", "band_level", c.chain.band_level);
  }
  if (j.contains("rates")) {
    const json& r = j.at("rates");
    p.check_keys(r, "rates",
                 {"n_grid", "reps", "methods", "p_list", "use_sigma_schedule", "schedule_eta",
                  "schedule_t", "grid_points"});
    p.get(r, "rates", "n_grid", c.rates.n_grid);
    p.get(r, "rates", "reps", c.rates.reps);
    p.get(r, "rates", "methods", c.rates.methods);
    p.get_p_list(r, "rates", c.rates.p_list);
    p.get(r, "rates", "use_sigma_schedule", c.rates.use_sigma_schedule);
    p.get(r, "rates", "schedule_eta", c.rates.schedule_eta);
    p.get(r, "rates", "schedule_t", c.rates.schedule_t);
    p.get(r, "rates", "grid_points", c.rates.grid_points);
  }
  if (j.contains("concentration")) {
    const json& cc = j.at("concentration");
    p.check_keys(cc, "concentration", {"mode", "h_grid", "p", "n", "reps", "h", "M1", "xi_n"});
    p.get(cc, "concentration", "mode", c.concentration.mode);
    p.get(cc, "concentration", "h_grid", c.concentration.h_grid);
    if (cc.contains("p")) {
      const json& v = cc.at("p");
      if (v.is_string() && (v == "inf" || v == "Inf"))
        c.concentration.p = std::numeric_limits<double>::infinity();
      else if (v.is_number())
        c.concentration.p = v.get<double>();
      else
        p.errors.push_back("concentration.p: must be a number or \"inf\"");
    }
    p.get(cc, "concentration", "n", c.concentration.n);
    p.get(cc, "concentration", "reps", c.concentration.reps);
    p.get(cc, "concentration", "h", c.concentration.h);
    p.get(cc, "concentration", "M1", c.concentration.M1);
    p.get(cc, "concentration", "xi_n", c.concentration.xi_n);
  }
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    p.check_keys(s, "simulate", {"n"});
    p.get(s, "simulate", "n", c.simulate.n);
  }
  if (j.contains("dke")) {
    const json& d = j.at("dke");
    p.check_keys(d, "dke", {"input", "h"});
    p.get(d, "dke", "input", c.dke.input);
    p.get(d, "dke", "h", c.dke.h);
  }
  if (j.contains("fit_dpmm")) {
    const json& f = j.at("fit_dpmm");
    p.check_keys(f, "fit_dpmm", {"input", "save_draws"});
    p.get(f, "fit_dpmm", "input", c.fit_dpmm.input);
    p.get(f, "fit_dpmm", "save_draws", c.fit_dpmm.save_draws);
  }

  // cross-field validation; every problem is reported
  p.require(c.truth.kind == "gauss_mixture" || c.truth.kind == "heavy_tail" ||
                c.truth.kind == "bspline2",
            "truth.kind: must be gauss_mixture | heavy_tail | bspline2");
  if (c.truth.kind == "gauss_mixture") {
    p.require(!c.truth.weights.empty() && c.truth.weights.size() == c.truth.means.size() &&
                  c.truth.means.size() == c.truth.sds.size(),
              "truth: weights/means/sds must be nonempty and of equal length");
    for (double w : c.truth.weights) p.require(w > 0.0, "truth.weights: must be positive");
    for (double s : c.truth.sds) p.require(s > 0.0, "truth.sds: must be positive");
  }
  if (c.truth.kind == "heavy_tail") p.require(c.truth.c2 > 1.0, "truth.c2: must exceed 1");
  p.require(c.truth.scale > 0.0, "truth.scale: must be positive");
  p.require(c.error.kind == "gaussian" || c.error.kind == "cauchy" || c.error.kind == "none",
            "error.kind: must be gaussian | cauchy | none");
  if (c.error.kind != "none") p.require(c.error.sigma > 0.0, "error.sigma: must be positive");
  p.require(c.kernel.flat_radius > 0.0 && c.kernel.flat_radius < 1.0,
            "kernel.flat_radius: must lie in (0, 1)");
  p.require(c.kernel.taper == "smooth_exp" || c.kernel.taper == "polynomial",
            "kernel.taper: must be smooth_exp | polynomial");
  p.require(c.kernel.taper_degree >= 1, "kernel.taper_degree: must be >= 1");
  p.require(c.bandwidth.regime == "supersmooth_lp" || c.bandwidth.regime == "supersmooth_sup" ||
                c.bandwidth.regime == "accelerated",
            "bandwidth.regime: must be supersmooth_lp | supersmooth_sup | accelerated");
  p.require(c.bandwidth.gamma > 0.0 && c.bandwidth.gamma < 1.0,
            "bandwidth.gamma: must lie in (0, 1)");
  p.require(c.bandwidth.eta > 0.0, "bandwidth.eta: must be positive");
  p.require(c.bandwidth.h >= 0.0, "bandwidth.h: must be nonnegative");
  p.require(c.grid.points >= 2 && (c.grid.points & (c.grid.points - 1)) == 0,
            "grid.points: must be a power of two");
  p.require(c.grid.pad_factor >= 1, "grid.pad_factor: must be >= 1");
  p.require(c.prior.alpha > 0.0, "prior.alpha: must be positive");
  p.require(c.prior.a > 0.0 && c.prior.b > 0.0, "prior.a/b: must be positive");
  p.require(c.prior.lambda > 0.0, "prior.lambda: must be positive");
  p.require(c.prior.h_prior == "invgamma" || c.prior.h_prior == "exponential",
            "prior.h_prior: must be invgamma | exponential");
  p.require(c.chain.iters > c.chain.burnin && c.chain.burnin >= 0,
            "chain: iters must exceed burnin >= 0");
  p.require(c.chain.thin >= 1, "chain.thin: must be >= 1");
  if (c.chain.iters > c.chain.burnin && c.chain.thin >= 1)
    p.require((c.chain.iters - c.chain.burnin) / c.chain.thin >= 1,
              "chain: zero kept draws with this iters/burnin/thin");
  p.require(c.chain.band_level > 0.0 && c.chain.band_level < 1.0,
            "chain.band_level: must lie in (0, 1)");
  p.require(c.rates.n_grid.size() >= 4, "rates.n_grid: need >= 4 levels");
  for (std::size_t i = 1; i < c.rates.n_grid.size(); ++i)
    p.require(c.rates.n_grid[i] > c.rates.n_grid[i - 1], "rates.n_grid: must be increasing");
  p.require(c.rates.reps >= 10, "rates.reps: must be >= 10");
  for (const auto& m : c.rates.methods)
    p.require(m == "dke" || m == "dpmm" || m == "kde",
              "rates.methods: must be dke | dpmm | kde");
  for (double pp : c.rates.p_list)
    p.require(pp >= 2.0, "rates.p_list: entries must be >= 2 (or inf)");
  p.require(c.concentration.mode == "lemma1" || c.concentration.mode == "deviation" ||
                c.concentration.mode == "dkw" || c.concentration.mode == "plugin-test",
            "concentration.mode: must be lemma1 | deviation | dkw | plugin-test");
  p.require(c.concentration.p >= 2.0, "concentration.p: must be >= 2 (or inf)");
  p.require(c.simulate.n >= 1, "simulate.n: must be >= 1");

  // Theorem-3 exponent bound, surfaced at parse time
  if (p.errors.empty() &&
      (c.rates.use_sigma_schedule || c.bandwidth.regime == "accelerated")) {
    double eta = c.rates.use_sigma_schedule ? c.rates.schedule_eta : c.bandwidth.eta;
    double t = c.rates.use_sigma_schedule ? c.rates.schedule_t : c.bandwidth.t_exponent;
    double c3 = c.build_truth().tail().c3;
    try {
      validate_accelerated_t(eta, t, c3);
    } catch (const std::invalid_argument& ex) {
      p.errors.push_back(ex.what());
    }
  }

  if (!p.errors.empty()) throw config_error(std::move(p.errors));
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error({"cannot read config file: " + path.string()});
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw config_error({std::string("JSON parse failure: ") + ex.what()});
  }
  return from_json(j);
}

} // namespace deconv
