#include "wdro/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "wdro/error.hpp"

namespace wdro {
namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ValidationError(where_ + ": expected an object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError(where_ + ": unknown key '" + key + "'");
    }
  }
  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }
  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (auto v = get(key)) out = as_number(*v, path(key));
  }
  void number(const std::string& key, std::optional<double>& out) {
    if (auto v = get(key)) out = as_number(*v, path(key));
  }
  void count(const std::string& key, std::size_t& out) {
    if (auto v = get(key)) out = as_count(*v, path(key));
  }
  void seed(const std::string& key, std::uint64_t& out) {
    if (auto v = get(key)) {
      if (!non_negative_integer(*v)) throw ValidationError(path(key) + ": expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (auto v = get(key)) {
      if (!v->is_boolean()) throw ValidationError(path(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const std::string& key, std::string& out) {
    if (auto v = get(key)) out = as_string(*v, path(key));
  }
  void string(const std::string& key, std::optional<std::string>& out) {
    if (auto v = get(key)) out = as_string(*v, path(key));
  }

  static bool non_negative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  }
  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ValidationError(where + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(where + ": must be finite");
    return d;
  }
  static std::size_t as_count(const json& v, const std::string& where) {
    if (!non_negative_integer(v)) throw ValidationError(where + ": expected a non-negative integer");
    return v.get<std::size_t>();
  }
  static std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ValidationError(where + ": expected a string");
    return v.get<std::string>();
  }
  static std::vector<double> numbers(const json& v, const std::string& where) {
    if (v.is_number()) return {as_number(v, where)};
    if (!v.is_array()) throw ValidationError(where + ": expected a number or an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_number(v[k], where + "[" + std::to_string(k) + "]"));
    return out;
  }
  static std::vector<std::size_t> counts(const json& v, const std::string& where) {
    if (v.is_number()) return {as_count(v, where)};
    if (!v.is_array()) throw ValidationError(where + ": expected an integer or an array of integers");
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_count(v[k], where + "[" + std::to_string(k) + "]"));
    return out;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void parse_dataset_spec(const json& j, DatasetSpec& ds) {
  ObjectReader r(j, "dataset");
  r.string("path", ds.path);
  if (auto v = r.get("features")) {
    if (!v->is_array()) throw ValidationError("dataset.features: expected an array of column names");
    ds.schema.features.clear();
    for (const auto& e : *v) ds.schema.features.push_back(ObjectReader::as_string(e, "dataset.features"));
  }
  {
    auto* v = r.get("label");
    if (j.contains("label")) ds.schema.label = v ? std::optional<std::string>(ObjectReader::as_string(*v, "dataset.label"))
                                                 : std::nullopt;
  }
  r.string("target", ds.schema.target);
  if (auto v = r.get("num_labels")) {
    ds.num_labels = static_cast<int>(ObjectReader::as_count(*v, "dataset.num_labels"));
    ds.schema.num_labels = ds.num_labels;
  }
  if (auto v = r.get("rows")) {
    if (!v->is_array()) throw ValidationError("dataset.rows: expected an array");
    ds.rows.clear();
    for (std::size_t k = 0; k < v->size(); ++k) {
      const std::string where = "dataset.rows[" + std::to_string(k) + "]";
      ObjectReader rr((*v)[k], where);
      Sample s;
      if (auto x = rr.get("x")) {
        s.x = ObjectReader::numbers(*x, where + ".x");
      } else {
        throw ValidationError(where + ": missing 'x'");
      }
      if (auto y = rr.get("y")) {
        if (!y->is_number_integer()) throw ValidationError(where + ".y: expected an integer label");
        s.y = y->get<int>();
      }
      rr.number("target", s.target);
      ds.rows.push_back(std::move(s));
    }
  }
  if (ds.path && !ds.rows.empty()) throw ValidationError("dataset: give either 'path' or 'rows', not both");
  if (!ds.path && ds.rows.empty()) throw ValidationError("dataset: needs 'path' or a non-empty 'rows'");
}

json dataset_to_json(const DatasetSpec& ds) {
  json j;
  json rows = json::array();
  for (const auto& s : ds.rows) rows.push_back({{"x", s.x}, {"y", s.y}, {"target", s.target}});
  j["rows"] = rows;
  if (ds.num_labels) j["num_labels"] = *ds.num_labels;
  return j;
}

}  // namespace

void RunConfig::validate() const {
  if (loss != "linreg" && loss != "logistic" && loss != "mlp") {
    throw ValidationError("loss: unknown key '" + loss + "' (expected linreg, logistic or mlp)");
  }
  if (loss == "mlp" && architecture.size() < 2) throw ValidationError("architecture: mlp needs at least [d, 1]");
  if (theta_lo.size() != theta_hi.size()) throw ValidationError("box: theta_lo and theta_hi differ in length");
  for (std::size_t j = 0; j < theta_lo.size(); ++j) {
    if (theta_lo[j] > theta_hi[j]) throw ValidationError("box: theta_lo > theta_hi at coordinate " + std::to_string(j));
  }
  if (lambda_min && !(*lambda_min > 0.0)) throw ValidationError("box.lambda_min must be positive");
  if (lambda_max && !(*lambda_max > 0.0)) throw ValidationError("box.lambda_max must be positive");
  if (lambda_min && lambda_max && *lambda_min > *lambda_max) throw ValidationError("box: lambda_min > lambda_max");
  if (!(rho > 0.0)) throw ValidationError("rho must be positive");
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  if (m < 1) throw ValidationError("m must be >= 1");
  if (sigma2 && !(*sigma2 > 0.0)) throw ValidationError("sigma2 must be positive");
  if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
  if (cert_lambda && !(*cert_lambda > 0.0)) throw ValidationError("cert_lambda must be positive");
  schedule.validate();
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (eval_every < 1) throw ValidationError("eval_every must be >= 1");
  if (residual_tol && !(*residual_tol > 0.0)) throw ValidationError("residual_tol must be positive");
  for (double b : sweep.betas) {
    if (!(b > 0.0)) throw ValidationError("sweep.betas: every beta must be positive");
  }
  for (std::size_t v : sweep.ms) {
    if (v < 1) throw ValidationError("sweep.ms: every m must be >= 1");
  }
  if (sweep.grid < 1) throw ValidationError("sweep.grid must be >= 1");
  if (!(sweep.eps > 0.0)) throw ValidationError("sweep.eps must be positive");
  if (!(certify.eps > 0.0)) throw ValidationError("certify.eps must be positive");
  if (!(certify.tol > 0.0)) throw ValidationError("certify.tol must be positive");
  if (certify.smooth_tol && !(*certify.smooth_tol > 0.0)) throw ValidationError("certify.smooth_tol must be positive");
  if (oracle.argmax_tol && !(*oracle.argmax_tol > 0.0)) throw ValidationError("oracle.argmax_tol must be positive");
  if (certify.zoom < 0) throw ValidationError("certify.zoom must be >= 0");
  if (!(probes.fd_step > 0.0)) throw ValidationError("probes.fd_step must be positive");
  if (!(probes.tolerance > 0.0)) throw ValidationError("probes.tolerance must be positive");
  if (!(diagnostics_eta > 0.0)) throw ValidationError("diagnostics_eta must be positive");
  if (thin < 1) throw ValidationError("thinning.stride must be >= 1");
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  {
    ObjectReader r(j, "");
    r.string("loss", c.loss);
    if (auto v = r.get("architecture")) c.architecture = ObjectReader::counts(*v, "architecture");
    if (auto v = r.get("dataset")) {
      parse_dataset_spec(*v, c.dataset);
    } else {
      throw ValidationError("missing 'dataset'");
    }
    if (auto v = r.get("box")) {
      ObjectReader b(*v, "box");
      if (auto t = b.get("theta_lo")) c.theta_lo = ObjectReader::numbers(*t, "box.theta_lo");
      if (auto t = b.get("theta_hi")) c.theta_hi = ObjectReader::numbers(*t, "box.theta_hi");
      b.number("lambda_min", c.lambda_min);
      b.number("lambda_max", c.lambda_max);
    }
    r.number("rho", c.rho);
    r.number("beta", c.beta);
    r.count("m", c.m);
    r.number("sigma2", c.sigma2);
    r.number("kappa", c.kappa);
    r.number("cert_lambda", c.cert_lambda);
    r.count("cert_probes", c.cert_probes);
    if (auto v = r.get("schedule")) {
      ObjectReader s(*v, "schedule");
      s.number("alpha0", c.schedule.alpha0);
      s.number("k0", c.schedule.k0);
    }
    r.count("iterations", c.iterations);
    r.count("eval_every", c.eval_every);
    r.number("residual_tol", c.residual_tol);
    if (auto v = r.get("seeds")) {
      ObjectReader s(*v, "seeds");
      s.seed("bank", c.seeds.bank);
      s.seed("index", c.seeds.index);
    }
    if (auto v = r.get("init")) {
      ObjectReader s(*v, "init");
      ParamPoint w;
      if (auto t = s.get("theta")) w.theta = ObjectReader::numbers(*t, "init.theta");
      s.number("lambda", w.lambda);
      c.init = w;
    }
    if (auto v = r.get("sweep")) {
      ObjectReader s(*v, "sweep");
      if (auto t = s.get("betas")) c.sweep.betas = ObjectReader::numbers(*t, "sweep.betas");
      if (auto t = s.get("ms")) c.sweep.ms = ObjectReader::counts(*t, "sweep.ms");
      s.count("grid", c.sweep.grid);
      s.number("eps", c.sweep.eps);
    }
    if (auto v = r.get("oracle")) {
      ObjectReader s(*v, "oracle");
      s.boolean("enabled", c.oracle.enabled);
      s.count("grid", c.oracle.grid);
      s.count("top_k", c.oracle.top_k);
      s.number("argmax_tol", c.oracle.argmax_tol);
    }
    if (auto v = r.get("certify")) {
      ObjectReader s(*v, "certify");
      s.number("eps", c.certify.eps);
      if (auto t = s.get("grid")) c.certify.grid = ObjectReader::counts(*t, "certify.grid");
      s.number("tol", c.certify.tol);
      s.number("smooth_tol", c.certify.smooth_tol);
      if (auto t = s.get("zoom")) c.certify.zoom = static_cast<int>(ObjectReader::as_count(*t, "certify.zoom"));
      if (auto t = s.get("sgd_seeds")) {
        if (!t->is_array()) throw ValidationError("certify.sgd_seeds: expected an array");
        for (const auto& e : *t) {
          if (!ObjectReader::non_negative_integer(e)) throw ValidationError("certify.sgd_seeds: expected non-negative integers");
          c.certify.sgd_seeds.push_back(e.get<std::uint64_t>());
        }
      }
      if (auto t = s.get("min_successes")) c.certify.min_successes = ObjectReader::as_count(*t, "certify.min_successes");
    }
    if (auto v = r.get("probes")) {
      ObjectReader s(*v, "probes");
      s.count("count", c.probes.count);
      s.number("fd_step", c.probes.fd_step);
      s.count("tables", c.probes.tables);
      s.number("tolerance", c.probes.tolerance);
    }
    r.boolean("diagnostics", c.diagnostics);
    r.number("diagnostics_eta", c.diagnostics_eta);
    if (auto v = r.get("thinning")) {
      ObjectReader s(*v, "thinning");
      s.count("stride", c.thin);
      s.boolean("full", c.full_trace);
    }
    r.string("out", c.out);
  }
  // Scalars broadcast over the theta dimension once it is known.
  if (c.theta_lo.size() == 1 && c.theta_hi.size() > 1) c.theta_lo.assign(c.theta_hi.size(), c.theta_lo[0]);
  if (c.theta_hi.size() == 1 && c.theta_lo.size() > 1) c.theta_hi.assign(c.theta_lo.size(), c.theta_hi[0]);
  c.validate();
  return c;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t k = 0; k < stop; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ValidationError("config: JSON syntax error at line " + std::to_string(line) + ", column " +
                          std::to_string(col) + ": " + e.what());
  }
  return config_from_json(j);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json config_to_json(const RunConfig& c) {
  json j;
  j["loss"] = c.loss;
  if (!c.architecture.empty()) j["architecture"] = c.architecture;
  j["dataset"] = dataset_to_json(c.dataset);
  json box;
  box["theta_lo"] = c.theta_lo;
  box["theta_hi"] = c.theta_hi;
  if (c.lambda_min) box["lambda_min"] = *c.lambda_min;
  if (c.lambda_max) box["lambda_max"] = *c.lambda_max;
  j["box"] = box;
  j["rho"] = c.rho;
  j["beta"] = c.beta;
  j["m"] = c.m;
  if (c.sigma2) j["sigma2"] = *c.sigma2;
  j["kappa"] = c.kappa;
  if (c.cert_lambda) j["cert_lambda"] = *c.cert_lambda;
  j["cert_probes"] = c.cert_probes;
  j["schedule"] = {{"alpha0", c.schedule.alpha0}, {"k0", c.schedule.k0}};
  j["iterations"] = c.iterations;
  j["eval_every"] = c.eval_every;
  if (c.residual_tol) j["residual_tol"] = *c.residual_tol;
  j["seeds"] = {{"bank", c.seeds.bank}, {"index", c.seeds.index}};
  if (c.init) j["init"] = {{"theta", c.init->theta}, {"lambda", c.init->lambda}};
  j["sweep"] = {{"betas", c.sweep.betas}, {"ms", c.sweep.ms}, {"grid", c.sweep.grid}, {"eps", c.sweep.eps}};
  j["oracle"] = {{"enabled", c.oracle.enabled}, {"grid", c.oracle.grid}, {"top_k", c.oracle.top_k}};
  if (c.oracle.argmax_tol) j["oracle"]["argmax_tol"] = *c.oracle.argmax_tol;
  json cert = {{"eps", c.certify.eps}, {"grid", c.certify.grid}, {"tol", c.certify.tol},
               {"zoom", static_cast<std::size_t>(c.certify.zoom)},
               {"sgd_seeds", c.certify.sgd_seeds}};
  if (c.certify.smooth_tol) cert["smooth_tol"] = *c.certify.smooth_tol;
  if (c.certify.min_successes) cert["min_successes"] = *c.certify.min_successes;
  j["certify"] = cert;
  j["probes"] = {{"count", c.probes.count},
                 {"fd_step", c.probes.fd_step},
                 {"tables", c.probes.tables},
                 {"tolerance", c.probes.tolerance}};
  j["diagnostics"] = c.diagnostics;
  j["diagnostics_eta"] = c.diagnostics_eta;
  j["thinning"] = {{"stride", c.thin}, {"full", c.full_trace}};
  return j;
}

}  // namespace wdro
