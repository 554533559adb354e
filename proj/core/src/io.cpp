#include "ssmflow/io.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ssmflow/errors.hpp"

namespace ssmflow {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Task t) {
  switch (t) {
    case Task::laminar: return "laminar";
    case Task::spectrum: return "spectrum";
    case Task::tw: return "tw";
    case Task::cont: return "continue";
    case Task::ssm: return "ssm";
    case Task::reduce: return "reduce";
    case Task::lift: return "lift";
  }
  return "?";
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void line_col(const std::string& text, size_t byte, int& line, int& col) {
  line = 1;
  col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

struct Validator {
  std::vector<std::string> errors;
  void fail(const std::string& msg) { errors.push_back(msg); }
  void finish() const {
    if (errors.empty()) return;
    std::string all = "configuration invalid:";
    for (const auto& e : errors) all += "\n  - " + e;
    throw ConfigError(all);
  }
};

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> known, Validator& v) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) v.fail("unknown key \"" + it.key() + "\" in " + where);
  }
}

double need_num(const json& obj, const std::string& where, const char* key,
                Validator& v, bool* present = nullptr) {
  if (!obj.contains(key)) {
    if (present) {
      *present = false;
      return 0.0;
    }
    v.fail(where + " is missing required field \"" + std::string(key) + "\"");
    return 0.0;
  }
  if (present) *present = true;
  if (!obj[key].is_number()) {
    v.fail(where + "." + key + " must be a number");
    return 0.0;
  }
  return obj[key].get<double>();
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 0, col = 0;
    line_col(text, e.byte, line, col);
    throw ConfigError(origin + ": JSON parse error at line " +
                      std::to_string(line) + ", column " + std::to_string(col) +
                      ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(origin + ": top level must be an object");

  Validator v;
  reject_unknown(root, "top level",
                 {"model", "grid", "params", "task", "output_dir", "spectrum",
                  "tw", "continue", "ssm", "reduce", "lift", "nx_physical"},
                 v);

  RunConfig cfg;

  // model
  if (!root.contains("model") || !root["model"].is_string())
    v.fail("\"model\" must be \"newtonian\" or \"oldroydb\"");
  else {
    cfg.model = root["model"].get<std::string>();
    if (cfg.model != "newtonian" && cfg.model != "oldroydb")
      v.fail("\"model\" must be \"newtonian\" or \"oldroydb\"");
  }
  const bool ob = cfg.model == "oldroydb";
  cfg.grid.nfields = ob ? 6 : 3;

  // grid
  if (!root.contains("grid") || !root["grid"].is_object()) {
    v.fail("\"grid\" object is required");
  } else {
    const json& g = root["grid"];
    reject_unknown(g, "grid", {"k", "n1", "n2"}, v);
    cfg.grid.k = need_num(g, "grid", "k", v);
    cfg.grid.n1 = int(need_num(g, "grid", "n1", v));
    cfg.grid.n2 = int(need_num(g, "grid", "n2", v));
    if (cfg.grid.k <= 0) v.fail("grid.k must be > 0");
    if (cfg.grid.n1 < 1) v.fail("grid.n1 must be >= 1");
    if (cfg.grid.n2 < 4) v.fail("grid.n2 must be >= 4");
  }

  // params
  if (!root.contains("params") || !root["params"].is_object()) {
    v.fail("\"params\" object is required");
  } else {
    const json& p = root["params"];
    reject_unknown(p, "params", {"re", "wi", "beta_visc", "eps", "xhat2"}, v);
    bool has = false;
    cfg.params.re = need_num(p, "params", "re", v, &has);
    if (!has && !ob) v.fail("params.re is required for the Newtonian model");
    if (has && cfg.params.re < 0) v.fail("params.re must be >= 0");
    cfg.params.wi = need_num(p, "params", "wi", v, &has);
    if (!has && ob) v.fail("params.wi is required for the Oldroyd-B model");
    cfg.params.beta_visc = p.contains("beta_visc")
                               ? need_num(p, "params", "beta_visc", v)
                               : (ob ? 0.9 : 1.0);
    if (!(cfg.params.beta_visc >= 0 && cfg.params.beta_visc <= 1))
      v.fail("params.beta_visc must lie in [0, 1]");
    cfg.params.eps = p.contains("eps") ? need_num(p, "params", "eps", v) : 0.0;
    if (cfg.params.eps < 0) v.fail("params.eps must be >= 0");
    if (p.contains("xhat2")) {
      cfg.params.xhat2 = need_num(p, "params", "xhat2", v);
      if (!(cfg.params.xhat2 > -1 && cfg.params.xhat2 < 1))
        v.fail("params.xhat2 must lie in (-1, 1)");
    } else {
      // model defaults: centerline probe for Newtonian, the 10th
      // Gauss-Lobatto point for Oldroyd-B
      cfg.params.xhat2 =
          ob ? std::cos(10.0 * M_PI / double(std::max(cfg.grid.n2, 11))) : 0.0;
    }
  }

  // task
  static const std::map<std::string, Task> task_names = {
      {"laminar", Task::laminar}, {"spectrum", Task::spectrum},
      {"tw", Task::tw},           {"continue", Task::cont},
      {"ssm", Task::ssm},         {"reduce", Task::reduce},
      {"lift", Task::lift}};
  if (!root.contains("task") || !root["task"].is_string() ||
      !task_names.count(root["task"].get<std::string>())) {
    v.fail("\"task\" must be one of laminar|spectrum|tw|continue|ssm|reduce|lift");
    v.finish();
  }
  cfg.task = task_names.at(root["task"].get<std::string>());

  if (root.contains("output_dir")) {
    if (!root["output_dir"].is_string())
      v.fail("output_dir must be a string");
    else
      cfg.output_dir = root["output_dir"].get<std::string>();
  }
  if (root.contains("nx_physical"))
    cfg.nx_physical = int(need_num(root, "top level", "nx_physical", v));

  // reject task blocks that do not match the requested task
  for (const char* blk : {"spectrum", "tw", "continue", "ssm", "reduce", "lift"})
    if (root.contains(blk) && to_string(cfg.task) != blk)
      v.fail(std::string("block \"") + blk + "\" does not match task \"" +
             to_string(cfg.task) + "\"");

  auto parse_ssm_block = [&](const json& s, const std::string& where) {
    reject_unknown(s, where,
                   {"beta_split", "order", "style", "res_tol", "cross_tol",
                    "err_tol", "gap_tol"},
                   v);
    bool has = false;
    const double bs = need_num(s, where, "beta_split", v);
    cfg.beta_split = bs;
    cfg.ssm.order = int(need_num(s, where, "order", v));
    if (cfg.ssm.order < 1) v.fail(where + ".order must be >= 1");
    if (s.contains("style")) {
      const std::string st = s["style"].is_string() ? s["style"].get<std::string>() : "";
      if (st == "graph")
        cfg.ssm.style = ParamStyle::graph;
      else if (st == "normal-form")
        cfg.ssm.style = ParamStyle::normal_form;
      else if (st == "mixed")
        cfg.ssm.style = ParamStyle::mixed;
      else
        v.fail(where + ".style must be graph|normal-form|mixed");
    }
    cfg.ssm.res_tol = s.contains("res_tol") ? need_num(s, where, "res_tol", v)
                                            : cfg.ssm.res_tol;
    cfg.ssm.cross_tol = s.contains("cross_tol")
                            ? need_num(s, where, "cross_tol", v)
                            : cfg.ssm.cross_tol;
    cfg.ssm.err_tol = s.contains("err_tol") ? need_num(s, where, "err_tol", v)
                                            : cfg.ssm.err_tol;
    cfg.gap_tol = s.contains("gap_tol") ? need_num(s, where, "gap_tol", v)
                                        : cfg.gap_tol;
    (void)has;
  };

  switch (cfg.task) {
    case Task::laminar:
      break;
    case Task::spectrum:
      if (root.contains("spectrum")) {
        const json& s = root["spectrum"];
        reject_unknown(s, "spectrum", {"beta_split", "count", "shift"}, v);
        if (s.contains("beta_split"))
          cfg.beta_split = need_num(s, "spectrum", "beta_split", v);
        if (s.contains("count"))
          cfg.eig_count = int(need_num(s, "spectrum", "count", v));
        if (s.contains("shift")) {
          if (!s["shift"].is_array() || s["shift"].size() != 2)
            v.fail("spectrum.shift must be [re, im]");
          else
            cfg.shift = Complex(s["shift"][0].get<double>(),
                                s["shift"][1].get<double>());
        }
      }
      break;
    case Task::tw: {
      if (root.contains("tw")) {
        const json& s = root["tw"];
        reject_unknown(s, "tw", {"param", "amplitudes"}, v);
        if (s.contains("param")) {
          const std::string pn =
              s["param"].is_string() ? s["param"].get<std::string>() : "";
          if (pn == "re")
            cfg.cont_param = ContParam::re;
          else if (pn == "wi")
            cfg.cont_param = ContParam::wi;
          else
            v.fail("tw.param must be \"re\" or \"wi\"");
        } else {
          cfg.cont_param = ob ? ContParam::wi : ContParam::re;
        }
        if (s.contains("amplitudes")) {
          if (!s["amplitudes"].is_array())
            v.fail("tw.amplitudes must be an array of numbers");
          else
            for (const auto& a : s["amplitudes"])
              cfg.seed_amplitudes.push_back(a.get<double>());
        }
      } else {
        cfg.cont_param = ob ? ContParam::wi : ContParam::re;
      }
      cfg.seed_at =
          (cfg.cont_param == ContParam::re) ? cfg.params.re : cfg.params.wi;
      break;
    }
    case Task::cont: {
      if (!root.contains("continue") || !root["continue"].is_object()) {
        v.fail("task continue requires a \"continue\" block");
        break;
      }
      const json& s = root["continue"];
      reject_unknown(s, "continue",
                     {"param", "from", "to", "seed_at", "step0", "max_points",
                      "stability", "amplitudes"},
                     v);
      if (!s.contains("param") || !s["param"].is_string())
        v.fail("continue.param (\"re\"|\"wi\") is required");
      else {
        const std::string pn = s["param"].get<std::string>();
        if (pn == "re")
          cfg.cont_param = ContParam::re;
        else if (pn == "wi")
          cfg.cont_param = ContParam::wi;
        else
          v.fail("continue.param must be \"re\" or \"wi\"");
      }
      cfg.range_from = need_num(s, "continue", "from", v);
      cfg.range_to = need_num(s, "continue", "to", v);
      if (!(cfg.range_to > cfg.range_from))
        v.fail("continue.to must exceed continue.from");
      bool has = false;
      cfg.seed_at = need_num(s, "continue", "seed_at", v, &has);
      if (!has) cfg.seed_at = 0.5 * (cfg.range_from + cfg.range_to);
      cfg.step0 = s.contains("step0") ? need_num(s, "continue", "step0", v)
                                      : (cfg.cont_param == ContParam::re ? 10.0
                                                                         : 0.05);
      if (s.contains("max_points"))
        cfg.max_points = int(need_num(s, "continue", "max_points", v));
      if (s.contains("stability")) {
        if (!s["stability"].is_boolean())
          v.fail("continue.stability must be a boolean");
        else
          cfg.tag_stability = s["stability"].get<bool>();
      }
      if (s.contains("amplitudes"))
        for (const auto& a : s["amplitudes"])
          cfg.seed_amplitudes.push_back(a.get<double>());
      break;
    }
    case Task::ssm: {
      if (!root.contains("ssm") || !root["ssm"].is_object()) {
        v.fail("task ssm requires an \"ssm\" block with beta_split and order");
        break;
      }
      parse_ssm_block(root["ssm"], "ssm");
      break;
    }
    case Task::reduce: {
      if (!root.contains("reduce") || !root["reduce"].is_object()) {
        v.fail("task reduce requires a \"reduce\" block");
        break;
      }
      const json& s = root["reduce"];
      reject_unknown(s, "reduce", {"ssm", "r_max"}, v);
      if (!s.contains("ssm") || !s["ssm"].is_object())
        v.fail("reduce.ssm block is required");
      else
        parse_ssm_block(s["ssm"], "reduce.ssm");
      if (s.contains("r_max")) cfg.r_max = need_num(s, "reduce", "r_max", v);
      break;
    }
    case Task::lift: {
      if (!root.contains("lift") || !root["lift"].is_object()) {
        v.fail("task lift requires a \"lift\" block");
        break;
      }
      const json& s = root["lift"];
      reject_unknown(s, "lift",
                     {"ssm", "radius", "theta0", "t0", "t1", "samples", "rtol",
                      "atol"},
                     v);
      if (!s.contains("ssm") || !s["ssm"].is_object())
        v.fail("lift.ssm block is required");
      else
        parse_ssm_block(s["ssm"], "lift.ssm");
      if (s.contains("radius")) cfg.lift_radius = need_num(s, "lift", "radius", v);
      if (s.contains("theta0")) {
        if (!s["theta0"].is_array() || s["theta0"].size() % 2 != 0)
          v.fail("lift.theta0 must be [re, im, re, im, ...]");
        else
          for (size_t i = 0; i + 1 < s["theta0"].size(); i += 2)
            cfg.lift_theta0.emplace_back(s["theta0"][i].get<double>(),
                                         s["theta0"][i + 1].get<double>());
      }
      if (!s.contains("radius") && !s.contains("theta0"))
        v.fail("lift requires either \"radius\" or \"theta0\"");
      cfg.t1 = need_num(s, "lift", "t1", v);
      cfg.t0 = s.contains("t0") ? need_num(s, "lift", "t0", v) : 0.0;
      if (s.contains("samples"))
        cfg.samples = int(need_num(s, "lift", "samples", v));
      cfg.rtol = s.contains("rtol") ? need_num(s, "lift", "rtol", v) : cfg.rtol;
      cfg.atol = s.contains("atol") ? need_num(s, "lift", "atol", v) : cfg.atol;
      break;
    }
  }

  v.finish();
  cfg.raw_json = root.dump(1);
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

// --- serialization -----------------------------------------------------------

void save_state_json(const fs::path& p, const ModeGrid& grid,
                     const ModelParams& params, const std::string& model,
                     const StateVector& st) {
  json j;
  j["format"] = 1;
  j["model"] = model;
  j["grid"] = {{"k", grid.k}, {"n1", grid.n1}, {"n2", grid.n2},
               {"nfields", grid.nfields}};
  j["params"] = {{"re", params.re},
                 {"wi", params.wi},
                 {"beta_visc", params.beta_visc},
                 {"eps", params.eps},
                 {"xhat2", params.xhat2}};
  j["f"] = st.f;
  j["c"] = st.c;
  json co = json::array();
  for (Eigen::Index i = 0; i < st.coeffs.size(); ++i)
    co.push_back({st.coeffs[i].real(), st.coeffs[i].imag()});
  j["coeffs"] = std::move(co);
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(1) << "\n";
}

StateVector load_state_json(const fs::path& p, ModeGrid* grid_out,
                            ModelParams* params_out, std::string* model_out) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError("malformed state file " + p.string() + ": " + e.what());
  }
  ModeGrid g;
  g.k = j.at("grid").at("k").get<double>();
  g.n1 = j.at("grid").at("n1").get<int>();
  g.n2 = j.at("grid").at("n2").get<int>();
  g.nfields = j.at("grid").at("nfields").get<int>();
  StateVector st(g);
  const auto& co = j.at("coeffs");
  if (Eigen::Index(co.size()) != st.coeffs.size())
    throw IoError("state file coefficient count mismatch in " + p.string());
  for (Eigen::Index i = 0; i < st.coeffs.size(); ++i)
    st.coeffs[i] = Complex(co[size_t(i)][0].get<double>(),
                           co[size_t(i)][1].get<double>());
  st.f = j.at("f").get<double>();
  st.c = j.at("c").get<double>();
  if (grid_out) *grid_out = g;
  if (params_out) {
    params_out->re = j.at("params").at("re").get<double>();
    params_out->wi = j.at("params").at("wi").get<double>();
    params_out->beta_visc = j.at("params").at("beta_visc").get<double>();
    params_out->eps = j.at("params").at("eps").get<double>();
    params_out->xhat2 = j.at("params").at("xhat2").get<double>();
  }
  if (model_out) *model_out = j.at("model").get<std::string>();
  return st;
}

void save_field_csv(const fs::path& p, const ModeGrid& grid,
                    const PhysicalField& f) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << "x1,x2,u1,u2,p";
  if (grid.nfields == 6) out << ",T11,T12,T22";
  out << "\n";
  for (Eigen::Index i = 0; i < f.x1.size(); ++i)
    for (Eigen::Index s = 0; s < f.x2.size(); ++s) {
      out << fmt17(f.x1[i]) << "," << fmt17(f.x2[s]);
      for (const auto& field : f.fields) out << "," << fmt17(field(i, s));
      out << "\n";
    }
}

void save_spectrum_csv(const fs::path& p, const std::vector<EigenPair>& eigs,
                       std::optional<double> beta_split) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << "re_lambda,im_lambda,in_sigma1\n";
  for (const auto& e : eigs) {
    const int in1 =
        beta_split.has_value() && e.lambda.real() > *beta_split ? 1 : 0;
    out << fmt17(e.lambda.real()) << "," << fmt17(e.lambda.imag()) << "," << in1
        << "\n";
  }
}

void save_branch_csv(const fs::path& p, const Branch& br, bool oldroydb) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << "param,c,f,e,d,mwnv,svf";
  if (oldroydb) out << ",t_ratio";
  out << ",tangent_param,stability\n";
  for (const auto& pt : br.points) {
    const ObsRecord ob = pt.obs.value_or(ObsRecord{});
    // f and c live in the trailing slots of the full-space state
    const double fv = pt.u.size() >= 2 ? pt.u[pt.u.size() - 2].real() : 0.0;
    const double cv = pt.u.size() >= 1 ? pt.u[pt.u.size() - 1].real() : 0.0;
    out << fmt17(pt.param) << "," << fmt17(cv) << "," << fmt17(fv) << ","
        << fmt17(ob.e) << "," << fmt17(ob.d) << "," << fmt17(ob.mwnv) << ","
        << fmt17(ob.svf);
    if (oldroydb) out << "," << fmt17(ob.t_ratio.value_or(1.0));
    out << "," << fmt17(pt.tangent_param) << ","
        << (pt.stability ? std::to_string(*pt.stability) : std::string("-1"))
        << "\n";
  }
}

Branch load_branch_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  Branch br;
  std::string line;
  std::getline(in, line);  // header
  const bool ob = line.find("t_ratio") != std::string::npos;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    BranchPoint pt;
    size_t i = 0;
    pt.param = vals[i++];
    ObsRecord ob_rec;
    const double cv = vals[i++];
    const double fv = vals[i++];
    ob_rec.e = vals[i++];
    ob_rec.d = vals[i++];
    ob_rec.mwnv = vals[i++];
    ob_rec.svf = vals[i++];
    if (ob) ob_rec.t_ratio = vals[i++];
    pt.tangent_param = vals[i++];
    const int stab = int(vals[i++]);
    if (stab >= 0) pt.stability = stab;
    pt.obs = ob_rec;
    pt.u = VectorXcd::Zero(2);
    pt.u[0] = fv;
    pt.u[1] = cv;
    br.points.push_back(std::move(pt));
  }
  return br;
}

void save_ssm_json(const fs::path& p, const ExpansionTable& table,
                   ParamStyle style) {
  json j;
  j["format"] = 1;
  j["r"] = table.r;
  j["order"] = table.order;
  j["style"] = style == ParamStyle::graph
                   ? "graph"
                   : (style == ParamStyle::normal_form ? "normal-form" : "mixed");
  json monos = json::array();
  for (const auto& [a, mono] : table.monomials) {
    json m;
    m["alpha"] = a;
    json kre = json::array(), kim = json::array();
    for (Eigen::Index i = 0; i < mono.K.size(); ++i) {
      kre.push_back(mono.K[i].real());
      kim.push_back(mono.K[i].imag());
    }
    json rre = json::array(), rim = json::array();
    for (Eigen::Index i = 0; i < mono.R.size(); ++i) {
      rre.push_back(mono.R[i].real());
      rim.push_back(mono.R[i].imag());
    }
    m["k_re"] = std::move(kre);
    m["k_im"] = std::move(kim);
    m["r_re"] = std::move(rre);
    m["r_im"] = std::move(rim);
    m["mode"] = mono.style == MonomialStyle::graph ? "graph" : "normal-form";
    monos.push_back(std::move(m));
  }
  j["monomials"] = std::move(monos);
  json res = json::array();
  for (const auto& h : table.resonance_log) {
    json e;
    e["alpha"] = h.alpha;
    e["q"] = h.matched_q;
    e["type"] = to_string(h.type);
    e["matched_re"] = h.matched.real();
    e["matched_im"] = h.matched.imag();
    e["rel_dist"] = h.rel_dist;
    res.push_back(std::move(e));
  }
  j["resonances"] = std::move(res);
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(1) << "\n";
}

ExpansionTable load_ssm_json(const fs::path& p, ParamStyle* style_out) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError("malformed ssm file " + p.string() + ": " + e.what());
  }
  ExpansionTable t;
  t.r = j.at("r").get<int>();
  t.order = j.at("order").get<int>();
  for (const auto& m : j.at("monomials")) {
    MultiIndex a = m.at("alpha").get<std::vector<int>>();
    Monomial mono;
    const auto& kre = m.at("k_re");
    const auto& kim = m.at("k_im");
    mono.K.resize(Eigen::Index(kre.size()));
    for (Eigen::Index i = 0; i < mono.K.size(); ++i)
      mono.K[i] = Complex(kre[size_t(i)].get<double>(),
                          kim[size_t(i)].get<double>());
    const auto& rre = m.at("r_re");
    const auto& rim = m.at("r_im");
    mono.R.resize(Eigen::Index(rre.size()));
    for (Eigen::Index i = 0; i < mono.R.size(); ++i)
      mono.R[i] = Complex(rre[size_t(i)].get<double>(),
                          rim[size_t(i)].get<double>());
    mono.style = m.at("mode").get<std::string>() == "graph"
                     ? MonomialStyle::graph
                     : MonomialStyle::normal_form;
    t.monomials.emplace(std::move(a), std::move(mono));
  }
  for (const auto& e : j.at("resonances")) {
    ResonanceHit h;
    h.alpha = e.at("alpha").get<std::vector<int>>();
    h.matched_q = e.at("q").get<std::vector<int>>();
    const std::string ty = e.at("type").get<std::string>();
    h.type = ty == "internal"
                 ? ResonanceType::internal
                 : (ty == "cross" ? ResonanceType::cross
                                  : (ty == "near-cross" ? ResonanceType::near_cross
                                                        : ResonanceType::none));
    h.matched = Complex(e.at("matched_re").get<double>(),
                        e.at("matched_im").get<double>());
    h.rel_dist = e.at("rel_dist").get<double>();
    t.resonance_log.push_back(std::move(h));
  }
  if (style_out) {
    const std::string st = j.at("style").get<std::string>();
    *style_out = st == "graph" ? ParamStyle::graph
                               : (st == "normal-form" ? ParamStyle::normal_form
                                                      : ParamStyle::mixed);
  }
  return t;
}

void save_orbit_csv(const fs::path& p, const Trajectory& traj,
                    const LiftedOrbit& orbit) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  const int r = traj.theta.empty() ? 0 : int(traj.theta.front().size());
  out << "t";
  for (int q = 0; q < r; ++q)
    out << ",theta" << q + 1 << "_re,theta" << q + 1 << "_im";
  out << ",e,d,mwnv,svf";
  const bool has_tr =
      !orbit.obs.empty() && orbit.obs.front().t_ratio.has_value();
  if (has_tr) out << ",t_ratio";
  out << "\n";
  for (size_t i = 0; i < traj.t.size(); ++i) {
    out << fmt17(traj.t[i]);
    for (int q = 0; q < r; ++q)
      out << "," << fmt17(traj.theta[i][q].real()) << ","
          << fmt17(traj.theta[i][q].imag());
    const ObsRecord& ob = orbit.obs[i];
    out << "," << fmt17(ob.e) << "," << fmt17(ob.d) << "," << fmt17(ob.mwnv)
        << "," << fmt17(ob.svf);
    if (has_tr) out << "," << fmt17(ob.t_ratio.value_or(1.0));
    out << "\n";
  }
}

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot hash " + p.string());
  uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= uint64_t(uint8_t(buf[i]));
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char out[20];
  std::snprintf(out, sizeof(out), "%016llx", (unsigned long long)h);
  return out;
}

// --- run ----------------------------------------------------------------------

namespace {

struct LockFile {
  fs::path path;
  explicit LockFile(const fs::path& dir) : path(dir / ".ssmflow.lock") {
    if (fs::exists(path))
      throw IoError("output directory " + dir.string() +
                    " is locked by another run (" + path.string() + ")");
    std::ofstream out(path);
    if (!out) throw IoError("cannot create lockfile " + path.string());
    out << "locked\n";
  }
  ~LockFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

json obs_json(const ObsRecord& ob) {
  json j = {{"e", ob.e}, {"d", ob.d}, {"mwnv", ob.mwnv}, {"svf", ob.svf}};
  if (ob.t_ratio) j["t_ratio"] = *ob.t_ratio;
  return j;
}

}  // namespace

int run(const RunConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  json manifest;
  manifest["version"] = "0.1.0";
  manifest["task"] = to_string(config.task);
  if (!config.raw_json.empty())
    manifest["inputs"] = json::parse(config.raw_json, nullptr, false);
  json outputs = json::array();
  json results;

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) {
    std::fprintf(stderr, "error: cannot create output dir %s\n",
                 config.output_dir.string().c_str());
    return int(ErrorCategory::io);
  }

  auto emit = [&](const fs::path& name) {
    outputs.push_back({{"file", name.filename().string()},
                       {"fnv64", file_hash(name)}});
  };

  int exit_code = 0;
  try {
    LockFile lock(config.output_dir);
    const FlowContext ctx = FlowContext::make(config.grid, config.params);
    const fs::path dir = config.output_dir;

    switch (config.task) {
      case Task::laminar: {
        const StateVector lam = laminar_state(ctx.grid, ctx.cheb, ctx.params);
        save_state_json(dir / "state.json", ctx.grid, ctx.params, config.model,
                        lam);
        emit(dir / "state.json");
        save_field_csv(dir / "field.csv", ctx.grid,
                       to_physical(ctx.grid, ctx.cheb, lam, config.nx_physical));
        emit(dir / "field.csv");
        results["f"] = lam.f;
        break;
      }
      case Task::spectrum: {
        const StateVector lam = laminar_state(ctx.grid, ctx.cheb, ctx.params);
        const OperatorPair ops =
            assemble_linearization(ctx.grid, ctx.cheb, ctx.params, lam);
        const SpectrumBoundConstants sb =
            spectrum_bound_constants(ctx.grid, ctx.cheb, lam);
        const Complex shift = config.shift.value_or(default_shift(sb));
        const auto eigs = solve_generalized_eig(ops, shift, config.eig_count);
        save_state_json(dir / "state.json", ctx.grid, ctx.params, config.model,
                        lam);
        emit(dir / "state.json");
        save_spectrum_csv(dir / "spectrum.csv", eigs, config.beta_split);
        emit(dir / "spectrum.csv");
        if (!eigs.empty())
          results["leading"] = {eigs.front().lambda.real(),
                                eigs.front().lambda.imag()};
        break;
      }
      case Task::tw: {
        TwSeedOptions sopt;
        if (!config.seed_amplitudes.empty())
          sopt.amplitudes = config.seed_amplitudes;
        const TwSeedResult tw = seed_travelling_wave(ctx, config.cont_param,
                                                     config.seed_at, sopt);
        save_state_json(dir / "state.json", ctx.grid, ctx.params, config.model,
                        tw.state);
        emit(dir / "state.json");
        save_field_csv(
            dir / "field.csv", ctx.grid,
            to_physical(ctx.grid, ctx.cheb, tw.state, config.nx_physical));
        emit(dir / "field.csv");
        const StateVector lam = laminar_state(ctx.grid, ctx.cheb, ctx.params);
        StateVector pert = tw.state;
        pert.coeffs -= lam.coeffs;
        results["param"] = tw.param;
        results["c"] = tw.state.c;
        results["observables"] =
            obs_json(observables(ctx.grid, ctx.cheb, ctx.params, pert, &lam));
        break;
      }
      case Task::cont: {
        TwSeedOptions sopt;
        if (!config.seed_amplitudes.empty())
          sopt.amplitudes = config.seed_amplitudes;
        const TwSeedResult tw = seed_travelling_wave(ctx, config.cont_param,
                                                     config.seed_at, sopt);
        ContinuationProblem prob = continuation_problem(ctx, config.cont_param);
        BranchPoint start;
        start.u = embed_full(ctx.grid, tw.state);
        start.param = tw.param;
        start.obs = prob.observe(start.u, start.param);

        ContinuationOptions copt;
        copt.step0 = config.step0;
        copt.param_min = config.range_from;
        copt.param_max = config.range_to;
        copt.max_points = config.max_points;
        copt.newton.max_iter = 12;
        copt.newton.tol = 1e-10;
        Branch br = continue_branch(prob, start, +1, copt);
        if (config.tag_stability) {
          for (auto& pt : br.points) {
            FlowContext c2 = ctx;
            (config.cont_param == ContParam::re ? c2.params.re
                                                : c2.params.wi) = pt.param;
            pt.stability =
                count_unstable(c2, extract_half(ctx.grid, pt.u));
          }
        }
        save_branch_csv(dir / "branch.csv", br, ctx.grid.nfields == 6);
        emit(dir / "branch.csv");
        results["n_points"] = br.points.size();
        results["folds"] = br.folds;
        results["stalled"] = br.stalled;
        break;
      }
      case Task::ssm:
      case Task::reduce:
      case Task::lift: {
        const SsmData data =
            ssm_about_laminar(ctx, config.beta_split.value(), config.ssm,
                              config.gap_tol);
        save_state_json(dir / "state.json", ctx.grid, ctx.params, config.model,
                        data.base);
        emit(dir / "state.json");
        save_spectrum_csv(dir / "spectrum.csv", data.spectrum,
                          config.beta_split);
        emit(dir / "spectrum.csv");
        save_ssm_json(dir / "ssm.json", data.table, config.ssm.style);
        emit(dir / "ssm.json");
        json rl = json::array();
        for (const auto& h : data.table.resonance_log)
          rl.push_back({{"alpha", h.alpha}, {"type", to_string(h.type)}});
        results["resonances"] = std::move(rl);
        results["r"] = data.table.r;
        results["order"] = data.table.order;

        if (config.task == Task::ssm) break;

        const double theta_max = fundamental_radius(
            data.table, data.ops, bilinear_fn(ctx), config.ssm.err_tol, 8,
            defect_norm_fn(ctx));
        results["fundamental_radius"] = theta_max;

        if (config.task == Task::reduce) {
          const ReducedVectorField rf = reduced_field(data.table);
          const PolarForm pol = to_polar(rf);
          const double rmax = config.r_max.value_or(theta_max);
          const auto radii = invariant_radii(pol, rmax);
          json jr = json::array();
          for (double r : radii)
            jr.push_back({{"radius", r},
                          {"stable", radial_rate_slope(pol, r) < 0.0},
                          {"frequency", angular_rate(pol, r)},
                          {"trusted", r <= theta_max}});
          results["radial"] = pol.radial;
          results["angular"] = pol.angular;
          results["equivariance_defect"] = pol.equivariance_defect;
          results["invariant_sets"] = std::move(jr);
          results["r_max"] = rmax;
          std::ofstream out(dir / "reduce.json");
          if (!out) throw IoError("cannot write reduce.json");
          out << results.dump(1) << "\n";
          emit(dir / "reduce.json");
          break;
        }

        // lift
        VectorXcd theta0(data.table.r);
        if (!config.lift_theta0.empty()) {
          if (int(config.lift_theta0.size()) != data.table.r)
            throw ConfigError("lift.theta0 has wrong dimension");
          for (int q = 0; q < data.table.r; ++q)
            theta0[q] = config.lift_theta0[size_t(q)];
        } else {
          theta0.setZero();
          theta0[0] = config.lift_radius.value();
          if (data.table.r == 2) theta0[1] = std::conj(theta0[0]);
        }
        const ReducedVectorField rf = reduced_field(data.table);
        const Trajectory traj = integrate(rf, theta0, config.t0, config.t1,
                                          config.samples, config.rtol,
                                          config.atol);
        const LiftedOrbit orbit =
            lift_orbit(data.table, traj, ctx.grid, ctx.cheb, ctx.params,
                       &data.base);
        save_orbit_csv(dir / "orbit.csv", traj, orbit);
        emit(dir / "orbit.csv");
        results["escaped"] = traj.escaped;
        if (orbit.frequency) results["frequency"] = *orbit.frequency;
        results["mean"] = obs_json(orbit.mean);
        break;
      }
    }
  } catch (const Error& e) {
    manifest["error"] = {{"category", e.exit_code()}, {"message", e.what()}};
    exit_code = e.exit_code();
    std::fprintf(stderr, "error: %s\n", e.what());
  } catch (const std::exception& e) {
    manifest["error"] = {{"category", 1}, {"message", e.what()}};
    exit_code = 1;
    std::fprintf(stderr, "error: %s\n", e.what());
  }

  const auto t_end = std::chrono::steady_clock::now();
  manifest["wall_time_s"] =
      std::chrono::duration<double>(t_end - t_start).count();
  manifest["outputs"] = std::move(outputs);
  manifest["results"] = std::move(results);
  std::ofstream out(config.output_dir / "manifest.json");
  if (out) out << manifest.dump(1) << "\n";
  return exit_code;
}

}  // namespace ssmflow
