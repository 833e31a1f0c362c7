// fairdg command-line tool.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairdg/bounds.hpp"
#include "fairdg/dependence.hpp"
#include "fairdg/errors.hpp"
#include "fairdg/experiment.hpp"
#include "fairdg/fairness.hpp"
#include "fairdg/io.hpp"
#include "fairdg/nn.hpp"
#include "fairdg/pareto.hpp"
#include "fairdg/trainer.hpp"

namespace fs = std::filesystem;
using fairdg::io::Json;
using namespace fairdg;

namespace {

enum class Format { kJson, kCsv };

struct Common {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
  std::string in_path;

  Format fmt() const { return format == "csv" ? Format::kCsv : Format::kJson; }
};

// Everything that determines the output, hashed into config_hash.
class Invocation {
 public:
  explicit Invocation(std::string sub) { text_ = "subcommand=" + sub + "\n"; }
  void add(const std::string& k, const std::string& v) { text_ += k + "=" + v + "\n"; }
  void add_file(const std::string& k, const std::string& path) {
    add(k, fs::path(path).filename().string());
    text_ += io::read_file(path) + "\n";
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ValidationError("cannot create output directory " + dir);
  const fs::path probe = fs::path(dir) / ".fairdg_write_probe";
  io::write_file(probe.string(), "");
  fs::remove(probe, ec);
}

// Writes to <output_dir>/<name> when an output directory is set, else stdout.
void emit(const Common& c, const std::string& name, const std::string& content) {
  if (c.output_dir.empty()) {
    std::fwrite(content.data(), 1, content.size(), stdout);
    return;
  }
  io::write_file((fs::path(c.output_dir) / name).string(), content);
}

std::string csv_cell(double v) { return io::format_double(v); }

Json report_list(const std::vector<bounds::BoundReport>& rs) {
  Json a = Json::array();
  for (const auto& r : rs) a.push_back(io::to_json(r));
  return a;
}

std::string reports_csv(const std::string& config_text, const std::vector<bounds::BoundReport>& rs) {
  std::string out = io::csv_comment(config_text) + "name,lhs,rhs,slack,seed\n";
  for (const auto& r : rs) {
    out += r.name + "," + csv_cell(r.lhs) + "," + csv_cell(r.rhs) + "," + csv_cell(r.slack) + "," +
           (r.seed ? std::to_string(*r.seed) : std::string()) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------- verify-bounds

struct BoundsArgs {
  std::size_t instances = 1000;
  std::size_t max_x = 6, max_y = 4, max_d = 4, max_g = 3;
};

bounds::BoundedLoss loss_from_json(const Json& j) {
  bounds::BoundedLoss l;
  if (!j.is_object()) throw ConfigError("loss must be an object");
  const std::string kind = j.value("kind", "bounded_ce");
  if (kind == "bounded_ce") l.kind = bounds::LossKind::kBoundedCrossEntropy;
  else if (kind == "zero_one") l.kind = bounds::LossKind::kZeroOne;
  else throw ConfigError("loss.kind must be bounded_ce or zero_one");
  if (j.contains("cap")) {
    if (!j["cap"].is_number()) throw ConfigError("loss.cap must be a number");
    l.cap = j["cap"].get<double>();
  }
  return l;
}

int cmd_verify_bounds(const Common& c, const BoundsArgs& a) {
  Invocation inv("verify-bounds");
  std::vector<bounds::BoundReport> reports;
  Json summary;
  if (!c.config_path.empty()) {
    inv.add_file("config", c.config_path);
    Json cfg;
    try {
      cfg = Json::parse(io::read_file(c.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!cfg.is_object() || !cfg.contains("joint") || !cfg.contains("channel"))
      throw ConfigError("verify-bounds config needs joint and channel");
    const auto joint = io::joint_from_json(cfg["joint"]);
    const auto ch = io::channel_from_json(cfg["channel"]);
    const auto loss = cfg.contains("loss") ? loss_from_json(cfg["loss"]) : bounds::BoundedLoss{};
    reports = bounds::verify_all(joint, ch, loss);
    summary["instances"] = 1;
  } else {
    if (a.instances == 0) throw ValidationError("--instances must be positive");
    const std::uint64_t seed = c.seed.value_or(0);
    inv.add("instances", std::to_string(a.instances));
    inv.add("seed", std::to_string(seed));
    inv.add("limits", std::to_string(a.max_x) + "," + std::to_string(a.max_y) + "," +
                          std::to_string(a.max_d) + "," + std::to_string(a.max_g));
    bounds::InstanceLimits lim{a.max_x, a.max_y, a.max_d, a.max_g};
    reports = bounds::run_harness(a.instances, seed, trainer::thread_budget(), lim);
    summary["instances"] = a.instances;
  }
  double min_slack = reports.front().slack;
  for (const auto& r : reports) min_slack = std::min(min_slack, r.slack);
  summary["reports"] = reports.size();
  summary["min_slack"] = min_slack;
  summary["all_hold"] = min_slack >= -bounds::kSlackTolerance;

  if (c.fmt() == Format::kCsv) {
    emit(c, "bounds.csv", reports_csv(inv.text(), reports));
  } else {
    Json out = io::envelope(inv.text());
    out["summary"] = summary;
    out["reports"] = report_list(reports);
    emit(c, "bounds.json", io::dump(out));
  }
  return 0;
}

// ---------------------------------------------------------------- dcor

std::vector<std::size_t> index_column(const io::CsvTable& t, const std::string& name) {
  const std::size_t col = t.column(name);
  std::vector<std::size_t> v(t.rows.size());
  for (std::size_t r = 0; r < v.size(); ++r) v[r] = t.index(r, col);
  return v;
}

// "<prefix><k>" or "<prefix>_<k>" with a decimal index k.
bool block_column(const std::string& name, const std::string& prefix) {
  if (name.rfind(prefix, 0) != 0) return false;
  std::string rest = name.substr(prefix.size());
  if (!rest.empty() && rest[0] == '_') rest.erase(0, 1);
  return !rest.empty() && std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; });
}

dependence::RepBatch block(const io::CsvTable& t, const std::string& prefix) {
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (block_column(t.header[i], prefix)) cols.push_back(i);
  if (cols.empty()) throw ValidationError("CSV has no columns starting with '" + prefix + "'");
  dependence::RepBatch m(t.rows.size(), cols.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t k = 0; k < cols.size(); ++k) m(r, k) = t.number(r, cols[k]);
  return m;
}

Json conditional_json(const dependence::ConditionalDcor& c) {
  return {{"value", c.value},
          {"cells_used", c.sums.cells_used},
          {"cells_skipped", c.sums.cells_skipped},
          {"rows_skipped", c.sums.rows_skipped}};
}

int cmd_dcor(const Common& c, const std::string& a_prefix, const std::string& b_prefix) {
  if (c.in_path.empty()) throw ValidationError("dcor needs --in");
  Invocation inv("dcor");
  inv.add_file("in", c.in_path);
  inv.add("prefixes", a_prefix + "," + b_prefix);
  const auto t = io::read_csv(c.in_path);
  if (t.rows.empty()) throw ValidationError("CSV has no rows");
  const auto a = block(t, a_prefix);
  const auto b = block(t, b_prefix);
  dependence::PartitionLabels labels;
  labels.y = index_column(t, "y");
  if (t.has("d")) labels.d = index_column(t, "d");

  Json res;
  res["n"] = t.rows.size();
  res["dim_a"] = a.cols();
  res["dim_b"] = b.cols();
  res["dcor"] = dependence::dcor(a, b);
  res["dcor_given_y"] = conditional_json(dependence::dcor_given_y(a, b, labels));
  if (labels.d) res["dcor_given_y_d"] = conditional_json(dependence::dcor_given_y_d(a, b, labels));
  else res["dcor_given_y_d"] = nullptr;
  try {
    res["hsic"] = dependence::hsic(a, b);
  } catch (const ValidationError&) {
    res["hsic"] = nullptr;  // median bandwidth undefined
  }
  if (c.fmt() == Format::kCsv) {
    std::string out = io::csv_comment(inv.text()) + "statistic,value\n";
    out += "dcor," + csv_cell(res["dcor"].get<double>()) + "\n";
    out += "dcor_given_y," + csv_cell(res["dcor_given_y"]["value"].get<double>()) + "\n";
    if (labels.d) out += "dcor_given_y_d," + csv_cell(res["dcor_given_y_d"]["value"].get<double>()) + "\n";
    if (!res["hsic"].is_null()) out += "hsic," + csv_cell(res["hsic"].get<double>()) + "\n";
    emit(c, "dcor.csv", out);
  } else {
    Json out = io::envelope(inv.text());
    out["result"] = res;
    emit(c, "dcor.json", io::dump(out));
  }
  return 0;
}

// ---------------------------------------------------------------- fairness

Json gap_json(const fairness::GroupGap& g) {
  return {{"value", g.value},
          {"percent", 100.0 * g.value},
          {"pairs_used", g.pairs_used},
          {"pairs_skipped", g.pairs_skipped}};
}

Json metrics_json(const fairness::EvalBatch& b) {
  Json j;
  j["n"] = b.size();
  j["accuracy"] = fairness::accuracy(b);
  j["eod"] = gap_json(fairness::eod(b));
  j["eo"] = gap_json(fairness::eo(b));
  return j;
}

int cmd_fairness(const Common& c, std::size_t num_labels, std::size_t num_groups) {
  if (c.in_path.empty()) throw ValidationError("fairness needs --in");
  Invocation inv("fairness");
  inv.add_file("in", c.in_path);
  inv.add("num_labels", std::to_string(num_labels));
  inv.add("num_groups", std::to_string(num_groups));
  const auto t = io::read_csv(c.in_path);
  fairness::EvalBatch b;
  b.y_true = index_column(t, "y_true");
  b.y_pred = index_column(t, "y_pred");
  b.g = index_column(t, "g");
  if (t.has("d")) b.d = index_column(t, "d");
  b.num_labels = num_labels;
  b.num_groups = num_groups;
  b.validate();
  // Per-domain cardinalities follow the whole batch.
  b.num_labels = b.labels();
  b.num_groups = b.groups();

  Json res = metrics_json(b);
  if (b.d) {
    std::size_t nd = 0;
    for (auto d : *b.d) nd = std::max(nd, d + 1);
    Json per = Json::array();
    for (std::size_t d = 0; d < nd; ++d) {
      fairness::EvalBatch s;
      s.num_labels = b.num_labels;
      s.num_groups = b.num_groups;
      for (std::size_t i = 0; i < b.size(); ++i)
        if ((*b.d)[i] == d) {
          s.y_true.push_back(b.y_true[i]);
          s.y_pred.push_back(b.y_pred[i]);
          s.g.push_back(b.g[i]);
        }
      if (s.size() == 0) continue;
      Json m;
      m["d"] = d;
      try {
        m.update(metrics_json(s));
      } catch (const DegenerateError& e) {
        m["n"] = s.size();
        m["accuracy"] = fairness::accuracy(s);
        m["error"] = e.what();
      }
      per.push_back(m);
    }
    res["per_domain"] = per;
  }
  if (c.fmt() == Format::kCsv) {
    std::string out = io::csv_comment(inv.text()) + "scope,n,accuracy,eod,eo\n";
    auto row = [&](const std::string& scope, const Json& m) {
      if (m.contains("error")) return;
      out += scope + "," + std::to_string(m["n"].get<std::size_t>()) + "," +
             csv_cell(m["accuracy"].get<double>()) + "," + csv_cell(m["eod"]["value"].get<double>()) +
             "," + csv_cell(m["eo"]["value"].get<double>()) + "\n";
    };
    row("all", res);
    if (res.contains("per_domain"))
      for (const auto& m : res["per_domain"]) row("d" + std::to_string(m["d"].get<std::size_t>()), m);
    emit(c, "fairness.csv", out);
  } else {
    Json out = io::envelope(inv.text());
    out["result"] = res;
    emit(c, "fairness.json", io::dump(out));
  }
  return 0;
}

// ---------------------------------------------------------------- pareto

std::vector<pareto::TradeoffPoint> read_points(const std::string& path, const std::string& v_col) {
  const auto t = io::read_csv(path);
  std::string vc = v_col;
  if (vc.empty()) vc = t.has("V") ? "V" : "V_eod";
  const std::size_t cl = t.column("lambda"), cv = t.column(vc), cu = t.column("U");
  std::vector<pareto::TradeoffPoint> pts;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    pareto::TradeoffPoint p{t.number(r, cv), t.number(r, cu), t.number(r, cl)};
    if (!std::isfinite(p.v) || !std::isfinite(p.u) || !std::isfinite(p.lambda))
      throw ValidationError("CSV row " + std::to_string(r + 1) + " has a non-finite value");
    pts.push_back(p);
  }
  if (pts.empty()) throw ValidationError("CSV has no rows");
  return pts;
}

Json point_json(const pareto::TradeoffPoint& p) {
  return {{"lambda", p.lambda}, {"V", p.v}, {"U", p.u}};
}

Json front_json(const pareto::FrontSummary& s) {
  Json j;
  Json front = Json::array();
  for (std::size_t i = 0; i < s.front.size(); ++i) {
    Json p = point_json(s.front[i]);
    p["V_norm"] = s.normalized[i].v;
    p["U_norm"] = s.normalized[i].u;
    front.push_back(p);
  }
  j["front"] = front;
  j["hvi_raw"] = s.hv.raw;
  j["hvi_percent"] = s.hv.percent;
  j["selected"] = point_json(s.front[s.selected]);
  j["bounds"] = {{"v_min", s.bounds.v_min},
                 {"v_max", s.bounds.v_max},
                 {"u_min", s.bounds.u_min},
                 {"u_max", s.bounds.u_max}};
  return j;
}

void add_front_config(Invocation& inv, const pareto::FrontConfig& f) {
  inv.add("front", io::format_double(f.v_ref) + "," + io::format_double(f.u_ref) + "," +
                       io::format_double(f.v_star) + "," + io::format_double(f.u_star));
}

int cmd_pareto(const Common& c, const std::string& v_col, const pareto::FrontConfig& f) {
  if (c.in_path.empty()) throw ValidationError("pareto needs --in");
  Invocation inv("pareto");
  inv.add_file("in", c.in_path);
  inv.add("v_column", v_col);
  add_front_config(inv, f);
  const auto pts = read_points(c.in_path, v_col);
  const auto s = pareto::summarize(pts, f);
  if (c.fmt() == Format::kCsv) {
    std::string out = io::csv_comment(inv.text()) + "lambda,V,U,V_norm,U_norm,selected\n";
    for (std::size_t i = 0; i < s.front.size(); ++i)
      out += csv_cell(s.front[i].lambda) + "," + csv_cell(s.front[i].v) + "," + csv_cell(s.front[i].u) +
             "," + csv_cell(s.normalized[i].v) + "," + csv_cell(s.normalized[i].u) + "," +
             (i == s.selected ? "1" : "0") + "\n";
    emit(c, "pareto.csv", out);
  } else {
    Json out = io::envelope(inv.text());
    out.update(front_json(s));
    emit(c, "pareto.json", io::dump(out));
  }
  return 0;
}

// ---------------------------------------------------------------- train / sweep

trainer::ExperimentConfig load_experiment(const Common& c, Invocation& inv) {
  trainer::ExperimentConfig cfg;
  if (!c.config_path.empty()) {
    Json j;
    try {
      j = Json::parse(io::read_file(c.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg = trainer::experiment_from_json(j);
  }
  if (c.seed) trainer::apply_seed(cfg, *c.seed);
  // Hash the resolved configuration so defaults and overrides both count.
  inv.add("config", trainer::experiment_to_json(cfg).dump());
  return cfg;
}

Json eval_json(const trainer::Evaluation& e) {
  return {{"accuracy", e.accuracy}, {"eod", e.eod}, {"eo", e.eo}};
}

Json stage1_json(const trainer::Stage1Result& s) {
  return {{"domain_accuracy", s.domain_accuracy},
          {"group_accuracy", s.group_accuracy},
          {"domain_epochs", s.domain_epochs},
          {"group_epochs", s.group_epochs},
          {"converged", s.converged}};
}

Json curve_json(const std::vector<trainer::EpochLog>& curve) {
  Json a = Json::array();
  for (const auto& e : curve)
    a.push_back({{"epoch", e.epoch},
                 {"objective", e.objective},
                 {"val_accuracy", e.val_accuracy},
                 {"val_eod", e.val_eod}});
  return a;
}

std::string curve_csv(const std::string& config_text, const std::vector<trainer::EpochLog>& curve) {
  std::string out = io::csv_comment(config_text) + "epoch,objective,val_accuracy,val_eod\n";
  for (const auto& e : curve)
    out += std::to_string(e.epoch) + "," + csv_cell(e.objective) + "," + csv_cell(e.val_accuracy) +
           "," + csv_cell(e.val_eod) + "\n";
  return out;
}

std::string checkpoint_text(const nn::EncoderStack& s, const std::string& config_text) {
  Json j = Json::parse(nn::stack_to_json(s));
  j["tool"] = io::kToolName;
  j["tool_version"] = io::kToolVersion;
  j["config_hash"] = io::hex64(io::fnv1a64(config_text));
  // Full round-trip precision, unlike the report outputs.
  return j.dump(1) + "\n";
}

void warn_stage1(const trainer::Stage1Result& s1) {
  if (!s1.converged) {
    std::fprintf(stderr,
                 "fairdg: warning: stage 1 stopped below 99%% training accuracy "
                 "(domain %.4f, group %.4f)\n",
                 s1.domain_accuracy, s1.group_accuracy);
  }
}

int cmd_train(const Common& c) {
  Invocation inv("train");
  const auto cfg = load_experiment(c, inv);
  if (!c.output_dir.empty()) ensure_dir(c.output_dir);
  const auto data = trainer::generate_synthetic(cfg.synth);
  const auto s1 = trainer::stage1_train(data, cfg.train);
  warn_stage1(s1);
  const auto run = trainer::stage2_train(data, s1, cfg.train, cfg.lambda, cfg.gamma);

  Json res;
  res["lambda"] = cfg.lambda;
  res["gamma"] = cfg.gamma;
  res["stage1"] = stage1_json(s1);
  res["target"] = eval_json(trainer::evaluate_target(run.stack, data.target(), cfg.lambda));
  res["validation"] = eval_json(trainer::evaluate_target(run.stack, data.validation(), cfg.lambda));
  res["skipped_batches"] = run.skipped_batches;
  res["curve"] = curve_json(run.curve);

  Json out = io::envelope(inv.text());
  out["config"] = trainer::experiment_to_json(cfg);
  out["result"] = res;
  if (c.output_dir.empty()) {
    emit(c, "", c.fmt() == Format::kCsv ? curve_csv(inv.text(), run.curve) : io::dump(out));
  } else {
    emit(c, "train.json", io::dump(out));
    emit(c, "curve.csv", curve_csv(inv.text(), run.curve));
    emit(c, "checkpoint.json", checkpoint_text(run.stack, inv.text()));
  }
  return 0;
}

std::string sweep_csv(const std::string& config_text, const trainer::SweepResult& s) {
  std::string out = io::csv_comment(config_text) + "lambda,V_eod,V_eo,U\n";
  for (const auto& p : s.points)
    out += csv_cell(p.lambda) + "," + csv_cell(p.target.eod) + "," + csv_cell(p.target.eo) + "," +
           csv_cell(p.target.accuracy) + "\n";
  return out;
}

Json sweep_json(const trainer::SweepResult& s) {
  Json pts = Json::array();
  for (const auto& p : s.points)
    pts.push_back({{"lambda", p.lambda},
                   {"target", eval_json(p.target)},
                   {"validation", eval_json(p.validation)},
                   {"val_fairness_penalty", p.val_fairness_penalty}});
  std::size_t skipped = 0;
  for (const auto& r : s.runs) skipped += r.skipped_batches;
  return {{"gamma", s.gamma}, {"skipped_batches", skipped}, {"points", pts}};
}

std::string lambda_tag(double l) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", l);
  return buf;
}

int cmd_sweep(const Common& c) {
  Invocation inv("sweep");
  const auto cfg = load_experiment(c, inv);
  if (!c.output_dir.empty()) ensure_dir(c.output_dir);
  const auto data = trainer::generate_synthetic(cfg.synth);
  const auto r = trainer::run_experiment(data, cfg);
  warn_stage1(r.stage1);
  const auto& sel = r.selected();

  Json res;
  res["stage1"] = stage1_json(r.stage1);
  Json cands = Json::array();
  for (std::size_t i = 0; i < r.candidates.size(); ++i)
    cands.push_back({{"gamma", r.candidates[i].gamma}, {"val_hvi", r.selection.val_hvi[i]}});
  res["gamma_selection"] = {{"selected", r.selection.gamma}, {"candidates", cands}};
  res["spearman_lambda_target_eod"] = r.spearman_lambda_eod;
  res["spearman_lambda_val_penalty"] = r.spearman_lambda_penalty;
  res["target_hvi_selected"] = r.hvi_tuned;
  res["target_hvi_baseline"] = r.hvi_baseline;
  res["front"] = front_json(pareto::summarize(trainer::target_points(sel), cfg.front));
  res["selected_sweep"] = sweep_json(sel);
  res["baseline_sweep"] = sweep_json(r.baseline);

  Json out = io::envelope(inv.text());
  out["config"] = trainer::experiment_to_json(cfg);
  out["result"] = res;
  if (c.output_dir.empty()) {
    emit(c, "", c.fmt() == Format::kCsv ? sweep_csv(inv.text(), sel) : io::dump(out));
    return 0;
  }
  emit(c, "sweep.json", io::dump(out));
  emit(c, "sweep.csv", sweep_csv(inv.text(), sel));
  emit(c, "baseline.csv", sweep_csv(inv.text(), r.baseline));
  if (cfg.train.mode == trainer::SweepMode::kLossConditional) {
    emit(c, "checkpoint.json", checkpoint_text(sel.runs.front().stack, inv.text()));
  } else {
    const fs::path dir = fs::path(c.output_dir) / "checkpoints";
    ensure_dir(dir.string());
    for (std::size_t i = 0; i < sel.runs.size(); ++i)
      io::write_file((dir / ("lambda_" + lambda_tag(sel.points[i].lambda) + ".json")).string(),
                     checkpoint_text(sel.runs[i].stack, inv.text()));
  }
  return 0;
}

// ---------------------------------------------------------------- report

int cmd_report(const Common& c, const std::string& baseline_path, const std::string& v_col,
               const pareto::FrontConfig& f) {
  if (c.in_path.empty()) throw ValidationError("report needs --in");
  Invocation inv("report");
  inv.add_file("in", c.in_path);
  if (!baseline_path.empty()) inv.add_file("baseline", baseline_path);
  inv.add("v_column", v_col);
  add_front_config(inv, f);
  const auto pts = read_points(c.in_path, v_col);
  std::vector<double> lam, v;
  for (const auto& p : pts) {
    lam.push_back(p.lambda);
    v.push_back(p.v);
  }
  Json res;
  res["points"] = pts.size();
  res["spearman_lambda_v"] = trainer::spearman(lam, v);
  res["lambda_min"] = {{"lambda", pts.front().lambda}, {"V", pts.front().v}, {"U", pts.front().u}};
  res["lambda_max"] = {{"lambda", pts.back().lambda}, {"V", pts.back().v}, {"U", pts.back().u}};
  const auto s = pareto::summarize(pts, f);
  res["hvi_percent"] = s.hv.percent;
  res["selected"] = point_json(s.front[s.selected]);
  if (!baseline_path.empty()) {
    const auto base = read_points(baseline_path, v_col);
    const auto [a, b] = trainer::compare_hvi(pts, base, f);
    res["comparison"] = {{"hvi_percent", a}, {"baseline_hvi_percent", b}, {"improves", a > b}};
  }
  Json out = io::envelope(inv.text());
  out["result"] = res;
  if (c.fmt() == Format::kCsv) {
    std::string o = io::csv_comment(inv.text()) + "statistic,value\n";
    o += "spearman_lambda_v," + csv_cell(res["spearman_lambda_v"].get<double>()) + "\n";
    o += "hvi_percent," + csv_cell(s.hv.percent) + "\n";
    if (res.contains("comparison"))
      o += "baseline_hvi_percent," + csv_cell(res["comparison"]["baseline_hvi_percent"].get<double>()) + "\n";
    emit(c, "report.csv", o);
  } else {
    emit(c, "report.json", io::dump(out));
  }
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool with_in) {
  sub->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--out-dir", c.output_dir, "write outputs into this directory");
  sub->add_option("--seed", c.seed, "64-bit seed for all randomness");
  sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  if (with_in) sub->add_option("--in", c.in_path, "input CSV")->check(CLI::ExistingFile);
}

void add_front(CLI::App* sub, pareto::FrontConfig& f, std::string& v_col) {
  sub->add_option("--v-column", v_col, "column holding V (default V, else V_eod)");
  sub->add_option("--v-ref", f.v_ref, "reference V after normalization");
  sub->add_option("--u-ref", f.u_ref, "reference U after normalization");
}

// One-line diagnostic on stderr.
int fail(const char* kind, std::string msg, int code) {
  for (auto& ch : msg)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::fprintf(stderr, "fairdg: %s: %s\n", kind, msg.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware domain generalization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kToolVersion));

  Common common;
  BoundsArgs bargs;
  std::string a_prefix = "a", b_prefix = "b";
  std::size_t num_labels = 0, num_groups = 0;
  pareto::FrontConfig front;
  std::string v_col, baseline;

  auto* vb = app.add_subcommand("verify-bounds", "check the theorem and lemma bounds");
  add_common(vb, common, false);
  vb->add_option("--instances", bargs.instances, "random instances");
  vb->add_option("--max-x", bargs.max_x);
  vb->add_option("--max-y", bargs.max_y);
  vb->add_option("--max-d", bargs.max_d);
  vb->add_option("--max-g", bargs.max_g);

  auto* dc = app.add_subcommand("dcor", "distance correlation of two column blocks");
  add_common(dc, common, true);
  dc->add_option("--a-prefix", a_prefix, "column prefix of the first block");
  dc->add_option("--b-prefix", b_prefix, "column prefix of the second block");

  auto* fa = app.add_subcommand("fairness", "accuracy, EOD and EO of predictions");
  add_common(fa, common, true);
  fa->add_option("--num-labels", num_labels, "label count (default: inferred)");
  fa->add_option("--num-groups", num_groups, "group count (default: inferred)");

  auto* pa = app.add_subcommand("pareto", "Pareto front, HVI and selected point");
  add_common(pa, common, true);
  add_front(pa, front, v_col);

  auto* tr = app.add_subcommand("train", "two-stage training at one (lambda, gamma)");
  add_common(tr, common, false);

  auto* sw = app.add_subcommand("sweep", "lambda sweep with gamma selection");
  add_common(sw, common, false);

  auto* rp = app.add_subcommand("report", "trade-off summary of a sweep CSV");
  add_common(rp, common, true);
  add_front(rp, front, v_col);
  rp->add_option("--baseline", baseline, "second sweep CSV to compare against")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("error", e.what(), 2);
  }

  try {
    if (!common.output_dir.empty()) ensure_dir(common.output_dir);
    if (*vb) return cmd_verify_bounds(common, bargs);
    if (*dc) return cmd_dcor(common, a_prefix, b_prefix);
    if (*fa) return cmd_fairness(common, num_labels, num_groups);
    if (*pa) return cmd_pareto(common, v_col, front);
    if (*tr) return cmd_train(common);
    if (*sw) return cmd_sweep(common);
    if (*rp) return cmd_report(common, baseline, v_col, front);
  } catch (const std::invalid_argument& e) {  // ValidationError and ConfigError
    return fail("error", e.what(), 2);
  } catch (const DegenerateError& e) {
    return fail("error", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("internal error", e.what(), 1);
  }
  return 2;
}
