#include "fairdg/experiment.hpp"

#include <set>
#include <string>

#include "fairdg/errors.hpp"

namespace fairdg::trainer {

using Json = nlohmann::ordered_json;

namespace {

// Reads known keys from an object and rejects the rest.
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  const Json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + where_ + "." + it.key());
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

nn::Activation parse_activation(const std::string& s) {
  if (s == "relu") return nn::Activation::kRelu;
  if (s == "tanh") return nn::Activation::kTanh;
  throw ConfigError("activation must be relu or tanh");
}

const char* activation_name(nn::Activation a) {
  return a == nn::Activation::kRelu ? "relu" : "tanh";
}

SweepMode parse_mode(const std::string& s) {
  if (s == "loss_conditional") return SweepMode::kLossConditional;
  if (s == "per_lambda") return SweepMode::kPerLambda;
  throw ConfigError("mode must be loss_conditional or per_lambda");
}

}  // namespace

ExperimentConfig experiment_from_json(const Json& j) {
  ExperimentConfig c;
  Reader top(j, "config");
  if (const Json* s = top.sub("synth")) {
    Reader r(*s, "synth");
    auto& y = c.synth;
    r.get("n_per_domain", y.n_per_domain);
    r.get("feature_dim", y.feature_dim);
    r.get("spurious_dim", y.spurious_dim);
    r.get("domain_dim", y.domain_dim);
    r.get("num_labels", y.num_labels);
    r.get("num_groups", y.num_groups);
    r.get("num_sources", y.num_sources);
    r.get("domain_shift_strength", y.domain_shift_strength);
    r.get("group_bias_strength", y.group_bias_strength);
    r.get("class_separation", y.class_separation);
    r.get("seed", y.seed);
    r.finish();
  }
  if (const Json* t = top.sub("train")) {
    Reader r(*t, "train");
    auto& x = c.train;
    r.get("stage1_epochs", x.stage1_epochs);
    r.get("stage2_epochs", x.stage2_epochs);
    r.get("batch_size", x.batch_size);
    r.get("learning_rate", x.learning_rate);
    r.get("weight_decay", x.weight_decay);
    r.get("stage1_learning_rate", x.stage1_learning_rate);
    r.get("stage1_weight_decay", x.stage1_weight_decay);
    r.get("lambda_grid", x.lambda_grid);
    if (const Json* n = r.sub("lambda_grid_size")) {
      if (t->contains("lambda_grid")) throw ConfigError("give lambda_grid or lambda_grid_size, not both");
      if (!n->is_number_unsigned()) throw ConfigError("train.lambda_grid_size must be a positive integer");
      x.lambda_grid = TrainConfig::default_lambda_grid(n->get<std::size_t>());
    }
    r.get("gamma_grid", x.gamma_grid);
    std::string mode;
    r.get("mode", mode);
    if (!mode.empty()) x.mode = parse_mode(mode);
    r.get("cap", x.cap);
    r.get("smoothing_eps", x.smoothing_eps);
    r.get("best_epoch", x.best_epoch);
    r.get("log_epochs", x.log_epochs);
    r.get("penalty_rows", x.penalty_rows);
    r.get("seed", x.seed);
    if (const Json* d = r.sub("dims")) {
      Reader dr(*d, "train.dims");
      dr.get("hidden", x.dims.hidden);
      dr.get("z_e", x.dims.z_e);
      dr.get("z_d", x.dims.z_d);
      dr.get("z_g", x.dims.z_g);
      dr.get("lambda_scale", x.dims.lambda_scale);
      std::string act;
      dr.get("activation", act);
      if (!act.empty()) x.dims.activation = parse_activation(act);
      dr.finish();
    }
    r.finish();
  }
  top.get("lambda", c.lambda);
  top.get("gamma", c.gamma);
  top.get("baseline_gamma", c.baseline_gamma);
  if (const Json* f = top.sub("front")) {
    Reader r(*f, "front");
    r.get("v_ref", c.front.v_ref);
    r.get("u_ref", c.front.u_ref);
    r.get("v_star", c.front.v_star);
    r.get("u_star", c.front.u_star);
    r.finish();
  }
  top.finish();
  try {
    c.synth.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  c.train.validate();
  if (!(c.lambda >= 0.0 && c.lambda < 1.0)) throw ConfigError("lambda must lie in [0, 1)");
  if (!(c.gamma >= 0.0) || !(c.baseline_gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  return c;
}

Json experiment_to_json(const ExperimentConfig& c) {
  Json j;
  const auto& y = c.synth;
  j["synth"] = {{"n_per_domain", y.n_per_domain},
                {"feature_dim", y.feature_dim},
                {"spurious_dim", y.spurious_dim},
                {"domain_dim", y.domain_dim},
                {"num_labels", y.num_labels},
                {"num_groups", y.num_groups},
                {"num_sources", y.num_sources},
                {"domain_shift_strength", y.domain_shift_strength},
                {"group_bias_strength", y.group_bias_strength},
                {"class_separation", y.class_separation},
                {"seed", y.seed}};
  const auto& x = c.train;
  j["train"] = {{"stage1_epochs", x.stage1_epochs},
                {"stage2_epochs", x.stage2_epochs},
                {"batch_size", x.batch_size},
                {"learning_rate", x.learning_rate},
                {"weight_decay", x.weight_decay},
                {"stage1_learning_rate", x.stage1_learning_rate},
                {"stage1_weight_decay", x.stage1_weight_decay},
                {"lambda_grid", x.lambda_grid},
                {"gamma_grid", x.gamma_grid},
                {"mode", x.mode == SweepMode::kLossConditional ? "loss_conditional" : "per_lambda"},
                {"cap", x.cap},
                {"smoothing_eps", x.smoothing_eps},
                {"best_epoch", x.best_epoch},
                {"log_epochs", x.log_epochs},
                {"penalty_rows", x.penalty_rows},
                {"seed", x.seed},
                {"dims",
                 {{"hidden", x.dims.hidden},
                  {"z_e", x.dims.z_e},
                  {"z_d", x.dims.z_d},
                  {"z_g", x.dims.z_g},
                  {"lambda_scale", x.dims.lambda_scale},
                  {"activation", activation_name(x.dims.activation)}}}};
  j["lambda"] = c.lambda;
  j["gamma"] = c.gamma;
  j["baseline_gamma"] = c.baseline_gamma;
  j["front"] = {{"v_ref", c.front.v_ref},
                {"u_ref", c.front.u_ref},
                {"v_star", c.front.v_star},
                {"u_star", c.front.u_star}};
  return j;
}

void apply_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.synth.seed = seed;
  cfg.train.seed = seed;
}

ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& cfg) {
  ExperimentResult r;
  r.stage1 = stage1_train(data, cfg.train);
  for (double g : cfg.train.gamma_grid) r.candidates.push_back(sweep(data, r.stage1, cfg.train, g));
  r.baseline = sweep(data, r.stage1, cfg.train, cfg.baseline_gamma);
  r.selection = select_gamma(r.candidates);
  for (std::size_t i = 0; i < r.candidates.size(); ++i)
    if (r.candidates[i].gamma == r.selection.gamma) {
      r.selected_index = i;
      break;
    }
  std::vector<double> lam, eod, pen;
  for (const auto& p : r.selected().points) {
    lam.push_back(p.lambda);
    eod.push_back(p.target.eod);
    pen.push_back(p.val_fairness_penalty);
  }
  r.spearman_lambda_eod = spearman(lam, eod);
  r.spearman_lambda_penalty = spearman(lam, pen);
  std::tie(r.hvi_tuned, r.hvi_baseline) =
      compare_hvi(target_points(r.selected()), target_points(r.baseline), cfg.front);
  return r;
}

}  // namespace fairdg::trainer
