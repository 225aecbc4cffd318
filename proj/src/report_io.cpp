#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "scool/errors.hpp"
#include "scool/experiment.hpp"

namespace scool {

using nlohmann::json;

namespace {

using Setter = std::function<void(const json&, ExperimentConfig&)>;

template <class T>
Setter field(T ExperimentConfig::*member, const char* key) {
  return [member, key](const json& v, ExperimentConfig& c) {
    auto fail = [&](const char* want) {
      throw ConfigError(std::string("config key '") + key + "' must be " + want);
    };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail("a boolean");
      c.*member = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail("a string");
      c.*member = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) fail("a number");
      c.*member = v.get<double>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) fail("an integer");
      c.*member = v.get<int>();
    } else {
      if (!v.is_number_unsigned()) fail("a non-negative integer");
      c.*member = v.get<T>();
    }
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"prior", field(&ExperimentConfig::prior, "prior")},
      {"task_setting", field(&ExperimentConfig::task_setting, "task_setting")},
      {"num_clients", field(&ExperimentConfig::num_clients, "num_clients")},
      {"num_classes", field(&ExperimentConfig::num_classes, "num_classes")},
      {"classes_per_client", field(&ExperimentConfig::classes_per_client, "classes_per_client")},
      {"num_groups", field(&ExperimentConfig::num_groups, "num_groups")},
      {"train_samples", field(&ExperimentConfig::train_samples, "train_samples")},
      {"test_samples", field(&ExperimentConfig::test_samples, "test_samples")},
      {"input_dim", field(&ExperimentConfig::input_dim, "input_dim")},
      {"separation", field(&ExperimentConfig::separation, "separation")},
      {"sigma", field(&ExperimentConfig::sigma, "sigma")},
      {"arch", field(&ExperimentConfig::arch, "arch")},
      {"hidden_dim", field(&ExperimentConfig::hidden_dim, "hidden_dim")},
      {"init_scale", field(&ExperimentConfig::init_scale, "init_scale")},
      {"shared_init", field(&ExperimentConfig::shared_init, "shared_init")},
      {"eta1", field(&ExperimentConfig::eta1, "eta1")},
      {"eta2", field(&ExperimentConfig::eta2, "eta2")},
      {"lambda", field(&ExperimentConfig::lambda, "lambda")},
      {"tau_sigmoid", field(&ExperimentConfig::tau_sigmoid, "tau_sigmoid")},
      {"tau_softmax", field(&ExperimentConfig::tau_softmax, "tau_softmax")},
      {"tau_score", field(&ExperimentConfig::tau_score, "tau_score")},
      {"local_steps", field(&ExperimentConfig::local_steps, "local_steps")},
      {"batch_size", field(&ExperimentConfig::batch_size, "batch_size")},
      {"rounds", field(&ExperimentConfig::rounds, "rounds")},
      {"warmup_steps", field(&ExperimentConfig::warmup_steps, "warmup_steps")},
      {"grad_mode", field(&ExperimentConfig::grad_mode, "grad_mode")},
      {"optimizer", field(&ExperimentConfig::optimizer, "optimizer")},
      {"memberships", field(&ExperimentConfig::memberships, "memberships")},
      {"alpha_init", field(&ExperimentConfig::alpha_init, "alpha_init")},
      {"b_within", field(&ExperimentConfig::b_within, "b_within")},
      {"b_between", field(&ExperimentConfig::b_between, "b_between")},
      {"membership_jitter", field(&ExperimentConfig::membership_jitter, "membership_jitter")},
      {"estep_iterations", field(&ExperimentConfig::estep_iterations, "estep_iterations")},
      {"estep_tolerance", field(&ExperimentConfig::estep_tolerance, "estep_tolerance")},
      {"attention_coupling", field(&ExperimentConfig::attention_coupling, "attention_coupling")},
      {"encoder_hidden", field(&ExperimentConfig::encoder_hidden, "encoder_hidden")},
      {"encoder_embed", field(&ExperimentConfig::encoder_embed, "encoder_embed")},
      {"encoder_scale", field(&ExperimentConfig::encoder_scale, "encoder_scale")},
      {"topology", field(&ExperimentConfig::topology, "topology")},
      {"ring_k0", field(&ExperimentConfig::ring_k0, "ring_k0")},
      {"bipartite_degree", field(&ExperimentConfig::bipartite_degree, "bipartite_degree")},
      {"sparsify_keep", field(&ExperimentConfig::sparsify_keep, "sparsify_keep")},
      {"sparsify_round", field(&ExperimentConfig::sparsify_round, "sparsify_round")},
      {"compute_elbo", field(&ExperimentConfig::compute_elbo, "compute_elbo")},
      {"snapshot_every", field(&ExperimentConfig::snapshot_every, "snapshot_every")},
      {"seed", field(&ExperimentConfig::seed, "seed")},
  };
  return table;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

json mask_json(const Mask& mask) {
  json rows = json::array();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    std::vector<int> row(mask.size());
    for (std::size_t j = 0; j < mask.size(); ++j) row[j] = mask(i, j) ? 1 : 0;
    rows.push_back(row);
  }
  return rows;
}

json pair_tensor_json(const PairTensor& t) {
  json out = json::array();
  for (std::size_t i = 0; i < t.clients(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < t.clients(); ++j) {
      row.push_back(std::vector<double>(t.at(i, j).begin(), t.at(i, j).end()));
    }
    out.push_back(row);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json config_to_json(const ExperimentConfig& c) {
  return json{
      {"prior", c.prior},
      {"task_setting", c.task_setting},
      {"num_clients", c.num_clients},
      {"num_classes", c.num_classes},
      {"classes_per_client", c.classes_per_client},
      {"num_groups", c.num_groups},
      {"train_samples", c.train_samples},
      {"test_samples", c.test_samples},
      {"input_dim", c.input_dim},
      {"separation", c.separation},
      {"sigma", c.sigma},
      {"arch", c.arch},
      {"hidden_dim", c.hidden_dim},
      {"init_scale", c.init_scale},
      {"shared_init", c.shared_init},
      {"eta1", c.eta1},
      {"eta2", c.eta2},
      {"lambda", c.lambda},
      {"tau_sigmoid", c.tau_sigmoid},
      {"tau_softmax", c.tau_softmax},
      {"tau_score", c.tau_score},
      {"local_steps", c.local_steps},
      {"batch_size", c.batch_size},
      {"rounds", c.rounds},
      {"warmup_steps", c.warmup_steps},
      {"grad_mode", c.grad_mode},
      {"optimizer", c.optimizer},
      {"memberships", c.memberships},
      {"alpha_init", c.alpha_init},
      {"b_within", c.b_within},
      {"b_between", c.b_between},
      {"membership_jitter", c.membership_jitter},
      {"estep_iterations", c.estep_iterations},
      {"estep_tolerance", c.estep_tolerance},
      {"attention_coupling", c.attention_coupling},
      {"encoder_hidden", c.encoder_hidden},
      {"encoder_embed", c.encoder_embed},
      {"encoder_scale", c.encoder_scale},
      {"topology", c.topology},
      {"ring_k0", c.ring_k0},
      {"bipartite_degree", c.bipartite_degree},
      {"sparsify_keep", c.sparsify_keep},
      {"sparsify_round", c.sparsify_round},
      {"compute_elbo", c.compute_elbo},
      {"snapshot_every", c.snapshot_every},
      {"seed", c.seed},
  };
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value, c);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json state_snapshot(const Simulation& sim) {
  json s;
  s["round"] = sim.completed_rounds();
  s["prior"] = to_string(sim.config().prior);
  s["mask"] = mask_json(sim.mask());
  s["w"] = matrix_json(sim.graph());
  if (const auto* b = sim.sbm()) {
    s["gamma"] = matrix_json(b->gamma);
    s["omega"] = matrix_json(b->omega);
    s["alpha"] = b->alpha;
    s["B"] = matrix_json(b->B);
  }
  if (const auto* b = sim.mmsbm()) {
    s["gamma"] = matrix_json(b->gamma);
    s["phi_send"] = pair_tensor_json(b->phi_send);
    s["phi_recv"] = pair_tensor_json(b->phi_recv);
    s["alpha"] = b->alpha;
    s["B"] = matrix_json(b->B);
  }
  if (const auto* a = sim.attention()) {
    s["p"] = matrix_json(a->p);
    s["encoder_phi"] = a->phi;
  }
  json thetas = json::array();
  for (const auto& m : sim.models()) thetas.push_back(std::vector<double>(m.theta().begin(), m.theta().end()));
  s["theta"] = thetas;
  const auto& ledger = sim.ledger();
  s["ledger"] = {{"total_units", ledger.total_units},
                 {"total_units_shared", ledger.total_units_shared},
                 {"total_scalars", ledger.total_scalars},
                 {"per_client_units", ledger.per_client_units}};
  return s;
}

json report_to_json(const ExperimentReport& r) {
  json rounds = json::array();
  for (const auto& m : r.rounds) {
    rounds.push_back({{"round", m.round},
                      {"mean_acc", m.mean_acc},
                      {"std_acc", m.std_acc},
                      {"mean_train_loss", m.mean_train_loss},
                      {"elbo", m.elbo ? json(*m.elbo) : json(nullptr)},
                      {"l1", m.l1},
                      {"within_group_mass", m.within_group_mass},
                      {"comm_round", m.comm_round},
                      {"comm_total", m.comm_total},
                      {"comm_total_shared", m.comm_total_shared},
                      {"directed_edges", m.directed_edges}});
  }
  double mean = 0.0;
  for (double a : r.final_accuracy) mean += a;
  if (!r.final_accuracy.empty()) mean /= static_cast<double>(r.final_accuracy.size());
  return json{{"schema_version", kReportSchemaVersion},
              {"status", r.diverged ? "diverged" : "ok"},
              {"error", r.error},
              {"seed", r.config.seed},
              {"config", config_to_json(r.config)},
              {"rounds", rounds},
              {"final", {{"per_client_accuracy", r.final_accuracy}, {"mean_acc", mean}}},
              {"w_star", matrix_json(r.w_star)},
              {"final_w", matrix_json(r.final_w)}};
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ostringstream out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
  write_text(path, out.str());
}

void write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", report_to_json(r).dump(2) + "\n");
  std::ostringstream csv;
  csv << "round,mean_acc,std_acc,mean_train_loss,elbo,l1,within_group_mass,comm_round,comm_total,"
         "comm_total_shared,directed_edges\n";
  for (const auto& m : r.rounds) {
    csv << m.round << ',' << format_double(m.mean_acc) << ',' << format_double(m.std_acc) << ','
        << format_double(m.mean_train_loss) << ',' << (m.elbo ? format_double(*m.elbo) : "") << ','
        << format_double(m.l1) << ',' << format_double(m.within_group_mass) << ','
        << format_double(m.comm_round) << ',' << format_double(m.comm_total) << ','
        << format_double(m.comm_total_shared) << ',' << m.directed_edges << '\n';
  }
  write_text(dir / "metrics.csv", csv.str());
  write_text(dir / "timing.json", json{{"wall_seconds", r.wall_seconds}}.dump(2) + "\n");
}

void write_budget_csv(const std::vector<BudgetRow>& rows, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "fraction,mean_acc,std_acc,comm_total\n";
  for (const auto& r : rows) {
    out << format_double(r.fraction) << ',' << format_double(r.mean_acc) << ','
        << format_double(r.std_acc) << ',' << format_double(r.comm_total) << '\n';
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_text(path, out.str());
}

}  // namespace scool
