#include "adspoi/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace adspoi {

using nlohmann::json;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Monolithic: return "monolithic";
    case Variant::SingleSmall: return "single_small";
    case Variant::UniformAgg: return "uniform_agg";
    case Variant::Homogeneous: return "homogeneous";
  }
  return "full";
}

std::optional<Variant> parse_variant(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "monolithic") return Variant::Monolithic;
  if (s == "single_small") return Variant::SingleSmall;
  if (s == "uniform_agg") return Variant::UniformAgg;
  if (s == "homogeneous") return Variant::Homogeneous;
  return std::nullopt;
}

Variant RunConfig::variant() const {
  auto v = parse_variant(ablation);
  if (!v) throw std::runtime_error("unknown ablation variant: " + ablation);
  return *v;
}

namespace {

void fail(const std::string& field, const std::string& why) {
  throw std::runtime_error("config error: " + field + " " + why);
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      fail(key, "has the wrong type");
    }
  }
}

json synth_to_json(const SynthConfig& s) {
  json j;
  j["users"] = s.users;
  j["steps_per_user"] = s.steps_per_user;
  j["start_epoch"] = s.start_epoch;
  j["step_hours_min"] = s.step_hours_min;
  j["step_hours_max"] = s.step_hours_max;
  j["seed"] = s.seed;
  json regs = json::array();
  for (const auto& r : s.regimes) {
    json rj;
    json windows = json::array();
    for (auto [a, b] : r.hour_windows) windows.push_back(json::array({a, b}));
    rj["hour_windows"] = windows;
    rj["n_pois"] = r.n_pois;
    rj["poi_start"] = r.poi_start;
    rj["center_lat"] = r.center_lat;
    rj["center_lon"] = r.center_lon;
    rj["spread_km"] = r.spread_km;
    rj["kernel"] = r.kernel == SynthKernel::Cycle ? "cycle" : "uniform";
    rj["noise"] = r.noise;
    regs.push_back(rj);
  }
  j["regimes"] = regs;
  return j;
}

SynthConfig synth_from_json(const json& j) {
  SynthConfig s;
  read_field(j, "users", s.users);
  read_field(j, "steps_per_user", s.steps_per_user);
  read_field(j, "start_epoch", s.start_epoch);
  read_field(j, "step_hours_min", s.step_hours_min);
  read_field(j, "step_hours_max", s.step_hours_max);
  read_field(j, "seed", s.seed);
  if (auto it = j.find("regimes"); it != j.end()) {
    for (const auto& rj : *it) {
      RegimeSpec r;
      if (auto w = rj.find("hour_windows"); w != rj.end()) {
        for (const auto& ab : *w) {
          if (!ab.is_array() || ab.size() != 2)
            fail("synth.regimes.hour_windows", "entries must be [a, b]");
          r.hour_windows.emplace_back(ab[0].get<double>(),
                                      ab[1].get<double>());
        }
      }
      read_field(rj, "n_pois", r.n_pois);
      read_field(rj, "poi_start", r.poi_start);
      read_field(rj, "center_lat", r.center_lat);
      read_field(rj, "center_lon", r.center_lon);
      read_field(rj, "spread_km", r.spread_km);
      std::string kernel = "cycle";
      read_field(rj, "kernel", kernel);
      if (kernel == "cycle")
        r.kernel = SynthKernel::Cycle;
      else if (kernel == "uniform")
        r.kernel = SynthKernel::Uniform;
      else
        fail("synth.regimes.kernel", "must be 'cycle' or 'uniform'");
      read_field(rj, "noise", r.noise);
      s.regimes.push_back(std::move(r));
    }
  }
  return s;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["dataset_path"] = c.dataset_path;
  j["model"] = {{"d_e", c.model.d_e},
                {"K", c.model.K},
                {"d_s", c.model.d_s},
                {"d_slot", c.model.d_slot},
                {"d_dist", c.model.d_dist},
                {"d_spatial", c.model.d_spatial},
                {"n_slot", c.model.n_slot},
                {"bucket_edges_km", c.model.bucket_edges_km}};
  j["dynamics"] = {{"tau_t_s", c.dynamics.tau_t_s},
                   {"tau_d_km", c.dynamics.tau_d_km},
                   {"temperature", c.dynamics.temperature},
                   {"decay_init", c.dynamics.decay_init},
                   {"decay_stagger", c.dynamics.decay_stagger}};
  j["objective"] = {{"n_neg", c.objective.n_neg},
                    {"label_smoothing", c.objective.label_smoothing},
                    {"k_hard", c.objective.k_hard},
                    {"margin", c.objective.margin},
                    {"bpr_weight", c.objective.bpr_weight},
                    {"sampler", c.objective.sampler}};
  j["optimizer"] = {{"lr", c.optimizer.lr},
                    {"batch_size", c.optimizer.batch_size},
                    {"dropout", c.optimizer.dropout},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"epochs", c.optimizer.epochs},
                    {"patience", c.optimizer.patience},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps}};
  j["seed"] = c.seed;
  j["seeds"] = c.seeds;
  j["ablation"] = c.ablation;
  j["deterministic"] = c.deterministic;
  j["max_seq_len"] = c.max_seq_len;
  j["val_sample_pois"] = c.val_sample_pois;
  if (c.synth) j["synth"] = synth_to_json(*c.synth);
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  read_field(j, "dataset_path", c.dataset_path);
  if (auto it = j.find("model"); it != j.end()) {
    read_field(*it, "d_e", c.model.d_e);
    read_field(*it, "K", c.model.K);
    read_field(*it, "d_s", c.model.d_s);
    read_field(*it, "d_slot", c.model.d_slot);
    read_field(*it, "d_dist", c.model.d_dist);
    read_field(*it, "d_spatial", c.model.d_spatial);
    read_field(*it, "n_slot", c.model.n_slot);
    read_field(*it, "bucket_edges_km", c.model.bucket_edges_km);
  }
  if (auto it = j.find("dynamics"); it != j.end()) {
    read_field(*it, "tau_t_s", c.dynamics.tau_t_s);
    read_field(*it, "tau_d_km", c.dynamics.tau_d_km);
    read_field(*it, "temperature", c.dynamics.temperature);
    read_field(*it, "decay_init", c.dynamics.decay_init);
    read_field(*it, "decay_stagger", c.dynamics.decay_stagger);
  }
  if (auto it = j.find("objective"); it != j.end()) {
    read_field(*it, "n_neg", c.objective.n_neg);
    read_field(*it, "label_smoothing", c.objective.label_smoothing);
    read_field(*it, "k_hard", c.objective.k_hard);
    read_field(*it, "margin", c.objective.margin);
    read_field(*it, "bpr_weight", c.objective.bpr_weight);
    read_field(*it, "sampler", c.objective.sampler);
  }
  if (auto it = j.find("optimizer"); it != j.end()) {
    read_field(*it, "lr", c.optimizer.lr);
    read_field(*it, "batch_size", c.optimizer.batch_size);
    read_field(*it, "dropout", c.optimizer.dropout);
    read_field(*it, "weight_decay", c.optimizer.weight_decay);
    read_field(*it, "epochs", c.optimizer.epochs);
    read_field(*it, "patience", c.optimizer.patience);
    read_field(*it, "beta1", c.optimizer.beta1);
    read_field(*it, "beta2", c.optimizer.beta2);
    read_field(*it, "eps", c.optimizer.eps);
  }
  read_field(j, "seed", c.seed);
  read_field(j, "seeds", c.seeds);
  read_field(j, "ablation", c.ablation);
  read_field(j, "deterministic", c.deterministic);
  read_field(j, "max_seq_len", c.max_seq_len);
  read_field(j, "val_sample_pois", c.val_sample_pois);
  if (auto it = j.find("synth"); it != j.end() && !it->is_null())
    c.synth = synth_from_json(*it);
  return c;
}

}  // namespace

void validate(const RunConfig& c) {
  if (c.model.d_e < 1) fail("model.d_e", "must be >= 1");
  if (c.model.K < 1) fail("model.K", "must be >= 1");
  if (c.model.d_s < 1) fail("model.d_s", "must be >= 1");
  if (c.model.d_slot < 1) fail("model.d_slot", "must be >= 1");
  if (c.model.d_dist < 1) fail("model.d_dist", "must be >= 1");
  if (c.model.d_spatial < 1) fail("model.d_spatial", "must be >= 1");
  if (c.model.n_slot != 48) fail("model.n_slot", "must be 48 (hour x weekend)");
  if (c.model.bucket_edges_km.empty())
    fail("model.bucket_edges_km", "must not be empty");
  for (std::size_t i = 0; i < c.model.bucket_edges_km.size(); ++i) {
    double e = c.model.bucket_edges_km[i];
    if (e <= 0) fail("model.bucket_edges_km", "edges must be positive");
    if (i > 0 && e <= c.model.bucket_edges_km[i - 1])
      fail("model.bucket_edges_km", "edges must be strictly increasing");
  }
  if (c.dynamics.tau_t_s <= 0) fail("dynamics.tau_t_s", "must be > 0");
  if (c.dynamics.tau_d_km <= 0) fail("dynamics.tau_d_km", "must be > 0");
  if (c.dynamics.temperature <= 0) fail("dynamics.temperature", "must be > 0");
  if (c.objective.n_neg < 1) fail("objective.n_neg", "must be >= 1");
  if (c.objective.label_smoothing < 0 || c.objective.label_smoothing >= 1)
    fail("objective.label_smoothing", "must be in [0, 1)");
  if (c.objective.k_hard < 1) fail("objective.k_hard", "must be >= 1");
  if (c.objective.k_hard > c.objective.n_neg)
    fail("objective.k_hard", "must be <= objective.n_neg");
  if (c.objective.margin < 0) fail("objective.margin", "must be >= 0");
  if (c.objective.bpr_weight < 0) fail("objective.bpr_weight", "must be >= 0");
  if (c.objective.sampler != "uniform") {
    if (c.objective.sampler == "popularity")
      fail("objective.sampler", "'popularity' is not implemented; use 'uniform'");
    fail("objective.sampler", "must be 'uniform'");
  }
  if (c.optimizer.lr <= 0) fail("optimizer.lr", "must be > 0");
  if (c.optimizer.batch_size < 1) fail("optimizer.batch_size", "must be >= 1");
  if (c.optimizer.dropout < 0 || c.optimizer.dropout >= 1)
    fail("optimizer.dropout", "must be in [0, 1)");
  if (c.optimizer.weight_decay < 0)
    fail("optimizer.weight_decay", "must be >= 0");
  if (c.optimizer.epochs < 1) fail("optimizer.epochs", "must be >= 1");
  if (c.optimizer.patience < 0) fail("optimizer.patience", "must be >= 0");
  if (c.max_seq_len < 2) fail("max_seq_len", "must be >= 2");
  if (c.val_sample_pois < 0) fail("val_sample_pois", "must be >= 0");
  if (!parse_variant(c.ablation)) fail("ablation", "unknown variant");
  if (c.synth) ::adspoi::validate(*c.synth);
}

RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config parse error: ") + e.what());
  }
  RunConfig c = config_from_json(j);
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string canonical_json(const RunConfig& cfg) {
  // nlohmann objects are key-sorted; dumping the fully-populated struct
  // makes an explicit default and an omitted field hash identically
  return config_to_json(cfg).dump();
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::string s = canonical_json(cfg);
  return fnv1a64(s.data(), s.size());
}

ModelDims model_dims(const RunConfig& cfg, int n_pois) {
  ModelDims d;
  d.n_pois = n_pois;
  d.d_e = cfg.model.d_e;
  d.K = cfg.model.K;
  d.d_s = cfg.model.d_s;
  switch (cfg.variant()) {
    case Variant::Monolithic:
      d.d_s = cfg.model.K * cfg.model.d_s;  // one state of the full width
      d.K = 1;
      break;
    case Variant::SingleSmall:
      d.K = 1;  // one state of the per-state width
      break;
    default:
      break;
  }
  d.d_slot = cfg.model.d_slot;
  d.d_dist = cfg.model.d_dist;
  d.d_sp = cfg.model.d_spatial;
  d.n_slot = cfg.model.n_slot;
  d.n_bucket = static_cast<int>(cfg.model.bucket_edges_km.size()) + 1;
  return d;
}

}  // namespace adspoi
