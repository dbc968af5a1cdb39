// adspoi: preprocess / synth / train / eval / ablate / sweep / gradcheck /
// bench / plot-data over one JSON run config.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "adspoi/config.hpp"
#include "adspoi/dataset.hpp"
#include "adspoi/evaluation.hpp"
#include "adspoi/ingest.hpp"
#include "adspoi/kernels.hpp"
#include "adspoi/parallel.hpp"
#include "adspoi/synth.hpp"
#include "adspoi/training.hpp"

using namespace adspoi;
using nlohmann::json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << text;
}

Dataset dataset_from_synth(const SynthConfig& synth) {
  auto checkins = synth_generate(synth);
  // thresholds of 1: keep every synthetic user/POI, only drop consecutive
  // duplicates the noise kernel may have produced
  return Dataset::from_checkins(preprocess(checkins, 1, 1));
}

struct LoadedData {
  Dataset data;
  std::uint64_t fingerprint = 0;
};

LoadedData load_or_synth(const RunConfig& cfg) {
  LoadedData out;
  if (!cfg.dataset_path.empty()) {
    out.data = load_dataset(cfg.dataset_path);
    out.fingerprint = file_fingerprint(cfg.dataset_path);
    return out;
  }
  if (cfg.synth) {
    out.data = dataset_from_synth(*cfg.synth);
    std::string desc = canonical_json(cfg);
    out.fingerprint = fnv1a64(desc.data(), desc.size());
    return out;
  }
  throw std::runtime_error(
      "config error: dataset_path empty and no synth section");
}

std::string history_csv(const std::vector<EpochStat>& history) {
  std::string csv = "epoch,train_loss,val_mrr\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g\n", h.epoch, h.train_loss,
                  h.val_mrr);
    csv += buf;
  }
  return csv;
}

RunConfig load_config_with_overrides(const std::string& path,
                                     std::optional<std::uint64_t> seed,
                                     bool deterministic) {
  RunConfig cfg = load_config(path);
  if (seed) cfg.seed = *seed;
  if (deterministic) cfg.deterministic = true;
  return cfg;
}

int cmd_preprocess(const std::string& input, const std::string& format,
                   const std::string& output, int min_user, int min_poi) {
  ParseResult parsed;
  if (format == "foursquare")
    parsed = parse_foursquare(input);
  else if (format == "gowalla")
    parsed = parse_gowalla(input);
  else
    throw std::runtime_error("unknown format: " + format);

  if (parsed.skipped > parsed.checkins.size())
    std::cerr << "warning: " << parsed.skipped
              << " lines skipped (more than parsed; wrong --format?)\n";

  auto cleaned = preprocess(parsed.checkins, min_user, min_poi);
  PreprocessSummary s = summarize(parsed.checkins, cleaned);
  Dataset data = Dataset::from_checkins(cleaned);
  save_dataset(output, data);

  json j;
  j["input"] = input;
  j["format"] = format;
  j["parsed"] = parsed.checkins.size();
  j["skipped"] = parsed.skipped;
  j["users_before"] = s.users_before;
  j["users_after"] = s.users_after;
  j["pois_before"] = s.pois_before;
  j["pois_after"] = s.pois_after;
  j["checkins_before"] = s.checkins_before;
  j["checkins_after"] = s.checkins_after;
  j["output"] = output;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_synth(const RunConfig& cfg, const std::string& output) {
  if (!cfg.synth)
    throw std::runtime_error("config error: synth section missing");
  Dataset data = dataset_from_synth(*cfg.synth);
  save_dataset(output, data);
  json j;
  j["users"] = data.users.size();
  j["pois"] = data.n_pois();
  j["checkins"] = data.n_checkins();
  j["output"] = output;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_train(RunConfig cfg, const std::string& out_path,
              const std::string& history_path, const std::string& resume_path) {
  LoadedData ld = load_or_synth(cfg);
  DatasetSplit split = split_leave_one_out(ld.data);

  std::optional<Checkpoint> resume;
  if (!resume_path.empty()) resume = load_checkpoint(resume_path);

  Checkpoint ck = train(ld.data, split, cfg, cfg.seed,
                        resume ? &*resume : nullptr, [](const EpochStat& s) {
                          std::cerr << "epoch " << s.epoch << " train_loss "
                                    << s.train_loss << " val_mrr " << s.val_mrr
                                    << "\n";
                        });
  ck.dataset_fingerprint = ld.fingerprint;
  save_checkpoint(out_path, ck);
  write_text(history_path, history_csv(ck.history));

  json j;
  j["checkpoint"] = out_path;
  j["history"] = history_path;
  j["epochs_run"] = ck.next_epoch;
  j["best_val_mrr"] = ck.best_val_mrr;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& ck_path, const std::string& config_path,
             const std::string& split_name, const std::string& out_json,
             const std::string& out_csv) {
  Checkpoint ck = load_checkpoint(ck_path);
  RunConfig cfg = config_from_json_text(ck.config_canonical);
  if (!config_path.empty()) {
    RunConfig given = load_config(config_path);
    if (config_hash(given) != ck.config_hash)
      throw std::runtime_error("config hash mismatch with checkpoint");
  }
  LoadedData ld = load_or_synth(cfg);
  if (ck.dataset_fingerprint != 0 && ld.fingerprint != ck.dataset_fingerprint)
    throw std::runtime_error("dataset fingerprint mismatch with checkpoint");

  SplitKind kind;
  if (split_name == "val")
    kind = SplitKind::Val;
  else if (split_name == "test")
    kind = SplitKind::Test;
  else
    throw std::runtime_error("--split must be val or test");

  DatasetSplit split = split_leave_one_out(ld.data);
  ModelDims dims = model_dims(cfg, static_cast<int>(ld.data.n_pois()));
  ParameterSet params;
  params.layout = ck.layout;
  params.flat = ck.best_params;
  ModelView view = make_view(dims, params);

  SeedEval ev = evaluate(view, cfg, ld.data, split, kind, env_threads());
  RankingReport rep =
      aggregate_seeds({cfg.seed}, {ev}, ck.config_hash, ld.fingerprint);
  rep.variant = cfg.ablation;
  if (!out_json.empty()) write_text(out_json, report_to_json(rep));
  if (!out_csv.empty()) write_text(out_csv, report_to_csv(rep));
  std::cout << report_to_json(rep) << "\n";
  return 0;
}

int cmd_ablate(RunConfig cfg, const std::string& variant,
               const std::string& out_json) {
  if (!parse_variant(variant))
    throw CLI::ValidationError("--variant",
                               "unknown variant: " + variant);
  cfg.ablation = variant;
  validate(cfg);
  LoadedData ld = load_or_synth(cfg);
  DatasetSplit split = split_leave_one_out(ld.data);
  RankingReport rep = multi_seed(ld.data, split, cfg, cfg.seeds,
                                 SplitKind::Test, env_threads());
  rep.dataset_fingerprint = ld.fingerprint;
  rep.variant = variant;
  if (!out_json.empty()) write_text(out_json, report_to_json(rep));
  std::cout << report_to_json(rep) << "\n";
  return 0;
}

int cmd_sweep(RunConfig cfg, const std::string& axis,
              const std::vector<int>& values, const std::string& out_csv,
              const std::string& out_json) {
  if (axis != "K" && axis != "d")
    throw CLI::ValidationError("--axis", "must be K or d");
  json rows = json::array();
  std::string csv =
      "axis,value,d,HR@10_mean,HR@10_std,NDCG@10_mean,NDCG@10_std,MRR_mean,"
      "MRR_std\n";
  for (int v : values) {
    RunConfig c = cfg;
    if (axis == "K") {
      c.model.K = v;  // d_s fixed; total state dimension scales with K
    } else {
      c.model.K = 1;  // single-state setting
      c.model.d_s = v;
      c.model.d_e = v;
    }
    validate(c);
    LoadedData ld = load_or_synth(c);
    DatasetSplit split = split_leave_one_out(ld.data);
    RankingReport rep =
        multi_seed(ld.data, split, c, c.seeds, SplitKind::Test, env_threads());
    int d_total = axis == "K" ? v * c.model.d_s : v;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                  axis.c_str(), v, d_total, rep.mean.hr10, rep.stddev.hr10,
                  rep.mean.ndcg10, rep.stddev.ndcg10, rep.mean.mrr,
                  rep.stddev.mrr);
    csv += buf;
    json row;
    row["axis"] = axis;
    row["value"] = v;
    row["d"] = d_total;
    row["report"] = json::parse(report_to_json(rep));
    rows.push_back(row);
    std::cerr << axis << "=" << v << " MRR " << rep.mean.mrr << "\n";
  }
  if (!out_csv.empty()) write_text(out_csv, csv);
  if (!out_json.empty()) write_text(out_json, rows.dump(2));
  std::cout << csv;
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, double fd_step, int pois, int trajs,
                  int len) {
  GradCheckReport rep = grad_check(cfg, cfg.seed, fd_step, pois, trajs, len);
  json j;
  j["max_rel_err"] = rep.max_rel_err;
  j["worst_block"] = rep.worst_block;
  j["worst_coord"] = rep.worst_coord;
  j["checked"] = rep.checked;
  j["fd_step"] = rep.fd_step;
  j["pass"] = rep.max_rel_err <= 1e-4;
  std::cout << j.dump(2) << "\n";
  return rep.max_rel_err <= 1e-4 ? 0 : 1;
}

int cmd_bench(const std::string& ck_path, int seq_len, int reps,
              const std::string& out_json) {
  Checkpoint ck = load_checkpoint(ck_path);
  RunConfig cfg = config_from_json_text(ck.config_canonical);
  int n_pois = static_cast<int>(ck.layout.entry("poi_emb").rows);
  ModelDims dims = model_dims(cfg, n_pois);
  ParameterSet params;
  params.layout = ck.layout;
  params.flat = ck.best_params;
  ModelView view = make_view(dims, params);
  BenchResult b = bench(view, cfg, seq_len, reps, cfg.seed);
  std::string text = bench_to_json(b);
  if (!out_json.empty()) write_text(out_json, text);
  std::cout << text << "\n";
  return 0;
}

int cmd_plot_data(const std::vector<std::string>& reports,
                  const std::string& out_csv) {
  std::string csv = "dataset,variant,metric,mean,std\n";
  for (const auto& path : reports) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    RankingReport r = report_from_json(ss.str());
    std::string dataset = r.dataset_name.empty()
                              ? std::to_string(r.dataset_fingerprint)
                              : r.dataset_name;
    auto add = [&](const char* metric, double mean, double std_) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.6g,%.6g\n", dataset.c_str(),
                    r.variant.c_str(), metric, mean, std_);
      csv += buf;
    };
    add("HR@5", r.mean.hr5, r.stddev.hr5);
    add("HR@10", r.mean.hr10, r.stddev.hr10);
    add("NDCG@5", r.mean.ndcg5, r.stddev.ndcg5);
    add("NDCG@10", r.mean.ndcg10, r.stddev.ndcg10);
    add("MRR", r.mean.mrr, r.stddev.mrr);
  }
  if (!out_csv.empty()) write_text(out_csv, csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"next point-of-interest recommender pipeline"};
  app.require_subcommand(1);

  std::string config_path, input, format = "foursquare", output, resume_path;
  std::string ck_path, split_name = "test", out_json, out_csv, variant = "full";
  std::string axis = "K", history_path;
  std::vector<std::string> report_paths;
  std::vector<int> axis_values;
  std::optional<std::uint64_t> seed_override;
  std::vector<std::uint64_t> seeds_override;
  bool deterministic = false;
  int min_user = 10, min_poi = 10, seq_len = 128, reps = 100;
  int gc_pois = 40, gc_trajs = 3, gc_len = 5;
  double fd_step = 1e-4;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "run config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--seed", seed_override, "override config seed");
    sub->add_flag("--deterministic", deterministic,
                  "force the deterministic flag on");
  };

  auto* pre = app.add_subcommand("preprocess", "parse + clean raw check-ins");
  pre->add_option("--input", input, "raw TSV file")->required();
  pre->add_option("--format", format, "foursquare|gowalla");
  pre->add_option("--output", output, "dataset file to write")->required();
  pre->add_option("--min-user", min_user, "min check-ins per user");
  pre->add_option("--min-poi", min_poi, "min check-ins per POI");

  auto* syn = app.add_subcommand("synth", "generate synthetic mobility data");
  add_common(syn, true);
  syn->add_option("--out", output, "dataset file to write")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr, true);
  tr->add_option("--out", ck_path, "checkpoint path")->default_val("checkpoint.bin");
  tr->add_option("--history", history_path, "history CSV path");
  tr->add_option("--resume", resume_path, "checkpoint to resume from");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ck_path, "checkpoint path")->required();
  ev->add_option("--config", config_path, "config to verify against");
  ev->add_option("--split", split_name, "val|test");
  ev->add_option("--out", out_json, "report JSON path");
  ev->add_option("--csv", out_csv, "report CSV path");

  auto* ab = app.add_subcommand("ablate", "train + evaluate one variant");
  add_common(ab, true);
  ab->add_option("--variant", variant,
                 "full|monolithic|single_small|uniform_agg|homogeneous")
      ->required();
  ab->add_option("--seeds", seeds_override, "override config seeds");
  ab->add_option("--out", out_json, "report JSON path");

  auto* sw = app.add_subcommand("sweep", "hyperparameter sensitivity sweep");
  add_common(sw, true);
  sw->add_option("--axis", axis, "K|d")->required();
  sw->add_option("--values", axis_values, "axis values")->required();
  sw->add_option("--out", out_csv, "table CSV path");
  sw->add_option("--json", out_json, "table JSON path");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gc, true);
  gc->add_option("--fd-step", fd_step, "central difference step");
  gc->add_option("--pois", gc_pois, "catalog size");
  gc->add_option("--trajs", gc_trajs, "number of trajectories");
  gc->add_option("--len", gc_len, "trajectory length");

  auto* be = app.add_subcommand("bench", "single-query efficiency benchmark");
  be->add_option("--checkpoint", ck_path, "checkpoint path")->required();
  be->add_option("--seq-len", seq_len, "rollout length");
  be->add_option("--reps", reps, "measured repetitions");
  be->add_option("--out", out_json, "bench JSON path");

  auto* pd = app.add_subcommand("plot-data", "merge reports into a tidy CSV");
  pd->add_option("reports", report_paths, "report JSON files")->required();
  pd->add_option("--out", out_csv, "tidy CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) return cmd_preprocess(input, format, output, min_user, min_poi);
    if (*syn) {
      RunConfig cfg =
          load_config_with_overrides(config_path, seed_override, deterministic);
      if (seed_override && cfg.synth) cfg.synth->seed = *seed_override;
      return cmd_synth(cfg, output);
    }
    if (*tr) {
      RunConfig cfg =
          load_config_with_overrides(config_path, seed_override, deterministic);
      if (history_path.empty()) history_path = ck_path + ".history.csv";
      return cmd_train(cfg, ck_path, history_path, resume_path);
    }
    if (*ev) return cmd_eval(ck_path, config_path, split_name, out_json, out_csv);
    if (*ab) {
      RunConfig cfg =
          load_config_with_overrides(config_path, seed_override, deterministic);
      if (!seeds_override.empty()) cfg.seeds = seeds_override;
      return cmd_ablate(cfg, variant, out_json);
    }
    if (*sw) {
      RunConfig cfg =
          load_config_with_overrides(config_path, seed_override, deterministic);
      return cmd_sweep(cfg, axis, axis_values, out_csv, out_json);
    }
    if (*gc) {
      RunConfig cfg =
          load_config_with_overrides(config_path, seed_override, deterministic);
      return cmd_gradcheck(cfg, fd_step, gc_pois, gc_trajs, gc_len);
    }
    if (*be) return cmd_bench(ck_path, seq_len, reps, out_json);
    if (*pd) return cmd_plot_data(report_paths, out_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
