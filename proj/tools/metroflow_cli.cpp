// metroflow: synthetic data, training, grid experiments and diagnostics.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "metroflow/error.hpp"
#include "metroflow/experiments/experiments.hpp"
#include "metroflow/util/csv.hpp"

namespace fs = std::filesystem;
using namespace metroflow;

namespace {

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::shape: return 10;
    case ErrorCategory::contract: return 11;
    case ErrorCategory::construction: return 12;
    case ErrorCategory::data: return 13;
    case ErrorCategory::reference: return 14;
    case ErrorCategory::config: return 15;
    case ErrorCategory::training: return 16;
    case ErrorCategory::io: return 17;
    case ErrorCategory::diagnostic: return 18;
  }
  return 1;
}

int report_error(std::string_view category, const std::string& message, int code) {
  nlohmann::json j;
  j["error"] = {{"category", category}, {"message", message}};
  std::cerr << j.dump() << "\n";
  return code;
}

struct DataOptions {
  std::string dir;
  bool synthetic = false;
  SynthParams synth;

  void add(CLI::App& app) {
    app.add_option("--data", dir, "Directory with traffic.csv, social.csv, edges.csv, lines.csv");
    app.add_flag("--synthetic", synthetic, "Generate the dataset instead of loading it");
    app.add_option("--stations", synth.n_stations, "Synthetic station count")->capture_default_str();
    app.add_option("--lines", synth.n_lines, "Synthetic line count")->capture_default_str();
    app.add_option("--data-seed", synth.seed, "Synthetic generator seed")->capture_default_str();
  }

  StationDataset load() const {
    if (synthetic == !dir.empty()) {
      fail(ErrorCategory::config, "give exactly one of --data or --synthetic");
    }
    if (synthetic) return synthesize_dataset(synth);
    return load_dataset(DatasetPaths::in_directory(dir));
  }
};

template <typename T>
std::vector<T> parse_list(const std::string& text, auto parse_one) {
  std::vector<T> out;
  for (const auto& item : csv::split(text)) {
    if (!item.empty()) out.push_back(parse_one(item));
  }
  return out;
}

int parse_int_arg(const std::string& s) {
  try {
    return static_cast<int>(csv::parse_int(s, "list"));
  } catch (const Error& e) {
    fail(ErrorCategory::config, e.what());
  }
}

void write_json(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out << text << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metro passenger-flow prediction with k-hop GraphSAGE"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  SynthParams sp;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--stations", sp.n_stations)->capture_default_str();
  synth->add_option("--years", sp.n_years)->capture_default_str();
  synth->add_option("--lines", sp.n_lines)->capture_default_str();
  synth->add_option("--seed", sp.seed)->capture_default_str();
  synth->add_option("--coupled-timestamp", sp.coupled_timestamp)->capture_default_str();
  synth->add_option("--alpha", sp.alpha)->capture_default_str();
  synth->add_option("--beta", sp.beta)->capture_default_str();
  synth->add_option("--coupling-hops", sp.coupling_hops)->capture_default_str();
  synth->add_option("--sharpness", sp.kernel_sharpness)->capture_default_str();
  synth->add_option("--noise", sp.noise)->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  DataOptions train_data;
  train_data.add(*train_cmd);
  std::string train_config, train_out, variant, task_name, sampling_rate;
  std::optional<int> k, epochs, layers;
  std::optional<std::uint64_t> seed;
  int log_every = 0;
  train_cmd->add_option("--config", train_config, "key = value run configuration");
  train_cmd->add_option("--variant", variant);
  train_cmd->add_option("--k", k);
  train_cmd->add_option("--sampling-rate", sampling_rate);
  train_cmd->add_option("--task", task_name, "e.g. mid-entry");
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--layers", layers);
  train_cmd->add_option("--log-every", log_every, "Print an epoch line every N epochs");
  train_cmd->add_option("--out", train_out, "Output directory")->required();

  // grid
  auto* grid = app.add_subcommand("grid", "Run a variant x hop x task x seed grid");
  DataOptions grid_data;
  grid_data.add(*grid);
  std::string grid_config, grid_out, grid_variants, grid_hops, grid_tasks, grid_seeds;
  bool grid_full = false;
  std::optional<int> grid_epochs;
  std::size_t threads = 1;
  grid->add_option("--config", grid_config, "key = value settings shared by all cells");
  grid->add_flag("--full", grid_full, "Every variant, hops 1..10, all ten tasks");
  grid->add_option("--variants", grid_variants, "Comma list, e.g. main_body,kh_0.9");
  grid->add_option("--hops", grid_hops, "Comma list of k");
  grid->add_option("--tasks", grid_tasks, "Comma list, e.g. mid-entry,mid-exit");
  grid->add_option("--seeds", grid_seeds, "Comma list of seeds");
  grid->add_option("--epochs", grid_epochs);
  grid->add_option("--threads", threads)->capture_default_str();
  grid->add_option("--out", grid_out, "Output directory")->required();

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "Over-smoothing diagnostic on a dense k-hop region");
  DataOptions diag_data;
  diag_data.add(*diagnose);
  experiments::DiagnosticSpec dspec;
  std::string diag_out, diag_zones = "1", diag_center, diag_task = "mid-entry", diag_seeds;
  int radius = -1;
  diagnose->add_option("--zones", diag_zones, "Comma list of zones to keep")->capture_default_str();
  diagnose->add_option("--center", diag_center, "Keep stations within --radius of this station");
  diagnose->add_option("--radius", radius);
  diagnose->add_option("--k", dspec.k)->capture_default_str();
  diagnose->add_option("--task", diag_task)->capture_default_str();
  diagnose->add_option("--seeds", diag_seeds, "Comma list of seeds");
  diagnose->add_option("--epochs", dspec.epochs)->capture_default_str();
  diagnose->add_option("--out", diag_out, "Output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "Render tables and plots from a results.csv");
  std::string report_in, report_out;
  report->add_option("--results", report_in, "results.csv")->required();
  report->add_option("--out", report_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("usage", e.what(), 2);
  }

  try {
    if (synth->parsed()) {
      const StationDataset d = synthesize_dataset(sp);
      save_dataset(d, DatasetPaths::in_directory(synth_out));
      std::cout << "wrote " << d.num_stations() << " stations x " << d.num_years() << " years to "
                << synth_out << "\n";
    } else if (train_cmd->parsed()) {
      const StationDataset d = train_data.load();
      model::RunConfig run;
      if (!train_config.empty()) run = model::load_run_config(train_config);
      std::string overrides;
      if (!variant.empty()) overrides += "variant = " + variant + "\n";
      if (k) overrides += "k = " + std::to_string(*k) + "\n";
      if (!sampling_rate.empty()) overrides += "sampling_rate = " + sampling_rate + "\n";
      if (!task_name.empty()) overrides += "task = " + task_name + "\n";
      if (seed) overrides += "seed = " + std::to_string(*seed) + "\n";
      if (epochs) overrides += "epochs = " + std::to_string(*epochs) + "\n";
      if (layers) overrides += "layers = " + std::to_string(*layers) + "\n";
      run = model::parse_run_config(overrides, run);

      model::Model m = model::assemble(run.model, d);
      const auto split = train::split_years(d.years(), run.model.seed);
      train::TrainOptions options;
      if (log_every > 0) {
        options.on_epoch = [&](const train::EpochRecord& r) {
          if (r.epoch % log_every == 0) {
            std::fprintf(stderr, "epoch %d loss %.6g val_mape %.4f\n", r.epoch, r.train_loss,
                         r.val_mape);
          }
        };
      }
      const auto rep = train::train(m, d, run, split, options);
      const fs::path out(train_out);
      fs::create_directories(out);
      write_json(out / "report.json", rep.to_json());
      {
        csv::Writer w(out / "report.csv");
        w.row(csv::split(train::TrainReport::csv_header()));
        w.row(csv::split(rep.csv_row()));
        w.close();
      }
      {
        csv::Writer w(out / "predictions.csv");
        w.row({"station_id", "year", "truth", "prediction"});
        for (int year : split.test_years) {
          const auto pred = model::predict_task(m, d, year, run.task);
          const auto truth = build_task(d, year, run.task);
          for (std::size_t s = 0; s < d.num_stations(); ++s) {
            w.row({d.stations()[s], std::to_string(year), csv::format_double(truth.target(s, 0)),
                   csv::format_double(pred[s])});
          }
        }
        w.close();
      }
      model::save_checkpoint(m, run, out / "model.ckpt");
      std::cout << rep.csv_row() << "\n";
    } else if (grid->parsed()) {
      const StationDataset d = grid_data.load();
      auto spec = grid_full ? experiments::GridSpec::full() : experiments::GridSpec::reduced_default();
      if (!grid_config.empty()) spec.base = model::load_run_config(grid_config);
      spec.epochs = grid_epochs.value_or(spec.base.epochs);
      if (!grid_variants.empty()) {
        spec.variants = parse_list<experiments::VariantSpec>(
            grid_variants, [](const std::string& s) { return experiments::VariantSpec::parse(s); });
      }
      if (!grid_hops.empty()) spec.hops = parse_list<int>(grid_hops, parse_int_arg);
      if (!grid_tasks.empty()) {
        spec.tasks = parse_list<Task>(grid_tasks, [](const std::string& s) {
          try {
            return Task::parse(s);
          } catch (const Error& e) {
            fail(ErrorCategory::config, e.what());
          }
        });
      }
      if (!grid_seeds.empty()) {
        spec.seeds = parse_list<std::uint64_t>(
            grid_seeds, [](const std::string& s) { return std::uint64_t(parse_int_arg(s)); });
      }
      spec.threads = threads;
      const std::size_t total = spec.num_cells();
      std::size_t done = 0;
      const auto result = experiments::run_grid(spec, d, [&](const experiments::ResultRow& r) {
        ++done;
        std::fprintf(stderr, "[%zu/%zu] %s k=%d %s seed=%llu %s test_mape=%.4f (%.1fs)\n", done,
                     total, r.variant.label().c_str(), r.k, r.task.name().c_str(),
                     static_cast<unsigned long long>(r.seed), r.ok ? "ok" : "FAILED", r.test_mape,
                     r.wall_time);
      });
      experiments::emit_report(result, grid_out);
      for (const auto& b : experiments::best_hops(result)) {
        std::printf("%-22s %-10s best k=%d median test MAPE %.3f%%\n", b.variant.c_str(),
                    b.task.name().c_str(), b.k, b.median_test_mape);
      }
    } else if (diagnose->parsed()) {
      const StationDataset d = diag_data.load();
      try {
        dspec.task = Task::parse(diag_task);
      } catch (const Error& e) {
        fail(ErrorCategory::config, e.what());
      }
      if (!diag_seeds.empty()) {
        dspec.seeds = parse_list<std::uint64_t>(
            diag_seeds, [](const std::string& s) { return std::uint64_t(parse_int_arg(s)); });
      }
      std::vector<std::size_t> stations;
      if (!diag_center.empty()) {
        if (radius < 0) fail(ErrorCategory::config, "--center needs --radius");
        stations = experiments::select_ball(d, d.station_index(diag_center), radius);
      } else {
        stations = experiments::select_zones(d, parse_list<int>(diag_zones, parse_int_arg));
      }
      const auto rep = experiments::oversmoothing_diagnostic(d, stations, dspec);
      experiments::emit_report(rep, diag_out);
      std::printf("%zu stations, %zu adjacent to all others at k=%d\n", rep.stations.size(),
                  rep.fully_connected.size(), rep.k);
      for (const auto& r : rep.runs) {
        std::printf("seed %llu: GCN test MAPE %.3f%%, SAGE test MAPE %.3f%%\n",
                    static_cast<unsigned long long>(r.seed), r.gcn_test_mape, r.sage_test_mape);
      }
    } else if (report->parsed()) {
      experiments::emit_report(experiments::read_results(report_in), report_out);
    }
  } catch (const TrainingError& e) {
    return report_error(to_string(e.category()),
                        std::string(e.what()) + " (epoch " + std::to_string(e.epoch()) + ")",
                        exit_code(e.category()));
  } catch (const Error& e) {
    return report_error(to_string(e.category()), e.what(), exit_code(e.category()));
  } catch (const fs::filesystem_error& e) {
    return report_error("io", e.what(), exit_code(ErrorCategory::io));
  }
  return 0;
}
