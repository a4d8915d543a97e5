#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xsr/ablation.hpp"
#include "xsr/dataset.hpp"
#include "xsr/drr.hpp"
#include "xsr/error.hpp"
#include "xsr/service.hpp"
#include "xsr/spectrum.hpp"
#include "xsr/train.hpp"
#include "xsr/volume.hpp"

namespace fs = std::filesystem;
using namespace xsr;

namespace {

// Expands `--config FILE` into `--key=value` tokens placed before the
// remaining flags, so explicit flags win (options keep their last value).
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> out;
  std::vector<std::string> from_file;
  std::size_t insert_at = std::string::npos;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      if (insert_at == std::string::npos && !args[i].empty() && args[i][0] != '-') insert_at = out.size();
      continue;
    }
    std::ifstream f(path);
    if (!f) throw DataError("cannot read config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto a = line.find_first_not_of(" \t\r");
      if (a == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail_arg(path + ":" + std::to_string(lineno) + ": expected key = value");
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      std::string key = trim(line.substr(0, eq));
      for (char& c : key)
        if (c == '_') c = '-';
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) fail_arg(path + ":" + std::to_string(lineno) + ": empty key");
      if (value.find_first_of(" \t") == std::string::npos) {
        from_file.push_back("--" + key + "=" + value);
      } else {
        // Multi-value options (dims, spacing).
        from_file.push_back("--" + key);
        std::istringstream vs(value);
        for (std::string v; vs >> v;) from_file.push_back(v);
      }
    }
  }
  if (insert_at == std::string::npos) insert_at = out.size();
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(insert_at), from_file.begin(), from_file.end());
  return out;
}

fs::path header_path_for(const fs::path& out) {
  fs::path p = out;
  if (!p.has_extension()) p += ".hdr";
  return p;
}

CtVolume volume_or_phantom(const std::string& path, std::uint64_t phantom_seed) {
  if (!path.empty()) return load_volume(path);
  return generate_phantom(head_phantom_spec(phantom_seed));
}

// A dataset root holds train/ and test/; a plain dataset directory is used as is.
fs::path split_dir(const fs::path& root, const char* split) {
  if (fs::exists(root / split / "manifest.tsv")) return root / split;
  if (fs::exists(root / "manifest.tsv")) return root;
  throw DataError("no dataset found at " + root.string() + " (expected " + (root / split / "manifest.tsv").string() +
                  ")");
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

struct Common {
  int threads = 0;
  void add(CLI::App* sub) {
    sub->add_option("--threads", threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  }
  void apply() const {
    if (threads > 0) omp_set_num_threads(threads);
  }
};

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"X-ray DRR rendering and frequency-domain-loss super-resolution"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all");
  app.add_flag_function("--version", [](std::int64_t) {
    std::cout << kVersion << "\n";
    throw CLI::Success();
  });
  Common common;

  // phantom
  auto* ph = app.add_subcommand("phantom", "Generate the procedural head phantom");
  std::uint64_t ph_seed = 0;
  std::vector<int> ph_dims{256, 256, 256};
  std::vector<double> ph_spacing{kHeadSpacingMm, kHeadSpacingMm, kHeadSpacingMm};
  std::string ph_out;
  ph->add_option("--seed", ph_seed);
  ph->add_option("--dims", ph_dims)->expected(3);
  ph->add_option("--spacing", ph_spacing)->expected(3);
  ph->add_option("--out", ph_out, "header path (.hdr added when no extension)")->required();

  // render
  auto* rd = app.add_subcommand("render", "Render one DRR view");
  std::string rd_volume, rd_out;
  double rd_rx = 0, rd_ry = 0, mu_water = OpacityLut{}.mu_water;
  int rd_size = 512;
  rd->add_option("--volume", rd_volume, "volume header (default: built-in phantom)");
  rd->add_option("--rx", rd_rx, "rotation about x, degrees");
  rd->add_option("--ry", rd_ry, "rotation about y, degrees");
  rd->add_option("--size", rd_size)->check(CLI::Range(8, 8192));
  rd->add_option("--mu-water", mu_water)->check(CLI::PositiveNumber);
  rd->add_option("--out", rd_out, ".png for 8-bit PNG, otherwise 16-bit PGM");
  common.add(rd);

  // dataset
  auto* ds = app.add_subcommand("dataset", "Render train/test pairs");
  std::string ds_volume, ds_out;
  DatasetSpec spec;
  ds->add_option("--volume", ds_volume, "volume header (default: built-in phantom)");
  ds->add_option("--out", ds_out)->required();
  ds->add_option("--grid-n", spec.grid_n);
  ds->add_option("--step", spec.step_deg, "training grid step, degrees");
  ds->add_option("--test-step", spec.test_step_deg, "test lattice step, degrees");
  ds->add_option("--test-count", spec.test_count);
  ds->add_option("--seed", spec.seed);
  ds->add_option("--series", spec.series);
  ds->add_option("--view-size", spec.view_size);
  ds->add_option("--ref-range", spec.ref_rotation_range, "reference rotation range, +/- degrees");
  ds->add_flag("--with-ref", spec.with_ref, "also write re-rendered reference views");
  ds->add_option("--mu-water", mu_water)->check(CLI::PositiveNumber);
  common.add(ds);

  // train
  auto* tr = app.add_subcommand("train", "Train the SR network");
  std::string tr_data, tr_out, tr_history;
  TrainConfig tcfg;
  tr->add_option("--data", tr_data, "dataset root or directory")->required();
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->add_option("--history", tr_history, "history file (default: <out>.history.tsv)");
  tr->add_option("--epochs", tcfg.epochs);
  tr->add_option("--lr", tcfg.learning_rate);
  tr->add_option("--batch", tcfg.batch_size);
  tr->add_option("--seed", tcfg.seed);
  tr->add_option("--lambda-rec", tcfg.loss.lambda_rec);
  tr->add_option("--lambda-fd", tcfg.loss.lambda_fd);
  tr->add_option("--crop", tcfg.crop, "training window side, 0 = whole patch");
  tr->add_option("--ema", tcfg.ema_decay, "decay of the validated weight average, 0 = raw iterate");
  tr->add_flag("--parallel", tcfg.parallel, "run batch samples on separate threads");
  common.add(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint against bicubic");
  std::string ev_model, ev_data;
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--data", ev_data, "dataset root or directory")->required();
  common.add(ev);

  // spectrum
  auto* sp = app.add_subcommand("spectrum", "Shifted log-magnitude spectrum of an image");
  std::string sp_in, sp_out;
  sp->add_option("--in", sp_in)->required();
  sp->add_option("--out", sp_out)->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train configurations A/B/C and report");
  std::string ab_data, ab_out;
  int ab_seeds = 3;
  AblationOptions aopt;
  aopt.base.parallel = true;
  ab->add_option("--data", ab_data, "dataset root with train/ and test/")->required();
  ab->add_option("--out", ab_out, "report directory")->required();
  ab->add_option("--seeds", ab_seeds, "number of seeds (0..k-1)")->check(CLI::PositiveNumber);
  ab->add_option("--epochs", aopt.base.epochs);
  ab->add_option("--lr", aopt.base.learning_rate);
  ab->add_option("--batch", aopt.base.batch_size);
  ab->add_option("--crop", aopt.base.crop);
  ab->add_option("--ema", aopt.base.ema_decay);
  ab->add_option("--spectrum-view", aopt.spectrum_view);
  common.add(ab);

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP service for the viewer");
  std::string sv_volume, sv_model, sv_static, sv_host = "127.0.0.1";
  int sv_port = 8080;
  sv->add_option("--volume", sv_volume, "volume header (default: built-in phantom)");
  sv->add_option("--model", sv_model, "checkpoint enabling mode=sr");
  sv->add_option("--static", sv_static, "viewer assets served from /");
  sv->add_option("--host", sv_host);
  sv->add_option("--port", sv_port)->check(CLI::Range(0, 65535));
  sv->add_option("--mu-water", mu_water)->check(CLI::PositiveNumber);
  common.add(sv);

  std::vector<std::string> args = expand_config(argc, argv);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  common.apply();
  OpacityLut lut;
  lut.mu_water = mu_water;

  if (*ph) {
    PhantomSpec s = head_phantom_spec(ph_seed, {ph_dims[0], ph_dims[1], ph_dims[2]},
                                      {ph_spacing[0], ph_spacing[1], ph_spacing[2]});
    s.validate();
    const fs::path hdr = header_path_for(ph_out);
    ensure_parent(hdr);
    save_volume(generate_phantom(s), hdr);
    std::cout << "header=" << hdr.string() << "\n";
    return 0;
  }

  if (*rd) {
    ViewPose pose;
    pose.theta_x = rd_rx;
    pose.theta_y = rd_ry;
    pose.det_w = pose.det_h = rd_size;
    pose.validate();
    const CtVolume vol = volume_or_phantom(rd_volume, 0);
    const auto t0 = std::chrono::steady_clock::now();
    const Image img = render_view(vol, lut, rd_rx, rd_ry, rd_size);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!rd_out.empty()) {
      ensure_parent(rd_out);
      write_image(img, rd_out);
    }
    std::printf("time_ms=%.3f\n", ms);
    return 0;
  }

  if (*ds) {
    spec.validate();
    const CtVolume vol = volume_or_phantom(ds_volume, 0);
    const fs::path root = ds_out;
    for (ViewMode mode : {ViewMode::train, ViewMode::test}) {
      const std::vector<View> views = generate_views(vol, lut, spec, mode);
      std::vector<SamplePair> pairs = mode == ViewMode::train ? training_pairs(views, spec) : test_pairs(views, spec);
      std::vector<Image> refs;
      if (spec.with_ref) {
        for (std::size_t v = 0; v < views.size(); ++v) {
          const Image ref = quantize16(generate_reference(vol, lut, views[v].pose, spec, v));
          if (mode == ViewMode::train) {
            for (const Image& p : crop_patches(ref, spec)) refs.push_back(p);
          } else {
            refs.push_back(ref);
          }
        }
      }
      const char* name = mode == ViewMode::train ? "train" : "test";
      write_dataset(pairs, root / name, spec.with_ref ? &refs : nullptr);
      std::cout << name << "_views=" << views.size() << "\t" << name << "_pairs=" << pairs.size() << "\n";
    }
    return 0;
  }

  if (*tr) {
    tcfg.validate();
    const std::vector<SamplePair> pairs = read_dataset(split_dir(tr_data, "train"));
    const TrainResult res = train(pairs, tcfg);
    ensure_parent(tr_out);
    save_checkpoint(res.weights, tr_out);
    write_meta(CheckpointMeta{tcfg.loss, loss_label(tcfg.loss), tcfg.seed, tcfg.epochs}, tr_out);
    write_history(res.history, tr_history.empty() ? tr_out + ".history.tsv" : tr_history);
    const EpochRecord& best = res.history.epochs[res.history.best_epoch - 1];
    std::printf("best_epoch=%d\tval_psnr=%.9g\tval_bicubic_psnr=%.9g\n", best.epoch, best.val_psnr,
                res.val_bicubic.psnr_mean);
    return 0;
  }

  if (*ev) {
    const Weights<float> w = load_checkpoint(ev_model);
    const CheckpointMeta meta = read_meta(ev_model);
    const std::vector<SamplePair> pairs = read_dataset(split_dir(ev_data, "test"));
    const EvalReport rep = evaluate(w, pairs);
    std::cout << "method\tpsnr\tssim\tfd\tn\n"
              << report_line(meta.label, rep.model) << "\n"
              << report_line("bicubic", rep.bicubic) << "\n";
    return 0;
  }

  if (*sp) {
    const Image img = read_image(sp_in);
    ensure_parent(sp_out);
    write_image(log_magnitude(img), sp_out);
    return 0;
  }

  if (*ab) {
    aopt.base.validate();
    aopt.seeds.clear();
    for (int s = 0; s < ab_seeds; ++s) aopt.seeds.push_back(static_cast<std::uint64_t>(s));
    aopt.out = ab_out;
    const fs::path root = ab_data;
    const std::vector<SamplePair> train_pairs = read_dataset(split_dir(root, "train"));
    if (!fs::exists(root / "test" / "manifest.tsv")) throw DataError("ablation needs " + (root / "test").string());
    const std::vector<SamplePair> test = read_dataset(root / "test");
    const AblationReport rep = run_ablation(train_pairs, test, aopt);
    std::cout << format_ablation(rep);
    return 0;
  }

  if (*sv) {
    std::optional<Weights<float>> model;
    if (!sv_model.empty()) model = load_checkpoint(sv_model);
    auto state = std::make_shared<const ServiceState>(volume_or_phantom(sv_volume, 0), lut, std::move(model));
    HttpService http(state, sv_static);
    const int port = http.bind(sv_host, sv_port);
    if (port < 0) throw DataError("cannot bind " + sv_host + ":" + std::to_string(sv_port));
    std::cout << "listening=http://" << sv_host << ":" << port << std::endl;
    return http.run() ? 0 : 2;
  }
  return 1;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
