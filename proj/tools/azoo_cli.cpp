// Command-line front end. Talks to the library only through the C API.
#include <azoo/azoo.h>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

constexpr int kUsageExit = 2;

// Library failures exit with 10 + status, internal failures with 70.
struct Failure {
  azoo_status status;
};

void check(azoo_status s) {
  if (s != AZOO_OK) throw Failure{s};
}

int exit_code(azoo_status s) { return s == AZOO_ERR_INTERNAL ? 70 : 10 + static_cast<int>(s); }

struct ModelPtr {
  azoo_model* p = nullptr;
  ~ModelPtr() { azoo_model_free(p); }
};

struct RolloutList {
  std::vector<azoo_rollout*> items;
  ~RolloutList() {
    for (auto* r : items) azoo_rollout_free(r);
  }
};

azoo_model* load_model(const std::string& path, ModelPtr& holder) {
  check(azoo_model_load(path.c_str(), &holder.p));
  return holder.p;
}

azoo_rollout* load_rollout(const std::string& dir, RolloutList& list) {
  azoo_rollout* r = nullptr;
  check(azoo_rollout_load(dir.c_str(), &r));
  list.items.push_back(r);
  return r;
}

void emit(char* json, const std::string& out_path) {
  std::unique_ptr<char, decltype(&azoo_string_free)> owned(json, azoo_string_free);
  if (out_path.empty() || out_path == "-") {
    std::cout << json << "\n";
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  f << json << "\n";
  if (!f) throw CLI::ValidationError("cannot write " + out_path);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// "LABEL=dir1,dir2" -> (LABEL, [dir1, dir2])
std::pair<std::string, std::vector<std::string>> labelled_dirs(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
    throw CLI::ValidationError("expected LABEL=DIR[,DIR...], got '" + spec + "'");
  return {spec.substr(0, eq), split(spec.substr(eq + 1), ',')};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Introspection toolkit for frozen pixel-input policy networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(azoo_version()));

  // inspect
  std::string inspect_model;
  auto* inspect = app.add_subcommand("inspect", "Print a model's metadata, spec and tensor directory");
  inspect->add_option("model", inspect_model, "Frozen model file")->required();

  // validate
  std::string validate_model;
  auto* validate = app.add_subcommand("validate", "Check a model container against its declared spec");
  validate->add_option("model", validate_model, "Frozen model file")->required();

  // make-model
  std::string mk_head = "q", mk_game = "catch", mk_alg = "other", mk_run = "0", mk_ckpt = "final", mk_out;
  int mk_actions = 4;
  std::uint64_t mk_seed = 0;
  auto* make = app.add_subcommand("make-model", "Write a randomly initialized model");
  make->add_option("-o,--output", mk_out, "Output model file")->required();
  make->add_option("--head", mk_head, "q | dueling | c51 | actor_critic")->capture_default_str();
  make->add_option("--actions", mk_actions, "Number of actions")->capture_default_str();
  make->add_option("--game", mk_game)->capture_default_str();
  make->add_option("--algorithm", mk_alg)->capture_default_str();
  make->add_option("--run-id", mk_run)->capture_default_str();
  make->add_option("--checkpoint", mk_ckpt, "final | initial | human_level | hours:N | frames:N")->capture_default_str();
  make->add_option("--seed", mk_seed)->capture_default_str();

  // rollout
  std::string ro_model, ro_out, ro_env = "catch";
  int ro_steps = 2500;
  std::uint64_t ro_seed = 0;
  bool ro_sampling = false, ro_capture = false;
  auto* rollout = app.add_subcommand("rollout", "Play one episode and write a rollout archive");
  rollout->add_option("model", ro_model)->required();
  rollout->add_option("-o,--output", ro_out, "Archive directory")->required();
  rollout->add_option("--env", ro_env)->capture_default_str();
  rollout->add_option("--steps", ro_steps, "Maximum steps")->capture_default_str()->check(CLI::PositiveNumber);
  rollout->add_option("--seed", ro_seed)->capture_default_str();
  rollout->add_flag("--sampling", ro_sampling, "Sample actions instead of taking the argmax");
  rollout->add_flag("--capture", ro_capture, "Store per-step activations");

  // filters
  std::string fl_model, fl_png;
  auto* filters = app.add_subcommand("filters", "First-layer temporal profile and filter mosaic");
  filters->add_option("model", fl_model)->required();
  filters->add_option("--png", fl_png, "Write the filter mosaic here");

  // temporal-bias
  std::vector<std::string> tb_models;
  auto* tbias = app.add_subcommand("temporal-bias", "Rank models by first-layer present-frame bias");
  tbias->add_option("models", tb_models)->required();

  // robustness
  std::vector<std::string> rb_models;
  std::string rb_kind = "observation", rb_env = "catch", rb_norm = "algorithm_best", rb_out;
  std::vector<double> rb_sigmas;
  int rb_episodes = 3, rb_steps = 2500;
  std::uint64_t rb_seed = 0;
  auto* robust = app.add_subcommand("robustness", "Score-vs-noise sweeps with normalization");
  robust->add_option("models", rb_models)->required();
  robust->add_option("--kind", rb_kind, "observation | parameter")->capture_default_str();
  robust->add_option("--sigmas", rb_sigmas, "Noise levels (default schedule when omitted)")->delimiter(',');
  robust->add_option("--episodes", rb_episodes)->capture_default_str()->check(CLI::PositiveNumber);
  robust->add_option("--steps", rb_steps)->capture_default_str()->check(CLI::PositiveNumber);
  robust->add_option("--seed", rb_seed)->capture_default_str();
  robust->add_option("--env", rb_env)->capture_default_str();
  robust->add_option("--normalization", rb_norm, "algorithm_best | overall_best")->capture_default_str();
  robust->add_option("-o,--output", rb_out, "JSON output (stdout when omitted)");

  // classify
  std::vector<std::string> cl_classes;
  azoo_classify_options cl_opts{};
  std::string cl_png, cl_out;
  auto* classify = app.add_subcommand("classify", "Train and evaluate a frame classifier between rollout sources");
  classify->add_option("--class", cl_classes, "LABEL=DIR[,DIR...] (repeat per class)")->required();
  classify->add_option("--frames", cl_opts.frames_per_model, "Frames per rollout (default 2501)");
  classify->add_option("--epochs", cl_opts.max_epochs, "Maximum epochs (default 50)");
  classify->add_option("--patience", cl_opts.patience, "Early-stopping patience (default 5)");
  classify->add_option("--batch", cl_opts.batch_size, "Batch size (default 64)");
  classify->add_option("--lr", cl_opts.learning_rate, "Learning rate (default 1e-4)");
  classify->add_option("--seed", cl_opts.seed);
  classify->add_option("--confusion", cl_png, "Write a confusion heatmap PNG");
  classify->add_option("-o,--output", cl_out, "JSON output (stdout when omitted)");

  // embed
  std::vector<std::string> em_rollouts;
  std::string em_model, em_layer = "fc", em_out;
  azoo_embed_options em_opts{};
  auto* embed = app.add_subcommand("embed", "PCA + t-SNE embedding of RAM states, or of one layer with --model");
  embed->add_option("rollouts", em_rollouts, "Rollout directories")->required();
  embed->add_option("-o,--output", em_out, "Export directory")->required();
  embed->add_option("--model", em_model, "Embed this model's activations instead of RAM");
  embed->add_option("--layer", em_layer, "conv1..conv3 | fc | head_raw | q")->capture_default_str();
  embed->add_option("--pca-dims", em_opts.pca_dims, "default 50");
  embed->add_option("--perplexity", em_opts.perplexity, "default 30");
  embed->add_option("--iterations", em_opts.iterations, "default 3000");
  embed->add_option("--seed", em_opts.seed);

  // patches
  std::string pa_model, pa_rollout, pa_png, pa_json;
  int pa_layer = 1, pa_filter = 0;
  std::size_t pa_k = 16;
  auto* patches = app.add_subcommand("patches", "Top-k maximally activating input patches of one filter");
  patches->add_option("model", pa_model)->required();
  patches->add_option("rollout", pa_rollout)->required();
  patches->add_option("--layer", pa_layer)->capture_default_str();
  patches->add_option("--filter", pa_filter)->capture_default_str();
  patches->add_option("-k,--top", pa_k)->capture_default_str();
  patches->add_option("--png", pa_png, "Contact sheet output");
  patches->add_option("-o,--output", pa_json, "JSON output (stdout when omitted)");

  // dream
  std::string dr_model, dr_objective = "q:0", dr_png, dr_csv;
  azoo_dream_options dr_opts{0, 0.0, -1, 0.0, 0.0, 0, 0};
  bool dr_plain = false;
  auto* dream = app.add_subcommand("dream", "Synthesize an input maximizing one neuron");
  dream->add_option("model", dr_model)->required();
  dream->add_option("--objective", dr_objective, "q:A | head_raw:U | fc:U | convL:C | convL:C@Y,X")->capture_default_str();
  dream->add_option("--iterations", dr_opts.iterations, "default 512");
  dream->add_option("--step", dr_opts.step, "default 0.05");
  dream->add_option("--jitter", dr_opts.jitter, "default 4");
  dream->add_option("--tv", dr_opts.tv_weight);
  dream->add_option("--l1", dr_opts.l1_weight);
  dream->add_option("--seed", dr_opts.seed);
  dream->add_flag("--plain", dr_plain, "Plain gradient ascent instead of Adam");
  dream->add_option("--png", dr_png, "Four-frame strip output")->required();
  dream->add_option("--csv", dr_csv, "Objective history output");

  // render-trace
  std::string rt_model, rt_rollout, rt_out;
  std::size_t rt_first = 0, rt_count = static_cast<std::size_t>(-1);
  auto* rtrace = app.add_subcommand("render-trace", "Numbered PNG montage frames of a captured rollout");
  rtrace->add_option("model", rt_model)->required();
  rtrace->add_option("rollout", rt_rollout)->required();
  rtrace->add_option("-o,--output", rt_out, "Frame directory")->required();
  rtrace->add_option("--first", rt_first)->capture_default_str();
  rtrace->add_option("--count", rt_count, "Frames to render (default all)");

  // render-grid
  std::vector<std::string> rg_rows;
  std::vector<std::string> rg_columns;
  std::size_t rg_step = 0;
  std::string rg_out;
  auto* rgrid = app.add_subcommand("render-grid", "Tile one step of many rollouts (rows = runs, columns = algorithms)");
  rgrid->add_option("--row", rg_rows, "LABEL=DIR,DIR,... (one per row)")->required();
  rgrid->add_option("--columns", rg_columns, "Column labels")->delimiter(',')->required();
  rgrid->add_option("--step", rg_step)->capture_default_str();
  rgrid->add_option("-o,--output", rg_out, "PNG output")->required();

  // serve
  std::string sv_dir, sv_host = "127.0.0.1";
  int sv_port = 8000;
  auto* serve = app.add_subcommand("serve", "Read-only HTTP server for exported data");
  serve->add_option("dir", sv_dir)->required();
  serve->add_option("--host", sv_host)->capture_default_str();
  serve->add_option("--port", sv_port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageExit;
  }

  try {
    if (*inspect) {
      ModelPtr m;
      char* json = nullptr;
      check(azoo_model_describe(load_model(inspect_model, m), &json));
      emit(json, "");
    } else if (*validate) {
      char* json = nullptr;
      std::size_t n = 0;
      check(azoo_model_validate_file(validate_model.c_str(), &json, &n));
      emit(json, "");
      if (n > 0) {
        std::cerr << "error: spec_inconsistent: " << n << " violation(s)\n";
        return exit_code(AZOO_ERR_SPEC_INCONSISTENT);
      }
    } else if (*make) {
      ModelPtr m;
      check(azoo_model_make_random(mk_head.c_str(), mk_actions, mk_game.c_str(), mk_alg.c_str(), mk_run.c_str(),
                                   mk_ckpt.c_str(), mk_seed, &m.p));
      check(azoo_model_save(m.p, mk_out.c_str()));
    } else if (*rollout) {
      ModelPtr m;
      RolloutList rl;
      azoo_rollout* r = nullptr;
      check(azoo_rollout_record(load_model(ro_model, m), ro_env.c_str(), ro_steps, ro_sampling ? 1 : 0, ro_seed,
                                ro_capture ? 1 : 0, &r));
      rl.items.push_back(r);
      check(azoo_rollout_save(r, ro_out.c_str()));
      std::size_t len = 0;
      double score = 0.0;
      check(azoo_rollout_length(r, &len));
      check(azoo_rollout_final_score(r, &score));
      std::cout << "steps " << len << " score " << score << "\n";
    } else if (*filters) {
      ModelPtr m;
      double mag[4], bias = 0.0;
      check(azoo_temporal_profile(load_model(fl_model, m), mag, &bias));
      std::printf("frame t-3 %.6f\nframe t-2 %.6f\nframe t-1 %.6f\nframe t   %.6f\npresent_bias %.6f\n", mag[0], mag[1],
                  mag[2], mag[3], bias);
      if (!fl_png.empty()) check(azoo_filters_png(m.p, fl_png.c_str()));
    } else if (*tbias) {
      std::vector<std::pair<double, std::string>> rows;
      for (const auto& path : tb_models) {
        ModelPtr m;
        double bias = 0.0;
        check(azoo_temporal_profile(load_model(path, m), nullptr, &bias));
        rows.emplace_back(bias, path);
      }
      std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      for (const auto& [bias, path] : rows) std::printf("%.6f\t%s\n", bias, path.c_str());
    } else if (*robust) {
      std::vector<ModelPtr> holders(rb_models.size());
      std::vector<const azoo_model*> ms;
      for (std::size_t i = 0; i < rb_models.size(); ++i) ms.push_back(load_model(rb_models[i], holders[i]));
      char* json = nullptr;
      check(azoo_robustness(ms.data(), ms.size(), rb_kind.c_str(), rb_env.c_str(), rb_sigmas.data(), rb_sigmas.size(),
                            rb_episodes, rb_steps, rb_seed, rb_norm.c_str(), &json));
      emit(json, rb_out);
    } else if (*classify) {
      RolloutList rl;
      std::vector<std::string> labels;
      for (const auto& spec : cl_classes) {
        const auto [label, dirs] = labelled_dirs(spec);
        for (const auto& d : dirs) {
          load_rollout(d, rl);
          labels.push_back(label);
        }
      }
      std::vector<const char*> label_ptrs;
      for (const auto& l : labels) label_ptrs.push_back(l.c_str());
      std::vector<const azoo_rollout*> rs(rl.items.begin(), rl.items.end());
      char* json = nullptr;
      check(azoo_classify(rs.data(), label_ptrs.data(), rs.size(), &cl_opts, cl_png.empty() ? nullptr : cl_png.c_str(),
                          &json));
      emit(json, cl_out);
    } else if (*embed) {
      RolloutList rl;
      for (const auto& d : em_rollouts) load_rollout(d, rl);
      if (!em_model.empty()) {
        if (rl.items.size() != 1) throw CLI::ValidationError("--model embeds exactly one rollout");
        ModelPtr m;
        check(azoo_embed_hidden(load_model(em_model, m), rl.items[0], em_layer.c_str(), &em_opts, em_out.c_str()));
      } else {
        std::vector<const azoo_rollout*> rs(rl.items.begin(), rl.items.end());
        check(azoo_embed_ram(rs.data(), rs.size(), &em_opts, em_out.c_str()));
      }
    } else if (*patches) {
      ModelPtr m;
      RolloutList rl;
      char* json = nullptr;
      check(azoo_patches(load_model(pa_model, m), load_rollout(pa_rollout, rl), pa_layer, pa_filter, pa_k,
                         pa_png.empty() ? nullptr : pa_png.c_str(), &json));
      emit(json, pa_json);
    } else if (*dream) {
      ModelPtr m;
      dr_opts.plain_ascent = dr_plain ? 1 : 0;
      check(azoo_dream(load_model(dr_model, m), dr_objective.c_str(), &dr_opts, nullptr, dr_png.c_str(),
                       dr_csv.empty() ? nullptr : dr_csv.c_str()));
    } else if (*rtrace) {
      ModelPtr m;
      RolloutList rl;
      check(azoo_render_trace(load_model(rt_model, m), load_rollout(rt_rollout, rl), rt_first, rt_count, rt_out.c_str()));
    } else if (*rgrid) {
      RolloutList rl;
      std::vector<std::string> row_labels;
      std::vector<const azoo_rollout*> cells;
      for (const auto& spec : rg_rows) {
        const auto [label, dirs] = labelled_dirs(spec);
        if (dirs.size() != rg_columns.size())
          throw CLI::ValidationError("row '" + label + "' has " + std::to_string(dirs.size()) + " rollouts for " +
                                     std::to_string(rg_columns.size()) + " columns");
        row_labels.push_back(label);
        for (const auto& d : dirs) cells.push_back(load_rollout(d, rl));
      }
      std::vector<const char*> rp, cp;
      for (const auto& l : row_labels) rp.push_back(l.c_str());
      for (const auto& l : rg_columns) cp.push_back(l.c_str());
      check(azoo_render_grid(cells.data(), row_labels.size(), rg_columns.size(), rp.data(), cp.data(), rg_step,
                             rg_out.c_str()));
    } else if (*serve) {
      check(azoo_serve(sv_dir.c_str(), sv_host.c_str(), sv_port));
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << azoo_status_name(f.status) << ": " << azoo_last_error() << "\n";
    return exit_code(f.status);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return kUsageExit;
  }
  return 0;
}
