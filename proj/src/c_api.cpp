#include "azoo/azoo.h"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <algorithm>
#include <memory>
#include <new>
#include <string>

#include "distinguisher.hpp"
#include "dreamer.hpp"
#include "embedding.hpp"
#include "error.hpp"
#include "filters.hpp"
#include "fileio.hpp"
#include "json_io.hpp"
#include "patches.hpp"
#include "render.hpp"
#include "robustness.hpp"
#include "serve.hpp"

struct azoo_model {
  azoo::FrozenModel model;
};

struct azoo_rollout {
  azoo::Rollout rollout;
};

struct azoo_server {
  std::unique_ptr<azoo::StaticServer> server;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

azoo_status status_for(azoo::ErrorKind kind) noexcept {
  using azoo::ErrorKind;
  switch (kind) {
    case ErrorKind::InvalidArgument: return AZOO_ERR_INVALID_ARGUMENT;
    case ErrorKind::Shape: return AZOO_ERR_SHAPE;
    case ErrorKind::Config: return AZOO_ERR_CONFIG;
    case ErrorKind::OutOfRange: return AZOO_ERR_OUT_OF_RANGE;
    case ErrorKind::Io: return AZOO_ERR_IO;
    case ErrorKind::BadMagic: return AZOO_ERR_BAD_MAGIC;
    case ErrorKind::UnsupportedVersion: return AZOO_ERR_UNSUPPORTED_VERSION;
    case ErrorKind::ChecksumMismatch: return AZOO_ERR_CHECKSUM;
    case ErrorKind::Truncated: return AZOO_ERR_TRUNCATED;
    case ErrorKind::Malformed: return AZOO_ERR_MALFORMED;
    case ErrorKind::SpecInconsistent: return AZOO_ERR_SPEC_INCONSISTENT;
    case ErrorKind::MissingStream: return AZOO_ERR_MISSING_STREAM;
    case ErrorKind::LengthMismatch: return AZOO_ERR_LENGTH_MISMATCH;
    case ErrorKind::Degenerate: return AZOO_ERR_DEGENERATE;
    case ErrorKind::InsufficientData: return AZOO_ERR_INSUFFICIENT_DATA;
  }
  return AZOO_ERR_INTERNAL;
}

template <class F>
azoo_status guarded(F&& body) noexcept {
  try {
    body();
    return AZOO_OK;
  } catch (const azoo::Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return AZOO_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AZOO_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return AZOO_ERR_INTERNAL;
  }
}

template <class T>
const T& need(const T* p, const char* what) {
  if (!p) azoo::fail(azoo::ErrorKind::InvalidArgument, std::string(what) + " is NULL");
  return *p;
}

template <class T>
T& need_out(T* p, const char* what) {
  if (!p) azoo::fail(azoo::ErrorKind::InvalidArgument, std::string(what) + " is NULL");
  return *p;
}

std::string need_str(const char* s, const char* what) {
  if (!s) azoo::fail(azoo::ErrorKind::InvalidArgument, std::string(what) + " is NULL");
  return s;
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json rect_json(const azoo::PixelRect& r) { return {{"x", r.x}, {"y", r.y}, {"width", r.width}, {"height", r.height}}; }

std::vector<const azoo::Rollout*> unwrap(const azoo_rollout* const* rollouts, std::size_t n) {
  if (n > 0 && !rollouts) azoo::fail(azoo::ErrorKind::InvalidArgument, "rollout list is NULL");
  std::vector<const azoo::Rollout*> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(&need(rollouts[i], "rollout").rollout);
  return out;
}

}  // namespace

extern "C" {

const char* azoo_version(void) { return "1.0.0"; }

const char* azoo_status_name(azoo_status status) {
  switch (status) {
    case AZOO_OK: return "ok";
    case AZOO_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case AZOO_ERR_SHAPE: return "shape";
    case AZOO_ERR_CONFIG: return "config";
    case AZOO_ERR_OUT_OF_RANGE: return "out_of_range";
    case AZOO_ERR_IO: return "io";
    case AZOO_ERR_BAD_MAGIC: return "bad_magic";
    case AZOO_ERR_UNSUPPORTED_VERSION: return "unsupported_version";
    case AZOO_ERR_CHECKSUM: return "checksum_mismatch";
    case AZOO_ERR_TRUNCATED: return "truncated";
    case AZOO_ERR_MALFORMED: return "malformed";
    case AZOO_ERR_SPEC_INCONSISTENT: return "spec_inconsistent";
    case AZOO_ERR_MISSING_STREAM: return "missing_stream";
    case AZOO_ERR_LENGTH_MISMATCH: return "length_mismatch";
    case AZOO_ERR_DEGENERATE: return "degenerate";
    case AZOO_ERR_INSUFFICIENT_DATA: return "insufficient_data";
    case AZOO_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* azoo_last_error(void) { return g_last_error.c_str(); }

void azoo_string_free(char* s) { std::free(s); }

azoo_status azoo_model_load(const char* path, azoo_model** out) {
  return guarded([&] {
    auto& o = need_out(out, "out");
    o = nullptr;
    auto m = std::make_unique<azoo_model>(azoo_model{azoo::load_model(need_str(path, "path"))});
    o = m.release();
  });
}

azoo_status azoo_model_save(const azoo_model* model, const char* path) {
  return guarded([&] { azoo::save_model(need(model, "model").model, need_str(path, "path")); });
}

azoo_status azoo_model_make_random(const char* head, int n_actions, const char* game, const char* algorithm,
                                   const char* run_id, const char* checkpoint, uint64_t seed, azoo_model** out) {
  return guarded([&] {
    auto& o = need_out(out, "out");
    o = nullptr;
    const auto spec = azoo::make_spec(azoo::parse_head_kind(head ? head : "q"), n_actions);
    azoo::ModelMeta meta;
    if (game) meta.game = game;
    if (algorithm) meta.algorithm = azoo::parse_algorithm(algorithm);
    if (run_id) meta.run_id = run_id;
    if (checkpoint) meta.checkpoint = azoo::CheckpointTag::parse(checkpoint);
    o = new azoo_model{azoo::make_random_model(spec, meta, seed)};
  });
}

void azoo_model_free(azoo_model* model) { delete model; }

azoo_status azoo_model_describe(const azoo_model* model, char** json_out) {
  return guarded([&] {
    const auto& m = need(model, "model").model;
    auto& o = need_out(json_out, "json_out");
    json tensors = json::array();
    std::size_t count = 0;
    for (const auto& [name, t] : m.tensors) {
      tensors.push_back({{"name", name}, {"shape", t.shape()}});
      count += t.size();
    }
    json j = {{"meta", azoo::to_json(m.meta)},
              {"spec", azoo::to_json(m.spec)},
              {"tensors", tensors},
              {"parameter_count", count},
              {"conv_output_sizes", m.spec.conv_output_sizes()},
              {"flat_size", m.spec.flat_size()}};
    o = dup(j.dump(2));
  });
}

azoo_status azoo_model_validate_file(const char* path, char** json_out, size_t* n_violations) {
  return guarded([&] {
    auto& o = need_out(json_out, "json_out");
    const auto m = azoo::load_model(need_str(path, "path"), false);
    const auto violations = azoo::validate_model(m);
    static constexpr const char* kinds[] = {"invalid_spec", "missing", "wrong_shape", "extra", "non_finite"};
    json arr = json::array();
    for (const auto& v : violations)
      arr.push_back({{"kind", kinds[static_cast<int>(v.kind)]},
                     {"tensor", v.tensor},
                     {"expected", v.expected},
                     {"actual", v.actual},
                     {"message", v.message()}});
    if (n_violations) *n_violations = violations.size();
    o = dup(arr.dump(2));
  });
}

azoo_status azoo_rollout_record(const azoo_model* model, const char* env_id, int max_steps, int sampling, uint64_t seed,
                                int capture_activations, azoo_rollout** out) {
  return guarded([&] {
    auto& o = need_out(out, "out");
    o = nullptr;
    if (max_steps < 1) azoo::fail(azoo::ErrorKind::Config, "max_steps must be at least 1");
    auto env = azoo::make_env(env_id ? env_id : "catch");
    azoo::RecordOptions opts;
    opts.max_steps = max_steps;
    opts.mode = sampling ? azoo::PolicyMode::Sampling : azoo::PolicyMode::Greedy;
    opts.seed = seed;
    opts.capture_activations = capture_activations != 0;
    o = new azoo_rollout{azoo::record_rollout(need(model, "model").model, *env, opts)};
  });
}

azoo_status azoo_rollout_save(const azoo_rollout* rollout, const char* dir) {
  return guarded([&] { azoo::save_rollout(need(rollout, "rollout").rollout, need_str(dir, "dir")); });
}

azoo_status azoo_rollout_load(const char* dir, azoo_rollout** out) {
  return guarded([&] {
    auto& o = need_out(out, "out");
    o = nullptr;
    o = new azoo_rollout{azoo::load_rollout(need_str(dir, "dir"))};
  });
}

void azoo_rollout_free(azoo_rollout* rollout) { delete rollout; }

azoo_status azoo_rollout_length(const azoo_rollout* rollout, size_t* out) {
  return guarded([&] { need_out(out, "out") = need(rollout, "rollout").rollout.size(); });
}

azoo_status azoo_rollout_final_score(const azoo_rollout* rollout, double* out) {
  return guarded([&] {
    const auto& r = need(rollout, "rollout").rollout;
    need_out(out, "out") = r.steps.empty() ? 0.0 : r.steps.back().score;
  });
}

azoo_status azoo_rollout_has_activations(const azoo_rollout* rollout, int* out) {
  return guarded([&] { need_out(out, "out") = need(rollout, "rollout").rollout.traces.has_value() ? 1 : 0; });
}

azoo_status azoo_temporal_profile(const azoo_model* model, double magnitudes[4], double* present_bias) {
  return guarded([&] {
    const auto profile = azoo::temporal_profile(need(model, "model").model);
    if (magnitudes)
      for (int i = 0; i < 4; ++i) magnitudes[i] = profile.magnitude[static_cast<std::size_t>(i)];
    if (present_bias) *present_bias = azoo::present_bias(profile);
  });
}

azoo_status azoo_filters_png(const azoo_model* model, const char* png_path) {
  return guarded([&] { azoo::write_png(azoo::render_filter_mosaic(need(model, "model").model), need_str(png_path, "png_path")); });
}

azoo_status azoo_robustness(const azoo_model* const* models, size_t n_models, const char* kind, const char* env_id,
                            const double* sigmas, size_t n_sigmas, int episodes, int max_steps, uint64_t seed,
                            const char* normalization, char** json_out) {
  return guarded([&] {
    auto& o = need_out(json_out, "json_out");
    if (n_models == 0 || !models) azoo::fail(azoo::ErrorKind::InvalidArgument, "no models given");
    const std::string k = kind ? kind : "observation";
    if (k != "observation" && k != "parameter") azoo::fail(azoo::ErrorKind::Config, "unknown noise kind '" + k + "'");
    const std::string norm = normalization ? normalization : "algorithm_best";
    azoo::NormalizationMode mode;
    if (norm == "algorithm_best")
      mode = azoo::NormalizationMode::AlgorithmBest;
    else if (norm == "overall_best")
      mode = azoo::NormalizationMode::OverallBest;
    else
      azoo::fail(azoo::ErrorKind::Config, "unknown normalization '" + norm + "'");
    std::vector<double> sig;
    if (sigmas && n_sigmas > 0)
      sig.assign(sigmas, sigmas + n_sigmas);
    else
      sig = k == "observation" ? azoo::kDefaultObservationSigmas : azoo::kDefaultParameterSigmas;

    const auto factory = azoo::env_factory(env_id ? env_id : "catch", max_steps);
    const azoo::SweepOptions opts{episodes, seed, max_steps};
    std::vector<azoo::SweepCurve> curves;
    std::map<std::string, double> random;
    for (std::size_t i = 0; i < n_models; ++i) {
      const auto& m = need(models[i], "model").model;
      curves.push_back(k == "observation" ? azoo::observation_noise_sweep(m, factory, sig, opts)
                                          : azoo::parameter_noise_sweep(m, factory, sig, opts));
      if (!random.contains(m.meta.game)) random[m.meta.game] = azoo::random_play_baseline(factory, episodes, seed, max_steps);
    }
    const auto normalized = azoo::normalize_curves(curves, random, mode);
    json j;
    j["kind"] = k;
    j["normalization"] = std::string(azoo::to_string(mode));
    j["random_baselines"] = random;
    j["curves"] = json::array();
    for (const auto& c : curves)
      j["curves"].push_back({{"label", c.label},
                             {"game", c.game},
                             {"algorithm", c.algorithm},
                             {"sigmas", c.sigmas},
                             {"mean_scores", c.mean_scores},
                             {"stddevs", c.stddevs},
                             {"episodes", c.episodes},
                             {"seed", c.seed}});
    j["normalized"] = json::array();
    for (const auto& c : normalized.curves)
      j["normalized"].push_back({{"label", c.label},
                                 {"game", c.game},
                                 {"algorithm", c.algorithm},
                                 {"sigmas", c.sigmas},
                                 {"values", c.values},
                                 {"excluded", c.excluded},
                                 {"baseline", c.baseline}});
    j["exclusions"] = json::array();
    for (const auto& e : normalized.exclusions)
      j["exclusions"].push_back(
          {{"label", e.label}, {"game", e.game}, {"reason", e.reason}, {"baseline", e.baseline}, {"random", e.random}});
    j["aggregate"] = json::array();
    for (const auto& a : azoo::aggregate_by_algorithm(normalized))
      j["aggregate"].push_back(
          {{"algorithm", a.algorithm}, {"sigmas", a.sigmas}, {"mean_values", a.mean_values}, {"n_curves", a.n_curves}});
    o = dup(j.dump(2));
  });
}

azoo_status azoo_classify(const azoo_rollout* const* rollouts, const char* const* labels, size_t n,
                          const azoo_classify_options* options, const char* confusion_png, char** json_out) {
  return guarded([&] {
    auto& o = need_out(json_out, "json_out");
    if (n == 0 || !labels) azoo::fail(azoo::ErrorKind::InvalidArgument, "no labelled rollouts given");
    const auto rs = unwrap(rollouts, n);
    std::vector<azoo::LabeledRollouts> classes;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string label = need_str(labels[i], "label");
      auto it = std::find_if(classes.begin(), classes.end(), [&](const auto& c) { return c.label == label; });
      if (it == classes.end()) {
        classes.push_back({label, {}});
        it = classes.end() - 1;
      }
      it->rollouts.push_back(rs[i]);
    }
    const azoo_classify_options defaults{};
    const auto& opt = options ? *options : defaults;
    azoo::TrainConfig cfg;
    if (opt.max_epochs > 0) cfg.max_epochs = opt.max_epochs;
    if (opt.patience > 0) cfg.patience = opt.patience;
    if (opt.batch_size > 0) cfg.batch_size = opt.batch_size;
    if (opt.learning_rate > 0) cfg.lr = opt.learning_rate;
    cfg.seed = opt.seed;
    const auto data = azoo::build_dataset(
        classes, opt.frames_per_model > 0 ? opt.frames_per_model : azoo::kDefaultFramesPerModel, opt.seed);
    const auto trained = azoo::train_classifier(data, cfg);
    const auto ev = azoo::evaluate(trained.classifier, data);
    if (confusion_png) azoo::write_png(azoo::render_confusion(ev.confusion), confusion_png);
    json history = json::array();
    for (const auto& e : trained.history)
      history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    json j = {{"classes", data.class_names},
              {"split", {{"train", data.train.size()}, {"val", data.val.size()}, {"test", data.test.size()}}},
              {"confusion", ev.confusion.counts},
              {"precision", ev.precision},
              {"recall", ev.recall},
              {"f1", ev.f1},
              {"mean_f1", ev.mean_f1},
              {"accuracy", ev.accuracy},
              {"best_epoch", trained.best_epoch},
              {"best_val_loss", trained.best_val_loss},
              {"history", history}};
    o = dup(j.dump(2));
  });
}

namespace {

azoo::EmbeddingParams embed_params(const azoo_embed_options* options) {
  azoo::EmbeddingParams p;
  if (!options) return p;
  if (options->pca_dims > 0) p.pca_dims = options->pca_dims;
  if (options->perplexity > 0) p.tsne.perplexity = options->perplexity;
  if (options->iterations > 0) p.tsne.iterations = options->iterations;
  p.tsne.seed = options->seed;
  return p;
}

}  // namespace

azoo_status azoo_embed_ram(const azoo_rollout* const* rollouts, size_t n, const azoo_embed_options* options,
                           const char* out_dir) {
  return guarded([&] {
    const std::string dir = need_str(out_dir, "out_dir");
    const auto rs = unwrap(rollouts, n);
    const auto result = azoo::embed_ram_joint(rs, embed_params(options));
    azoo::export_embedding(result, rs, dir);
  });
}

azoo_status azoo_embed_hidden(const azoo_model* model, const azoo_rollout* rollout, const char* layer,
                              const azoo_embed_options* options, const char* out_dir) {
  return guarded([&] {
    const std::string dir = need_str(out_dir, "out_dir");
    const auto& r = need(rollout, "rollout").rollout;
    const auto result = azoo::embed_hidden(need(model, "model").model, r, azoo::LayerId::parse(layer ? layer : "fc"),
                                           embed_params(options));
    const azoo::Rollout* list[] = {&r};
    azoo::export_embedding(result, list, dir);
  });
}

azoo_status azoo_receptive_field(const azoo_model* model, int layer, int* size, int* jump) {
  return guarded([&] {
    const auto rf = azoo::receptive_field(need(model, "model").model.spec, layer);
    if (size) *size = rf.size;
    if (jump) *jump = rf.jump;
  });
}

azoo_status azoo_patches(const azoo_model* model, const azoo_rollout* rollout, int layer, int filter, size_t k,
                         const char* png_path, char** json_out) {
  return guarded([&] {
    auto& o = need_out(json_out, "json_out");
    const auto hits = azoo::top_patches(need(model, "model").model, need(rollout, "rollout").rollout, layer, filter, k);
    if (png_path && !hits.empty()) azoo::write_png(azoo::render_patch_sheet(hits), png_path);
    json arr = json::array();
    for (const auto& h : hits)
      arr.push_back({{"step", h.step},
                     {"unit_x", h.unit_x},
                     {"unit_y", h.unit_y},
                     {"value", h.value},
                     {"rect", rect_json(h.rect)},
                     {"frame_rect", rect_json(h.frame_rect)}});
    o = dup(arr.dump(2));
  });
}

azoo_status azoo_dream(const azoo_model* model, const char* objective, const azoo_dream_options* options,
                       float* input_out, const char* png_path, const char* csv_path) {
  return guarded([&] {
    const auto obj = azoo::Objective::parse(need_str(objective, "objective"));
    azoo::DreamConfig cfg;
    if (options) {
      if (options->iterations > 0) cfg.iterations = options->iterations;
      if (options->step > 0) cfg.step = options->step;
      if (options->jitter >= 0) cfg.jitter = options->jitter;
      cfg.tv_weight = options->tv_weight;
      cfg.l1_weight = options->l1_weight;
      cfg.seed = options->seed;
      if (options->plain_ascent) cfg.optimizer = azoo::DreamOptimizer::Plain;
    }
    const auto result = azoo::synthesize(need(model, "model").model, obj, cfg);
    if (input_out) std::copy(result.input.data().begin(), result.input.data().end(), input_out);
    if (png_path) azoo::write_png(azoo::render_dream_strip(result.input), png_path);
    if (csv_path) {
      std::string csv = "iteration,objective\n";
      char line[64];
      for (std::size_t i = 0; i < result.history.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%.17g\n", i, result.history[i]);
        csv += line;
      }
      azoo::write_text_file(csv_path, csv);
    }
  });
}

azoo_status azoo_render_trace(const azoo_model* model, const azoo_rollout* rollout, size_t first, size_t count,
                              const char* out_dir) {
  return guarded([&] {
    const auto& m = need(model, "model").model;
    const auto& r = need(rollout, "rollout").rollout;
    const std::filesystem::path dir = need_str(out_dir, "out_dir");
    if (!r.traces || r.traces->size() != r.size())
      azoo::fail(azoo::ErrorKind::MissingStream, "rollout was recorded without activations");
    if (first >= r.size()) azoo::fail(azoo::ErrorKind::OutOfRange, "first step beyond end of rollout");
    azoo::ensure_directory(dir);
    const auto layout = azoo::montage_layout(m.spec);
    const auto ranges = azoo::activation_ranges(*r.traces);
    const std::size_t end = count >= r.size() - first ? r.size() : first + count;
    char name[32];
    for (std::size_t t = first; t < end; ++t) {
      std::snprintf(name, sizeof name, "frame_%05zu.png", t);
      azoo::write_png(azoo::render_trace_frame(r.steps[t], (*r.traces)[t], layout, ranges), dir / name);
    }
  });
}

azoo_status azoo_render_grid(const azoo_rollout* const* cells, size_t rows, size_t cols, const char* const* row_labels,
                             const char* const* col_labels, size_t step, const char* png_path) {
  return guarded([&] {
    const std::string path = need_str(png_path, "png_path");
    if (rows == 0 || cols == 0) azoo::fail(azoo::ErrorKind::InvalidArgument, "rollout grid is empty");
    const auto flat = unwrap(cells, rows * cols);
    std::vector<std::vector<const azoo::Rollout*>> grid(rows);
    std::vector<std::string> rl, cl;
    for (std::size_t r = 0; r < rows; ++r) {
      grid[r].assign(flat.begin() + static_cast<std::ptrdiff_t>(r * cols), flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
      rl.push_back(row_labels && row_labels[r] ? row_labels[r] : "");
    }
    for (std::size_t c = 0; c < cols; ++c) cl.push_back(col_labels && col_labels[c] ? col_labels[c] : "");
    azoo::write_png(azoo::render_rollout_grid(grid, rl, cl, step), path);
  });
}

azoo_status azoo_server_start(const char* dir, const char* host, int port, azoo_server** out) {
  return guarded([&] {
    auto& o = need_out(out, "out");
    o = nullptr;
    auto s = std::make_unique<azoo_server>();
    s->server = std::make_unique<azoo::StaticServer>(need_str(dir, "dir"), host ? host : "127.0.0.1", port);
    s->server->start();
    o = s.release();
  });
}

int azoo_server_port(const azoo_server* server) { return server ? server->server->port() : -1; }

void azoo_server_stop(azoo_server* server) { delete server; }

azoo_status azoo_serve(const char* dir, const char* host, int port) {
  return guarded([&] {
    azoo::StaticServer server(need_str(dir, "dir"), host ? host : "127.0.0.1", port);
    std::fprintf(stderr, "serving %s on http://%s:%d/\n", dir, host ? host : "127.0.0.1", server.port());
    server.run();
  });
}

}  // extern "C"
