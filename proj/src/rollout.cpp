#include "rollout.hpp"

#include <cstring>
#include <random>

#include "binary_io.hpp"
#include "error.hpp"
#include "fileio.hpp"
#include "json_io.hpp"

namespace azoo {

using nlohmann::json;

std::string_view to_string(PolicyMode mode) noexcept { return mode == PolicyMode::Greedy ? "greedy" : "sampling"; }

PolicyMode parse_policy_mode(std::string_view text) {
  if (text == "greedy") return PolicyMode::Greedy;
  if (text == "sampling") return PolicyMode::Sampling;
  fail(ErrorKind::Config, "policy mode must be 'greedy' or 'sampling'");
}

namespace {

// Drives env from reset until done or max_steps; `on_step` sees the state the
// action was taken in and the step result.
template <typename Choose, typename OnStep>
void run_loop(Environment& env, std::uint64_t seed, int max_steps, Choose&& choose, OnStep&& on_step) {
  if (max_steps <= 0) return;
  EnvSnapshot state = env.reset(seed);
  FrameHistory history;
  history.push(grayscale_downsample(state.frame));
  for (int t = 0; t < max_steps; ++t) {
    const Observation obs = history.observation();
    const int action = choose(obs, state.ram);
    EnvStep result = env.step(action);
    on_step(state, obs, action, result);
    if (result.done) break;
    state.frame = std::move(result.frame);
    state.ram = result.ram;
    history.push(grayscale_downsample(state.frame));
  }
}

int sample_index(const std::vector<double>& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double c = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    c += p[i];
    if (r < c) return static_cast<int>(i);
  }
  return static_cast<int>(p.size() - 1);
}

}  // namespace

Rollout record_rollout(const FrozenModel& model, Environment& env, const RecordOptions& options) {
  if (model.n_actions() != env.n_actions())
    fail(ErrorKind::Config, "model has " + std::to_string(model.n_actions()) + " actions, environment has " +
                                std::to_string(env.n_actions()));
  if (options.max_steps < 0) fail(ErrorKind::Config, "max_steps must be >= 0");
  check_model_shapes(model);
  Rollout rollout;
  rollout.meta = {model.meta, env.id(), options.seed, options.mode, options.max_steps};
  if (options.capture_activations) rollout.traces.emplace();
  std::mt19937_64 rng(options.seed ^ 0x9E3779B97F4A7C15ull);
  double score = 0.0;
  ActivationTrace last;
  run_loop(
      env, options.seed, options.max_steps,
      [&](const Observation& obs, const RamState&) {
        last = forward_with_trace(model, obs.tensor());
        if (options.mode == PolicyMode::Greedy) return last.chosen_action;
        return sample_index(action_distribution(last), rng);
      },
      [&](const EnvSnapshot& state, const Observation& obs, int action, const EnvStep& result) {
        score += result.reward;
        rollout.steps.push_back({state.frame, obs, state.ram, action, result.reward, score, result.done});
        if (rollout.traces) rollout.traces->push_back(std::move(last));
      });
  return rollout;
}

double play_episode(Environment& env, std::uint64_t seed, int max_steps, const PolicyFn& policy) {
  double score = 0.0;
  run_loop(env, seed, max_steps, policy,
           [&](const EnvSnapshot&, const Observation&, int, const EnvStep& r) { score += r.reward; });
  return score;
}

bool rollouts_equal(const Rollout& a, const Rollout& b) {
  if (!(a.meta == b.meta) || a.steps.size() != b.steps.size() || a.traces.has_value() != b.traces.has_value())
    return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto &x = a.steps[i], &y = b.steps[i];
    if (!(x.frame == y.frame) || !(x.obs == y.obs) || x.ram != y.ram || x.action != y.action ||
        std::memcmp(&x.reward, &y.reward, sizeof(double)) != 0 ||
        std::memcmp(&x.score, &y.score, sizeof(double)) != 0 || x.done != y.done)
      return false;
  }
  if (a.traces)
    for (std::size_t i = 0; i < a.traces->size(); ++i)
      if (!bit_equal((*a.traces)[i], (*b.traces)[i])) return false;
  return true;
}

std::vector<std::string> trace_layer_names(std::size_t n_conv) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_conv; ++i) names.push_back("conv" + std::to_string(i + 1));
  names.insert(names.end(), {"fc", "head_raw", "head_q"});
  return names;
}

namespace {

const Tensor& trace_layer(const ActivationTrace& t, std::size_t index) {
  if (index < t.conv.size()) return t.conv[index];
  switch (index - t.conv.size()) {
    case 0: return t.fc;
    case 1: return t.head_raw;
    default: return t.head_q;
  }
}

Tensor& trace_layer(ActivationTrace& t, std::size_t index) {
  return const_cast<Tensor&>(trace_layer(static_cast<const ActivationTrace&>(t), index));
}

std::vector<std::uint8_t> read_stream(const std::filesystem::path& dir, const std::string& name,
                                      std::size_t expected_bytes) {
  const auto path = dir / name;
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingStream, "rollout stream " + name + " is missing");
  auto bytes = read_file(path);
  if (bytes.size() != expected_bytes)
    fail(ErrorKind::LengthMismatch, "stream " + name + " holds " + std::to_string(bytes.size()) +
                                        " bytes, manifest implies " + std::to_string(expected_bytes));
  return bytes;
}

}  // namespace

void save_rollout(const Rollout& rollout, const std::filesystem::path& dir) {
  ensure_directory(dir);
  const std::size_t n = rollout.steps.size();
  std::vector<std::uint8_t> frames, obs, ram;
  frames.reserve(n * kFrameBytes);
  obs.reserve(n * kStackDepth * kObsSize * kObsSize * 4);
  ram.reserve(n * kRamBytes);
  json actions = json::array(), rewards = json::array(), scores = json::array(), done = json::array();
  for (const auto& s : rollout.steps) {
    frames.insert(frames.end(), s.frame.pixels.begin(), s.frame.pixels.end());
    for (std::size_t c = 0; c < kStackDepth; ++c) binary::put_f32(obs, s.obs.channel(c).data());
    ram.insert(ram.end(), s.ram.begin(), s.ram.end());
    actions.push_back(s.action);
    rewards.push_back(s.reward);
    scores.push_back(s.score);
    done.push_back(s.done);
  }
  json steps = {{"actions", actions}, {"rewards", rewards}, {"scores", scores}, {"done", done}};
  json streams = {"frames.bin", "obs.bin", "ram.bin", "steps.json"};
  json layers = json::array();

  if (rollout.traces) {
    if (rollout.traces->size() != n) fail(ErrorKind::LengthMismatch, "trace count differs from step count");
    json chosen = json::array(), values = json::array();
    const std::size_t n_conv = n ? rollout.traces->front().conv.size() : 0;
    const auto names = trace_layer_names(n_conv);
    for (std::size_t l = 0; l < names.size(); ++l) {
      std::vector<std::uint8_t> blob;
      Shape shape;
      for (const auto& t : *rollout.traces) {
        const Tensor& x = trace_layer(t, l);
        if (shape.empty()) shape = x.shape();
        if (x.shape() != shape) fail(ErrorKind::Shape, "trace layer " + names[l] + " changes shape across steps");
        binary::put_f32(blob, x.data());
      }
      const std::string file = "act_" + names[l] + ".bin";
      write_file(dir / file, blob);
      streams.push_back(file);
      layers.push_back({{"name", names[l]}, {"shape", shape}});
    }
    for (const auto& t : *rollout.traces) {
      chosen.push_back(t.chosen_action);
      values.push_back(t.value ? json(*t.value) : json(nullptr));
    }
    steps["trace_chosen_actions"] = chosen;
    steps["trace_values"] = values;
  }

  write_file(dir / "frames.bin", frames);
  write_file(dir / "obs.bin", obs);
  write_file(dir / "ram.bin", ram);
  write_text_file(dir / "steps.json", steps.dump());
  const json manifest = {{"format", "azoo-rollout"},
                         {"version", 1},
                         {"steps", n},
                         {"env_id", rollout.meta.env_id},
                         {"seed", rollout.meta.seed},
                         {"policy_mode", std::string(to_string(rollout.meta.mode))},
                         {"max_steps", rollout.meta.max_steps},
                         {"model_meta", to_json(rollout.meta.model)},
                         {"streams", streams},
                         {"activation_layers", layers}};
  write_text_file(dir / "manifest.json", manifest.dump(2));
}

Rollout load_rollout(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorKind::Io, "rollout directory '" + dir.string() + "' not found");
  if (!std::filesystem::exists(dir / "manifest.json"))
    fail(ErrorKind::MissingStream, "rollout manifest.json is missing");
  Rollout rollout;
  json manifest;
  std::size_t n = 0;
  json layers;
  try {
    manifest = json::parse(read_text_file(dir / "manifest.json"));
    if (manifest.at("format") != "azoo-rollout") fail(ErrorKind::Malformed, "not a rollout manifest");
    if (manifest.at("version").get<int>() != 1) fail(ErrorKind::UnsupportedVersion, "unsupported rollout version");
    n = manifest.at("steps").get<std::size_t>();
    rollout.meta.env_id = manifest.at("env_id").get<std::string>();
    rollout.meta.seed = manifest.at("seed").get<std::uint64_t>();
    rollout.meta.mode = parse_policy_mode(manifest.at("policy_mode").get<std::string>());
    rollout.meta.max_steps = manifest.at("max_steps").get<int>();
    rollout.meta.model = meta_from_json(manifest.at("model_meta"));
    layers = manifest.value("activation_layers", json::array());
  } catch (const json::exception& e) {
    fail(ErrorKind::Malformed, std::string("bad rollout manifest: ") + e.what());
  }

  const std::size_t plane = kObsSize * kObsSize;
  const auto frames = read_stream(dir, "frames.bin", n * kFrameBytes);
  const auto obs = read_stream(dir, "obs.bin", n * kStackDepth * plane * 4);
  const auto ram = read_stream(dir, "ram.bin", n * kRamBytes);
  if (!std::filesystem::exists(dir / "steps.json")) fail(ErrorKind::MissingStream, "rollout steps.json is missing");
  json steps;
  try {
    steps = json::parse(read_text_file(dir / "steps.json"));
    for (const char* key : {"actions", "rewards", "scores", "done"})
      if (steps.at(key).size() != n)
        fail(ErrorKind::LengthMismatch, std::string("steps.json '") + key + "' length differs from manifest");
  } catch (const json::exception& e) {
    fail(ErrorKind::Malformed, std::string("bad steps.json: ") + e.what());
  }

  // Consecutive observations share frames; re-link identical channels so a
  // loaded rollout costs what a recorded one does.
  std::vector<GrayFrame> recent;
  rollout.steps.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto& s = rollout.steps[t];
    s.frame.pixels.assign(frames.begin() + static_cast<std::ptrdiff_t>(t * kFrameBytes),
                          frames.begin() + static_cast<std::ptrdiff_t>((t + 1) * kFrameBytes));
    std::array<GrayFrame, kStackDepth> channels;
    for (std::size_t c = 0; c < kStackDepth; ++c) {
      Tensor gray({kObsSize, kObsSize});
      binary::get_f32(obs.data() + ((t * kStackDepth + c) * plane) * 4, gray.data());
      GrayFrame shared;
      for (const auto& r : recent)
        if (bit_equal(*r, gray)) shared = r;
      if (!shared) {
        shared = std::make_shared<const Tensor>(std::move(gray));
        recent.push_back(shared);
        if (recent.size() > 2 * kStackDepth) recent.erase(recent.begin());
      }
      channels[c] = shared;
    }
    s.obs = Observation(std::move(channels));
    std::memcpy(s.ram.data(), ram.data() + t * kRamBytes, kRamBytes);
    try {
      s.action = steps["actions"][t].get<int>();
      s.reward = steps["rewards"][t].get<double>();
      s.score = steps["scores"][t].get<double>();
      s.done = steps["done"][t].get<bool>();
    } catch (const json::exception& e) {
      fail(ErrorKind::Malformed, std::string("bad step record: ") + e.what());
    }
  }

  if (!layers.empty()) {
    std::vector<ActivationTrace> traces(n);
    std::size_t n_conv = 0;
    for (const auto& l : layers)
      if (l.at("name").get<std::string>().starts_with("conv")) ++n_conv;
    const auto names = trace_layer_names(n_conv);
    if (layers.size() != names.size()) fail(ErrorKind::Malformed, "unexpected activation layer list");
    for (auto& t : traces) t.conv.resize(n_conv);
    for (std::size_t l = 0; l < names.size(); ++l) {
      if (layers[l].at("name").get<std::string>() != names[l]) fail(ErrorKind::Malformed, "activation layer order");
      const Shape shape = layers[l].at("shape").get<Shape>();
      const std::size_t len = shape_size(shape);
      const auto blob = read_stream(dir, "act_" + names[l] + ".bin", n * len * 4);
      for (std::size_t t = 0; t < n; ++t) {
        Tensor x(shape);
        binary::get_f32(blob.data() + t * len * 4, x.data());
        trace_layer(traces[t], l) = std::move(x);
      }
    }
    try {
      const auto& chosen = steps.at("trace_chosen_actions");
      const auto& values = steps.at("trace_values");
      if (chosen.size() != n || values.size() != n)
        fail(ErrorKind::LengthMismatch, "trace step fields differ in length from manifest");
      for (std::size_t t = 0; t < n; ++t) {
        traces[t].chosen_action = chosen[t].get<int>();
        if (!values[t].is_null()) traces[t].value = values[t].get<float>();
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::Malformed, std::string("bad trace fields: ") + e.what());
    }
    rollout.traces = std::move(traces);
  }
  return rollout;
}

}  // namespace azoo
