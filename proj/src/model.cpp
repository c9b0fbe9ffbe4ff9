#include "model.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "binary_io.hpp"
#include "error.hpp"
#include "fileio.hpp"
#include "json_io.hpp"

namespace azoo {

using nlohmann::json;

namespace {
constexpr std::uint8_t kMagic[4] = {'A', 'Z', 'M', '1'};
constexpr std::int64_t kHourTags[] = {1, 2, 4, 6, 10};
constexpr std::int64_t kFrameTags[] = {400'000'000, 1'000'000'000};
}  // namespace

std::string_view to_string(Algorithm algorithm) noexcept {
  switch (algorithm) {
    case Algorithm::A2C: return "A2C";
    case Algorithm::IMPALA: return "IMPALA";
    case Algorithm::DQN: return "DQN";
    case Algorithm::Rainbow: return "Rainbow";
    case Algorithm::ApeX: return "ApeX";
    case Algorithm::ES: return "ES";
    case Algorithm::GA: return "GA";
    case Algorithm::Other: return "Other";
  }
  return "Other";
}

Algorithm parse_algorithm(std::string_view text) {
  for (Algorithm a : {Algorithm::A2C, Algorithm::IMPALA, Algorithm::DQN, Algorithm::Rainbow, Algorithm::ApeX,
                      Algorithm::ES, Algorithm::GA, Algorithm::Other})
    if (loose_equal(to_string(a), text)) return a;
  fail(ErrorKind::Config, "unknown algorithm tag '" + std::string(text) + "'");
}

CheckpointTag CheckpointTag::hours(std::int64_t h) {
  if (std::find(std::begin(kHourTags), std::end(kHourTags), h) == std::end(kHourTags))
    fail(ErrorKind::Config, "hours checkpoint must be one of 1,2,4,6,10");
  return {Criterion::Hours, h};
}

CheckpointTag CheckpointTag::frames(std::int64_t n) {
  if (std::find(std::begin(kFrameTags), std::end(kFrameTags), n) == std::end(kFrameTags))
    fail(ErrorKind::Config, "frames checkpoint must be 400000000 or 1000000000");
  return {Criterion::Frames, n};
}

std::string CheckpointTag::str() const {
  switch (criterion) {
    case Criterion::Final: return "final";
    case Criterion::Initial: return "initial";
    case Criterion::HumanLevel: return "human_level";
    case Criterion::Hours: return "hours:" + std::to_string(amount);
    case Criterion::Frames: return "frames:" + std::to_string(amount);
  }
  return "final";
}

CheckpointTag CheckpointTag::parse(std::string_view text) {
  if (text == "final") return {Criterion::Final, 0};
  if (text == "initial") return {Criterion::Initial, 0};
  if (text == "human_level") return {Criterion::HumanLevel, 0};
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    const auto head = text.substr(0, colon);
    const std::string tail(text.substr(colon + 1));
    std::int64_t value = 0;
    try {
      std::size_t used = 0;
      value = std::stoll(tail, &used);
      if (used != tail.size()) throw std::invalid_argument(tail);
    } catch (const std::exception&) {
      fail(ErrorKind::Config, "bad checkpoint amount in '" + std::string(text) + "'");
    }
    if (head == "hours") return hours(value);
    if (head == "frames") return frames(value);
  }
  fail(ErrorKind::Config, "unknown checkpoint tag '" + std::string(text) + "'");
}

json to_json(const NetworkSpec& spec) {
  json conv = json::array();
  for (const auto& l : spec.conv_layers)
    conv.push_back({{"out_channels", l.out_channels}, {"kernel", l.kernel}, {"stride", l.stride}});
  json j = {{"conv_layers", conv},
            {"fc_width", spec.fc_width},
            {"head", std::string(to_string(spec.head))},
            {"n_actions", spec.n_actions}};
  if (spec.c51) j["c51"] = {{"n_atoms", spec.c51->n_atoms}, {"v_min", spec.c51->v_min}, {"v_max", spec.c51->v_max}};
  return j;
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec spec;
  try {
    spec.conv_layers.clear();
    for (const auto& l : j.at("conv_layers"))
      spec.conv_layers.push_back({l.at("out_channels").get<int>(), l.at("kernel").get<int>(), l.at("stride").get<int>()});
    spec.fc_width = j.at("fc_width").get<int>();
    spec.head = parse_head_kind(j.at("head").get<std::string>());
    spec.n_actions = j.at("n_actions").get<int>();
    if (j.contains("c51")) {
      const auto& c = j.at("c51");
      spec.c51 = C51Params{c.at("n_atoms").get<int>(), c.at("v_min").get<float>(), c.at("v_max").get<float>()};
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::SpecInconsistent, std::string("malformed network spec: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::SpecInconsistent, e.what());
  }
  spec.check();
  return spec;
}

json to_json(const ModelMeta& meta) {
  return {{"game", meta.game},
          {"algorithm", std::string(to_string(meta.algorithm))},
          {"run_id", meta.run_id},
          {"checkpoint", meta.checkpoint.str()},
          {"format_version", meta.format_version}};
}

ModelMeta meta_from_json(const json& j) {
  ModelMeta meta;
  try {
    meta.game = j.at("game").get<std::string>();
    meta.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    meta.run_id = j.at("run_id").get<std::string>();
    meta.checkpoint = CheckpointTag::parse(j.at("checkpoint").get<std::string>());
    meta.format_version = j.at("format_version").get<std::uint32_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Malformed, std::string("malformed model metadata: ") + e.what());
  }
  return meta;
}

bool bit_equal(const FrozenModel& a, const FrozenModel& b) noexcept {
  return a.spec == b.spec && a.meta == b.meta && bit_equal(a.tensors, b.tensors);
}

std::string Violation::message() const {
  switch (kind) {
    case Kind::InvalidSpec: return "invalid spec: " + tensor;
    case Kind::Missing: return "missing tensor " + tensor + " (expected " + shape_string(expected) + ")";
    case Kind::WrongShape:
      return "tensor " + tensor + " has shape " + shape_string(actual) + ", expected " + shape_string(expected);
    case Kind::Extra: return "unexpected tensor " + tensor + " " + shape_string(actual);
    case Kind::NonFinite: return "tensor " + tensor + " contains non-finite values";
  }
  return tensor;
}

std::vector<Violation> validate_model(const FrozenModel& model) {
  std::vector<Violation> out;
  try {
    model.spec.check();
  } catch (const Error& e) {
    out.push_back({Violation::Kind::InvalidSpec, e.what(), {}, {}});
    return out;
  }
  const auto layout = parameter_layout(model.spec);
  for (const auto& [name, shape] : layout) {
    const Tensor* t = model.tensors.find(name);
    if (!t) {
      out.push_back({Violation::Kind::Missing, name, shape, {}});
    } else if (t->shape() != shape) {
      out.push_back({Violation::Kind::WrongShape, name, shape, t->shape()});
    } else if (!all_finite(*t)) {
      out.push_back({Violation::Kind::NonFinite, name, shape, t->shape()});
    }
  }
  for (const auto& [name, t] : model.tensors) {
    const bool known = std::any_of(layout.begin(), layout.end(), [&](const auto& e) { return e.first == name; });
    if (!known) out.push_back({Violation::Kind::Extra, name, {}, t.shape()});
  }
  return out;
}

std::vector<std::uint8_t> serialize_model(const FrozenModel& model) {
  json directory = json::array();
  for (const auto& [name, t] : model.tensors) directory.push_back({{"name", name}, {"shape", t.shape()}});
  const json header = {{"meta", to_json(model.meta)}, {"spec", to_json(model.spec)}, {"tensors", directory}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  binary::put_u32(out, kModelFormatVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  const std::size_t blob_start = out.size();
  for (const auto& [name, t] : model.tensors) binary::put_f32(out, t.data());
  const auto crc = crc32(0L, out.data() + blob_start, static_cast<uInt>(out.size() - blob_start));
  binary::put_u32(out, static_cast<std::uint32_t>(crc));
  return out;
}

FrozenModel deserialize_model(std::span<const std::uint8_t> bytes, bool validate) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    fail(ErrorKind::BadMagic, "not a frozen-model container (bad magic)");
  if (bytes.size() < 12) fail(ErrorKind::Truncated, "container ends inside the fixed prefix");
  const std::uint32_t version = binary::get_u32(bytes.data() + 4);
  if (version != kModelFormatVersion)
    fail(ErrorKind::UnsupportedVersion, "unsupported container version " + std::to_string(version));
  const std::uint32_t header_len = binary::get_u32(bytes.data() + 8);
  if (bytes.size() < 12ull + header_len) fail(ErrorKind::Truncated, "container ends inside the header");

  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const json::exception& e) {
    fail(ErrorKind::Malformed, std::string("header is not valid JSON: ") + e.what());
  }

  FrozenModel model;
  if (!header.is_object() || !header.contains("spec") || !header.contains("meta") || !header.contains("tensors"))
    fail(ErrorKind::Malformed, "header lacks spec/meta/tensors");
  model.meta = meta_from_json(header["meta"]);
  model.spec = spec_from_json(header["spec"]);

  std::vector<std::pair<std::string, Shape>> directory;
  std::size_t blob_floats = 0;
  try {
    for (const auto& entry : header["tensors"]) {
      Shape shape = entry.at("shape").get<Shape>();
      if (shape.empty() || std::find(shape.begin(), shape.end(), 0u) != shape.end())
        fail(ErrorKind::Malformed, "tensor directory has an empty extent");
      blob_floats += shape_size(shape);
      directory.emplace_back(entry.at("name").get<std::string>(), std::move(shape));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Malformed, std::string("bad tensor directory: ") + e.what());
  }

  const std::size_t blob_start = 12ull + header_len;
  const std::size_t expected = blob_start + blob_floats * 4 + 4;
  if (bytes.size() < expected) fail(ErrorKind::Truncated, "container ends inside the tensor blobs");
  if (bytes.size() > expected) fail(ErrorKind::Malformed, "trailing bytes after checksum");
  const auto crc = crc32(0L, bytes.data() + blob_start, static_cast<uInt>(blob_floats * 4));
  if (static_cast<std::uint32_t>(crc) != binary::get_u32(bytes.data() + expected - 4))
    fail(ErrorKind::ChecksumMismatch, "tensor blob checksum mismatch");

  const std::uint8_t* p = bytes.data() + blob_start;
  for (auto& [name, shape] : directory) {
    Tensor t(shape);
    binary::get_f32(p, t.data());
    p += t.size() * 4;
    if (model.tensors.contains(name)) fail(ErrorKind::Malformed, "duplicate tensor '" + name + "'");
    model.tensors.set(name, std::move(t));
  }

  if (!validate) return model;
  const auto violations = validate_model(model);
  if (!violations.empty()) fail(ErrorKind::SpecInconsistent, violations.front().message());
  return model;
}

void save_model(const FrozenModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

FrozenModel load_model(const std::filesystem::path& path, bool validate) {
  return deserialize_model(read_file(path), validate);
}

FrozenModel make_random_model(const NetworkSpec& spec, const ModelMeta& meta, std::uint64_t seed) {
  spec.check();
  FrozenModel model{spec, {}, meta};
  std::mt19937_64 rng(seed);
  for (const auto& [name, shape] : parameter_layout(spec)) {
    Tensor t(shape);
    if (shape.size() > 1) {
      const std::size_t fan_in = shape_size(shape) / shape[0];
      const bool head = name.starts_with("head.");
      std::normal_distribution<double> dist(0.0, std::sqrt((head ? 1.0 : 2.0) / static_cast<double>(fan_in)));
      for (auto& v : t.data()) v = static_cast<float>(dist(rng));
    }
    model.tensors.set(name, std::move(t));
  }
  return model;
}

}  // namespace azoo
