#include "network.hpp"

#include <charconv>
#include <cstring>

#include "error.hpp"
#include "ops.hpp"

namespace azoo {

LayerId LayerId::parse(std::string_view text) {
  if (text == "fc") return fc();
  if (text == "head_raw") return head_raw();
  if (text == "q" || text == "head_q") return q();
  if (text.starts_with("conv") && text.size() > 4) {
    int n = 0;
    for (char c : text.substr(4)) {
      if (c < '0' || c > '9') fail(ErrorKind::Config, "unknown layer '" + std::string(text) + "'");
      n = n * 10 + (c - '0');
    }
    if (n >= 1) return conv(n);
  }
  fail(ErrorKind::Config, "unknown layer '" + std::string(text) + "'");
}

std::string LayerId::name() const {
  switch (kind) {
    case Kind::Conv: return "conv" + std::to_string(conv_index + 1);
    case Kind::Fc: return "fc";
    case Kind::HeadRaw: return "head_raw";
    case Kind::Q: return "head_q";
  }
  return "head_q";
}

namespace {

int parse_int(std::string_view text, std::string_view whole) {
  int v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty())
    fail(ErrorKind::Config, "bad objective '" + std::string(whole) + "'");
  return v;
}

}  // namespace

Objective Objective::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) fail(ErrorKind::Config, "objective must look like layer:index, got '" + std::string(text) + "'");
  Objective o;
  o.layer = LayerId::parse(text.substr(0, colon));
  std::string_view rest = text.substr(colon + 1);
  const auto at = rest.find('@');
  if (o.layer.kind == LayerId::Kind::Conv) {
    if (at == std::string_view::npos) {
      o.target = Target::Channel;
      o.index = parse_int(rest, text);
      return o;
    }
    o.index = parse_int(rest.substr(0, at), text);
    const std::string_view pos = rest.substr(at + 1);
    const auto comma = pos.find(',');
    if (comma == std::string_view::npos) fail(ErrorKind::Config, "conv unit position must be Y,X in '" + std::string(text) + "'");
    o.y = parse_int(pos.substr(0, comma), text);
    o.x = parse_int(pos.substr(comma + 1), text);
    return o;
  }
  if (at != std::string_view::npos) fail(ErrorKind::Config, "only conv objectives take a position: '" + std::string(text) + "'");
  o.index = parse_int(rest, text);
  return o;
}

std::string Objective::str() const {
  std::string s = (layer.kind == LayerId::Kind::Q ? std::string("q") : layer.name()) + ":" + std::to_string(index);
  if (layer.kind == LayerId::Kind::Conv && target == Target::Unit) s += "@" + std::to_string(y) + "," + std::to_string(x);
  return s;
}

const Tensor& ActivationTrace::layer(const LayerId& id) const {
  switch (id.kind) {
    case LayerId::Kind::Conv:
      if (id.conv_index < 0 || static_cast<std::size_t>(id.conv_index) >= conv.size())
        fail(ErrorKind::OutOfRange, "trace has no layer " + id.name());
      return conv[static_cast<std::size_t>(id.conv_index)];
    case LayerId::Kind::Fc: return fc;
    case LayerId::Kind::HeadRaw: return head_raw;
    case LayerId::Kind::Q: return head_q;
  }
  return head_q;
}

bool bit_equal(const ActivationTrace& a, const ActivationTrace& b) noexcept {
  if (a.conv.size() != b.conv.size()) return false;
  for (std::size_t i = 0; i < a.conv.size(); ++i)
    if (!bit_equal(a.conv[i], b.conv[i])) return false;
  const bool values = a.value.has_value() == b.value.has_value() &&
                      (!a.value || std::memcmp(&*a.value, &*b.value, sizeof(float)) == 0);
  return values && bit_equal(a.fc, b.fc) && bit_equal(a.head_raw, b.head_raw) && bit_equal(a.head_q, b.head_q) &&
         a.chosen_action == b.chosen_action;
}

namespace {

// A linear block of the head: rows [offset, offset + rows) of the raw output.
struct HeadBlock {
  const char* weight;
  const char* bias;
};

std::vector<HeadBlock> head_blocks(HeadKind head) {
  switch (head) {
    case HeadKind::Q:
    case HeadKind::C51: return {{"head.w", "head.b"}};
    case HeadKind::Dueling: return {{"head.value.w", "head.value.b"}, {"head.adv.w", "head.adv.b"}};
    case HeadKind::ActorCritic: return {{"head.policy.w", "head.policy.b"}, {"head.value.w", "head.value.b"}};
  }
  return {};
}

Tensor head_raw_forward(const Tensor& features, const NetworkSpec& spec, const NamedTensors& params) {
  std::vector<float> raw;
  raw.reserve(spec.head_raw_size());
  for (const auto& block : head_blocks(spec.head)) {
    const Tensor part = fc_forward(features, params.get(block.weight), params.get(block.bias));
    raw.insert(raw.end(), part.data().begin(), part.data().end());
  }
  const std::size_t n = raw.size();
  return Tensor({n}, std::move(raw));
}

Tensor head_raw_backward(const Tensor& features, const NetworkSpec& spec, const NamedTensors& params,
                         const Tensor& grad_raw) {
  std::vector<double> acc(features.size(), 0.0);
  std::size_t offset = 0;
  for (const auto& block : head_blocks(spec.head)) {
    const Tensor& w = params.get(block.weight);
    const std::size_t rows = w.dim(0);
    Tensor g({rows});
    for (std::size_t r = 0; r < rows; ++r) g[r] = grad_raw[offset + r];
    offset += rows;
    const auto part = fc_backward(features, w, g, true, false).input;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += part[i];
  }
  return Tensor(features.shape(), std::vector<float>(acc.begin(), acc.end()));
}

// d q / d raw, applied to an upstream gradient on q.
Tensor q_grad_to_raw(const Tensor& raw, const Tensor& q, const NetworkSpec& spec, const std::vector<double>& grad_q) {
  const std::size_t a = static_cast<std::size_t>(spec.n_actions);
  Tensor g(raw.shape());
  switch (spec.head) {
    case HeadKind::Q:
      for (std::size_t i = 0; i < a; ++i) g[i] = static_cast<float>(grad_q[i]);
      break;
    case HeadKind::ActorCritic:
      for (std::size_t i = 0; i < a; ++i) g[i] = static_cast<float>(grad_q[i]);
      break;
    case HeadKind::Dueling: {
      double total = 0.0;
      for (double v : grad_q) total += v;
      g[0] = static_cast<float>(total);
      for (std::size_t i = 0; i < a; ++i) g[1 + i] = static_cast<float>(grad_q[i] - total / static_cast<double>(a));
      break;
    }
    case HeadKind::C51: {
      const auto z = spec.c51->support();
      const std::size_t n = z.size();
      for (std::size_t act = 0; act < a; ++act) {
        if (grad_q[act] == 0.0) continue;
        const auto p = softmax_d(raw.data().subspan(act * n, n));
        for (std::size_t i = 0; i < n; ++i)
          g[act * n + i] = static_cast<float>(grad_q[act] * p[i] * (z[i] - static_cast<double>(q[act])));
      }
      break;
    }
  }
  return g;
}

struct ForwardCache {
  std::vector<Tensor> conv_inputs;  // input to each conv layer
  ActivationTrace trace;
  Tensor flat;
};

ForwardCache forward_cached(const FrozenModel& model, const Tensor& obs) {
  const auto& spec = model.spec;
  const Shape obs_shape{NetworkSpec::kInputChannels, NetworkSpec::kInputSize, NetworkSpec::kInputSize};
  if (obs.shape() != obs_shape)
    fail(ErrorKind::Shape, "observation must be " + shape_string(obs_shape) + ", got " + shape_string(obs.shape()));
  ForwardCache cache;
  const Tensor* x = &obs;
  for (std::size_t i = 0; i < spec.conv_layers.size(); ++i) {
    const std::string p = "conv" + std::to_string(i + 1);
    cache.conv_inputs.push_back(*x);
    cache.trace.conv.push_back(relu(conv2d_forward(*x, model.tensors.get(p + ".w"), model.tensors.get(p + ".b"),
                                                   spec.conv_layers[i].stride)));
    x = &cache.trace.conv.back();
  }
  cache.flat = x->reshaped({x->size()});
  cache.trace.fc = relu(fc_forward(cache.flat, model.tensors.get("fc.w"), model.tensors.get("fc.b")));
  auto head = head_forward(cache.trace.fc, spec, model.tensors);
  cache.trace.head_raw = std::move(head.raw);
  cache.trace.head_q = std::move(head.q);
  cache.trace.value = head.value;
  cache.trace.chosen_action = static_cast<int>(argmax(cache.trace.head_q.data()));
  return cache;
}

}  // namespace

HeadOutput head_forward(const Tensor& features, const NetworkSpec& spec, const NamedTensors& params) {
  if (spec.head == HeadKind::C51 && !spec.c51) fail(ErrorKind::Config, "C51 head without c51 parameters");
  const std::size_t a = static_cast<std::size_t>(spec.n_actions);
  HeadOutput out;
  out.raw = head_raw_forward(features, spec, params);
  if (out.raw.size() != spec.head_raw_size()) fail(ErrorKind::Shape, "head output width does not match the spec");
  out.q = Tensor({a});
  switch (spec.head) {
    case HeadKind::Q:
      for (std::size_t i = 0; i < a; ++i) out.q[i] = out.raw[i];
      break;
    case HeadKind::Dueling: {
      double mean = 0.0;
      for (std::size_t i = 0; i < a; ++i) mean += out.raw[1 + i];
      mean /= static_cast<double>(a);
      for (std::size_t i = 0; i < a; ++i)
        out.q[i] = static_cast<float>(static_cast<double>(out.raw[0]) + out.raw[1 + i] - mean);
      break;
    }
    case HeadKind::C51: {
      const auto z = spec.c51->support();
      const std::size_t n = z.size();
      for (std::size_t act = 0; act < a; ++act) {
        const auto p = softmax_d(out.raw.data().subspan(act * n, n));
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) e += z[i] * p[i];
        out.q[act] = static_cast<float>(e);
      }
      break;
    }
    case HeadKind::ActorCritic:
      for (std::size_t i = 0; i < a; ++i) out.q[i] = out.raw[i];
      out.value = out.raw[a];
      break;
  }
  return out;
}

std::vector<double> action_distribution(const ActivationTrace& trace) { return softmax_d(trace.head_q.data()); }

void check_model_shapes(const FrozenModel& model) {
  model.spec.check();
  for (const auto& [name, shape] : parameter_layout(model.spec)) {
    const Tensor* t = model.tensors.find(name);
    if (!t) fail(ErrorKind::SpecInconsistent, "model lacks tensor " + name);
    if (t->shape() != shape)
      fail(ErrorKind::SpecInconsistent, "tensor " + name + " has shape " + shape_string(t->shape()) +
                                            ", spec implies " + shape_string(shape));
  }
}

void check_objective(const NetworkSpec& spec, const Objective& o) {
  auto out_of_range = [&](const std::string& what) {
    fail(ErrorKind::OutOfRange, "objective on " + o.layer.name() + ": " + what);
  };
  switch (o.layer.kind) {
    case LayerId::Kind::Conv: {
      if (o.layer.conv_index < 0 || static_cast<std::size_t>(o.layer.conv_index) >= spec.conv_layers.size())
        out_of_range("no such conv layer");
      const Shape s = spec.conv_output_shape(static_cast<std::size_t>(o.layer.conv_index));
      if (o.index < 0 || static_cast<std::size_t>(o.index) >= s[0]) out_of_range("channel out of range");
      if (o.target == Objective::Target::Unit &&
          (o.y < 0 || o.x < 0 || static_cast<std::size_t>(o.y) >= s[1] || static_cast<std::size_t>(o.x) >= s[2]))
        out_of_range("unit position out of range");
      break;
    }
    case LayerId::Kind::Fc:
      if (o.target != Objective::Target::Unit) out_of_range("channel targets apply to conv layers only");
      if (o.index < 0 || o.index >= spec.fc_width) out_of_range("unit out of range");
      break;
    case LayerId::Kind::HeadRaw:
      if (o.target != Objective::Target::Unit) out_of_range("channel targets apply to conv layers only");
      if (o.index < 0 || static_cast<std::size_t>(o.index) >= spec.head_raw_size()) out_of_range("unit out of range");
      break;
    case LayerId::Kind::Q:
      if (o.target != Objective::Target::Unit) out_of_range("channel targets apply to conv layers only");
      if (o.index < 0 || o.index >= spec.n_actions) out_of_range("action out of range");
      break;
  }
}

ActivationTrace forward_with_trace(const FrozenModel& model, const Tensor& obs) {
  check_model_shapes(model);
  return forward_cached(model, obs).trace;
}

double objective_value(const ActivationTrace& trace, const Objective& o) {
  const Tensor& t = trace.layer(o.layer);
  if (o.layer.kind == LayerId::Kind::Conv) {
    const std::size_t h = t.dim(1), w = t.dim(2), c = static_cast<std::size_t>(o.index);
    if (o.target == Objective::Target::Unit)
      return t.at(c, static_cast<std::size_t>(o.y), static_cast<std::size_t>(o.x));
    double sum = 0.0;
    for (std::size_t i = 0; i < h * w; ++i) sum += t[c * h * w + i];
    return sum / static_cast<double>(h * w);
  }
  return t[static_cast<std::size_t>(o.index)];
}

ObjectiveGradient objective_gradient(const FrozenModel& model, const Tensor& obs, const Objective& objective) {
  check_model_shapes(model);
  check_objective(model.spec, objective);
  const auto& spec = model.spec;
  ForwardCache cache = forward_cached(model, obs);
  const ActivationTrace& tr = cache.trace;
  ObjectiveGradient result;
  result.value = objective_value(tr, objective);

  // Seed the gradient at the objective's layer, then walk down to the input.
  const std::size_t n_conv = spec.conv_layers.size();
  std::size_t start_conv = n_conv;  // conv layer whose post-ReLU output holds the seed
  Tensor grad;
  if (objective.layer.kind == LayerId::Kind::Conv) {
    start_conv = static_cast<std::size_t>(objective.layer.conv_index);
    const Tensor& act = tr.conv[start_conv];
    grad = Tensor(act.shape());
    const std::size_t h = act.dim(1), w = act.dim(2), c = static_cast<std::size_t>(objective.index);
    if (objective.target == Objective::Target::Unit) {
      grad.at(c, static_cast<std::size_t>(objective.y), static_cast<std::size_t>(objective.x)) = 1.0f;
    } else {
      const float share = static_cast<float>(1.0 / static_cast<double>(h * w));
      for (std::size_t i = 0; i < h * w; ++i) grad[c * h * w + i] = share;
    }
  } else {
    Tensor grad_fc;
    if (objective.layer.kind == LayerId::Kind::Fc) {
      grad_fc = Tensor(tr.fc.shape());
      grad_fc[static_cast<std::size_t>(objective.index)] = 1.0f;
    } else {
      Tensor grad_raw;
      if (objective.layer.kind == LayerId::Kind::HeadRaw) {
        grad_raw = Tensor(tr.head_raw.shape());
        grad_raw[static_cast<std::size_t>(objective.index)] = 1.0f;
      } else {
        std::vector<double> gq(static_cast<std::size_t>(spec.n_actions), 0.0);
        gq[static_cast<std::size_t>(objective.index)] = 1.0;
        grad_raw = q_grad_to_raw(tr.head_raw, tr.head_q, spec, gq);
      }
      grad_fc = head_raw_backward(tr.fc, spec, model.tensors, grad_raw);
    }
    const Tensor pre = relu_backward(tr.fc, grad_fc);
    const Tensor g_flat = fc_backward(cache.flat, model.tensors.get("fc.w"), pre, true, false).input;
    grad = g_flat.reshaped(tr.conv.back().shape());
    start_conv = n_conv - 1;
  }

  for (std::size_t i = start_conv + 1; i-- > 0;) {
    const std::string p = "conv" + std::to_string(i + 1);
    const Tensor pre = relu_backward(tr.conv[i], grad);
    grad = conv2d_backward(cache.conv_inputs[i], model.tensors.get(p + ".w"), pre, spec.conv_layers[i].stride, true,
                           false)
               .input;
  }
  result.gradient = std::move(grad);
  return result;
}

}  // namespace azoo
