#include "spec.hpp"

#include "error.hpp"
#include "ops.hpp"

namespace azoo {

std::string_view to_string(HeadKind head) noexcept {
  switch (head) {
    case HeadKind::Q: return "Q";
    case HeadKind::Dueling: return "Dueling";
    case HeadKind::C51: return "C51";
    case HeadKind::ActorCritic: return "ActorCritic";
  }
  return "Q";
}

HeadKind parse_head_kind(std::string_view text) {
  for (HeadKind h : {HeadKind::Q, HeadKind::Dueling, HeadKind::C51, HeadKind::ActorCritic})
    if (loose_equal(to_string(h), text)) return h;
  fail(ErrorKind::Config, "unknown head kind '" + std::string(text) + "'");
}

std::vector<double> C51Params::support() const {
  std::vector<double> z(static_cast<std::size_t>(n_atoms));
  const double step = n_atoms > 1 ? (static_cast<double>(v_max) - v_min) / (n_atoms - 1) : 0.0;
  for (int i = 0; i < n_atoms; ++i) z[static_cast<std::size_t>(i)] = v_min + step * i;
  return z;
}

void NetworkSpec::check() const {
  if (conv_layers.empty()) fail(ErrorKind::SpecInconsistent, "network needs at least one conv layer");
  int size = kInputSize;
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const auto& l = conv_layers[i];
    if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1)
      fail(ErrorKind::SpecInconsistent, "conv" + std::to_string(i + 1) + " has non-positive parameters");
    if (size < l.kernel)
      fail(ErrorKind::SpecInconsistent, "conv" + std::to_string(i + 1) + " kernel exceeds its input size");
    size = conv_output_size(size, l.kernel, l.stride);
  }
  if (fc_width < 1) fail(ErrorKind::SpecInconsistent, "fc_width must be positive");
  if (n_actions < 1) fail(ErrorKind::SpecInconsistent, "n_actions must be positive");
  if (head == HeadKind::C51) {
    if (!c51) fail(ErrorKind::SpecInconsistent, "C51 head requires c51 parameters");
    if (c51->n_atoms < 2 || !(c51->v_max > c51->v_min))
      fail(ErrorKind::SpecInconsistent, "C51 parameters need n_atoms >= 2 and v_max > v_min");
  } else if (c51) {
    fail(ErrorKind::SpecInconsistent, "c51 parameters present on a non-C51 head");
  }
}

std::vector<int> NetworkSpec::conv_output_sizes() const {
  std::vector<int> sizes;
  int size = kInputSize;
  for (const auto& l : conv_layers) {
    size = conv_output_size(size, l.kernel, l.stride);
    sizes.push_back(size);
  }
  return sizes;
}

Shape NetworkSpec::conv_output_shape(std::size_t layer) const {
  const auto sizes = conv_output_sizes();
  const auto s = static_cast<std::size_t>(sizes.at(layer));
  return {static_cast<std::size_t>(conv_layers.at(layer).out_channels), s, s};
}

std::size_t NetworkSpec::flat_size() const { return shape_size(conv_output_shape(conv_layers.size() - 1)); }

std::size_t NetworkSpec::head_raw_size() const {
  const auto a = static_cast<std::size_t>(n_actions);
  switch (head) {
    case HeadKind::Q: return a;
    case HeadKind::Dueling: return a + 1;
    case HeadKind::C51: return a * static_cast<std::size_t>(c51 ? c51->n_atoms : 0);
    case HeadKind::ActorCritic: return a + 1;
  }
  return a;
}

NetworkSpec make_spec(HeadKind head, int n_actions) {
  NetworkSpec spec;
  spec.head = head;
  spec.n_actions = n_actions;
  if (head == HeadKind::C51) spec.c51 = C51Params{};
  return spec;
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const NetworkSpec& spec) {
  std::vector<std::pair<std::string, Shape>> layout;
  std::size_t in_ch = NetworkSpec::kInputChannels;
  for (std::size_t i = 0; i < spec.conv_layers.size(); ++i) {
    const auto& l = spec.conv_layers[i];
    const auto o = static_cast<std::size_t>(l.out_channels), k = static_cast<std::size_t>(l.kernel);
    const std::string p = "conv" + std::to_string(i + 1);
    layout.emplace_back(p + ".w", Shape{o, in_ch, k, k});
    layout.emplace_back(p + ".b", Shape{o});
    in_ch = o;
  }
  const auto fc = static_cast<std::size_t>(spec.fc_width);
  const auto a = static_cast<std::size_t>(spec.n_actions);
  layout.emplace_back("fc.w", Shape{fc, spec.flat_size()});
  layout.emplace_back("fc.b", Shape{fc});
  switch (spec.head) {
    case HeadKind::Q:
      layout.emplace_back("head.w", Shape{a, fc});
      layout.emplace_back("head.b", Shape{a});
      break;
    case HeadKind::Dueling:
      layout.emplace_back("head.value.w", Shape{1, fc});
      layout.emplace_back("head.value.b", Shape{1});
      layout.emplace_back("head.adv.w", Shape{a, fc});
      layout.emplace_back("head.adv.b", Shape{a});
      break;
    case HeadKind::C51: {
      const auto atoms = static_cast<std::size_t>(spec.c51 ? spec.c51->n_atoms : 1);
      layout.emplace_back("head.w", Shape{a * atoms, fc});
      layout.emplace_back("head.b", Shape{a * atoms});
      break;
    }
    case HeadKind::ActorCritic:
      layout.emplace_back("head.policy.w", Shape{a, fc});
      layout.emplace_back("head.policy.b", Shape{a});
      layout.emplace_back("head.value.w", Shape{1, fc});
      layout.emplace_back("head.value.b", Shape{1});
      break;
  }
  return layout;
}

}  // namespace azoo
