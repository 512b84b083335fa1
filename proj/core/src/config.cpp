#include "partshot/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "partshot/errors.hpp"
#include "partshot/hash.hpp"

namespace partshot {
namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& v) {
  const std::string t = trim(v);
  if (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') || (t.front() == '\'' && t.back() == '\''))) {
    return t.substr(1, t.size() - 2);
  }
  return t;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eE") == std::string::npos && s.find("inf") == std::string::npos &&
      s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = unquote(v);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  const std::string t = unquote(v);
  long long out = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  const std::string t = unquote(v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("key '" + key + "' expects an unsigned integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = unquote(v);
  if (t == "true") return true;
  if (t == "false") return false;
  throw ConfigError("key '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') throw ConfigError("key '" + key + "' expects a [a, b] list");
  std::vector<std::string> out;
  std::stringstream ss(t.substr(1, t.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

struct Binding {
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <class T>
Binding int_binding(const std::string& key, T& field) {
  return {[&field] { return std::to_string(field); },
          [&field, key](const std::string& v) { field = static_cast<T>(parse_int(key, v)); }};
}

Binding u64_binding(const std::string& key, std::uint64_t& field) {
  return {[&field] { return std::to_string(field); }, [&field, key](const std::string& v) { field = parse_u64(key, v); }};
}

Binding double_binding(const std::string& key, double& field) {
  return {[&field] { return format_double(field); },
          [&field, key](const std::string& v) { field = parse_double(key, v); }};
}

Binding bool_binding(const std::string& key, bool& field) {
  return {[&field] { return field ? std::string("true") : std::string("false"); },
          [&field, key](const std::string& v) { field = parse_bool(key, v); }};
}

Binding string_binding(std::string& field) {
  return {[&field] { return "\"" + field + "\""; }, [&field](const std::string& v) { field = unquote(v); }};
}

template <class E>
Binding enum_binding(E& field, std::function<std::string(E)> show, std::function<E(const std::string&)> read) {
  return {[&field, show] { return "\"" + show(field) + "\""; },
          [&field, read](const std::string& v) { field = read(unquote(v)); }};
}

Binding range_binding(const std::string& key, double& lo, double& hi) {
  return {[&lo, &hi] { return "[" + format_double(lo) + ", " + format_double(hi) + "]"; },
          [&lo, &hi, key](const std::string& v) {
            const auto items = parse_list(key, v);
            if (items.size() != 2) throw ConfigError("key '" + key + "' expects two values");
            lo = parse_double(key, items[0]);
            hi = parse_double(key, items[1]);
          }};
}

// Ordered key table; the order defines the canonical text form.
std::vector<std::pair<std::string, Binding>> bindings(RunConfig& c) {
  std::vector<std::pair<std::string, Binding>> b;
  auto add = [&](const std::string& key, Binding binding) { b.emplace_back(key, std::move(binding)); };
  add("preset", string_binding(c.preset));
  add("global_seed", u64_binding("global_seed", c.global_seed));

  auto& d = c.data;
  add("data.root", string_binding(d.root));
  add("data.load_side", int_binding("data.load_side", d.load_side));
  add("data.image_side", {[&c] { return std::to_string(c.encoder.input_side); },
                          [&c](const std::string& v) {
                            c.encoder.input_side = static_cast<int>(parse_int("data.image_side", v));
                            c.data.views.output_side = c.encoder.input_side;
                          }});
  add("data.n_parts", {[&c] { return std::to_string(c.pdn.n_parts); },
                       [&c](const std::string& v) {
                         c.pdn.n_parts = static_cast<int>(parse_int("data.n_parts", v));
                         c.data.views.n_parts = c.pdn.n_parts;
                       }});
  add("data.part_scale", range_binding("data.part_scale", d.views.part_scale.lo, d.views.part_scale.hi));
  add("data.global_scale", range_binding("data.global_scale", d.views.global_scale.lo, d.views.global_scale.hi));
  add("data.split", {[&d] {
                       return "[" + std::to_string(d.split[0]) + ", " + std::to_string(d.split[1]) + ", " +
                              std::to_string(d.split[2]) + "]";
                     },
                     [&d](const std::string& v) {
                       const auto items = parse_list("data.split", v);
                       if (items.size() != 3) throw ConfigError("data.split expects [base, val, novel]");
                       for (int i = 0; i < 3; ++i) d.split[i] = static_cast<int>(parse_int("data.split", items[i]));
                     }});
  add("data.split_seed", u64_binding("data.split_seed", d.split_seed));
  add("data.skip_undecodable", bool_binding("data.skip_undecodable", d.skip_undecodable));
  auto& a = d.views.aug;
  add("data.aug.flip", bool_binding("data.aug.flip", a.flip));
  add("data.aug.color_jitter", bool_binding("data.aug.color_jitter", a.color_jitter));
  add("data.aug.jitter_probability", double_binding("data.aug.jitter_probability", a.jitter_probability));
  add("data.aug.brightness", double_binding("data.aug.brightness", a.brightness));
  add("data.aug.contrast", double_binding("data.aug.contrast", a.contrast));
  add("data.aug.saturation", double_binding("data.aug.saturation", a.saturation));
  add("data.aug.hue", double_binding("data.aug.hue", a.hue));
  add("data.aug.blur", bool_binding("data.aug.blur", a.blur));
  add("data.aug.blur_probability", double_binding("data.aug.blur_probability", a.blur_probability));
  add("data.aug.blur_sigma", range_binding("data.aug.blur_sigma", a.blur_sigma_lo, a.blur_sigma_hi));

  auto& e = c.encoder;
  add("encoder.arch", string_binding(e.arch));
  add("encoder.channels", int_binding("encoder.channels", e.channels));
  add("encoder.blocks", int_binding("encoder.blocks", e.blocks));
  add("encoder.pooled_blocks", int_binding("encoder.pooled_blocks", e.pooled_blocks));
  add("encoder.groups", int_binding("encoder.groups", e.groups));
  add("encoder.head_hidden", int_binding("encoder.head_hidden", e.head_hidden));
  add("encoder.embed_dim", int_binding("encoder.embed_dim", e.embed_dim));

  auto& p = c.pdn;
  add("pdn.temperature", double_binding("pdn.temperature", p.temperature));
  add("pdn.momentum", double_binding("pdn.momentum", p.momentum));
  add("pdn.queue_capacity", int_binding("pdn.queue_capacity", p.queue_capacity));
  add("pdn.learning_rate", double_binding("pdn.learning_rate", p.learning_rate));
  add("pdn.sgd_momentum", double_binding("pdn.sgd_momentum", p.sgd_momentum));
  add("pdn.weight_decay", double_binding("pdn.weight_decay", p.weight_decay));
  add("pdn.epochs", int_binding("pdn.epochs", p.epochs));
  add("pdn.batch_size", int_binding("pdn.batch_size", p.batch_size));
  add("pdn.selection", enum_binding<SelectionMode>(p.selection, [](SelectionMode m) { return to_string(m); },
                                                   selection_mode_from_string));
  add("pdn.positive", enum_binding<PositiveEncoder>(p.positive, [](PositiveEncoder m) { return to_string(m); },
                                                    positive_encoder_from_string));

  auto& n = c.pan;
  add("pan.enabled", bool_binding("pan.enabled", n.enabled));
  add("pan.n_a", int_binding("pan.n_a", n.n_a));
  add("pan.epsilon_1shot", double_binding("pan.epsilon_1shot", n.epsilon_1shot));
  add("pan.epsilon_5shot", double_binding("pan.epsilon_5shot", n.epsilon_5shot));
  add("pan.lambda", double_binding("pan.lambda", n.lambda));
  add("pan.cam_mode", enum_binding<CamMode>(n.cam_mode, [](CamMode m) { return to_string(m); }, cam_mode_from_string));
  add("pan.kl_direction", enum_binding<KlDirection>(n.kl_direction, [](KlDirection m) { return to_string(m); },
                                                    kl_direction_from_string));
  add("pan.initial_steps", int_binding("pan.initial_steps", n.initial_steps));
  add("pan.refine_steps", int_binding("pan.refine_steps", n.refine_steps));
  add("pan.learning_rate", double_binding("pan.learning_rate", n.learning_rate));
  add("pan.weight_decay", double_binding("pan.weight_decay", n.weight_decay));
  add("pan.init_stddev", double_binding("pan.init_stddev", n.init_stddev));

  auto& v = c.eval;
  add("eval.way", int_binding("eval.way", v.way));
  add("eval.shot", int_binding("eval.shot", v.shot));
  add("eval.query_per_class", int_binding("eval.query_per_class", v.query_per_class));
  add("eval.episodes", int_binding("eval.episodes", v.episodes));
  return b;
}

}  // namespace

RunConfig RunConfig::from_preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.data.views.output_side = c.encoder.input_side;
  c.data.views.n_parts = c.pdn.n_parts;
  if (name == "desk") {
    c.pdn.queue_capacity = 1024;
    c.pdn.batch_size = 64;
    c.pdn.learning_rate = 0.06;
    c.pdn.momentum = 0.99;
    c.pdn.epochs = 40;
    c.encoder.channels = 32;
  } else if (name == "paper-mini") {
    c.pdn.queue_capacity = 1024;
    c.pdn.learning_rate = 0.015;
    c.pdn.momentum = 0.999;
    c.pdn.epochs = 200;
    c.data.split = {64, 16, 20};
  } else if (name == "paper-tiered") {
    c.pdn.queue_capacity = 10240;
    c.pdn.learning_rate = 0.03;
    c.pdn.momentum = 0.999;
    c.pdn.epochs = 200;
    c.data.split = {351, 97, 160};
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected desk, paper-mini or paper-tiered)");
  }
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (auto& [name, binding] : bindings(*this)) {
    if (name == key) {
      try {
        binding.set(value);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError("key '" + key + "': " + e.what());
      }
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
  auto& self = const_cast<RunConfig&>(*this);
  for (auto& [name, binding] : bindings(self)) {
    if (name == key) return binding.get();
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    set(section.empty() ? key : section + "." + key, value);
  }
}

std::string RunConfig::to_text() const {
  auto& self = const_cast<RunConfig&>(*this);
  std::ostringstream os;
  std::string section;
  for (auto& [name, binding] : bindings(self)) {
    const auto dot = name.find('.');
    const std::string sec = dot == std::string::npos ? "" : name.substr(0, dot);
    const std::string key = dot == std::string::npos ? name : name.substr(dot + 1);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << key << " = " << binding.get() << "\n";
  }
  return os.str();
}

std::string RunConfig::hash() const { return to_hex(fnv1a(to_text())); }

std::string RunConfig::training_hash() const {
  auto& self = const_cast<RunConfig&>(*this);
  Fnv1a h;
  for (auto& [name, binding] : bindings(self)) {
    const bool training = name == "global_seed" || name.rfind("data.", 0) == 0 || name.rfind("encoder.", 0) == 0 ||
                          name.rfind("pdn.", 0) == 0;
    if (!training || name == "data.root") continue;
    h.update(name);
    h.update("=");
    h.update(binding.get());
    h.update("\n");
  }
  return to_hex(h.digest());
}

std::vector<std::string> RunConfig::keys() {
  RunConfig c;
  std::vector<std::string> out;
  for (auto& [name, _] : bindings(c)) out.push_back(name);
  return out;
}

RunConfig load_config(const std::filesystem::path& path, const std::string& fallback_preset) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  std::string preset = fallback_preset;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    line = trim(line);
    if (line.rfind('[', 0) == 0) break;
    const auto eq = line.find('=');
    if (eq != std::string::npos && trim(line.substr(0, eq)) == "preset") preset = unquote(line.substr(eq + 1));
  }
  RunConfig c = RunConfig::from_preset(preset);
  c.apply_text(text);
  return c;
}

}  // namespace partshot
