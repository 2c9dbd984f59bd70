#include "jcas/models/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace jcas::models {

std::string to_string(Family f) {
  switch (f) {
    case Family::Standard: return "standard";
    case Family::DomainIndependent: return "domain_independent";
    case Family::DomainAdaptation: return "domain_adaptation";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "standard") return Family::Standard;
  if (s == "domain_independent" || s == "indep") return Family::DomainIndependent;
  if (s == "domain_adaptation" || s == "adapt") return Family::DomainAdaptation;
  throw ConfigError("unknown model family '" + s + "'");
}

SearchSpace SearchSpace::paper(std::size_t input_channels) {
  SearchSpace s;
  s.first_filters = {static_cast<long>(input_channels), std::max<long>(24, static_cast<long>(input_channels))};
  return s;
}

SearchSpace SearchSpace::desk(std::size_t input_channels) {
  SearchSpace s = paper(input_channels);
  s.first_kernel = {3, 12};
  s.first_pool = {2, 4};
  s.depth = {2, 3};
  s.expansion = {2, 4};
  s.block_reps = {0, 1};
  s.block_pool = {2, 4};
  s.final_kernel = {2, 6};
  s.cls_depth = {1, 2};
  s.cls_width = {16, 128};
  s.attn_a_kernel = {3, 12};
  s.attn_b_pool = {2, 4};
  s.attn_b_stride = {2, 4};
  s.attn_b_depth = {1, 2};
  s.attn_b_width = {16, 128};
  s.decoder_kernel = {3, 9};
  return s;
}

void SearchSpace::validate() const {
  auto check = [](const char* name, long lo, long hi, long min_lo) {
    if (lo > hi || lo < min_lo) throw ConfigError(fmt::format("search interval {} = [{}, {}] is invalid", name, lo, hi));
  };
  check("first_filters", first_filters.lo, first_filters.hi, 1);
  check("first_kernel", first_kernel.lo, first_kernel.hi, 1);
  check("first_pool", first_pool.lo, first_pool.hi, 1);
  check("depth", depth.lo, depth.hi, 1);
  check("expansion", expansion.lo, expansion.hi, 1);
  check("residual", residual.lo, residual.hi, 0);
  check("block_reps", block_reps.lo, block_reps.hi, 0);
  check("block_pool", block_pool.lo, block_pool.hi, 1);
  check("final_kernel", final_kernel.lo, final_kernel.hi, 1);
  check("cls_depth", cls_depth.lo, cls_depth.hi, 1);
  check("cls_width", cls_width.lo, cls_width.hi, 1);
  check("attn_a_kernel", attn_a_kernel.lo, attn_a_kernel.hi, 1);
  check("attn_b_pool", attn_b_pool.lo, attn_b_pool.hi, 1);
  check("attn_b_stride", attn_b_stride.lo, attn_b_stride.hi, 1);
  check("attn_b_depth", attn_b_depth.lo, attn_b_depth.hi, 1);
  check("attn_b_width", attn_b_width.lo, attn_b_width.hi, 1);
  check("decoder_kernel", decoder_kernel.lo, decoder_kernel.hi, 1);
  check("batchnorm", batchnorm.lo, batchnorm.hi, 0);
  if (residual.hi > 1 || batchnorm.hi > 1) throw ConfigError("binary intervals must lie in {0, 1}");
  if (!(se_rate.lo > 0.0 && se_rate.lo <= se_rate.hi && se_rate.hi <= 1.0)) {
    throw ConfigError("se_rate interval must lie in (0, 1]");
  }
}

void ModelConfig::validate() const {
  auto hw_ok = [](const Hw& v) { return v.h >= 1 && v.w >= 1; };
  if (classes < 2) throw ConfigError("need at least two classes");
  if (input_b < 1 || input_t < 1 || input_a < 1) throw ConfigError("input dims must be >= 1");
  if (first_filters < 1) throw ConfigError("first_filters must be >= 1");
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (expansion < 1) throw ConfigError("expansion must be >= 1");
  if (!(se_rate > 0.0 && se_rate <= 1.0)) throw ConfigError("se_rate must lie in (0, 1]");
  if (cls_widths.empty()) throw ConfigError("classifier needs at least one hidden layer");
  if (attn_b_widths.empty()) throw ConfigError("attention B needs at least one hidden layer");
  for (std::size_t w : cls_widths)
    if (w < 1) throw ConfigError("classifier width must be >= 1");
  for (std::size_t w : attn_b_widths)
    if (w < 1) throw ConfigError("attention B width must be >= 1");
  for (const Hw* v : {&first_kernel, &first_pool, &block_pool, &final_kernel, &attn_a_kernel, &attn_b_pool,
                      &attn_b_stride, &decoder_kernel1, &decoder_kernel2})
    if (!hw_ok(*v)) throw ConfigError("window sizes must be >= 1");
  if (depthwise_kernel < 1) throw ConfigError("depthwise_kernel must be >= 1");
}

bool ModelConfig::within(const SearchSpace& s, std::string* why) const {
  std::string bad;
  auto in = [&](const char* name, const IntRange& r, long v) {
    if (bad.empty() && !r.contains(v)) bad = fmt::format("{} = {} outside [{}, {}]", name, v, r.lo, r.hi);
  };
  auto in2 = [&](const char* name, const IntRange& r, const Hw& v) {
    in(name, r, static_cast<long>(v.h));
    in(name, r, static_cast<long>(v.w));
  };
  in("first_filters", s.first_filters, static_cast<long>(first_filters));
  in2("first_kernel", s.first_kernel, first_kernel);
  in2("first_pool", s.first_pool, first_pool);
  in("depth", s.depth, static_cast<long>(depth));
  in("expansion", s.expansion, static_cast<long>(expansion));
  in("residual", s.residual, residual ? 1 : 0);
  if (bad.empty() && !s.se_rate.contains(se_rate)) bad = fmt::format("se_rate = {} outside interval", se_rate);
  in("block_reps", s.block_reps, static_cast<long>(block_reps));
  in2("block_pool", s.block_pool, block_pool);
  in2("final_kernel", s.final_kernel, final_kernel);
  in("cls_depth", s.cls_depth, static_cast<long>(cls_widths.size()));
  for (std::size_t w : cls_widths) in("cls_width", s.cls_width, static_cast<long>(w));
  in2("attn_a_kernel", s.attn_a_kernel, attn_a_kernel);
  in2("attn_b_pool", s.attn_b_pool, attn_b_pool);
  in2("attn_b_stride", s.attn_b_stride, attn_b_stride);
  in("attn_b_depth", s.attn_b_depth, static_cast<long>(attn_b_widths.size()));
  for (std::size_t w : attn_b_widths) in("attn_b_width", s.attn_b_width, static_cast<long>(w));
  in2("decoder_kernel", s.decoder_kernel, decoder_kernel1);
  in2("decoder_kernel", s.decoder_kernel, decoder_kernel2);
  in("batchnorm", s.batchnorm, batchnorm ? 1 : 0);
  if (why) *why = bad;
  return bad.empty();
}

ModelConfig ModelConfig::reference(Family f, std::size_t b, std::size_t t, std::size_t a) {
  ModelConfig c;
  c.family = f;
  c.input_b = b;
  c.input_t = t;
  c.input_a = a;
  c.first_filters = a;
  c.first_kernel = {5, 5};
  c.first_pool = {2, 2};
  c.depth = 2;
  c.expansion = 2;
  c.residual = true;
  c.se_rate = 0.25;
  c.block_reps = 0;
  c.block_pool = {2, 2};
  c.final_kernel = {3, 3};
  c.cls_widths = {32};
  c.attn_a_kernel = {5, 5};
  c.attn_b_pool = {2, 2};
  c.attn_b_stride = {2, 2};
  c.attn_b_widths = {32};
  c.decoder_kernel1 = {3, 3};
  c.decoder_kernel2 = {3, 3};
  c.batchnorm = false;
  return c;
}

namespace {

std::string hw_text(const Hw& v) { return fmt::format("{}x{}", v.h, v.w); }

std::string list_text(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::size_t parse_size(const std::string& s) {
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing characters");
  return static_cast<std::size_t>(v);
}

Hw parse_hw(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw std::invalid_argument("expected HxW");
  return {parse_size(s.substr(0, x)), parse_size(s.substr(x + 1))};
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(item));
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw std::invalid_argument("expected 0 or 1");
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string ModelConfig::to_text() const {
  std::string s;
  auto kv = [&](const char* k, const std::string& v) { s += fmt::format("{} = {}\n", k, v); };
  kv("family", to_string(family));
  kv("classes", std::to_string(classes));
  kv("input_b", std::to_string(input_b));
  kv("input_t", std::to_string(input_t));
  kv("input_a", std::to_string(input_a));
  kv("first_filters", std::to_string(first_filters));
  kv("first_kernel", hw_text(first_kernel));
  kv("first_pool", hw_text(first_pool));
  kv("depth", std::to_string(depth));
  kv("expansion", std::to_string(expansion));
  kv("residual", residual ? "1" : "0");
  kv("se_rate", fmt::format("{:.17g}", se_rate));
  kv("block_reps", std::to_string(block_reps));
  kv("block_pool", hw_text(block_pool));
  kv("final_kernel", hw_text(final_kernel));
  kv("cls_widths", list_text(cls_widths));
  kv("attn_a_kernel", hw_text(attn_a_kernel));
  kv("attn_b_pool", hw_text(attn_b_pool));
  kv("attn_b_stride", hw_text(attn_b_stride));
  kv("attn_b_widths", list_text(attn_b_widths));
  kv("decoder_kernel1", hw_text(decoder_kernel1));
  kv("decoder_kernel2", hw_text(decoder_kernel2));
  kv("batchnorm", batchnorm ? "1" : "0");
  kv("depthwise_kernel", std::to_string(depthwise_kernel));
  return s;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  const std::map<std::string, std::function<void(const std::string&)>> setters{
      {"family", [&](const std::string& v) { c.family = family_from_string(v); }},
      {"classes", [&](const std::string& v) { c.classes = parse_size(v); }},
      {"input_b", [&](const std::string& v) { c.input_b = parse_size(v); }},
      {"input_t", [&](const std::string& v) { c.input_t = parse_size(v); }},
      {"input_a", [&](const std::string& v) { c.input_a = parse_size(v); }},
      {"first_filters", [&](const std::string& v) { c.first_filters = parse_size(v); }},
      {"first_kernel", [&](const std::string& v) { c.first_kernel = parse_hw(v); }},
      {"first_pool", [&](const std::string& v) { c.first_pool = parse_hw(v); }},
      {"depth", [&](const std::string& v) { c.depth = parse_size(v); }},
      {"expansion", [&](const std::string& v) { c.expansion = parse_size(v); }},
      {"residual", [&](const std::string& v) { c.residual = parse_bool(v); }},
      {"se_rate", [&](const std::string& v) { c.se_rate = std::stod(v); }},
      {"block_reps", [&](const std::string& v) { c.block_reps = parse_size(v); }},
      {"block_pool", [&](const std::string& v) { c.block_pool = parse_hw(v); }},
      {"final_kernel", [&](const std::string& v) { c.final_kernel = parse_hw(v); }},
      {"cls_widths", [&](const std::string& v) { c.cls_widths = parse_list(v); }},
      {"attn_a_kernel", [&](const std::string& v) { c.attn_a_kernel = parse_hw(v); }},
      {"attn_b_pool", [&](const std::string& v) { c.attn_b_pool = parse_hw(v); }},
      {"attn_b_stride", [&](const std::string& v) { c.attn_b_stride = parse_hw(v); }},
      {"attn_b_widths", [&](const std::string& v) { c.attn_b_widths = parse_list(v); }},
      {"decoder_kernel1", [&](const std::string& v) { c.decoder_kernel1 = parse_hw(v); }},
      {"decoder_kernel2", [&](const std::string& v) { c.decoder_kernel2 = parse_hw(v); }},
      {"batchnorm", [&](const std::string& v) { c.batchnorm = parse_bool(v); }},
      {"depthwise_kernel", [&](const std::string& v) { c.depthwise_kernel = parse_size(v); }},
  };
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected 'name = value'", lineno));
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", lineno, key));
    try {
      it->second(val);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("line {}: bad value '{}' for {} ({})", lineno, val, key, e.what()));
    }
  }
  c.validate();
  return c;
}

void write_config(const std::string& path, const ModelConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << cfg.to_text();
}

ModelConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ModelConfig::from_text(ss.str());
}

}  // namespace jcas::models
